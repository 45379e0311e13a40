// Command-line front end: loads a JSON job file describing a locally
// anisotropic geometry (plus optional connection, matter-field, and map
// sections), runs the requested computation or identity suite, and emits a
// deterministic structured report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aniso/clifford.hpp"
#include "aniso/curvature.hpp"
#include "aniso/errors.hpp"
#include "aniso/fields.hpp"
#include "aniso/namap.hpp"
#include "aniso/specio.hpp"
#include "aniso/spinor.hpp"

using namespace aniso;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Small helpers

std::vector<double> jetVals(const std::vector<Jet>& js) {
    std::vector<double> out(js.size());
    for (std::size_t k = 0; k < js.size(); ++k) out[k] = js[k].value();
    return out;
}

ordered_json nestValues(const std::vector<double>& vals, const std::vector<int>& dims,
                        std::size_t level, std::size_t& cursor) {
    ordered_json arr = ordered_json::array();
    if (level + 1 == dims.size()) {
        for (int k = 0; k < dims[level]; ++k) arr.push_back(vals[cursor++]);
    } else {
        for (int k = 0; k < dims[level]; ++k) arr.push_back(nestValues(vals, dims, level + 1, cursor));
    }
    return arr;
}

ordered_json tensorNode(const std::vector<double>& vals, const std::vector<int>& dims,
                        const std::vector<std::string>& labels) {
    ordered_json node;
    node["indices"] = labels;
    node["dims"] = dims;
    std::size_t cursor = 0;
    node["values"] = dims.empty() ? ordered_json(vals.empty() ? 0.0 : vals[0])
                                  : nestValues(vals, dims, 0, cursor);
    return node;
}

struct Tracker {
    double max = 0.0;
    Point arg;
    void feed(double v, const Point& u) {
        if (std::isnan(max)) return;
        if (std::isnan(v) || v > max) {
            max = v;
            arg = u;
        }
    }
};

struct CheckTable {
    ordered_json arr = ordered_json::array();
    bool all = true;
    void add(const std::string& name, double max, const Point& argmax, double tol) {
        bool pass = std::isfinite(max) && max <= tol;
        ordered_json c;
        c["name"] = name;
        c["max"] = max;
        c["argmax_point"] = argmax;
        c["tolerance"] = tol;
        c["pass"] = pass;
        arr.push_back(std::move(c));
        all = all && pass;
    }
    void add(const std::string& name, const Tracker& t, double tol) { add(name, t.max, t.arg, tol); }
};

// Eigenvalue signs of a symmetric matrix by cyclic Jacobi rotations.
BlockSignature detectSignature(std::vector<double> A, int dim) {
    for (int sweep = 0; sweep < 80; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) off = std::max(off, std::fabs(A[i * dim + j]));
        if (off < 1e-14) break;
        for (int p = 0; p < dim; ++p)
            for (int q = p + 1; q < dim; ++q) {
                double apq = A[p * dim + q];
                if (std::fabs(apq) < 1e-15) continue;
                double theta = 0.5 * std::atan2(2.0 * apq, A[q * dim + q] - A[p * dim + p]);
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < dim; ++k) {
                    double akp = A[k * dim + p], akq = A[k * dim + q];
                    A[k * dim + p] = c * akp - s * akq;
                    A[k * dim + q] = s * akp + c * akq;
                }
                for (int k = 0; k < dim; ++k) {
                    double apk = A[p * dim + k], aqk = A[q * dim + k];
                    A[p * dim + k] = c * apk - s * aqk;
                    A[q * dim + k] = s * apk + c * aqk;
                }
            }
    }
    BlockSignature bs;
    for (int i = 0; i < dim; ++i) {
        double ev = A[i * dim + i];
        if (std::fabs(ev) < 1e-9) throw DomainError("metric block is numerically degenerate");
        (ev > 0 ? bs.p : bs.q) += 1;
    }
    return bs;
}

Point parseAtPoint(const std::string& text, const Shape& shape) {
    Point u(shape.d(), 0.0);
    std::vector<bool> seen(shape.d(), false);
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? text.size() : comma + 1;
        if (tok.empty()) throw SchemaError("--at: empty assignment");
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos) throw SchemaError("--at: expected name=value in \"" + tok + "\"");
        std::string name = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (name.size() < 2 || (name[0] != 'x' && name[0] != 'y'))
            throw SchemaError("--at: unknown coordinate \"" + name + "\"");
        int idx = 0;
        for (std::size_t k = 1; k < name.size(); ++k) {
            if (!std::isdigit(static_cast<unsigned char>(name[k])))
                throw SchemaError("--at: unknown coordinate \"" + name + "\"");
            idx = idx * 10 + (name[k] - '0');
        }
        int limit = name[0] == 'x' ? shape.n : shape.m;
        if (idx < 1 || idx > limit) throw SchemaError("--at: coordinate \"" + name + "\" out of range");
        int slot = (name[0] == 'x' ? 0 : shape.n) + idx - 1;
        if (seen[slot]) throw SchemaError("--at: coordinate \"" + name + "\" assigned twice");
        seen[slot] = true;
        char* end = nullptr;
        u[slot] = std::strtod(val.c_str(), &end);
        if (end == val.c_str() || *end != '\0')
            throw SchemaError("--at: bad numeric value \"" + val + "\"");
    }
    return u;
}

std::vector<Jet> addJetArrays(const std::vector<Jet>& a, const std::vector<Jet>& b) {
    std::vector<Jet> out(a.size(), Jet(1, 0));
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
    return out;
}

// ---------------------------------------------------------------------------
// Command options

struct Options {
    std::string command;
    std::string specPath;
    std::string at;
    std::string connOverride;
    std::string format = "json";
    std::string outPath;
    bool tolSet = false;
    double tol = 0.0;
    bool seedSet = false;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Command payloads.  Each fills `results` and appends to `checks`.

ordered_json pointJson(const Point& u) {
    ordered_json arr = ordered_json::array();
    for (double v : u) arr.push_back(v);
    return arr;
}

ordered_json cmdValidate(const SpecFile& spec, const Geometry& geom,
                         const std::vector<Point>& pts) {
    ordered_json res;
    res["valid"] = true;
    res["n"] = spec.geometry.shape.n;
    res["m"] = spec.geometry.shape.m;
    res["total_dim"] = spec.geometry.shape.d();
    res["metric_form"] = spec.geometry.form == MetricForm::Blocks       ? "blocks"
                         : spec.geometry.form == MetricForm::Lagrangian ? "lagrangian"
                                                                        : "full_metric";
    res["underlined"] = spec.hasUnderlined;
    res["field_count"] = static_cast<int>(spec.fields.size());
    res["namap_present"] = spec.namap.present;
    if (spec.namap.present) res["namap_class"] = spec.namap.cls;
    res["point_count"] = static_cast<int>(pts.size());
    (void)geom;
    return res;
}

void structureChecks(const SpecFile& spec, const Geometry& geom, const std::vector<Point>& pts,
                     CheckTable& checks) {
    const Shape shape = geom.shape();
    Tracker sym, dual, compat;
    for (const Point& u : pts) {
        std::vector<Jet> g = geom.metricH(u, 0), h = geom.metricV(u, 0);
        for (int i = 0; i < shape.n; ++i)
            for (int j = 0; j < shape.n; ++j)
                sym.feed(std::fabs(g[i * shape.n + j].value() - g[j * shape.n + i].value()), u);
        for (int a = 0; a < shape.m; ++a)
            for (int b = 0; b < shape.m; ++b)
                sym.feed(std::fabs(h[a * shape.m + b].value() - h[b * shape.m + a].value()), u);
        FrameStructure fs = frameStructure(geom, u);
        int d = shape.d();
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += fs.frame[r * d + k] * fs.coframe[c * d + k];
                dual.feed(std::fabs(acc - (r == c ? 1.0 : 0.0)), u);
            }
        if (spec.geometry.form == MetricForm::FullMetric)
            compat.feed(compatibilityResidual(geom, spec.geometry.G, u), u);
    }
    checks.add("metric-block-symmetry", sym, 1e-12);
    checks.add("frame-coframe-duality", dual, 1e-12);
    if (spec.geometry.form == MetricForm::FullMetric)
        checks.add("distribution-compatibility", compat, 1e-10);
}

ordered_json cmdGeometry(const SpecFile& spec, const Geometry& geom, const std::vector<Point>& pts,
                         CheckTable& checks) {
    const Shape shape = geom.shape();
    int n = shape.n, m = shape.m, d = shape.d();
    ordered_json per = ordered_json::array();
    for (const Point& u : pts) {
        FrameStructure fs = frameStructure(geom, u);
        ordered_json e;
        e["point"] = pointJson(u);
        e["g"] = tensorNode(jetVals(geom.metricH(u, 0)), {n, n}, {"base_row", "base_col"});
        e["h"] = tensorNode(jetVals(geom.metricV(u, 0)), {m, m}, {"fiber_row", "fiber_col"});
        e["N"] = tensorNode(jetVals(geom.nconn(u, 0)), {n, m}, {"base", "fiber"});
        e["frame"] = tensorNode(fs.frame, {d, d}, {"frame_index", "coordinate"});
        e["coframe"] = tensorNode(fs.coframe, {d, d}, {"coframe_index", "coordinate"});
        e["anholonomy"] = tensorNode(fs.w, {d, d, d}, {"upper", "lower_1", "lower_2"});
        e["distribution_curvature"] =
            tensorNode(fs.omega, {m, n, n}, {"fiber", "base_1", "base_2"});
        per.push_back(std::move(e));
    }
    structureChecks(spec, geom, pts, checks);
    ordered_json res;
    res["per_point"] = std::move(per);
    return res;
}

ordered_json cmdConnection(const DConnection& conn, const std::vector<Point>& pts,
                           CheckTable& checks, double tol) {
    const Shape shape = conn.geometry().shape();
    int n = shape.n, m = shape.m;
    ordered_json per = ordered_json::array();
    Tracker metr;
    for (const Point& u : pts) {
        ConnBlocks b = conn.blocks(u, 0);
        ordered_json e;
        e["point"] = pointJson(u);
        e["Lh"] = tensorNode(jetVals(b.Lh), {n, n, n}, {"upper_base", "lower_base", "dir_base"});
        e["Lv"] = tensorNode(jetVals(b.Lv), {m, m, n}, {"upper_fiber", "lower_fiber", "dir_base"});
        e["Ch"] = tensorNode(jetVals(b.Ch), {n, n, m}, {"upper_base", "lower_base", "dir_fiber"});
        e["Cv"] = tensorNode(jetVals(b.Cv), {m, m, m}, {"upper_fiber", "lower_fiber", "dir_fiber"});
        per.push_back(std::move(e));
        metr.feed(metricityResidual(conn, {u}), u);
    }
    ordered_json res;
    res["kind"] = kindName(conn.kind());
    res["per_point"] = std::move(per);
    if (conn.kind() == ConnKind::Canonical) {
        checks.add("metric-compatibility", metr, tol);
    } else {
        res["metric_compatibility_max"] = metr.max;
        res["metric_compatibility_argmax"] = pointJson(metr.arg);
    }
    return res;
}

ordered_json cmdCurvature(const DConnection& conn, const std::vector<Point>& pts) {
    const Geometry& geom = conn.geometry();
    const Shape shape = geom.shape();
    int n = shape.n, m = shape.m, d = shape.d();
    ordered_json per = ordered_json::array();
    for (const Point& u : pts) {
        TorsionBlocks tb = torsion(conn, u, 0);
        CurvatureBlocks cb = curvatureBlocks(conn, u, 0);
        CurvatureSummary cs = curvatureSummary(conn, u);
        FrameStructure fs = frameStructure(geom, u);
        ordered_json e;
        e["point"] = pointJson(u);
        e["anholonomy"] = tensorNode(fs.w, {d, d, d}, {"upper", "lower_1", "lower_2"});
        e["distribution_curvature"] =
            tensorNode(fs.omega, {m, n, n}, {"fiber", "base_1", "base_2"});
        ordered_json tor;
        tor["Th"] = tensorNode(jetVals(tb.Th), {n, n, n}, {"upper_base", "base_1", "base_2"});
        tor["Tv"] = tensorNode(jetVals(tb.Tv), {m, n, n}, {"upper_fiber", "base_1", "base_2"});
        tor["Ph"] = tensorNode(jetVals(tb.Ph), {n, n, m}, {"upper_base", "base", "fiber"});
        tor["Pv"] = tensorNode(jetVals(tb.Pv), {m, m, n}, {"upper_fiber", "fiber", "base"});
        tor["S"] = tensorNode(jetVals(tb.S), {m, m, m}, {"upper_fiber", "fiber_1", "fiber_2"});
        e["torsion"] = std::move(tor);
        ordered_json cur;
        cur["Rhh"] = tensorNode(jetVals(cb.Rhh), {n, n, n, n},
                                {"upper_base", "lower_base", "dir_1", "dir_2"});
        cur["Rvv"] = tensorNode(jetVals(cb.Rvv), {m, m, n, n},
                                {"upper_fiber", "lower_fiber", "dir_1", "dir_2"});
        cur["Phh"] = tensorNode(jetVals(cb.Phh), {n, n, n, m},
                                {"upper_base", "lower_base", "dir_base", "dir_fiber"});
        cur["Pvv"] = tensorNode(jetVals(cb.Pvv), {m, m, n, m},
                                {"upper_fiber", "lower_fiber", "dir_base", "dir_fiber"});
        cur["Shh"] = tensorNode(jetVals(cb.Shh), {n, n, m, m},
                                {"upper_base", "lower_base", "dir_1", "dir_2"});
        cur["Svv"] = tensorNode(jetVals(cb.Svv), {m, m, m, m},
                                {"upper_fiber", "lower_fiber", "dir_1", "dir_2"});
        e["curvature"] = std::move(cur);
        e["ricci"] = tensorNode(cs.ricci, {d, d}, {"lower_1", "lower_2"});
        e["scalar"] = cs.scalar;
        e["einstein"] = tensorNode(cs.einstein, {d, d}, {"lower_1", "lower_2"});
        e["ricci_tracefree"] = tensorNode(cs.phi, {d, d}, {"lower_1", "lower_2"});
        if (cs.weylDefined)
            e["weyl"] = tensorNode(cs.weyl, {d, d, d, d}, {"upper", "lower", "dir_1", "dir_2"});
        per.push_back(std::move(e));
    }
    ordered_json res;
    res["per_point"] = std::move(per);
    return res;
}

ordered_json cmdCheck(const SpecFile& spec, const DConnection& conn, const std::vector<Point>& pts,
                      std::uint64_t seed, CheckTable& checks, double tol) {
    Tracker commScalar, commVector, cyc1, cyc2, metr;
    for (const Point& u : pts) {
        IdentityReport rep = identityResiduals(conn, {u}, seed);
        commScalar.feed(rep.commutatorScalar, u);
        commVector.feed(rep.commutatorVector, u);
        cyc1.feed(rep.bianchiFirst, u);
        cyc2.feed(rep.bianchiSecond, u);
        metr.feed(metricityResidual(conn, {u}), u);
    }
    checks.add("scalar-commutator-vs-torsion", commScalar, tol);
    checks.add("vector-commutator-vs-curvature", commVector, tol);
    checks.add("curvature-cyclic-identity", cyc1, tol);
    checks.add("derivative-cyclic-identity", cyc2, tol);
    structureChecks(spec, conn.geometry(), pts, checks);
    ordered_json res;
    res["identity_field_seed"] = seed;
    if (conn.kind() == ConnKind::Canonical) {
        checks.add("metric-compatibility", metr, tol);
    } else {
        res["metric_compatibility_max"] = metr.max;
        res["metric_compatibility_argmax"] = pointJson(metr.arg);
    }
    return res;
}

ordered_json epsilonNode(const BlockSignature& bs) {
    EpsilonObject eps = epsilonObjects(bs);
    EpsilonClassRow row = epsilonExpectedClass(bs.n());
    auto variantNode = [](const EpsilonVariant& v) {
        ordered_json o;
        o["vanishes"] = v.vanishes;
        o["rank"] = v.rank;
        o["transpose_sign"] = v.transposeSign;
        o["block_diagonal"] = v.blockDiagonal;
        o["block_off_diagonal"] = v.blockOffDiagonal;
        o["factor_residual"] = v.factorResidual;
        return o;
    };
    bool match = true;
    for (const EpsilonVariant* v : {&eps.plus, &eps.minus}) {
        if (v->vanishes) continue;
        if (v->rank != 1 || v->factorResidual > 1e-9) match = false;
        if (row.symmetric && v->transposeSign != 1) match = false;
        if (row.antisymmetric && v->transposeSign != -1) match = false;
        if (row.blockDiagonal && !v->blockDiagonal) match = false;
        if (row.blockOffDiagonal && !v->blockOffDiagonal) match = false;
    }
    if (bs.n() % 2 == 1 && eps.plus.vanishes == eps.minus.vanishes) match = false;
    ordered_json o;
    o["n"] = bs.n();
    o["residue"] = bs.n() % 8;
    ordered_json exp;
    exp["symmetric"] = row.symmetric;
    exp["antisymmetric"] = row.antisymmetric;
    exp["block_diagonal"] = row.blockDiagonal;
    exp["block_off_diagonal"] = row.blockOffDiagonal;
    o["expected"] = std::move(exp);
    o["plus"] = variantNode(eps.plus);
    o["minus"] = variantNode(eps.minus);
    o["class_match"] = match;
    return o;
}

ordered_json cmdClifford(const Geometry& geom, const std::vector<Point>& pts, CheckTable& checks) {
    const Shape shape = geom.shape();
    const Point& u0 = pts.front();
    BlockSignature hs = detectSignature(jetVals(geom.metricH(u0, 0)), shape.n);
    BlockSignature vs = detectSignature(jetVals(geom.metricV(u0, 0)), shape.m);
    CliffordRep rep = buildSigma(SplitSignature{hs, vs});
    ordered_json res;
    auto blockNode = [](const BlockSignature& bs) {
        AlgebraDescriptor d = classifyClifford(bs.p, bs.q);
        ordered_json o;
        o["p"] = bs.p;
        o["q"] = bs.q;
        o["algebra"] = d.label;
        o["spinor_dim"] = spinorDim(bs.n());
        return o;
    };
    res["base_block"] = blockNode(hs);
    res["fiber_block"] = blockNode(vs);
    double anti = anticommResidual(rep);
    double trace = traceIdentityResidual(rep);
    res["anticommutation_residual"] = anti;
    res["trace_identity_residual"] = trace;
    ordered_json epsn;
    int mismatches = 0;
    if (hs.q == 0) {
        epsn["base"] = epsilonNode(hs);
        if (!epsn["base"]["class_match"].get<bool>()) ++mismatches;
    }
    if (vs.q == 0) {
        epsn["fiber"] = epsilonNode(vs);
        if (!epsn["fiber"]["class_match"].get<bool>()) ++mismatches;
    }
    if (!epsn.empty()) res["epsilon"] = std::move(epsn);
    checks.add("generator-anticommutation", anti, u0, 1e-12);
    checks.add("generator-trace-identity", trace, u0, 1e-12);
    if (hs.q == 0 || vs.q == 0)
        checks.add("antisym-sum-class-match", static_cast<double>(mismatches), u0, 0.5);
    return res;
}

ordered_json cmdSpinor(const DConnection& conn, const std::vector<Point>& pts, CheckTable& checks,
                       double tol) {
    const Geometry& geom = conn.geometry();
    const Shape shape = geom.shape();
    const Point& u0 = pts.front();
    BlockSignature hs = detectSignature(jetVals(geom.metricH(u0, 0)), shape.n);
    BlockSignature vs = detectSignature(jetVals(geom.metricV(u0, 0)), shape.m);
    CliffordRep rep = buildSigma(SplitSignature{hs, vs});
    ordered_json per = ordered_json::array();
    Tracker gap, imag, intertwine, traceRes;
    for (const Point& u : pts) {
        SpinorFrame fr = spinorFrame(geom, rep, u, 2);
        SpinConnection sc = spinConnection(fr, conn, u);
        SpinorCurvature spc = curvatureSpinors(geom, conn, rep, u);
        CurvatureSummary cs = curvatureSummary(conn, u);
        ordered_json e;
        e["point"] = pointJson(u);
        e["scalar_re"] = spc.scalar.real();
        e["scalar_im"] = spc.scalar.imag();
        e["tensor_scalar"] = cs.scalar;
        e["scalar_gap"] = std::fabs(spc.scalar.real() - cs.scalar);
        e["intertwine_residual"] = spc.intertwineResidual;
        e["spin_trace_residual"] = spinTraceResidual(sc);
        per.push_back(std::move(e));
        gap.feed(std::fabs(spc.scalar.real() - cs.scalar), u);
        imag.feed(std::fabs(spc.scalar.imag()), u);
        intertwine.feed(spc.intertwineResidual, u);
        traceRes.feed(spinTraceResidual(sc), u);
    }
    ordered_json res;
    res["spinor_dim"] = rep.Nh + rep.Nv;
    res["per_point"] = std::move(per);
    if (conn.kind() == ConnKind::Canonical) {
        checks.add("scalar-cross-representation", gap, tol);
        checks.add("scalar-imaginary-part", imag, tol);
        checks.add("transport-intertwining", intertwine, tol);
        checks.add("spin-connection-trace", traceRes, tol);
    } else {
        res["scalar_gap_max"] = gap.max;
        res["intertwine_residual_max"] = intertwine.max;
    }
    return res;
}

ordered_json cmdNamap(const SpecFile& spec, const DConnection& connA, const std::vector<Point>& pts,
                      CheckTable& checks, double tol) {
    if (!spec.namap.present)
        throw SchemaError("namap: this command needs a \"namap\" section in the job file");
    const int cls = spec.namap.cls;
    const Geometry& geom = connA.geometry();
    const Shape shape = geom.shape();

    bool gridMode = !spec.namap.data.P.empty() || !spec.namap.data.Q.empty();
    DConnection connB = connA;
    if (!gridMode) {
        if (!spec.hasUnderlined)
            throw SchemaError(
                "namap: supply deformation grids (P and/or Q) or a geometry_underlined section");
        connB = DConnection::build(Geometry::load(spec.underlined), spec.connection.kind);
    }

    ordered_json per = ordered_json::array();
    Tracker thomas, weyl, clsRes;
    std::string paramMode;
    for (const Point& u : pts) {
        NaMapJets data = evalMapData(spec.namap.data, u, 2);
        std::vector<Jet> gammaA = connA.gamma(u, 2);
        std::vector<Jet> gammaB;
        if (gridMode) {
            gammaB = gammaA;
            if (!data.P.empty()) gammaB = addJetArrays(gammaB, data.P);
            if (!data.Q.empty()) gammaB = addJetArrays(gammaB, data.Q);
        } else {
            gammaB = connB.gamma(u, 2);
        }
        InvariantReport rep = gridMode ? invariantsFromJets(cls, geom, gammaA, gammaB, data, u)
                                       : invariants(cls, connA, connB, data, u);
        ordered_json e;
        e["point"] = pointJson(u);
        e["thomas_mismatch"] = rep.thomasMismatch;
        e["weyl_mismatch"] = rep.weylMismatch;
        e["weyl_trace_a"] = rep.packA.weylTrace;
        e["weyl_trace_b"] = rep.packB.weylTrace;
        if (cls == 1) {
            e["criterion_residual"] = rep.criterionResidual;
            e["parameter_mode"] = rep.parameterMode;
            paramMode = rep.parameterMode;
        }
        if (cls >= 1) {
            NaMapJets withDef = data;
            if (withDef.P.empty() || withDef.Q.empty()) {
                DeformationSplit split = splitCoefficients(shape.n, shape.m, gammaA, gammaB);
                if (withDef.P.empty()) withDef.P = split.P;
                if (withDef.Q.empty()) withDef.Q = split.Q;
            }
            ClassResidualReport cr = naClassResidual(cls, withDef, connA, u);
            e["class_residual"] = cr.residual;
            e["class_parameter_mode"] = cr.parameterMode;
            clsRes.feed(cr.residual, u);
        }
        per.push_back(std::move(e));
        thomas.feed(rep.thomasMismatch, u);
        weyl.feed(rep.weylMismatch, u);
    }
    ordered_json res;
    res["class"] = cls;
    res["mode"] = gridMode ? "deformation-grids" : "underlined-geometry";
    if (!paramMode.empty()) res["parameter_mode"] = paramMode;
    res["per_point"] = std::move(per);
    checks.add("coefficient-invariant-match", thomas, tol);
    checks.add("curvature-invariant-match", weyl, tol);
    if (cls >= 1) checks.add("class-system-closure", clsRes, tol);
    return res;
}

ordered_json cmdFields(const SpecFile& spec, const DConnection& conn, const std::vector<Point>& pts,
                       CheckTable& checks, double tol) {
    if (spec.fields.empty())
        throw SchemaError("fields: this command needs a non-empty \"fields\" section");
    const Geometry& geom = conn.geometry();
    const int d = geom.shape().d();
    ordered_json list = ordered_json::array();
    for (std::size_t k = 0; k < spec.fields.size(); ++k) {
        const MatterField& f = spec.fields[k];
        ordered_json fe;
        fe["kind"] = f.kind == FieldKind::Scalar ? "scalar" : "covector";
        fe["mass"] = f.mass;
        ordered_json per = ordered_json::array();
        std::string tag = "field" + std::to_string(k);
        if (f.kind == FieldKind::Scalar) {
            Tracker wave;
            for (const Point& u : pts) {
                ScalarFieldReport rep = scalarFieldOps(geom, conn, f, u);
                ordered_json e;
                e["point"] = pointJson(u);
                e["wave_residual"] = rep.residual;
                e["max_residual"] = rep.maxResidual;
                e["box"] = rep.box;
                e["volume"] = rep.volume;
                e["lagrangian_density"] = rep.lagrangian;
                e["canonical_energy"] = tensorNode(rep.canonical, {d, d}, {"lower_1", "lower_2"});
                e["metric_energy"] = tensorNode(rep.metric, {d, d}, {"lower_1", "lower_2"});
                per.push_back(std::move(e));
                wave.feed(rep.maxResidual, u);
            }
            fe["components"] = static_cast<int>(f.components.size());
            if (spec.fieldChecked[k]) checks.add(tag + "-wave-residual", wave, tol);
        } else {
            int groups = static_cast<int>(f.components.size()) / d;
            Tracker first, constr, second;
            for (const Point& u : pts) {
                ProcaReport rep = procaOps(geom, conn, f, u);
                ordered_json e;
                e["point"] = pointJson(u);
                e["strength"] = tensorNode(rep.strength, {groups, d, d}, {"group", "lower_1", "lower_2"});
                e["first_order"] = tensorNode(rep.firstOrder, {groups, d}, {"group", "lower"});
                e["constraint"] = rep.constraint;
                e["second_order"] = tensorNode(rep.secondOrder, {groups, d}, {"group", "lower"});
                per.push_back(std::move(e));
                first.feed(rep.maxFirstOrder, u);
                constr.feed(rep.maxConstraint, u);
                second.feed(rep.maxSecondOrder, u);
            }
            fe["groups"] = groups;
            if (spec.fieldChecked[k]) {
                checks.add(tag + "-first-order-residual", first, tol);
                checks.add(tag + "-constraint-residual", constr, tol);
                checks.add(tag + "-second-order-residual", second, tol);
            }
        }
        fe["per_point"] = std::move(per);
        list.push_back(std::move(fe));
    }
    ordered_json res;
    res["fields"] = std::move(list);
    return res;
}

ordered_json cmdTables(CheckTable& checks) {
    ordered_json res;
    ordered_json rows = ordered_json::array();
    for (int total = 0; total <= 8; ++total)
        for (int p = total; p >= 0; --p) {
            int q = total - p;
            AlgebraDescriptor desc = classifyClifford(p, q);
            rows.push_back("C^{" + std::to_string(p) + "," + std::to_string(q) + "} = " + desc.label);
        }
    res["classification"] = std::move(rows);
    ordered_json eps = ordered_json::array();
    int mismatches = 0;
    for (int n = 1; n <= 8; ++n) {
        ordered_json node = epsilonNode(BlockSignature{n, 0});
        if (!node["class_match"].get<bool>()) ++mismatches;
        eps.push_back(std::move(node));
    }
    res["epsilon"] = std::move(eps);
    checks.add("antisym-sum-class-match", static_cast<double>(mismatches), {}, 0.5);
    return res;
}

// ---------------------------------------------------------------------------
// Dispatch

int emit(const ordered_json& report, const Options& opt, int code) {
    std::string text = opt.format == "text" ? renderTextReport(report) : renderJsonReport(report);
    if (!opt.outPath.empty()) {
        std::ofstream out(opt.outPath, std::ios::binary);
        if (!out) {
            std::cerr << "cannot write " << opt.outPath << "\n";
            return 2;
        }
        out << text;
    } else {
        std::cout << text;
    }
    return code;
}

int emitError(const Options& opt, const char* type, const std::string& message, int code) {
    ordered_json report;
    report["tool"]["name"] = kToolName;
    report["tool"]["version"] = kToolVersion;
    report["command"] = opt.command;
    report["error"]["type"] = type;
    report["error"]["message"] = message;
    return emit(report, opt, code);
}

int runCommand(const Options& opt) {
    ordered_json report;
    report["tool"]["name"] = kToolName;
    report["tool"]["version"] = kToolVersion;
    report["format_version"] = 1;
    report["command"] = opt.command;

    CheckTable checks;
    ordered_json results;

    if (opt.command == "tables") {
        report["seed"] = opt.seedSet ? opt.seed : 20240801;
        report["tolerance"] = opt.tolSet ? opt.tol : 1e-6;
        results = cmdTables(checks);
    } else {
        if (opt.specPath.empty()) throw SchemaError("--spec PATH is required for this command");
        SpecFile spec = loadSpec(opt.specPath);
        if (!opt.connOverride.empty()) {
            ConnKind kind = kindFromName(opt.connOverride);
            if (kind == ConnKind::Custom && spec.connection.kind != ConnKind::Custom)
                throw SchemaError("--conn custom needs custom grids in the job file");
            if (kind != ConnKind::Custom) spec.connection.grids = CustomConnGrids{};
            spec.connection.kind = kind;
        }
        std::uint64_t seed = opt.seedSet ? opt.seed : spec.run.seed;
        double tol = opt.tolSet ? opt.tol : spec.run.tolerance;

        Geometry geom = Geometry::load(spec.geometry);
        std::vector<Point> pts;
        if (!opt.at.empty())
            pts.push_back(parseAtPoint(opt.at, geom.shape()));
        else if (!spec.run.points.empty())
            pts = spec.run.points;
        else
            pts = probePoints(geom.shape().d(), spec.run.count, seed, spec.run.lo, spec.run.hi);

        report["seed"] = seed;
        report["tolerance"] = tol;
        report["connection"] = kindName(spec.connection.kind);
        ordered_json ptsNode = ordered_json::array();
        for (const Point& u : pts) ptsNode.push_back(pointJson(u));
        report["points"] = std::move(ptsNode);

        auto buildConn = [&]() {
            return spec.connection.kind == ConnKind::Custom
                       ? DConnection::custom(geom, spec.connection.grids)
                       : DConnection::build(geom, spec.connection.kind);
        };

        if (opt.command == "validate") {
            if (spec.hasUnderlined) Geometry::load(spec.underlined);
            buildConn();
            results = cmdValidate(spec, geom, pts);
        } else if (opt.command == "geometry") {
            results = cmdGeometry(spec, geom, pts, checks);
        } else if (opt.command == "connection") {
            results = cmdConnection(buildConn(), pts, checks, tol);
        } else if (opt.command == "curvature") {
            results = cmdCurvature(buildConn(), pts);
        } else if (opt.command == "check") {
            results = cmdCheck(spec, buildConn(), pts, seed, checks, tol);
        } else if (opt.command == "clifford") {
            results = cmdClifford(geom, pts, checks);
        } else if (opt.command == "spinor") {
            results = cmdSpinor(buildConn(), pts, checks, tol);
        } else if (opt.command == "namap") {
            results = cmdNamap(spec, buildConn(), pts, checks, tol);
        } else if (opt.command == "fields") {
            results = cmdFields(spec, buildConn(), pts, checks, tol);
        }
    }

    std::size_t bad = countNonFinite(results);
    if (bad > 0) checks.add("finite-values", static_cast<double>(bad), {}, 0.0);
    report["results"] = std::move(results);
    report["checks"] = std::move(checks.arr);
    bool pass = checks.all;
    report["pass"] = pass;
    return emit(report, opt, pass ? 0 : 1);
}

} // namespace

int main(int argc, char** argv) {
    Options opt;
    CLI::App app{"Locally anisotropic geometry toolkit"};
    app.add_option("command", opt.command,
                   "one of: validate, geometry, connection, curvature, check, clifford, spinor, "
                   "namap, fields, tables")
        ->required();
    app.add_option("--spec", opt.specPath, "path of the JSON job file");
    app.add_option("--at", opt.at, "evaluation point override, e.g. \"x1=0.2,y1=-0.3\"");
    app.add_option("--conn", opt.connOverride,
                   "connection override: berwald, canonical, christoffel or custom");
    auto* tolOpt = app.add_option("--tol", opt.tol, "tolerance override for checks");
    auto* seedOpt = app.add_option("--seed", opt.seed, "seed override for points and test fields");
    app.add_option("--format", opt.format, "report format: json or text")
        ->check(CLI::IsMember({"json", "text"}));
    app.add_option("--out", opt.outPath, "write the report to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    opt.tolSet = tolOpt->count() > 0;
    opt.seedSet = seedOpt->count() > 0;

    static const char* kCommands[] = {"validate", "geometry", "connection", "curvature", "check",
                                      "clifford", "spinor",   "namap",      "fields",    "tables"};
    bool known = false;
    for (const char* c : kCommands) known = known || opt.command == c;
    if (!known) return emitError(opt, "schema", "unknown command \"" + opt.command + "\"", 2);
    if (opt.tolSet && !(opt.tol > 0.0))
        return emitError(opt, "schema", "--tol must be positive", 2);

    try {
        return runCommand(opt);
    } catch (const SchemaError& e) {
        return emitError(opt, "schema", e.what(), 2);
    } catch (const ParseError& e) {
        return emitError(opt, "parse", e.what(), 2);
    } catch (const DomainError& e) {
        return emitError(opt, "domain", e.what(), 3);
    }
}
