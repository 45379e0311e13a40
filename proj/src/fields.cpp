#include "aniso/fields.hpp"

#include <cmath>
#include <utility>

#include "aniso/errors.hpp"

namespace aniso {
namespace {

int idx2(int a, int b, int d) { return a * d + b; }

void checkField(const MatterField& field, FieldKind kind, const Shape& shape) {
    if (field.kind != kind) throw DomainError("matter field: operation does not match field kind");
    if (field.mass < 0.0) throw DomainError("matter field: mass must be nonnegative");
    if (field.components.empty()) throw DomainError("matter field: no components");
    const int d = shape.d();
    for (const Expr& c : field.components)
        if (c.empty() || c.n() != shape.n || c.m() != shape.m)
            throw DomainError("matter field: component dimensions do not match the geometry");
    if (kind == FieldKind::Covector && static_cast<int>(field.components.size()) % d != 0)
        throw DomainError("matter field: covector components must come in groups of n+m");
}

// Determinant by LU with partial pivoting; values only.
double detValues(const std::vector<double>& a0, int d) {
    std::vector<double> a(a0);
    double det = 1.0;
    for (int c = 0; c < d; ++c) {
        int piv = c;
        for (int r = c + 1; r < d; ++r)
            if (std::fabs(a[idx2(r, c, d)]) > std::fabs(a[idx2(piv, c, d)])) piv = r;
        if (a[idx2(piv, c, d)] == 0.0) return 0.0;
        if (piv != c) {
            for (int k = 0; k < d; ++k) std::swap(a[idx2(piv, k, d)], a[idx2(c, k, d)]);
            det = -det;
        }
        det *= a[idx2(c, c, d)];
        for (int r = c + 1; r < d; ++r) {
            const double f = a[idx2(r, c, d)] / a[idx2(c, c, d)];
            for (int k = c; k < d; ++k) a[idx2(r, k, d)] -= f * a[idx2(c, k, d)];
        }
    }
    return det;
}

std::vector<double> values(const std::vector<Jet>& jets) {
    std::vector<double> out;
    out.reserve(jets.size());
    for (const Jet& j : jets) out.push_back(j.value());
    return out;
}

} // namespace

ScalarFieldReport scalarFieldOps(const Geometry& geom, const DConnection& conn,
                                 const MatterField& field, const Point& u) {
    const Shape shape = geom.shape();
    checkField(field, FieldKind::Scalar, shape);
    const int n = shape.n, m = shape.m, d = n + m;
    const int k = static_cast<int>(field.components.size());
    const double mu2 = field.mass * field.mass;
    const double coupling = (d - 2) / (4.0 * (d - 1));

    const CurvatureSummary cs = curvatureSummary(conn, u);
    const std::vector<double> Gl = values(geom.dmetric(u, 0));
    const std::vector<double> Gu = values(geom.dmetricInverse(u, 0));

    ScalarFieldReport rep;
    rep.components = k;

    // Per-component value, frame gradient, and wave operator.
    std::vector<double> vals(k, 0.0);
    std::vector<double> grad(static_cast<std::size_t>(k) * d, 0.0);
    for (int c = 0; c < k; ++c) {
        const TensorField f0 = scalarExprField(geom, field.components[c]);
        const TensorField f1 = covDeriv(conn, f0);
        const TensorField f2 = covDeriv(conn, f1);
        vals[c] = field.components[c].eval(u);
        const std::vector<double> g1 = values(f1.eval(u, 0));
        const std::vector<double> g2 = values(f2.eval(u, 0));
        for (int a = 0; a < d; ++a) grad[c * d + a] = g1[a];
        double box = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) box += Gu[idx2(a, b, d)] * g2[idx2(b, a, d)];
        rep.box.push_back(box);
        rep.residual.push_back(box + (coupling * cs.scalar + mu2) * vals[c]);
        rep.maxResidual = std::max(rep.maxResidual, std::fabs(rep.residual.back()));
    }

    rep.volume = std::sqrt(std::fabs(detValues(Gl, d)));

    // Lagrangian bracket: kinetic term minus the mass/curvature potential.
    double kinetic = 0.0, pairSum = 0.0;
    for (int c = 0; c < k; ++c)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                kinetic += Gu[idx2(a, b, d)] * grad[c * d + a] * grad[c * d + b];
    for (int c = 0; c < k; ++c) pairSum += vals[c] * vals[c];
    const double bracket = kinetic - (mu2 + coupling * cs.scalar) * pairSum;
    rep.lagrangian = rep.volume * bracket;

    rep.canonical.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double s = -Gl[idx2(a, b, d)] * bracket;
            for (int c = 0; c < k; ++c) s += 2.0 * grad[c * d + a] * grad[c * d + b];
            rep.canonical[idx2(a, b, d)] = s;
        }

    // Squared-magnitude scalar and its covariant Hessian / wave operator.
    Expr pair = exprConst(0.0, n, m);
    for (int c = 0; c < k; ++c)
        pair = exprAdd(pair, exprMul(field.components[c], field.components[c]));
    const TensorField p1 = covDeriv(conn, scalarExprField(geom, pair));
    const std::vector<double> hess = values(covDeriv(conn, p1).eval(u, 0));
    double boxPair = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) boxPair += Gu[idx2(a, b, d)] * hess[idx2(b, a, d)];

    rep.metric.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const double ricSym = 0.5 * (cs.ricci[idx2(a, b, d)] + cs.ricci[idx2(b, a, d)]);
            const double hessSym = 0.5 * (hess[idx2(a, b, d)] + hess[idx2(b, a, d)]);
            rep.metric[idx2(a, b, d)] =
                rep.canonical[idx2(a, b, d)] -
                2.0 * coupling * (ricSym * pairSum + hessSym - Gl[idx2(a, b, d)] * boxPair);
        }
    return rep;
}

TensorField energyMomentumField(const Geometry& geom, const DConnection& conn,
                                const MatterField& field) {
    const Shape shape = geom.shape();
    checkField(field, FieldKind::Scalar, shape);
    TensorField out;
    out.n = shape.n;
    out.m = shape.m;
    out.sig = {Slot{Part::Full, false}, Slot{Part::Full, false}};
    out.eval = [geom, conn, field](const Point& u, int order) {
        if (order > 0)
            throw DomainError("energy-momentum field: only order-0 evaluation is supported");
        const ScalarFieldReport rep = scalarFieldOps(geom, conn, field, u);
        const int d = geom.shape().d();
        std::vector<Jet> jets;
        jets.reserve(rep.metric.size());
        for (double v : rep.metric) jets.push_back(Jet::constant(d, 0, v));
        return jets;
    };
    return out;
}

ProcaReport procaOps(const Geometry& geom, const DConnection& conn, const MatterField& field,
                     const Point& u) {
    const Shape shape = geom.shape();
    checkField(field, FieldKind::Covector, shape);
    const int d = shape.d();
    const int groups = static_cast<int>(field.components.size()) / d;
    const double mu2 = field.mass * field.mass;

    const CurvatureSummary cs = curvatureSummary(conn, u);
    const std::vector<double> Gu = values(geom.dmetricInverse(u, 0));

    ProcaReport rep;
    rep.groups = groups;
    for (int g = 0; g < groups; ++g) {
        std::vector<Expr> comps(field.components.begin() + g * d,
                                field.components.begin() + (g + 1) * d);
        const TensorField low =
            exprTensorField(geom, {Slot{Part::Full, false}}, std::move(comps));
        const TensorField dLow = covDeriv(conn, low); // [alpha*d + dir]

        // Strength with both indices raised, as a lazy field so that its
        // covariant divergence chains through the jet machinery.
        TensorField up2;
        up2.n = shape.n;
        up2.m = shape.m;
        up2.sig = {Slot{Part::Full, true}, Slot{Part::Full, true}};
        up2.eval = [geom, dLow, d](const Point& p, int order) {
            const std::vector<Jet> dp = dLow.eval(p, order);
            const std::vector<Jet> gu = geom.dmetricInverse(p, order);
            std::vector<Jet> f;
            f.reserve(static_cast<std::size_t>(d) * d);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) f.push_back(dp[idx2(b, a, d)] - dp[idx2(a, b, d)]);
            std::vector<Jet> out;
            out.reserve(f.size());
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    Jet s = Jet::constant(d, order, 0.0);
                    for (int e = 0; e < d; ++e)
                        for (int t = 0; t < d; ++t)
                            s = s + gu[idx2(a, e, d)] * gu[idx2(b, t, d)] * f[idx2(e, t, d)];
                    out.push_back(s);
                }
            return out;
        };

        TensorField up1;
        up1.n = shape.n;
        up1.m = shape.m;
        up1.sig = {Slot{Part::Full, true}};
        up1.eval = [geom, low, d](const Point& p, int order) {
            const std::vector<Jet> lo = low.eval(p, order);
            const std::vector<Jet> gu = geom.dmetricInverse(p, order);
            std::vector<Jet> out;
            out.reserve(lo.size());
            for (int a = 0; a < d; ++a) {
                Jet s = Jet::constant(d, order, 0.0);
                for (int b = 0; b < d; ++b) s = s + gu[idx2(a, b, d)] * lo[b];
                out.push_back(s);
            }
            return out;
        };

        const std::vector<double> lo0 = values(low.eval(u, 0));
        const std::vector<double> up0 = values(up1.eval(u, 0));
        const std::vector<double> dlo = values(dLow.eval(u, 0));
        const std::vector<double> dUp2 = values(covDeriv(conn, up2).eval(u, 0));
        const std::vector<double> dUp1 = values(covDeriv(conn, up1).eval(u, 0));
        const std::vector<double> ddLow = values(covDeriv(conn, dLow).eval(u, 0));

        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                rep.strength.push_back(dlo[idx2(b, a, d)] - dlo[idx2(a, b, d)]);

        for (int b = 0; b < d; ++b) {
            double div = 0.0;
            for (int a = 0; a < d; ++a) div += dUp2[(a * d + b) * d + a];
            const double r = div + mu2 * up0[b];
            rep.firstOrder.push_back(r);
            rep.maxFirstOrder = std::max(rep.maxFirstOrder, std::fabs(r));
        }

        double divPhi = 0.0;
        for (int a = 0; a < d; ++a) divPhi += dUp1[idx2(a, a, d)];
        rep.constraint.push_back(divPhi);
        rep.maxConstraint = std::max(rep.maxConstraint, std::fabs(divPhi));

        for (int a = 0; a < d; ++a) {
            double box = 0.0;
            for (int b = 0; b < d; ++b)
                for (int c = 0; c < d; ++c)
                    box += Gu[idx2(b, c, d)] * ddLow[(a * d + b) * d + c];
            double r = box + mu2 * lo0[a];
            for (int b = 0; b < d; ++b) r += cs.ricci[idx2(a, b, d)] * up0[b];
            rep.secondOrder.push_back(r);
            rep.maxSecondOrder = std::max(rep.maxSecondOrder, std::fabs(r));
        }
    }
    return rep;
}

} // namespace aniso
