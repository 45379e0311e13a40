#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aniso/curvature.hpp"
#include "test_geoms.hpp"
#include "test_util.hpp"

using namespace aniso;

namespace {

std::vector<Point> randomPoints(int dim, int count, std::uint64_t seed, double lo = -0.8,
                                double hi = 0.8) {
    std::mt19937_64 rng(seed);
    std::vector<Point> pts;
    pts.reserve(count);
    for (int k = 0; k < count; ++k) pts.push_back(testutil::randomPoint(rng, dim, lo, hi));
    return pts;
}

double maxAbsValue(const std::vector<Jet>& v) {
    double worst = 0;
    for (const Jet& j : v) worst = std::max(worst, std::abs(j.value()));
    return worst;
}

double maxAbs(const std::vector<double>& v) {
    double worst = 0;
    for (double x : v) worst = std::max(worst, std::abs(x));
    return worst;
}

int idx2(int a, int b, int d) { return a * d + b; }
int idx3(int a, int b, int c, int d) { return (a * d + b) * d + c; }
int idx4(int a, int b, int c, int e, int d) { return ((a * d + b) * d + c) * d + e; }

TensorField randomVectorField(const Geometry& geom, std::uint64_t seed) {
    const Shape& sh = geom.shape();
    std::vector<Expr> comps;
    comps.reserve(sh.d());
    for (int k = 0; k < sh.d(); ++k)
        comps.push_back(randomPolyExpr(sh, seed + static_cast<std::uint64_t>(k)));
    return exprTensorField(geom, {{Part::Full, true}}, comps);
}

// Vector-commutator contraction with adjustable signs on the curvature and
// torsion terms, for mutation sensitivity checks.
double vectorCommutatorResidual(const DConnection& conn, const TensorField& V, const Point& u,
                                double signR, double signT) {
    const int d = conn.geometry().shape().d();
    const TensorField dV = covDeriv(conn, V);
    const TensorField ddV = covDeriv(conn, dV);
    const std::vector<Jet> V0 = V.eval(u, 0);
    const std::vector<Jet> dV0 = dV.eval(u, 0);
    const std::vector<Jet> ddV0 = ddV.eval(u, 0);
    const std::vector<Jet> R = curvatureTensor(conn, u, 0);
    const TorsionBlocks tor = torsion(conn, u, 0);
    double worst = 0;
    for (int dd = 0; dd < d; ++dd)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double lhs = ddV0[idx3(dd, b, a, d)].value() - ddV0[idx3(dd, a, b, d)].value();
                for (int g = 0; g < d; ++g) {
                    lhs -= signR * R[idx4(dd, g, a, b, d)].value() * V0[g].value();
                    lhs -= signT * tor.full[idx3(g, a, b, d)].value() * dV0[idx2(dd, g, d)].value();
                }
                worst = std::max(worst, std::abs(lhs));
            }
    return worst;
}

std::vector<double> invSymValues(const std::vector<double>& g, int n) {
    if (n == 1) return {1.0 / g[0]};
    if (n == 2) {
        double det = g[0] * g[3] - g[1] * g[2];
        return {g[3] / det, -g[1] / det, -g[2] / det, g[0] / det};
    }
    double det = g[0] * (g[4] * g[8] - g[5] * g[7]) - g[1] * (g[3] * g[8] - g[5] * g[6]) +
                 g[2] * (g[3] * g[7] - g[4] * g[6]);
    return {(g[4] * g[8] - g[5] * g[7]) / det, (g[2] * g[7] - g[1] * g[8]) / det,
            (g[1] * g[5] - g[2] * g[4]) / det, (g[5] * g[6] - g[3] * g[8]) / det,
            (g[0] * g[8] - g[2] * g[6]) / det, (g[2] * g[3] - g[0] * g[5]) / det,
            (g[3] * g[7] - g[4] * g[6]) / det, (g[1] * g[6] - g[0] * g[7]) / det,
            (g[0] * g[4] - g[1] * g[3]) / det};
}

} // namespace

TEST_CASE("flat geometry has vanishing torsion, curvature, and contractions") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    std::vector<Point> pts = probePoints(4, 3);
    for (const Point& u : pts) {
        CHECK(maxAbsValue(anholonomy(geom, u, 0)) < 1e-15);
        CHECK(maxAbsValue(torsion(conn, u, 0).full) < 1e-15);
        CHECK(maxAbsValue(curvatureTensor(conn, u, 0)) < 1e-15);
        CurvatureSummary s = curvatureSummary(conn, u);
        CHECK(maxAbs(s.ricci) < 1e-15);
        CHECK(std::abs(s.scalar) < 1e-15);
        CHECK(maxAbs(s.einstein) < 1e-15);
        CHECK(maxAbs(s.phi) < 1e-15);
        REQUIRE(s.weylDefined);
        CHECK(maxAbs(s.weyl) < 1e-15);
        CHECK(maxAbs(conservationU(conn, u)) < 1e-15);
    }
    IdentityReport rep = identityResiduals(conn, pts, 90210);
    CHECK(rep.commutatorScalar < 1e-12);
    CHECK(rep.commutatorVector < 1e-12);
    CHECK(rep.bianchiFirst < 1e-12);
    CHECK(rep.bianchiSecond < 1e-12);
}

TEST_CASE("frame bracket coefficients agree between the geometry and curvature paths") {
    for (auto spec : {testgeo::curved22(), testgeo::curved32()}) {
        Geometry geom = Geometry::load(spec);
        const int d = geom.shape().d();
        for (const Point& u : randomPoints(d, 4, 551)) {
            FrameStructure fs = frameStructure(geom, u);
            std::vector<Jet> w = anholonomy(geom, u, 0);
            for (int g = 0; g < d; ++g)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b)
                        CHECK_CLOSE(w[idx3(g, a, b, d)].value(), fs.w[idx3(g, a, b, d)], 1e-12);
        }
    }
}

TEST_CASE("torsion components match the operator definition on arbitrary vector fields") {
    for (auto spec : {testgeo::curved22(), testgeo::curved32()}) {
        Geometry geom = Geometry::load(spec);
        const int n = geom.shape().n, m = geom.shape().m, d = n + m;
        for (ConnKind kind : {ConnKind::Canonical, ConnKind::Berwald}) {
            DConnection conn = DConnection::build(geom, kind);
            TensorField X = randomVectorField(geom, 7001);
            TensorField Y = randomVectorField(geom, 7013);
            TensorField dX = covDeriv(conn, X);
            TensorField dY = covDeriv(conn, Y);
            for (const Point& u : randomPoints(d, 5, 7100)) {
                const std::vector<Jet> X1 = X.eval(u, 1);
                const std::vector<Jet> Y1 = Y.eval(u, 1);
                const std::vector<Jet> dX0 = dX.eval(u, 0);
                const std::vector<Jet> dY0 = dY.eval(u, 0);
                const std::vector<Jet> N = geom.nconn(u, 1);
                const std::vector<Jet> w = anholonomy(geom, u, 0);
                const TorsionBlocks tor = torsion(conn, u, 0);
                for (int g = 0; g < d; ++g) {
                    double dxy = 0, dyx = 0, lie = 0, contr = 0;
                    for (int mu = 0; mu < d; ++mu) {
                        dxy += X1[mu].value() * dY0[idx2(g, mu, d)].value();
                        dyx += Y1[mu].value() * dX0[idx2(g, mu, d)].value();
                        lie += X1[mu].value() * frameDeriv(Y1[g], N, n, m, mu).value() -
                               Y1[mu].value() * frameDeriv(X1[g], N, n, m, mu).value();
                        for (int nu = 0; nu < d; ++nu)
                            lie += X1[mu].value() * Y1[nu].value() * w[idx3(g, mu, nu, d)].value();
                    }
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b)
                            contr += X1[a].value() * Y1[b].value() * tor.full[idx3(g, b, a, d)].value();
                    CHECK_CLOSE(dxy - dyx - lie, contr, 1e-8);
                }
            }
        }
    }
}

TEST_CASE("torsion blocks take the expected closed forms for each connection kind") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    const int n = 2, m = 2;
    std::vector<Point> pts = randomPoints(4, 5, 9917);

    DConnection chris = DConnection::build(geom, ConnKind::ChristoffelD);
    DConnection berwald = DConnection::build(geom, ConnKind::Berwald);
    DConnection canon = DConnection::build(geom, ConnKind::Canonical);

    for (const Point& u : pts) {
        TorsionBlocks tc = torsion(chris, u, 0);
        CHECK(maxAbsValue(tc.Th) < 1e-14);
        CHECK(maxAbsValue(tc.S) < 1e-14);
        CHECK(maxAbsValue(tc.Ph) < 1e-14);
        // Mixed fiber block reduces to the fiber derivative of N.
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int i = 0; i < n; ++i) {
                    auto f = [&](const Point& p) { return spec.N[i][a].eval(p); };
                    CHECK_CLOSE(tc.Pv[(a * m + b) * n + i].value(), testutil::fd1(f, u, n + b, 1e-3),
                                1e-7);
                }
        // Base-base fiber block is the frame bracket of the two base fields.
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    auto del = [&](int row, int col, const Point& p) {
                        // delta_col N_row^a at p, by plain finite differences.
                        auto nf = [&](const Point& q) { return spec.N[row][a].eval(q); };
                        double v = testutil::fd1(nf, p, col, 1e-3);
                        for (int b = 0; b < m; ++b)
                            v -= spec.N[col][b].eval(p) * testutil::fd1(nf, p, n + b, 1e-3);
                        return v;
                    };
                    CHECK_CLOSE(tc.Tv[(a * n + i) * n + j].value(), del(i, j, u) - del(j, i, u), 1e-6);
                }

        TorsionBlocks tb = torsion(berwald, u, 0);
        CHECK(maxAbsValue(tb.Pv) < 1e-14);
        CHECK(maxAbsValue(tb.Ph) < 1e-14);

        TorsionBlocks tn = torsion(canon, u, 0);
        ConnBlocks cb = canon.blocks(u, 0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int b = 0; b < m; ++b)
                    CHECK_CLOSE(tn.Ph[(i * n + j) * m + b].value(), cb.Ch[(i * n + j) * m + b].value(),
                                1e-14);
        CHECK(maxAbsValue(tn.Ph) > 1e-4); // generically nonzero on this geometry
    }
}

TEST_CASE("base-only curvature matches finite-difference Riemann values") {
    for (int n : {2, 3}) {
        GeometrySpec spec = testgeo::riemannLift(n);
        Geometry geom = Geometry::load(spec);
        DConnection conn = DConnection::build(geom, ConnKind::Canonical);
        const int d = 2 * n;
        for (const Point& u : randomPoints(d, 5, 363 + n)) {
            // Independent oracle: Christoffel symbols from finite differences of
            // the metric expressions, then curvature from finite differences of
            // those symbols. Nothing is shared with the jet path.
            auto gammaAt = [&](const Point& p) {
                std::vector<double> g(n * n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) g[i * n + j] = spec.g[i][j].eval(p);
                std::vector<double> gi = invSymValues(g, n);
                std::vector<double> out(n * n * n, 0.0);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int k = 0; k < n; ++k) {
                            double acc = 0;
                            for (int l = 0; l < n; ++l) {
                                auto gf = [&](int r, int c) {
                                    return [&spec, r, c](const Point& q) { return spec.g[r][c].eval(q); };
                                };
                                acc += 0.5 * gi[i * n + l] *
                                       (testutil::fd1(gf(l, k), p, j, 1e-3) +
                                        testutil::fd1(gf(j, l), p, k, 1e-3) -
                                        testutil::fd1(gf(j, k), p, l, 1e-3));
                            }
                            out[(i * n + j) * n + k] = acc;
                        }
                return out;
            };
            std::vector<double> gam = gammaAt(u);
            std::vector<std::vector<double>> dgam(n); // d_k of the full table
            for (int k = 0; k < n; ++k) {
                std::vector<double> acc(n * n * n, 0.0);
                const double h = 1e-2;
                Point p = u;
                const double x0 = p[k];
                p[k] = x0 + 2 * h;
                std::vector<double> fp2 = gammaAt(p);
                p[k] = x0 + h;
                std::vector<double> fp1 = gammaAt(p);
                p[k] = x0 - h;
                std::vector<double> fm1 = gammaAt(p);
                p[k] = x0 - 2 * h;
                std::vector<double> fm2 = gammaAt(p);
                for (std::size_t t = 0; t < acc.size(); ++t)
                    acc[t] = (-fp2[t] + 8 * fp1[t] - 8 * fm1[t] + fm2[t]) / (12 * h);
                dgam[k] = acc;
            }
            std::vector<double> want(n * n * n * n, 0.0);
            double scale = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l) {
                            double acc = dgam[k][(i * n + j) * n + l] - dgam[l][(i * n + j) * n + k];
                            for (int s = 0; s < n; ++s)
                                acc += gam[(i * n + s) * n + k] * gam[(s * n + j) * n + l] -
                                       gam[(i * n + s) * n + l] * gam[(s * n + j) * n + k];
                            want[((i * n + j) * n + k) * n + l] = acc;
                            scale = std::max(scale, std::abs(acc));
                        }
            std::vector<Jet> R = curvatureTensor(conn, u, 0);
            const double tol = std::max(1e-9, 1e-6 * scale);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l)
                            CHECK_CLOSE(R[idx4(i, j, k, l, d)].value(),
                                        want[((i * n + j) * n + k) * n + l], tol);
        }
    }
}

TEST_CASE("curvature never mixes base and fiber valued parts") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const int n = 2, d = 4;
    for (const Point& u : randomPoints(d, 3, 6440)) {
        std::vector<Jet> R = curvatureTensor(conn, u, 1);
        for (int dd = 0; dd < d; ++dd)
            for (int g = 0; g < d; ++g) {
                if ((dd < n) == (g < n)) continue;
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) CHECK(R[idx4(dd, g, a, b, d)].maxAbs() == 0.0);
            }
    }
}

TEST_CASE("commutator and cyclic identities hold for generated polynomial fields") {
    for (auto spec : {testgeo::curved22(), testgeo::curved32()}) {
        Geometry geom = Geometry::load(spec);
        const int d = geom.shape().d();
        for (ConnKind kind : {ConnKind::Canonical, ConnKind::Berwald}) {
            DConnection conn = DConnection::build(geom, kind);
            IdentityReport rep = identityResiduals(conn, randomPoints(d, 6, 424242), 5150);
            CHECK(rep.commutatorScalar < 1e-7);
            CHECK(rep.commutatorVector < 1e-7);
            CHECK(rep.bianchiFirst < 1e-6);
            CHECK(rep.bianchiSecond < 1e-6);
        }
    }
}

TEST_CASE("sign mutations in the commutator contraction are detected") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    TensorField V = randomVectorField(geom, 31337);
    Point u = randomPoints(4, 1, 1234).front();
    CHECK(vectorCommutatorResidual(conn, V, u, 1.0, 1.0) < 1e-7);
    CHECK(vectorCommutatorResidual(conn, V, u, -1.0, 1.0) > 1e-2);
    CHECK(vectorCommutatorResidual(conn, V, u, 1.0, -1.0) > 1e-2);
}

TEST_CASE("contraction summary satisfies the trace relations") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const int n = 2, m = 2, d = 4;
    double ricciAsymmetry = 0;
    for (const Point& u : randomPoints(d, 5, 8080)) {
        CurvatureSummary s = curvatureSummary(conn, u);

        // Scalar: splitting the contraction into the two diagonal blocks with an
        // independent double-precision inverse gives the same number.
        std::vector<Jet> gj = geom.metricH(u, 0), hj = geom.metricV(u, 0);
        std::vector<double> g(n * n), h(m * m);
        for (int i = 0; i < n * n; ++i) g[i] = gj[i].value();
        for (int i = 0; i < m * m; ++i) h[i] = hj[i].value();
        std::vector<double> gi = invSymValues(g, n), hi = invSymValues(h, m);
        double blockScalar = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) blockScalar += gi[i * n + j] * s.ricci[idx2(i, j, d)];
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                blockScalar += hi[a * m + b] * s.ricci[idx2(n + a, n + b, d)];
        CHECK_CLOSE(blockScalar, s.scalar, 1e-10);

        // Einstein trace and trace-free property of the potential form.
        std::vector<Jet> Gu = geom.dmetricInverse(u, 0);
        double etrace = 0, ptrace = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                etrace += Gu[idx2(a, b, d)].value() * s.einstein[idx2(a, b, d)];
                ptrace += Gu[idx2(a, b, d)].value() * s.phi[idx2(a, b, d)];
            }
        CHECK_CLOSE(etrace, (1.0 - d / 2.0) * s.scalar, 1e-9);
        CHECK(std::abs(ptrace) < 1e-9);

        // The weighted combination is traceless on the contracted pair.
        REQUIRE(s.weylDefined);
        for (int t = 0; t < d; ++t)
            for (int b = 0; b < d; ++b) {
                double tr = 0;
                for (int g2 = 0; g2 < d; ++g2) tr += s.weyl[idx4(g2, t, g2, b, d)];
                CHECK(std::abs(tr) < 1e-8);
            }

        // Block slices of the full tensor agree with the dedicated views.
        CurvatureBlocks cb = curvatureBlocks(conn, u, 0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double fromBlocks = 0;
                for (int k = 0; k < n; ++k) fromBlocks += cb.Rhh[((k * n + i) * n + k) * n + j].value();
                CHECK_CLOSE(fromBlocks, s.ricci[idx2(i, j, d)], 1e-12);
            }
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                double fromBlocks = 0;
                for (int c = 0; c < m; ++c)
                    fromBlocks += cb.Svv[((c * m + a) * m + c) * m + b].value();
                CHECK_CLOSE(fromBlocks, s.ricci[idx2(n + a, n + b, d)], 1e-12);
            }

        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b)
                ricciAsymmetry =
                    std::max(ricciAsymmetry, std::abs(s.ricci[idx2(a, b, d)] - s.ricci[idx2(b, a, d)]));
    }
    // The two mixed contraction blocks genuinely differ on this geometry.
    CHECK(ricciAsymmetry > 1e-6);
}

TEST_CASE("weighted combination is invariant under constant metric scaling") {
    GeometrySpec spec = testgeo::curved22();
    GeometrySpec scaled = spec;
    const double c = 3.7;
    for (auto& row : scaled.g)
        for (auto& e : row) e = exprMul(exprConst(c, 2, 2), e);
    for (auto& row : scaled.h)
        for (auto& e : row) e = exprMul(exprConst(c, 2, 2), e);
    DConnection conn = DConnection::build(Geometry::load(spec), ConnKind::Canonical);
    DConnection connScaled = DConnection::build(Geometry::load(scaled), ConnKind::Canonical);
    for (const Point& u : randomPoints(4, 4, 321)) {
        CurvatureSummary a = curvatureSummary(conn, u);
        CurvatureSummary b = curvatureSummary(connScaled, u);
        for (std::size_t t = 0; t < a.weyl.size(); ++t) CHECK_CLOSE(a.weyl[t], b.weyl[t], 1e-8);
        for (std::size_t t = 0; t < a.ricci.size(); ++t) CHECK_CLOSE(a.ricci[t], b.ricci[t], 1e-9);
        CHECK_CLOSE(a.scalar, c * b.scalar, 1e-9);
    }
}

TEST_CASE("low total dimension rejects the weighted combination but keeps the rest") {
    GeometrySpec spec;
    spec.shape = {1, 1};
    spec.form = MetricForm::Blocks;
    spec.g = {{parseExpr("1 + 0.3*x1^2", 1, 1)}};
    spec.h = {{parseExpr("1 + 0.2*y1^2", 1, 1)}};
    spec.N = {{parseExpr("0.1*x1*y1", 1, 1)}};
    Geometry geom = Geometry::load(spec);
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    Point u = {0.3, 0.4};
    CurvatureSummary s = curvatureSummary(conn, u);
    CHECK_FALSE(s.weylDefined);
    CHECK(s.weyl.empty());
    CHECK(std::isfinite(s.scalar));
    CHECK_THROWS_AS(weylTensor(conn, u), DomainError);
}

namespace {

// Source built to close the metric field equation at every point.
TensorField einsteinSource(const DConnection& conn, double lambda, double kappa) {
    TensorField f;
    f.n = conn.geometry().shape().n;
    f.m = conn.geometry().shape().m;
    f.sig = {{Part::Full, false}, {Part::Full, false}};
    f.eval = [conn, lambda, kappa](const Point& u, int order) {
        const Geometry& geom = conn.geometry();
        const int d = geom.shape().d();
        CurvatureSummary s = curvatureSummary(conn, u);
        std::vector<Jet> G = geom.dmetric(u, 0);
        std::vector<Jet> out;
        out.reserve(static_cast<std::size_t>(d) * d);
        // Only point values are meaningful here; the residual checks use order 0.
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                out.push_back(Jet::constant(d, order,
                                            (s.einstein[a * d + b] + lambda * G[a * d + b].value()) /
                                                kappa));
        return out;
    };
    return f;
}

// Spin density built to close the torsion field equation, with full jets so it
// can be covariantly differentiated.
TensorField spinSource(const DConnection& conn, double kappa) {
    TensorField f;
    f.n = conn.geometry().shape().n;
    f.m = conn.geometry().shape().m;
    f.sig = {{Part::Full, true}, {Part::Full, false}, {Part::Full, false}};
    f.eval = [conn, kappa](const Point& u, int order) {
        const int d = conn.geometry().shape().d();
        TorsionBlocks tor = torsion(conn, u, order);
        std::vector<Jet> t1(static_cast<std::size_t>(d), Jet::constant(d, order, 0.0));
        for (int b = 0; b < d; ++b)
            for (int dd = 0; dd < d; ++dd) t1[b] = t1[b] + tor.full[idx3(dd, b, dd, d)];
        std::vector<Jet> out(static_cast<std::size_t>(d) * d * d, Jet::constant(d, order, 0.0));
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    Jet v = tor.full[idx3(g, a, b, d)];
                    if (g == a) v = v + t1[b];
                    if (g == b) v = v - t1[a];
                    out[idx3(g, a, b, d)] = v / kappa;
                }
        return out;
    };
    return f;
}

TensorField zeroField(const Geometry& geom, std::vector<Slot> sig) {
    int count = 1;
    for (const Slot& s : sig) count *= (s.part == Part::H ? geom.shape().n
                                        : s.part == Part::V ? geom.shape().m
                                                            : geom.shape().d());
    std::vector<Expr> comps(static_cast<std::size_t>(count),
                            exprConst(0.0, geom.shape().n, geom.shape().m));
    return exprTensorField(geom, std::move(sig), std::move(comps));
}

} // namespace

TEST_CASE("field equations close on sources built from the geometry") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const double lambda = 0.3, kappa = 2.5;
    TensorField E = einsteinSource(conn, lambda, kappa);
    TensorField S = spinSource(conn, kappa);
    for (const Point& u : randomPoints(4, 3, 2026)) {
        FieldEqResiduals r = fieldEquationResiduals(conn, E, S, lambda, kappa, u);
        CHECK(r.einstein < 1e-9);
        CHECK(r.phiForm < 1e-9);
        CHECK(r.torsionSpin < 1e-9);
        CHECK(std::isfinite(r.spinConservation));

        // A mismatched coupling is detected.
        FieldEqResiduals bad = fieldEquationResiduals(conn, E, S, lambda, kappa * 1.05, u);
        CHECK(bad.einstein > 1e-3);
    }
}

TEST_CASE("vacuum flat space satisfies every field equation") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    TensorField E = zeroField(geom, {{Part::Full, false}, {Part::Full, false}});
    TensorField S = zeroField(geom, {{Part::Full, true}, {Part::Full, false}, {Part::Full, false}});
    for (const Point& u : probePoints(4, 3)) {
        FieldEqResiduals r = fieldEquationResiduals(conn, E, S, 0.0, 1.0, u);
        CHECK(r.einstein < 1e-12);
        CHECK(r.phiForm < 1e-12);
        CHECK(r.torsionSpin < 1e-12);
        CHECK(r.spinConservation < 1e-12);
    }
}

TEST_CASE("field equation sources with the wrong signature are rejected") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    TensorField goodE = zeroField(geom, {{Part::Full, false}, {Part::Full, false}});
    TensorField goodS = zeroField(geom, {{Part::Full, true}, {Part::Full, false}, {Part::Full, false}});
    TensorField badE = zeroField(geom, {{Part::Full, true}, {Part::Full, false}});
    TensorField badS = zeroField(geom, {{Part::Full, false}, {Part::Full, false}, {Part::Full, false}});
    Point u = {0.1, 0.2, 0.3, 0.4};
    CHECK_THROWS_AS(fieldEquationResiduals(conn, badE, goodS, 0.0, 1.0, u), DomainError);
    CHECK_THROWS_AS(fieldEquationResiduals(conn, goodE, badS, 0.0, 1.0, u), DomainError);
}

TEST_CASE("torsion-free connections conserve the curvature flux") {
    Geometry lift = Geometry::load(testgeo::riemannLift(2));
    DConnection chris = DConnection::build(lift, ConnKind::ChristoffelD);
    for (const Point& u : randomPoints(4, 5, 606)) {
        CHECK(maxAbsValue(torsion(chris, u, 0).full) < 1e-14);
        std::vector<double> U = conservationU(chris, u);
        std::vector<double> Ualt = conservationUAlt(chris, u);
        CHECK(maxAbs(U) < 1e-9);
        CHECK(maxAbs(Ualt) < 1e-9);
    }

    Geometry curved = Geometry::load(testgeo::curved22());
    double witness = 0;
    for (ConnKind kind : {ConnKind::Berwald, ConnKind::Canonical}) {
        DConnection conn = DConnection::build(curved, kind);
        for (const Point& u : randomPoints(4, 5, 607)) {
            std::vector<double> U = conservationU(conn, u);
            std::vector<double> Ualt = conservationUAlt(conn, u);
            for (std::size_t k = 0; k < U.size(); ++k) CHECK_CLOSE(U[k], Ualt[k], 1e-10);
            if (kind == ConnKind::Berwald) witness = std::max(witness, maxAbs(U));
        }
    }
    CHECK(witness > 1e-6);
}

TEST_CASE("curvature jets beyond the supported order are rejected") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    Point u = {0.1, -0.2, 0.3, 0.2};
    CHECK_THROWS_AS(curvatureTensor(conn, u, 2), DomainError);
    CHECK_NOTHROW(torsion(conn, u, 2));
    CHECK_NOTHROW(curvatureTensor(conn, u, 1));
}
