#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aniso/connection.hpp"
#include "aniso/jetalg.hpp"
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

} // namespace

TEST_CASE("flat geometry has vanishing coefficients for every kind") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    for (ConnKind kind : {ConnKind::Berwald, ConnKind::Canonical, ConnKind::ChristoffelD}) {
        DConnection conn = DConnection::build(geom, kind);
        for (const Point& u : probePoints(4)) {
            ConnBlocks b = conn.blocks(u, 0);
            CHECK(maxAbsValue(b.Lh) < 1e-15);
            CHECK(maxAbsValue(b.Lv) < 1e-15);
            CHECK(maxAbsValue(b.Ch) < 1e-15);
            CHECK(maxAbsValue(b.Cv) < 1e-15);
        }
    }
}

TEST_CASE("base-only lift reproduces textbook Christoffel symbols") {
    for (int n : {2, 3}) {
        GeometrySpec spec = testgeo::riemannLift(n);
        Geometry geom = Geometry::load(spec);
        DConnection conn = DConnection::build(geom, ConnKind::Canonical);
        const int d = 2 * n;
        std::mt19937_64 rng(808);
        for (int trial = 0; trial < 10; ++trial) {
            Point u = testutil::randomPoint(rng, d, -0.8, 0.8);
            ConnBlocks b = conn.blocks(u, 0);

            // Independent oracle: finite differences of the metric expressions
            // plus a double-precision inverse, nothing shared with the jet path.
            std::vector<double> g(n * n), gi(n * n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g[i * n + j] = spec.g[i][j].eval(u);
            // Direct 2x2/3x3 inverse via cofactors on doubles.
            if (n == 2) {
                double det = g[0] * g[3] - g[1] * g[2];
                gi = {g[3] / det, -g[1] / det, -g[2] / det, g[0] / det};
            } else {
                double det = g[0] * (g[4] * g[8] - g[5] * g[7]) -
                             g[1] * (g[3] * g[8] - g[5] * g[6]) +
                             g[2] * (g[3] * g[7] - g[4] * g[6]);
                gi = {(g[4] * g[8] - g[5] * g[7]) / det, (g[2] * g[7] - g[1] * g[8]) / det,
                      (g[1] * g[5] - g[2] * g[4]) / det, (g[5] * g[6] - g[3] * g[8]) / det,
                      (g[0] * g[8] - g[2] * g[6]) / det, (g[2] * g[3] - g[0] * g[5]) / det,
                      (g[3] * g[7] - g[4] * g[6]) / det, (g[1] * g[6] - g[0] * g[7]) / det,
                      (g[0] * g[4] - g[1] * g[3]) / det};
            }
            auto dg = [&](int i, int j, int k) { // d_k g_ij
                auto f = [&](const Point& p) { return spec.g[i][j].eval(p); };
                return testutil::fd1(f, u, k, 1e-3);
            };
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        double want = 0;
                        for (int l = 0; l < n; ++l)
                            want += 0.5 * gi[i * n + l] * (dg(l, k, j) + dg(j, l, k) - dg(j, k, l));
                        CHECK_CLOSE(b.Lh[(i * n + j) * n + k].value(), want, 1e-7);
                    }
        }
    }
}

TEST_CASE("canonical connection is metric in all four responses") {
    for (auto spec : {testgeo::curved22(), testgeo::curved32()}) {
        Geometry geom = Geometry::load(spec);
        DConnection conn = DConnection::build(geom, ConnKind::Canonical);
        auto pts = randomPoints(spec.shape.d(), 20, 909);
        CHECK(metricityResidual(conn, pts) < 1e-9);
    }
}

TEST_CASE("base Christoffel block and fiber Christoffel block are metric for every kind") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    const int n = 2, d = 4;
    for (ConnKind kind : {ConnKind::Berwald, ConnKind::Canonical, ConnKind::ChristoffelD}) {
        DConnection conn = DConnection::build(geom, kind);
        TensorField nablaG = covDeriv(conn, dmetricField(geom));
        bool mixedSeen = false;
        for (const Point& u : probePoints(4, 6)) {
            std::vector<Jet> v = nablaG.eval(u, 0);
            for (int al = 0; al < d; ++al)
                for (int be = 0; be < d; ++be)
                    for (int ga = 0; ga < d; ++ga) {
                        double r = std::abs(v[(al * d + be) * d + ga].value());
                        bool hPartOfG = al < n && be < n && ga < n;
                        bool vPartOfH = al >= n && be >= n && ga >= n;
                        if (hPartOfG || vPartOfH) CHECK(r < 1e-9);
                        else if (r > 1e-6) mixedSeen = true;
                    }
        }
        if (kind == ConnKind::Canonical) CHECK(!mixedSeen);
        else CHECK(mixedSeen); // hv-metric only: mixed responses stay generically nonzero
    }
}

TEST_CASE("covariant derivative of a scalar is the frame derivative") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    Expr f = parseExpr("sin(x1*y2) + x2*y1^2", 2, 2);
    TensorField df = covDeriv(conn, scalarExprField(geom, f));
    const int n = 2, m = 2;
    for (const Point& u : probePoints(4, 6)) {
        std::vector<Jet> v = df.eval(u, 0);
        Jet fj = f.evalJet(u, 1);
        std::vector<Jet> N = geom.nconn(u, 0);
        for (int gamma = 0; gamma < 4; ++gamma) {
            double want;
            if (gamma < n) {
                want = fj.d1(gamma);
                for (int a = 0; a < m; ++a) want -= N[gamma * m + a].value() * fj.d1(n + a);
            } else {
                want = fj.d1(gamma);
            }
            CHECK_CLOSE(v[gamma].value(), want, 1e-13);
        }
    }
}

TEST_CASE("identity mixed tensor is covariantly constant") {
    GeometrySpec spec = testgeo::curved32();
    Geometry geom = Geometry::load(spec);
    for (ConnKind kind : {ConnKind::Berwald, ConnKind::Canonical, ConnKind::ChristoffelD}) {
        DConnection conn = DConnection::build(geom, kind);
        TensorField nablaI = covDeriv(conn, kroneckerField(geom));
        for (const Point& u : probePoints(5, 4))
            CHECK(maxAbsValue(nablaI.eval(u, 0)) < 1e-13);
    }
}

TEST_CASE("self-deformation vanishes and block differences localize correctly") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    DConnection berwald = DConnection::build(geom, ConnKind::Berwald);
    DConnection canonical = DConnection::build(geom, ConnKind::Canonical);
    DConnection christ = DConnection::build(geom, ConnKind::ChristoffelD);
    const int n = 2, m = 2, d = 4;
    for (const Point& u : probePoints(4, 5)) {
        CHECK(maxAbsValue(deformation(canonical, canonical, u, 0)) < 1e-15);

        // Berwald vs (L,0,0,C): only the fiber-base block differs, by dN/dy.
        std::vector<Jet> P = deformation(berwald, christ, u, 0);
        std::vector<Jet> N = geom.nconn(u, 1);
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                for (int ga = 0; ga < d; ++ga) {
                    double got = P[(al * d + be) * d + ga].value();
                    double want = 0;
                    if (al >= n && be >= n && ga < n)
                        want = N[ga * m + (al - n)].d1(n + (be - n)); // tilde N^a_b,dir
                    CHECK_CLOSE(got, want, 1e-13);
                }
    }
}

TEST_CASE("canonical-minus-Christoffel deformation matches its defining corrections") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    DConnection canonical = DConnection::build(geom, ConnKind::Canonical);
    DConnection christ = DConnection::build(geom, ConnKind::ChristoffelD);
    const int n = 2, m = 2, d = 4;
    for (const Point& u : probePoints(4, 5)) {
        std::vector<Jet> P = deformation(canonical, christ, u, 0);
        std::vector<Jet> g = geom.metricH(u, 1), h = geom.metricV(u, 1), N = geom.nconn(u, 1);
        std::vector<Jet> gInv = jetMatInverse(g, n), hInv = jetMatInverse(h, m);
        auto tN = [&](int a, int b, int k) { return N[k * m + a].d1(n + b); }; // dN_k^a/dy^b
        auto deltaH = [&](int a, int b, int k) { // delta_k h_ab
            double v = h[a * m + b].d1(k);
            for (int c = 0; c < m; ++c) v -= N[k * m + c].value() * h[a * m + b].d1(n + c);
            return v;
        };
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                for (int ga = 0; ga < d; ++ga) {
                    double want = 0;
                    if (al >= n && be >= n && ga < n) {
                        int a = al - n, b = be - n, k = ga;
                        want = tN(a, b, k);
                        for (int c = 0; c < m; ++c) {
                            double corr = deltaH(b, c, k);
                            for (int e = 0; e < m; ++e)
                                corr -= tN(e, b, k) * h[e * m + c].value() +
                                        tN(e, c, k) * h[e * m + b].value();
                            want += 0.5 * hInv[a * m + c].value() * corr;
                        }
                    } else if (al < n && be < n && ga >= n) {
                        int i = al, j = be, c = ga - n;
                        for (int k = 0; k < n; ++k)
                            want += 0.5 * gInv[i * n + k].value() * g[j * n + k].d1(n + c);
                    }
                    CHECK_CLOSE(P[(al * d + be) * d + ga].value(), want, 1e-12);
                }
    }
}

TEST_CASE("product rule holds for scalar times vector field") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    Expr f = parseExpr("1 + 0.3*sin(x1 + y1)", 2, 2);
    std::vector<Expr> vcomps = {
        parseExpr("x2 + y1^2", 2, 2), parseExpr("sin(x1)", 2, 2),
        parseExpr("cos(x2 + y2)", 2, 2), parseExpr("x1*y1", 2, 2)};
    std::vector<Expr> fv(4);
    for (int k = 0; k < 4; ++k) fv[k] = exprMul(f, vcomps[k]);

    std::vector<Slot> vecSig = {Slot{Part::Full, true}};
    TensorField V = exprTensorField(geom, vecSig, vcomps);
    TensorField fV = exprTensorField(geom, vecSig, fv);
    TensorField dV = covDeriv(conn, V);
    TensorField dfV = covDeriv(conn, fV);
    TensorField df = covDeriv(conn, scalarExprField(geom, f));

    const int dtot = 4;
    for (const Point& u : probePoints(4, 6)) {
        auto lhs = dfV.eval(u, 0);
        auto dv = dV.eval(u, 0);
        auto vv = V.eval(u, 0);
        auto dfj = df.eval(u, 0);
        double fval = f.eval(u);
        for (int al = 0; al < dtot; ++al)
            for (int ga = 0; ga < dtot; ++ga) {
                double want = fval * dv[al * 4 + ga].value() + dfj[ga].value() * vv[al].value();
                CHECK_CLOSE(lhs[al * 4 + ga].value(), want, 1e-9);
            }
    }
}

TEST_CASE("kind-specific zero blocks are exactly zero") {
    Geometry geom = Geometry::load(testgeo::curved32());
    DConnection christ = DConnection::build(geom, ConnKind::ChristoffelD);
    DConnection berwald = DConnection::build(geom, ConnKind::Berwald);
    for (const Point& u : probePoints(5, 5)) {
        ConnBlocks bc = christ.blocks(u, 1);
        CHECK(maxAbsValue(bc.Lv) == 0.0);
        CHECK(maxAbsValue(bc.Ch) == 0.0);
        ConnBlocks bb = berwald.blocks(u, 1);
        CHECK(maxAbsValue(bb.Ch) == 0.0);
    }
}

TEST_CASE("custom connections evaluate their grids and are generically non-metric") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    CustomConnGrids grids;
    auto E = [&](const std::string& t) { return parseExpr(t, 2, 2); };
    grids.Lh.assign(8, E("0"));
    grids.Lv.assign(8, E("0"));
    grids.Ch.assign(8, E("0"));
    grids.Cv.assign(8, E("0"));
    grids.Lh[0] = E("0.3 + 0.1*x1"); // L^1_11
    grids.Cv[7] = E("0.2*y2");       // C^2_22
    DConnection conn = DConnection::custom(geom, grids);

    Point u = {0.2, 0.3, 0.4, 0.5};
    ConnBlocks b = conn.blocks(u, 0);
    CHECK_CLOSE(b.Lh[0].value(), 0.3 + 0.1 * 0.2, 1e-15);
    CHECK_CLOSE(b.Cv[7].value(), 0.2 * 0.5, 1e-15);
    CHECK(metricityResidual(conn, {u}) > 1e-3);

    SUBCASE("wrong grid sizes are rejected") {
        grids.Lh.pop_back();
        CHECK_THROWS_AS(DConnection::custom(geom, grids), DomainError);
    }
}

TEST_CASE("second covariant derivatives chain through the jet orders") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    Expr f = parseExpr("sin(x1) * cos(y2) + x2*y1", 2, 2);
    TensorField ddf = covDeriv(conn, covDeriv(conn, scalarExprField(geom, f)));
    Point u = {0.1, 0.2, 0.3, 0.4};
    auto v = ddf.eval(u, 0);
    CHECK(v.size() == 16);
    for (const Jet& j : v) CHECK(std::isfinite(j.value()));
    // Requesting more depth than the jet budget allows must fail loudly.
    TensorField d3f = covDeriv(conn, ddf);
    CHECK_THROWS_AS(d3f.eval(u, 1), DomainError);
}
