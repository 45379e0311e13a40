#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aniso/geometry.hpp"
#include "aniso/jetalg.hpp"
#include "test_geoms.hpp"
#include "test_util.hpp"

using namespace aniso;

namespace {

// Coordinate-basis metric assembled from blocks: G_ij = g + N N h, G_ia = N h,
// G_ab = h. Returns an expression grid over the same shape.
ExprGrid fullMetricFromBlocks(const GeometrySpec& s) {
    const int n = s.shape.n, m = s.shape.m, d = s.shape.d();
    ExprGrid G(d, std::vector<Expr>(d));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) G[n + a][n + b] = s.h[a][b];
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < m; ++a) {
            Expr e = exprConst(0.0, n, m);
            for (int b = 0; b < m; ++b) e = exprAdd(e, exprMul(s.N[i][b], s.h[b][a]));
            G[i][n + a] = e;
            G[n + a][i] = e;
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Expr e = s.g[i][j];
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    e = exprAdd(e, exprMul(exprMul(s.N[i][a], s.N[j][b]), s.h[a][b]));
            G[i][j] = e;
        }
    return G;
}

} // namespace

TEST_CASE("flat geometry loads with identity blocks everywhere") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    for (const Point& u : probePoints(4)) {
        auto g = geom.metricH(u, 0), h = geom.metricV(u, 0), N = geom.nconn(u, 0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CHECK_CLOSE(g[i * 2 + j].value(), i == j ? 1.0 : 0.0, 1e-15);
                CHECK_CLOSE(h[i * 2 + j].value(), i == j ? 1.0 : 0.0, 1e-15);
                CHECK_CLOSE(N[i * 2 + j].value(), 0.0, 1e-15);
            }
    }
}

TEST_CASE("quadratic Lagrangian reproduces its coefficient matrix") {
    Geometry geom = Geometry::load(testgeo::lagrangeQuad());
    auto coeffs = testgeo::parseGrid(testgeo::lagrangeCoeffTexts(), 2, 2);
    for (const Point& u : probePoints(4)) {
        auto g = geom.metricH(u, 0), h = geom.metricV(u, 0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                CHECK_CLOSE(g[i * 2 + j].value(), coeffs[i][j].eval(u), 1e-12);
                CHECK_CLOSE(h[i * 2 + j].value(), coeffs[i][j].eval(u), 1e-12);
            }
    }
}

TEST_CASE("Lagrangian base metric equals the finite-difference Hessian in y") {
    // A non-quadratic Lagrangian: the Hessian depends on y.
    GeometrySpec s;
    s.shape = {2, 2};
    s.form = MetricForm::Lagrangian;
    s.lagrangian = parseExpr(
        "(2 + 0.5*sin(x1))*y1^2 + (2 + 0.5*cos(x2))*y2^2 + 0.3*x1*y1*y2 + 0.1*y1^2*y2^2", 2, 2);
    s.N = testgeo::parseGrid({{"0", "0"}, {"0", "0"}}, 2, 2);
    Geometry geom = Geometry::load(s);
    auto L = [&](const std::vector<double>& p) { return s.lagrangian.eval(p); };
    for (const Point& u : probePoints(4)) {
        auto g = geom.metricH(u, 0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double hess = testutil::fd2(L, u, 2 + i, 2 + j, 2e-3);
                CHECK_CLOSE(g[i * 2 + j].value(), 0.5 * hess, 1e-7);
                CHECK_CLOSE(g[i * 2 + j].value(), g[j * 2 + i].value(), 1e-14);
            }
    }
}

TEST_CASE("full-metric form recovers the blocks used to build it") {
    GeometrySpec blocks = testgeo::curved22();
    GeometrySpec full;
    full.shape = blocks.shape;
    full.form = MetricForm::FullMetric;
    full.G = fullMetricFromBlocks(blocks);

    Geometry source = Geometry::load(blocks);
    Geometry geom = Geometry::load(full);
    for (const Point& u : probePoints(4)) {
        auto N = geom.nconn(u, 0), wantN = source.nconn(u, 0);
        auto g = geom.metricH(u, 0), wantG = source.metricH(u, 0);
        auto h = geom.metricV(u, 0), wantH = source.metricV(u, 0);
        for (std::size_t k = 0; k < N.size(); ++k)
            CHECK_CLOSE(N[k].value(), wantN[k].value(), 1e-10);
        for (std::size_t k = 0; k < g.size(); ++k)
            CHECK_CLOSE(g[k].value(), wantG[k].value(), 1e-10);
        for (std::size_t k = 0; k < h.size(); ++k)
            CHECK_CLOSE(h[k].value(), wantH[k].value(), 1e-10);
        CHECK(compatibilityResidual(geom, full.G, u) < 1e-12);

        // Jets must agree too (the numeric recovery path is exercised to
        // order 2 against the expression-grid path).
        auto Nj = geom.nconn(u, 2), wantNj = source.nconn(u, 2);
        for (std::size_t k = 0; k < Nj.size(); ++k) {
            for (int a = 0; a < 4; ++a) {
                CHECK_CLOSE(Nj[k].d1(a), wantNj[k].d1(a), 1e-9);
                for (int b = a; b < 4; ++b)
                    CHECK_CLOSE(Nj[k].d2(a, b), wantNj[k].d2(a, b), 1e-8);
            }
        }
    }
}

TEST_CASE("connection recovery from a full metric") {
    SUBCASE("block-diagonal metric gives zero") {
        GeometrySpec s = testgeo::flatSpec(2, 2);
        ExprGrid G = fullMetricFromBlocks(s);
        for (const Point& u : probePoints(4)) {
            auto N = nFromBlockMetric(G, s.shape, u);
            for (double v : N) CHECK_CLOSE(v, 0.0, 1e-14);
        }
    }
    SUBCASE("linear mixed block gives the linear coefficients") {
        // G_ia = h_ab K^b_ci y^c with h = identity: N_i^a = K^a_ci y^c.
        Shape shape{2, 2};
        auto E = [&](const std::string& t) { return parseExpr(t, 2, 2); };
        ExprGrid G(4, std::vector<Expr>(4));
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) G[r][c] = E(r == c ? "1" : "0");
        // K^1_11 = 2, K^1_22 = 3, K^2_12 = 5 (indices a, c, i).
        G[0][2] = E("2*y1");
        G[2][0] = E("2*y1");
        G[1][2] = E("3*y2");
        G[2][1] = E("3*y2");
        G[1][3] = E("5*y1");
        G[3][1] = E("5*y1");
        for (const Point& u : probePoints(4)) {
            auto N = nFromBlockMetric(G, shape, u);
            CHECK_CLOSE(N[0 * 2 + 0], 2 * u[2], 1e-12);
            CHECK_CLOSE(N[1 * 2 + 0], 3 * u[3], 1e-12);
            CHECK_CLOSE(N[1 * 2 + 1], 5 * u[2], 1e-12);
            CHECK_CLOSE(N[0 * 2 + 1], 0.0, 1e-12);
        }
    }
    SUBCASE("random full metric: defining relation holds by construction") {
        GeometrySpec blocks = testgeo::curved32();
        ExprGrid G = fullMetricFromBlocks(blocks);
        const int n = 3, m = 2;
        for (const Point& u : probePoints(5)) {
            auto N = nFromBlockMetric(G, blocks.shape, u);
            for (int i = 0; i < n; ++i)
                for (int a = 0; a < m; ++a) {
                    double rhs = 0;
                    for (int b = 0; b < m; ++b)
                        rhs += N[i * m + b] * G[n + b][n + a].eval(u);
                    CHECK_CLOSE(G[i][n + a].eval(u), rhs, 1e-12);
                }
        }
    }
}

TEST_CASE("frame and coframe are mutually inverse and block-triangular") {
    Geometry geom = Geometry::load(testgeo::curved22());
    const int d = 4;
    for (const Point& u : probePoints(4)) {
        FrameStructure fs = frameStructure(geom, u);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double dot = 0;
                for (int mu = 0; mu < d; ++mu)
                    dot += fs.coframe[a * d + mu] * fs.frame[b * d + mu];
                CHECK_CLOSE(dot, a == b ? 1.0 : 0.0, 1e-12);
            }
    }
}

TEST_CASE("zero nonlinear connection gives a holonomic frame") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 3));
    for (const Point& u : probePoints(5)) {
        FrameStructure fs = frameStructure(geom, u);
        for (double v : fs.w) CHECK_CLOSE(v, 0.0, 1e-15);
        for (double v : fs.omega) CHECK_CLOSE(v, 0.0, 1e-15);
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b) {
                CHECK_CLOSE(fs.frame[a * 5 + b], a == b ? 1.0 : 0.0, 1e-15);
                CHECK_CLOSE(fs.coframe[a * 5 + b], a == b ? 1.0 : 0.0, 1e-15);
            }
    }
}

TEST_CASE("bracket coefficients match a finite-difference Lie-bracket oracle") {
    for (auto spec : {testgeo::curved22(), testgeo::curved32()}) {
        Geometry geom = Geometry::load(spec);
        const int n = spec.shape.n, m = spec.shape.m, d = spec.shape.d();
        std::mt19937_64 rng(1234);
        for (int trial = 0; trial < 10; ++trial) {
            Point u = testutil::randomPoint(rng, d, -0.8, 0.8);
            FrameStructure fs = frameStructure(geom, u);

            // Frame coefficient A_alpha^mu as a plain function of the point.
            auto frameCoeff = [&](const Point& p, int alpha, int mu) -> double {
                if (alpha < n && mu >= n) {
                    auto N = geom.nconn(p, 0);
                    return -N[alpha * m + (mu - n)].value();
                }
                return alpha == mu ? 1.0 : 0.0;
            };
            for (int alpha = 0; alpha < d; ++alpha)
                for (int beta = alpha + 1; beta < d; ++beta)
                    for (int mu = 0; mu < d; ++mu) {
                        double bracket = 0;
                        for (int nu = 0; nu < d; ++nu) {
                            auto fB = [&](const Point& p) { return frameCoeff(p, beta, mu); };
                            auto fA = [&](const Point& p) { return frameCoeff(p, alpha, mu); };
                            bracket += frameCoeff(u, alpha, nu) * testutil::fd1(fB, u, nu, 1e-3) -
                                       frameCoeff(u, beta, nu) * testutil::fd1(fA, u, nu, 1e-3);
                        }
                        // Express the bracket in the frame.
                        double want = 0;
                        for (int gamma = 0; gamma < d; ++gamma)
                            want += fs.w[(gamma * d + alpha) * d + beta] * fs.frame[gamma * d + mu];
                        CHECK_CLOSE(want, bracket, 1e-7);
                    }
        }
    }
}

TEST_CASE("bracket coefficient structure: antisymmetry and known blocks") {
    GeometrySpec spec = testgeo::curved22();
    Geometry geom = Geometry::load(spec);
    const int n = 2, m = 2, d = 4;
    for (const Point& u : probePoints(4, 5)) {
        FrameStructure fs = frameStructure(geom, u);
        auto N = geom.nconn(u, 1);
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    CHECK_CLOSE(fs.w[(g * d + a) * d + b], -fs.w[(g * d + b) * d + a], 1e-12);
        // Horizontal-horizontal brackets are vertical with coefficient Omega.
        for (int a = 0; a < m; ++a)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    CHECK_CLOSE(fs.w[((n + a) * d + i) * d + j], fs.omega[(a * n + i) * n + j],
                                1e-12);
                    CHECK_CLOSE(fs.w[(a * d + i) * d + j], 0.0, 1e-14); // no horizontal part
                }
        // Mixed brackets give the y-derivative of N.
        for (int c = 0; c < m; ++c)
            for (int j = 0; j < n; ++j)
                for (int b = 0; b < m; ++b)
                    CHECK_CLOSE(fs.w[((n + c) * d + j) * d + (n + b)],
                                N[j * m + c].d1(n + b), 1e-12);
        // Vertical-vertical brackets vanish.
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    CHECK_CLOSE(fs.w[(g * d + (n + a)) * d + (n + b)], 0.0, 1e-14);
    }
}

TEST_CASE("adapted frame block-diagonalizes a compatible full metric") {
    GeometrySpec blocks = testgeo::curved22();
    ExprGrid G = fullMetricFromBlocks(blocks);
    Geometry geom = Geometry::load(blocks);
    const int d = 4;
    for (const Point& u : probePoints(4)) {
        FrameStructure fs = frameStructure(geom, u);
        auto want = geom.dmetric(u, 0);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double s = 0;
                for (int mu = 0; mu < d; ++mu)
                    for (int nu = 0; nu < d; ++nu)
                        s += fs.frame[a * d + mu] * fs.frame[b * d + nu] * G[mu][nu].eval(u);
                CHECK_CLOSE(s, want[a * d + b].value(), 1e-12);
            }
    }
}

TEST_CASE("compatibility residual grows linearly in a connection perturbation") {
    GeometrySpec blocks = testgeo::curved22();
    ExprGrid G = fullMetricFromBlocks(blocks);
    Point u = probePoints(4, 1)[0];

    Geometry exact = Geometry::load(blocks);
    CHECK(compatibilityResidual(exact, G, u) < 1e-12);

    double prev = 0;
    for (double eps : {1e-3, 2e-3, 4e-3}) {
        GeometrySpec bumped = blocks;
        bumped.N[0][1] = exprAdd(blocks.N[0][1], exprConst(eps, 2, 2));
        Geometry geom = Geometry::load(bumped);
        double r = compatibilityResidual(geom, G, u);
        CHECK(r > 1e-5);
        if (prev > 0) CHECK_CLOSE(r / prev, 2.0, 1e-3);
        prev = r;
    }
}

TEST_CASE("block-diagonal metric with zero connection has zero residual") {
    GeometrySpec s = testgeo::flatSpec(3, 2);
    ExprGrid G = fullMetricFromBlocks(s);
    Geometry geom = Geometry::load(s);
    for (const Point& u : probePoints(5))
        CHECK(compatibilityResidual(geom, G, u) < 1e-15);
}

TEST_CASE("d-metric inverse inverts blockwise") {
    Geometry geom = Geometry::load(testgeo::curved32());
    const int d = 5;
    for (const Point& u : probePoints(5)) {
        auto G = geom.dmetric(u, 1);
        auto Ginv = geom.dmetricInverse(u, 1);
        auto I = jetMatMul(G, Ginv, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                CHECK_CLOSE(I[a * d + b].value(), a == b ? 1.0 : 0.0, 1e-12);
                for (int c = 0; c < d; ++c) CHECK_CLOSE(I[a * d + b].d1(c), 0.0, 1e-11);
            }
    }
}

TEST_CASE("malformed geometry specs are rejected") {
    SUBCASE("non-symmetric base block") {
        GeometrySpec s = testgeo::flatSpec(2, 2);
        s.g[0][1] = exprConst(0.5, 2, 2); // g[1][0] stays 0
        CHECK_THROWS_AS(Geometry::load(s), DomainError);
    }
    SUBCASE("singular fiber block") {
        GeometrySpec s = testgeo::flatSpec(2, 2);
        s.h[1][1] = exprConst(0.0, 2, 2);
        CHECK_THROWS_AS(Geometry::load(s), DomainError);
    }
    SUBCASE("dimension mismatch in the connection grid") {
        GeometrySpec s = testgeo::flatSpec(2, 2);
        s.N.pop_back();
        CHECK_THROWS_AS(Geometry::load(s), DomainError);
    }
    SUBCASE("Lagrangian with unequal dimensions") {
        GeometrySpec s;
        s.shape = {2, 1};
        s.form = MetricForm::Lagrangian;
        s.lagrangian = parseExpr("y1^2", 2, 1);
        s.N = testgeo::parseGrid({{"0"}, {"0"}}, 2, 1);
        CHECK_THROWS_AS(Geometry::load(s), DomainError);
    }
    SUBCASE("expression over the wrong dimensions") {
        GeometrySpec s = testgeo::flatSpec(2, 2);
        s.g[0][0] = parseExpr("1 + x1", 3, 2);
        CHECK_THROWS_AS(Geometry::load(s), DomainError);
    }
}
