#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "aniso/connection.hpp"
#include "aniso/curvature.hpp"
#include "aniso/errors.hpp"
#include "aniso/namap.hpp"
#include "test_geoms.hpp"
#include "test_util.hpp"

using namespace aniso;

namespace {

int idx3(int a, int b, int c, int d) { return (a * d + b) * d + c; }

std::vector<Jet> addJets(const std::vector<Jet>& a, const std::vector<Jet>& b) {
    std::vector<Jet> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + b[i]);
    return out;
}

double jetDiffMax(const std::vector<Jet>& a, const std::vector<Jet>& b) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, (a[i] - b[i]).maxAbs());
    return out;
}

std::vector<Jet> randomCovectorJets(const Shape& shape, std::uint64_t seed, const Point& u,
                                    int order) {
    const int d = shape.d();
    std::vector<Jet> out;
    out.reserve(d);
    for (int i = 0; i < d; ++i)
        out.push_back(randomPolyExpr(shape, seed + 13 * i).evalJet(u, order));
    return out;
}

// Random symmetric deformation jets (not of trace type).
std::vector<Jet> randomSymJets(const Shape& shape, std::uint64_t seed, const Point& u, int order,
                               double scale) {
    const int d = shape.d();
    std::vector<Jet> out(static_cast<std::size_t>(d) * d * d,
                         Jet::constant(d, order, 0.0));
    std::uint64_t k = seed;
    for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be)
            for (int ga = 0; ga <= be; ++ga) {
                Jet j = scale * randomPolyExpr(shape, ++k).evalJet(u, order);
                out[idx3(al, be, ga, d)] = j;
                out[idx3(al, ga, be, d)] = j;
            }
    return out;
}

// Covariant derivative values of a covector against full coefficient values.
std::vector<double> covDerLower(const std::vector<Jet>& q, const std::vector<double>& conn,
                                const std::vector<Jet>& N, int n, int m) {
    const int d = n + m;
    std::vector<double> out(static_cast<std::size_t>(d) * d, 0.0);
    for (int al = 0; al < d; ++al)
        for (int dir = 0; dir < d; ++dir) {
            double s = frameDeriv(q[al], N, n, m, dir).value();
            for (int t = 0; t < d; ++t) s -= conn[idx3(t, al, dir, d)] * q[t].value();
            out[al * d + dir] = s;
        }
    return out;
}

std::vector<double> jetVals(const std::vector<Jet>& jets) {
    std::vector<double> out;
    out.reserve(jets.size());
    for (const Jet& j : jets) out.push_back(j.value());
    return out;
}

}  // namespace

TEST_CASE("deformation split reassembles exactly and recovers trace covectors") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection canon = DConnection::build(geom, ConnKind::Canonical);
    DConnection berwald = DConnection::build(geom, ConnKind::Berwald);
    const Point u = {0.3, -0.2, 0.4, 0.1};
    const int d = 4;

    DeformationSplit split = splitDeformation(canon, berwald, u, 1);
    const std::vector<Jet> gA = canon.gamma(u, 1);
    const std::vector<Jet> gB = berwald.gamma(u, 1);

    double reasm = 0.0, pq = 0.0, psym = 0.0, qanti = 0.0;
    for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be)
            for (int ga = 0; ga < d; ++ga) {
                const int i = idx3(al, be, ga, d);
                reasm = std::max(reasm, (split.symA[i] + split.antA[i] - gA[i]).maxAbs());
                reasm = std::max(reasm, (split.symB[i] + split.antB[i] - gB[i]).maxAbs());
                pq = std::max(pq, (split.P[i] + split.Q[i] - (gB[i] - gA[i])).maxAbs());
                psym = std::max(psym, (split.P[i] - split.P[idx3(al, ga, be, d)]).maxAbs());
                qanti = std::max(qanti, (split.Q[i] + split.Q[idx3(al, ga, be, d)]).maxAbs());
            }
    CHECK(reasm == 0.0);
    CHECK(pq == 0.0);
    CHECK(psym == 0.0);
    CHECK(qanti <= 1e-13);

    SUBCASE("same connection gives zero deformation") {
        DeformationSplit same = splitDeformation(canon, canon, u, 1);
        double p = 0.0, q = 0.0;
        for (const Jet& j : same.P) p = std::max(p, j.maxAbs());
        for (const Jet& j : same.Q) q = std::max(q, j.maxAbs());
        CHECK(p == 0.0);
        CHECK(q == 0.0);
    }

    SUBCASE("trace deformation round trip recovers the covector") {
        const std::vector<Jet> psi = randomCovectorJets(geom.shape(), 901, u, 2);
        const std::vector<Jet> def = traceDeformation(2, 2, psi);
        DeformationSplit tr = splitCoefficients(2, 2, gA, addJets(gA, def));
        const std::vector<Jet> rec = traceCovector(tr);
        CHECK(jetDiffMax(rec, psi) <= 1e-12);
    }

    SUBCASE("mismatched frames are rejected") {
        GeometrySpec other = testgeo::curved22();
        other.N = testgeo::parseGrid({{"0.5*y1", "0.1*x1"}, {"0.2*y2", "0.3*x2"}}, 2, 2);
        Geometry geomOther = Geometry::load(other);
        DConnection connOther = DConnection::build(geomOther, ConnKind::Canonical);
        CHECK_THROWS_AS(splitDeformation(canon, connOther, u, 1), DomainError);
        CHECK_THROWS_AS(splitCoefficients(2, 2, gA, std::vector<Jet>(3, gA[0])), DomainError);
    }
}

TEST_CASE("transport residual vanishes exactly where the law holds") {
    Geometry flat = Geometry::load(testgeo::flatSpec(2, 2));
    DConnection conn = DConnection::build(flat, ConnKind::Canonical);
    const std::vector<double> u0 = {0.1, 0.2, -0.3, 0.4};
    const std::vector<double> w = {0.5, -0.3, 0.2, 0.7};

    SUBCASE("straight line in a flat space") {
        std::vector<CurveSample> samples;
        for (int j = 0; j <= 6; ++j) {
            CurveSample s;
            s.eta = 0.1 * j;
            for (int k = 0; k < 4; ++k) s.u.push_back(u0[k] + s.eta * w[k]);
            s.v = w;
            s.rho = 0.0;
            samples.push_back(s);
        }
        TransportReport rep = aparallelResidual(conn, samples);
        CHECK(rep.maxResidual <= 1e-13);
        CHECK(rep.tangentError <= 1e-12);
    }

    SUBCASE("reparametrized straight line with the induced factor") {
        std::vector<CurveSample> samples;
        for (int j = 0; j <= 6; ++j) {
            CurveSample s;
            s.eta = 0.1 * j;
            const double sp = s.eta + 0.3 * s.eta * s.eta;   // new parameter
            const double ds = 1.0 + 0.6 * s.eta;             // its rate
            for (int k = 0; k < 4; ++k) s.u.push_back(u0[k] + sp * w[k]);
            for (int k = 0; k < 4; ++k) s.v.push_back(ds * w[k]);
            s.rho = 0.6 / ds;  // second rate over first
            samples.push_back(s);
        }
        TransportReport rep = aparallelResidual(conn, samples);
        CHECK(rep.maxResidual <= 1e-12);
    }

    SUBCASE("generic curve on a curved space misses the law") {
        Geometry geom = Geometry::load(testgeo::curved22());
        DConnection curved = DConnection::build(geom, ConnKind::Canonical);
        const std::vector<double> c = {0.2, 0.1, -0.3, 0.15};
        std::vector<CurveSample> samples;
        for (int j = 0; j <= 6; ++j) {
            CurveSample s;
            s.eta = 0.1 * j;
            for (int k = 0; k < 4; ++k)
                s.u.push_back(u0[k] + s.eta * w[k] * 0.5 + s.eta * s.eta * c[k]);
            for (int k = 0; k < 4; ++k) s.v.push_back(0.5 * w[k] + 2.0 * s.eta * c[k]);
            s.rho = 0.0;
            samples.push_back(s);
        }
        TransportReport rep = aparallelResidual(curved, samples);
        CHECK(rep.maxResidual > 1e-5);
    }

    SUBCASE("inconsistent tangents and bad sampling are rejected") {
        std::vector<CurveSample> samples;
        for (int j = 0; j <= 4; ++j) {
            CurveSample s;
            s.eta = 0.1 * j;
            for (int k = 0; k < 4; ++k) s.u.push_back(u0[k] + s.eta * w[k]);
            for (int k = 0; k < 4; ++k) s.v.push_back(w[k] + 0.5);
            samples.push_back(s);
        }
        CHECK_THROWS_AS(aparallelResidual(conn, samples), DomainError);
        samples.resize(2);
        CHECK_THROWS_AS(aparallelResidual(conn, samples), DomainError);
        std::vector<CurveSample> bad(3);
        for (int j = 0; j < 3; ++j) {
            bad[j].eta = 0.0;
            bad[j].u = u0;
            bad[j].v = w;
        }
        CHECK_THROWS_AS(aparallelResidual(conn, bad), DomainError);
    }
}

TEST_CASE("tangent-contracted deformation system closes with its induced parameters") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.25, -0.3, 0.2, 0.35};
    const Shape shape = geom.shape();
    const int n = 2, m = 2, d = 4;

    SUBCASE("zero map gives zero residuals") {
        NaMapJets data;
        data.n = n;
        data.m = m;
        data.P.assign(static_cast<std::size_t>(d) * d * d, Jet::constant(d, 1, 0.0));
        BasicResidualReport rep = naBasicResidual(data, conn, {0.4, -0.2, 0.3, 0.5}, u, 0.0, 0.0);
        CHECK(rep.deformation == 0.0);
        CHECK(rep.metricity <= 1e-12);  // metric-compatible connection, no target nonmetricity
    }

    SUBCASE("trace deformation closes with its contracted parameters") {
        const std::vector<Jet> psi = randomCovectorJets(shape, 311, u, 1);
        NaMapJets data;
        data.n = n;
        data.m = m;
        data.P = traceDeformation(n, m, psi);
        const std::vector<double> v = {0.4, -0.2, 0.3, 0.5};
        const std::vector<double> gam = jetVals(conn.gamma(u, 0));
        const std::vector<Jet> N = geom.nconn(u, 1);
        const std::vector<double> Dpsi = covDerLower(psi, gam, N, n, m);
        double b = 0.0, a = 0.0;
        for (int g = 0; g < d; ++g) b += 2.0 * psi[g].value() * v[g];
        for (int be = 0; be < d; ++be)
            for (int g = 0; g < d; ++g) a += 2.0 * v[be] * v[g] * Dpsi[g * d + be];
        BasicResidualReport rep = naBasicResidual(data, conn, v, u, a, b);
        CHECK(rep.deformation <= 1e-9);

        BasicResidualReport wrong = naBasicResidual(data, conn, v, u, a, -b);
        CHECK(wrong.deformation > 1e-6);
    }

    SUBCASE("metric system matches a fabricated target nonmetricity") {
        std::mt19937_64 rng(77);
        NaMapJets data;
        data.n = n;
        data.m = m;
        data.P = randomSymJets(shape, 500, u, 1, 0.3);
        data.Q.assign(static_cast<std::size_t>(d) * d * d, Jet::constant(d, 1, 0.0));
        std::uint64_t k = 600;
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                for (int ga = 0; ga < be; ++ga) {
                    Jet j = 0.3 * randomPolyExpr(shape, ++k).evalJet(u, 1);
                    data.Q[idx3(al, be, ga, d)] = j;
                    data.Q[idx3(al, ga, be, d)] = -j;
                }
        // Target nonmetricity: the metric derivative of the deformed connection.
        const std::vector<double> gam = jetVals(conn.gamma(u, 0));
        const std::vector<Jet> N = geom.nconn(u, 1);
        const std::vector<Jet> G = geom.dmetric(u, 1);
        data.K.assign(static_cast<std::size_t>(d) * d * d, Jet::constant(d, 1, 0.0));
        for (int dir = 0; dir < d; ++dir)
            for (int be = 0; be < d; ++be)
                for (int ga = 0; ga < d; ++ga) {
                    double s = frameDeriv(G[be * d + ga], N, n, m, dir).value();
                    for (int t = 0; t < d; ++t) {
                        const double full = gam[idx3(t, be, dir, d)] +
                                            data.P[idx3(t, be, dir, d)].value() +
                                            data.Q[idx3(t, be, dir, d)].value();
                        s -= full * G[t * d + ga].value();
                        const double full2 = gam[idx3(t, ga, dir, d)] +
                                             data.P[idx3(t, ga, dir, d)].value() +
                                             data.Q[idx3(t, ga, dir, d)].value();
                        s -= full2 * G[be * d + t].value();
                    }
                    data.K[idx3(dir, be, ga, d)] = Jet::constant(d, 1, s);
                }
        BasicResidualReport rep = naBasicResidual(data, conn, {0.4, -0.2, 0.3, 0.5}, u, 0.0, 0.0);
        CHECK(rep.metricity <= 1e-12);
        (void)rng;
    }
}

TEST_CASE("class systems close on their defining data") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.25, -0.3, 0.2, 0.35};
    const Shape shape = geom.shape();
    const int n = 2, m = 2, d = 4;

    SUBCASE("trace deformations satisfy the class-1 system with induced parameters") {
        const std::vector<Jet> psi = randomCovectorJets(shape, 1201, u, 1);
        NaMapJets data;
        data.n = n;
        data.m = m;
        data.P = traceDeformation(n, m, psi);
        const std::vector<double> gam = jetVals(conn.gamma(u, 0));
        const std::vector<Jet> N = geom.nconn(u, 1);
        const std::vector<double> Dpsi = covDerLower(psi, gam, N, n, m);
        data.b.clear();
        for (int al = 0; al < d; ++al) data.b.push_back(2.0 * psi[al]);
        data.a.assign(static_cast<std::size_t>(d) * d, Jet::constant(d, 1, 0.0));
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                data.a[al * d + be] = Jet::constant(d, 1, Dpsi[al * d + be] + Dpsi[be * d + al]);
        ClassResidualReport rep = naClassResidual(1, data, conn, u);
        CHECK(rep.residual <= 1e-9);
        CHECK(rep.parameterMode == "supplied");

        data.b.clear();
        data.a.clear();
        ClassResidualReport solved = naClassResidual(1, data, conn, u);
        CHECK(solved.residual <= 1e-9);
        CHECK(solved.parameterMode == "least-squares");
    }

    SUBCASE("degenerate structure tensor reduces the class-2 system") {
        NaMapJets data;
        data.n = n;
        data.m = m;
        data.F.assign(static_cast<std::size_t>(d) * d, Jet::constant(d, 1, 0.0));
        data.sigma = randomCovectorJets(shape, 41, u, 1);
        data.nu.assign(d, Jet::constant(d, 1, 0.0));
        data.mu.assign(d, Jet::constant(d, 1, 0.0));
        ClassResidualReport rep = naClassResidual(2, data, conn, u);
        CHECK(rep.residual == 0.0);

        for (int i = 0; i < d; ++i) data.nu[i] = Jet::constant(d, 1, 0.2 + 0.1 * i);
        ClassResidualReport bad = naClassResidual(2, data, conn, u);
        CHECK(bad.residual > 1e-6);
    }

    SUBCASE("conformal vector fields satisfy the class-3 system") {
        Geometry flat = Geometry::load(testgeo::flatSpec(2, 1));
        DConnection fconn = DConnection::build(flat, ConnKind::Canonical);
        const Point p = {0.3, -0.4, 0.5};
        const Expr omega = parseExpr("exp(0.15*(x1*x1 + x2*x2 + y1*y1))", 2, 1);
        NaMapData data = concircularCase(flat, omega, p);
        NaMapJets jets = evalMapData(data, p, 2);
        jets.nu = {Jet::constant(3, 1, 0.3)};
        jets.mu.assign(3, Jet::constant(3, 1, 0.0));
        ClassResidualReport rep = naClassResidual(3, jets, fconn, p);
        CHECK(rep.residual <= 1e-12);
        CHECK(rep.parameterMode == "supplied");

        jets.nu.clear();
        jets.mu.clear();
        ClassResidualReport solved = naClassResidual(3, jets, fconn, p);
        CHECK(solved.residual <= 1e-9);
        CHECK(solved.parameterMode == "least-squares");
    }

    SUBCASE("missing fields and unknown classes are rejected") {
        NaMapJets data;
        data.n = n;
        data.m = m;
        CHECK_THROWS_AS(naClassResidual(1, data, conn, u), DomainError);
        CHECK_THROWS_AS(naClassResidual(2, data, conn, u), DomainError);
        CHECK_THROWS_AS(naClassResidual(3, data, conn, u), DomainError);
        CHECK_THROWS_AS(naClassResidual(5, data, conn, u), DomainError);
    }
}

TEST_CASE("class-1 system integrates along a coordinate line") {
    // One-dimensional model on a flat (1,1) space: the symmetric deformation
    // depends on the first coordinate only, the free parameters are chosen
    // analytically, and the dependent ones are forced by the purely algebraic
    // component of the cyclic system.  Integrating the remaining components as
    // an ODE system and handing the result back as jets must satisfy the full
    // system to roundoff.
    Geometry geom = Geometry::load(testgeo::flatSpec(1, 1));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);

    // State: P^0_00, P^0_01, P^0_11, P^1_00, P^1_01, P^1_11.
    auto b0f = [](double t) { return 0.4 * std::sin(t) + 0.1; };
    auto a00f = [](double t) { return 0.3 * std::cos(t); };
    auto a01f = [](double t) { return 0.2 + 0.1 * t; };
    auto algebraic = [](const std::vector<double>& P, double& b1, double& a11) {
        b1 = P[1] + P[5];  // (P^t_11 P^0_1t) / P^0_11 collapses to P^0_01 + P^1_11
        a11 = P[2] * P[4] + P[5] * P[5] - b1 * P[5];
    };
    auto rhs = [&](const std::vector<double>& P, double t) {
        double b1, a11;
        algebraic(P, b1, a11);
        const double b0 = b0f(t), a00 = a00f(t), a01 = a01f(t);
        std::vector<double> dP(6, 0.0);
        dP[0] = -(P[0] * P[0] + P[3] * P[1]) + b0 * P[0] + a00;
        dP[3] = -(P[0] * P[3] + P[3] * P[4]) + b0 * P[3];
        dP[1] = 0.5 * (-(P[0] * P[1] + P[3] * P[2]) - 2.0 * (P[1] * P[0] + P[4] * P[1]) +
                       2.0 * b0 * P[1] + b1 * P[0] + 2.0 * a01);
        dP[4] = 0.5 * (-(P[0] * P[4] + P[3] * P[5]) - 2.0 * (P[1] * P[3] + P[4] * P[4]) +
                       2.0 * b0 * P[4] + b1 * P[3] + a00);
        dP[2] = -2.0 * (P[1] * P[1] + P[4] * P[2]) - (P[2] * P[0] + P[5] * P[1]) + b0 * P[2] +
                2.0 * b1 * P[1] + a11;
        dP[5] = -2.0 * (P[1] * P[4] + P[4] * P[5]) - (P[2] * P[3] + P[5] * P[4]) + b0 * P[5] +
                2.0 * b1 * P[4] + 2.0 * a01;
        return dP;
    };

    std::vector<double> P = {0.3, -0.2, 0.8, 0.1, 0.4, -0.3};
    const double h = 1e-3;
    const double tstar = 0.15;
    double t = 0.0;
    while (t < tstar - 0.5 * h) {
        const std::vector<double> k1 = rhs(P, t);
        std::vector<double> tmp(6);
        for (int i = 0; i < 6; ++i) tmp[i] = P[i] + 0.5 * h * k1[i];
        const std::vector<double> k2 = rhs(tmp, t + 0.5 * h);
        for (int i = 0; i < 6; ++i) tmp[i] = P[i] + 0.5 * h * k2[i];
        const std::vector<double> k3 = rhs(tmp, t + 0.5 * h);
        for (int i = 0; i < 6; ++i) tmp[i] = P[i] + h * k3[i];
        const std::vector<double> k4 = rhs(tmp, t + h);
        for (int i = 0; i < 6; ++i)
            P[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t += h;
    }
    CHECK(std::fabs(t - tstar) <= 1e-9);
    CHECK(std::fabs(P[2]) > 0.1);  // the algebraic divisor stayed away from zero

    const std::vector<double> dP = rhs(P, tstar);
    auto jetOf = [&](double val, double dval) {
        return dval * Jet::variable(2, 1, 0, 0.0) + val;
    };
    NaMapJets data;
    data.n = 1;
    data.m = 1;
    data.P.assign(8, Jet::constant(2, 1, 0.0));
    const int comp[2][2] = {{0, 1}, {1, 2}};
    for (int de = 0; de < 2; ++de)
        for (int be = 0; be < 2; ++be)
            for (int ga = 0; ga < 2; ++ga) {
                const int c = de * 3 + comp[be][ga];
                data.P[idx3(de, be, ga, 2)] = jetOf(P[c], dP[c]);
            }
    double b1, a11;
    algebraic(P, b1, a11);
    data.b = {Jet::constant(2, 1, b0f(tstar)), Jet::constant(2, 1, b1)};
    data.a.assign(4, Jet::constant(2, 1, 0.0));
    data.a[0] = Jet::constant(2, 1, a00f(tstar));
    data.a[1] = data.a[2] = Jet::constant(2, 1, a01f(tstar));
    data.a[3] = Jet::constant(2, 1, a11);

    const Point u = {tstar, 0.2};
    ClassResidualReport rep = naClassResidual(1, data, conn, u);
    CHECK(rep.residual <= 1e-6);
    CHECK(rep.residual <= 1e-9);  // the jets are self-consistent, so only roundoff remains
}

TEST_CASE("trace-map invariant packs match and witness non-trace maps") {
    Geometry geom = Geometry::load(testgeo::curved22());
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.3, -0.2, 0.4, 0.1};
    const Shape shape = geom.shape();
    const std::vector<Jet> gA = conn.gamma(u, 1);
    const std::vector<Jet> psi = randomCovectorJets(shape, 2101, u, 2);
    const std::vector<Jet> gB = addJets(gA, traceDeformation(2, 2, psi));
    NaMapJets empty;
    empty.n = 2;
    empty.m = 2;

    InvariantReport rep = invariantsFromJets(0, geom, gA, gB, empty, u);
    CHECK(rep.thomasMismatch <= 1e-12);
    CHECK(rep.weylMismatch <= 1e-8);
    CHECK(rep.packA.weylTrace <= 1e-9);
    CHECK(rep.packB.weylTrace <= 1e-9);

    SUBCASE("identical connections give exactly equal packs") {
        InvariantReport same = invariants(0, conn, conn, empty, u);
        CHECK(same.thomasMismatch == 0.0);
        CHECK(same.weylMismatch == 0.0);
    }

    SUBCASE("a generic symmetric deformation moves the curvature invariant") {
        const std::vector<Jet> gC = addJets(gA, randomSymJets(shape, 2500, u, 2, 0.4));
        InvariantReport bad = invariantsFromJets(0, geom, gA, gC, empty, u);
        CHECK(bad.weylMismatch > 1e-4);
    }

    SUBCASE("packs are stable under a further shared trace deformation") {
        const std::vector<Jet> psi2 = randomCovectorJets(shape, 2300, u, 2);
        const std::vector<Jet> extra = traceDeformation(2, 2, psi2);
        InvariantReport shifted =
            invariantsFromJets(0, geom, addJets(gA, extra), addJets(gB, extra), empty, u);
        CHECK(std::fabs(shifted.thomasMismatch - rep.thomasMismatch) <= 1e-8);
        CHECK(std::fabs(shifted.weylMismatch - rep.weylMismatch) <= 1e-8);
    }

    SUBCASE("two standard connections on one geometry compare cleanly") {
        DConnection berwald = DConnection::build(geom, ConnKind::Berwald);
        InvariantReport two = invariants(0, conn, berwald, empty, u);
        CHECK(std::isfinite(two.thomasMismatch));
        CHECK(std::isfinite(two.weylMismatch));
    }
}

TEST_CASE("structure-tensor packs match for structure-compatible deformations") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 2));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.2, -0.3, 0.4, 0.1};
    const Shape shape = geom.shape();
    const int d = 4;
    const std::vector<Jet> gA = conn.gamma(u, 1);

    // A constant complex-structure tensor: F squared is minus the identity.
    const double Fval[4][4] = {
        {0, -1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, -1}, {0, 0, 1, 0}};
    NaMapJets data;
    data.n = 2;
    data.m = 2;
    data.F.reserve(16);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) data.F.push_back(Jet::constant(d, 2, Fval[i][j]));
    const std::vector<Jet> sigma = randomCovectorJets(shape, 3100, u, 2);
    data.sigma = sigma;

    const std::vector<Jet> psi = randomCovectorJets(shape, 3200, u, 2);
    std::vector<Jet> def = traceDeformation(2, 2, psi);
    for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be)
            for (int ga = 0; ga < d; ++ga)
                def[idx3(al, be, ga, d)] =
                    def[idx3(al, be, ga, d)] +
                    sigma[be] * data.F[al * d + ga] + sigma[ga] * data.F[al * d + be];
    const std::vector<Jet> gB = addJets(gA, def);

    InvariantReport rep = invariantsFromJets(2, geom, gA, gB, data, u);
    CHECK(rep.thomasMismatch <= 1e-8);
    CHECK(rep.weylMismatch <= 1e-8);
    CHECK(rep.packA.auxConn.size() == 64);
    CHECK(rep.packB.auxConn.size() == 64);

    SUBCASE("an incompatible extra deformation is detected") {
        const std::vector<Jet> gC = addJets(gB, randomSymJets(shape, 3300, u, 2, 0.4));
        InvariantReport bad = invariantsFromJets(2, geom, gA, gC, data, u);
        CHECK(bad.weylMismatch > 1e-4);
    }

    SUBCASE("a tensor that does not square to a sign is rejected") {
        NaMapJets wrong = data;
        for (int i = 0; i < 4; ++i) wrong.F[i * d + i] = Jet::constant(d, 2, 2.0);
        CHECK_THROWS_AS(invariantsFromJets(2, geom, gA, gB, wrong, u), DomainError);
        NaMapJets none;
        none.n = 2;
        none.m = 2;
        CHECK_THROWS_AS(invariantsFromJets(2, geom, gA, gB, none, u), DomainError);
    }
}

TEST_CASE("sign-structure packs match across the conformal special case") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 1));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.3, -0.4, 0.5};
    const Expr omega = parseExpr("exp(0.15*(x1*x1 + x2*x2 + y1*y1))", 2, 1);
    NaMapData data = concircularCase(geom, omega, u);
    NaMapJets jets = evalMapData(data, u, 2);

    double qphi = 0.0;
    for (int i = 0; i < 3; ++i) qphi += jets.q[i].value() * jets.phi[i].value();
    CHECK_CLOSE(qphi, 1.0, 1e-12);

    const std::vector<Jet> gA = conn.gamma(u, 1);
    const std::vector<Jet> gB = addJets(gA, jets.P);
    InvariantReport rep = invariantsFromJets(3, geom, gA, gB, jets, u);
    CHECK(rep.thomasMismatch <= 1e-8);
    CHECK(rep.weylMismatch <= 1e-8);
    CHECK(rep.packA.weylTrace <= 1e-8);
    CHECK(rep.packB.weylTrace <= 1e-8);
    CHECK(rep.packA.pTensor.size() == 9);

    SUBCASE("a generic extra deformation is detected") {
        const std::vector<Jet> gC = addJets(gB, randomSymJets(geom.shape(), 4100, u, 2, 0.4));
        InvariantReport bad = invariantsFromJets(3, geom, gA, gC, jets, u);
        CHECK(std::max(bad.thomasMismatch, bad.weylMismatch) > 1e-4);
    }

    SUBCASE("mismatched pairings and low dimensions are rejected") {
        NaMapJets scaled = jets;
        for (Jet& q : scaled.q) q = 2.0 * q;
        CHECK_THROWS_AS(invariantsFromJets(3, geom, gA, gB, scaled, u), DomainError);
        NaMapJets none;
        none.n = 2;
        none.m = 1;
        CHECK_THROWS_AS(invariantsFromJets(3, geom, gA, gB, none, u), DomainError);

        Geometry low = Geometry::load(testgeo::flatSpec(1, 1));
        DConnection lconn = DConnection::build(low, ConnKind::Canonical);
        const Point lu = {0.1, 0.2};
        const std::vector<Jet> lg = lconn.gamma(lu, 1);
        NaMapJets ldata;
        ldata.n = 1;
        ldata.m = 1;
        CHECK_THROWS_AS(invariantsFromJets(3, low, lg, lg, ldata, lu), DomainError);
    }
}

TEST_CASE("class-1 criterion vanishes for trace maps on holonomic frames") {
    Geometry geom = Geometry::load(testgeo::riemannLift(2));
    DConnection conn = DConnection::build(geom, ConnKind::Canonical);
    const Point u = {0.3, -0.2, 0.4, 0.1};
    const Shape shape = geom.shape();
    const int d = 4;
    const std::vector<Jet> gA = conn.gamma(u, 1);
    const std::vector<Jet> psi = randomCovectorJets(shape, 5100, u, 2);
    const std::vector<Jet> gB = addJets(gA, traceDeformation(2, 2, psi));

    // Induced parameters: twice the covector, and its symmetrized covariant
    // derivative with respect to the symmetric part of the base connection.
    DeformationSplit split = splitCoefficients(2, 2, gA, gB);
    const std::vector<double> symVals = jetVals(split.symA);
    const std::vector<Jet> N = geom.nconn(u, 1);
    const std::vector<double> Dpsi = covDerLower(psi, symVals, N, 2, 2);
    NaMapJets data;
    data.n = 2;
    data.m = 2;
    for (int al = 0; al < d; ++al) data.b.push_back(2.0 * psi[al]);
    data.a.assign(static_cast<std::size_t>(d) * d, Jet::constant(d, 1, 0.0));
    for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be)
            data.a[al * d + be] = Jet::constant(d, 1, Dpsi[al * d + be] + Dpsi[be * d + al]);

    InvariantReport rep = invariantsFromJets(1, geom, gA, gB, data, u);
    CHECK(rep.criterionResidual <= 1e-9);
    CHECK(rep.parameterMode == "supplied");

    NaMapJets empty;
    empty.n = 2;
    empty.m = 2;
    InvariantReport solved = invariantsFromJets(1, geom, gA, gB, empty, u);
    CHECK(solved.criterionResidual <= 1e-9);
    CHECK(solved.parameterMode == "least-squares");

    SUBCASE("anholonomic frames report a finite raw residual") {
        // With a nonintegrable frame the criterion keeps frame-bracket terms;
        // the residual is reported raw rather than reinterpreted.
        Geometry an = Geometry::load(testgeo::curved22());
        DConnection aconn = DConnection::build(an, ConnKind::Canonical);
        const std::vector<Jet> agA = aconn.gamma(u, 1);
        const std::vector<Jet> apsi = randomCovectorJets(an.shape(), 5200, u, 2);
        const std::vector<Jet> agB = addJets(agA, traceDeformation(2, 2, apsi));
        InvariantReport raw = invariantsFromJets(1, an, agA, agB, empty, u);
        CHECK(std::isfinite(raw.criterionResidual));
    }
}

TEST_CASE("conformal map data has the advertised structure") {
    Geometry geom = Geometry::load(testgeo::flatSpec(2, 1));
    const Point u = {0.3, -0.4, 0.5};

    SUBCASE("constant factors give the identity map data") {
        NaMapData data = concircularCase(geom, parseExpr("1.7", 2, 1), u);
        NaMapJets jets = evalMapData(data, u, 1);
        double pmax = 0.0, phimax = 0.0;
        for (const Jet& j : jets.P) pmax = std::max(pmax, j.maxAbs());
        for (const Jet& j : jets.phi) phimax = std::max(phimax, j.maxAbs());
        CHECK(pmax == 0.0);
        CHECK(phimax == 0.0);
        CHECK(data.q.empty());
    }

    SUBCASE("nonpositive factors are rejected") {
        CHECK_THROWS_AS(concircularCase(geom, parseExpr("-0.5 - x1*x1", 2, 1), u), DomainError);
    }

    SUBCASE("an exponential factor in one coordinate gives a constant field") {
        NaMapData data = concircularCase(geom, parseExpr("exp(0.25*x1)", 2, 1), u);
        NaMapJets jets = evalMapData(data, u, 2);
        CHECK_CLOSE(jets.phi[0].value(), 0.25, 1e-12);
        CHECK(std::fabs(jets.phi[1].value()) <= 1e-12);
        CHECK(std::fabs(jets.phi[2].value()) <= 1e-12);
        CHECK(jets.phi[0].d1(0) <= 1e-12);  // the raised field is constant

        DConnection conn = DConnection::build(geom, ConnKind::Canonical);
        jets.nu.clear();
        jets.mu.clear();
        ClassResidualReport rep = naClassResidual(3, jets, conn, u);
        CHECK(rep.residual <= 1e-8);
    }

    SUBCASE("the symmetric deformation is symmetric exactly") {
        NaMapData data = concircularCase(
            geom, parseExpr("exp(0.15*(x1*x1 + x2*x2 + y1*y1))", 2, 1), u);
        NaMapJets jets = evalMapData(data, u, 1);
        const int d = 3;
        double diff = 0.0;
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                for (int ga = 0; ga < d; ++ga)
                    diff = std::max(diff, (jets.P[idx3(al, be, ga, d)] -
                                           jets.P[idx3(al, ga, be, d)]).maxAbs());
        CHECK(diff == 0.0);
    }

    SUBCASE("grid sizes are validated") {
        NaMapData bad;
        bad.n = 2;
        bad.m = 1;
        bad.P.assign(3, exprConst(0.0, 2, 1));
        CHECK_THROWS_AS(evalMapData(bad, u, 1), DomainError);
    }
}
