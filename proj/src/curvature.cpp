#include "aniso/curvature.hpp"

#include <cmath>
#include <cstddef>
#include <random>

#include "aniso/errors.hpp"

namespace aniso {

namespace {

int idx2(int a, int b, int d) { return a * d + b; }
int idx3(int a, int b, int c, int d) { return (a * d + b) * d + c; }
int idx4(int a, int b, int c, int e, int d) { return ((a * d + b) * d + c) * d + e; }

double kron(int a, int b) { return a == b ? 1.0 : 0.0; }

} // namespace

std::vector<Jet> anholonomy(const Geometry& geom, const Point& u, int order) {
    const int n = geom.shape().n;
    const int m = geom.shape().m;
    const int d = n + m;
    const std::vector<Jet> N = geom.nconn(u, order + 1);

    std::vector<Jet> w(static_cast<std::size_t>(d) * d * d, Jet::constant(d, order, 0.0));
    // Two frame fields along the base close up on the fiber:
    //   [delta_i, delta_j] = (delta_j N_i^c - delta_i N_j^c) d/dy^c.
    for (int c = 0; c < m; ++c)
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Jet val = frameDeriv(N[i * m + c], N, n, m, j) - frameDeriv(N[j * m + c], N, n, m, i);
                w[idx3(n + c, j, i, d)] = -val;
                w[idx3(n + c, i, j, d)] = std::move(val);
            }
    // A base frame field against a fiber one: [delta_j, d/dy^b] = (dN_j^c/dy^b) d/dy^c.
    for (int c = 0; c < m; ++c)
        for (int j = 0; j < n; ++j)
            for (int b = 0; b < m; ++b) {
                Jet val = N[j * m + c].deriv_jet(n + b);
                w[idx3(n + c, n + b, j, d)] = -val;
                w[idx3(n + c, j, n + b, d)] = std::move(val);
            }
    return w;
}

TorsionBlocks torsion(const DConnection& conn, const Point& u, int order) {
    const Geometry& geom = conn.geometry();
    const int n = geom.shape().n;
    const int m = geom.shape().m;
    const int d = n + m;
    const std::vector<Jet> G = conn.gamma(u, order);
    const std::vector<Jet> w = anholonomy(geom, u, order);

    TorsionBlocks out;
    out.n = n;
    out.m = m;
    out.full.assign(static_cast<std::size_t>(d) * d * d, Jet::constant(d, order, 0.0));
    for (int g = 0; g < d; ++g)
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                Jet val = G[idx3(g, a, b, d)] - G[idx3(g, b, a, d)] + w[idx3(g, a, b, d)];
                out.full[idx3(g, b, a, d)] = -val;
                out.full[idx3(g, a, b, d)] = std::move(val);
            }

    out.Th.reserve(static_cast<std::size_t>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) out.Th.push_back(out.full[idx3(i, j, k, d)]);
    out.Tv.reserve(static_cast<std::size_t>(m) * n * n);
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.Tv.push_back(out.full[idx3(n + a, i, j, d)]);
    out.Ph.reserve(static_cast<std::size_t>(n) * n * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int b = 0; b < m; ++b) out.Ph.push_back(out.full[idx3(i, j, n + b, d)]);
    out.Pv.reserve(static_cast<std::size_t>(m) * m * n);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int i = 0; i < n; ++i) out.Pv.push_back(out.full[idx3(n + a, i, n + b, d)]);
    out.S.reserve(static_cast<std::size_t>(m) * m * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) out.S.push_back(out.full[idx3(n + a, n + b, n + c, d)]);
    return out;
}

std::vector<Jet> curvatureTensor(const DConnection& conn, const Point& u, int order) {
    if (order < 0 || order > 1) throw DomainError("curvature tensor: jet order must be 0 or 1");
    const Geometry& geom = conn.geometry();
    const int n = geom.shape().n;
    const int m = geom.shape().m;
    const int d = n + m;
    const std::vector<Jet> G = conn.gamma(u, order + 1);
    const std::vector<Jet> w = anholonomy(geom, u, order);
    const std::vector<Jet> N = geom.nconn(u, order + 1);

    std::vector<Jet> R(static_cast<std::size_t>(d) * d * d * d, Jet::constant(d, order, 0.0));
    for (int dd = 0; dd < d; ++dd)
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a)
                for (int b = a + 1; b < d; ++b) {
                    Jet val = frameDeriv(G[idx3(dd, g, b, d)], N, n, m, a) -
                              frameDeriv(G[idx3(dd, g, a, d)], N, n, m, b);
                    for (int e = 0; e < d; ++e) {
                        val = val + G[idx3(dd, e, a, d)] * G[idx3(e, g, b, d)] -
                              G[idx3(dd, e, b, d)] * G[idx3(e, g, a, d)] -
                              w[idx3(e, a, b, d)] * G[idx3(dd, g, e, d)];
                    }
                    R[idx4(dd, g, b, a, d)] = -val;
                    R[idx4(dd, g, a, b, d)] = std::move(val);
                }
    return R;
}

CurvatureBlocks curvatureBlocks(const DConnection& conn, const Point& u, int order) {
    const int n = conn.geometry().shape().n;
    const int m = conn.geometry().shape().m;
    const int d = n + m;
    CurvatureBlocks out;
    out.n = n;
    out.m = m;
    out.full = curvatureTensor(conn, u, order);

    out.Rhh.reserve(static_cast<std::size_t>(n) * n * n * n);
    for (int i = 0; i < n; ++i)
        for (int h = 0; h < n; ++h)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) out.Rhh.push_back(out.full[idx4(i, h, j, k, d)]);
    out.Rvv.reserve(static_cast<std::size_t>(m) * m * n * n);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) out.Rvv.push_back(out.full[idx4(n + a, n + b, j, k, d)]);
    out.Phh.reserve(static_cast<std::size_t>(n) * n * n * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int c = 0; c < m; ++c) out.Phh.push_back(out.full[idx4(i, j, k, n + c, d)]);
    out.Pvv.reserve(static_cast<std::size_t>(m) * m * n * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int k = 0; k < n; ++k)
                for (int c = 0; c < m; ++c) out.Pvv.push_back(out.full[idx4(n + a, n + b, k, n + c, d)]);
    out.Shh.reserve(static_cast<std::size_t>(n) * n * m * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) out.Shh.push_back(out.full[idx4(i, j, n + b, n + c, d)]);
    out.Svv.reserve(static_cast<std::size_t>(m) * m * m * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                for (int e = 0; e < m; ++e)
                    out.Svv.push_back(out.full[idx4(n + a, n + b, n + c, n + e, d)]);
    return out;
}

TensorField torsionField(const DConnection& conn) {
    TensorField f;
    f.n = conn.geometry().shape().n;
    f.m = conn.geometry().shape().m;
    f.sig = {{Part::Full, true}, {Part::Full, false}, {Part::Full, false}};
    f.eval = [conn](const Point& u, int order) { return torsion(conn, u, order).full; };
    return f;
}

TensorField curvatureField(const DConnection& conn) {
    TensorField f;
    f.n = conn.geometry().shape().n;
    f.m = conn.geometry().shape().m;
    f.sig = {{Part::Full, true}, {Part::Full, false}, {Part::Full, false}, {Part::Full, false}};
    f.eval = [conn](const Point& u, int order) { return curvatureTensor(conn, u, order); };
    return f;
}

CurvatureSummary curvatureSummary(const DConnection& conn, const Point& u) {
    const Geometry& geom = conn.geometry();
    const int n = geom.shape().n;
    const int m = geom.shape().m;
    const int d = n + m;
    const std::vector<Jet> R = curvatureTensor(conn, u, 0);
    const std::vector<Jet> Gl = geom.dmetric(u, 0);
    const std::vector<Jet> Gu = geom.dmetricInverse(u, 0);

    CurvatureSummary s;
    s.n = n;
    s.m = m;
    s.ricci.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double acc = 0.0;
            for (int t = 0; t < d; ++t) acc += R[idx4(t, a, t, b, d)].value();
            s.ricci[idx2(a, b, d)] = acc;
        }
    double scal = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) scal += Gu[idx2(a, b, d)].value() * s.ricci[idx2(a, b, d)];
    s.scalar = scal;

    s.einstein.assign(static_cast<std::size_t>(d) * d, 0.0);
    s.phi.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const double g = Gl[idx2(a, b, d)].value();
            const double r = s.ricci[idx2(a, b, d)];
            s.einstein[idx2(a, b, d)] = r - 0.5 * scal * g;
            s.phi[idx2(a, b, d)] = -0.5 * (r - scal * g / d);
        }

    if (d >= 3) {
        s.weylDefined = true;
        std::vector<double> rmix(static_cast<std::size_t>(d) * d, 0.0); // R^g_a
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a) {
                double acc = 0.0;
                for (int t = 0; t < d; ++t) acc += Gu[idx2(g, t, d)].value() * s.ricci[idx2(t, a, d)];
                rmix[idx2(g, a, d)] = acc;
            }
        s.weyl.assign(static_cast<std::size_t>(d) * d * d * d, 0.0);
        const double c1 = 1.0 / (d - 2);
        const double c2 = scal / (static_cast<double>(d - 1) * (d - 2));
        for (int g = 0; g < d; ++g)
            for (int t = 0; t < d; ++t)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        double val = R[idx4(g, t, a, b, d)].value();
                        val -= c1 * (rmix[idx2(g, a, d)] * Gl[idx2(t, b, d)].value() -
                                     s.ricci[idx2(t, a, d)] * kron(g, b) -
                                     rmix[idx2(g, b, d)] * Gl[idx2(t, a, d)].value() +
                                     s.ricci[idx2(t, b, d)] * kron(g, a));
                        val += c2 * (kron(g, a) * Gl[idx2(t, b, d)].value() -
                                     kron(g, b) * Gl[idx2(t, a, d)].value());
                        s.weyl[idx4(g, t, a, b, d)] = val;
                    }
    }
    return s;
}

std::vector<double> weylTensor(const DConnection& conn, const Point& u) {
    const Shape& sh = conn.geometry().shape();
    if (sh.d() < 3)
        throw DomainError("conformally weighted curvature: undefined for total dimension < 3");
    return curvatureSummary(conn, u).weyl;
}

Expr randomPolyExpr(const Shape& shape, std::uint64_t seed) {
    const int d = shape.d();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-0.5, 0.5);
    std::uniform_int_distribution<int> pick(0, d - 1);

    Expr e = exprConst(coef(rng), shape.n, shape.m);
    for (int v = 0; v < d; ++v)
        e = exprAdd(e, exprMul(exprConst(coef(rng), shape.n, shape.m), exprVar(v, shape.n, shape.m)));
    for (int t = 0; t < 4; ++t) {
        Expr q = exprMul(exprVar(pick(rng), shape.n, shape.m), exprVar(pick(rng), shape.n, shape.m));
        e = exprAdd(e, exprMul(exprConst(coef(rng), shape.n, shape.m), q));
    }
    for (int t = 0; t < 4; ++t) {
        Expr c = exprMul(exprVar(pick(rng), shape.n, shape.m),
                         exprMul(exprVar(pick(rng), shape.n, shape.m),
                                 exprVar(pick(rng), shape.n, shape.m)));
        e = exprAdd(e, exprMul(exprConst(coef(rng), shape.n, shape.m), c));
    }
    return e;
}

IdentityReport identityResiduals(const DConnection& conn, const std::vector<Point>& pts,
                                 std::uint64_t seed) {
    const Geometry& geom = conn.geometry();
    const Shape& sh = geom.shape();
    const int d = sh.d();

    const TensorField f = scalarExprField(geom, randomPolyExpr(sh, seed));
    std::vector<Expr> vcomps;
    std::vector<Slot> vsig = {{Part::Full, true}};
    vcomps.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) vcomps.push_back(randomPolyExpr(sh, seed + 1 + static_cast<std::uint64_t>(k)));
    const TensorField V = exprTensorField(geom, vsig, vcomps);

    const TensorField df = covDeriv(conn, f);
    const TensorField ddf = covDeriv(conn, df);
    const TensorField dV = covDeriv(conn, V);
    const TensorField ddV = covDeriv(conn, dV);
    const TensorField dT = covDeriv(conn, torsionField(conn));
    const TensorField dR = covDeriv(conn, curvatureField(conn));

    IdentityReport rep;
    rep.seed = seed;
    for (const Point& u : pts) {
        const TorsionBlocks tor = torsion(conn, u, 0);
        const std::vector<Jet> R = curvatureTensor(conn, u, 0);
        const std::vector<Jet> df0 = df.eval(u, 0);
        const std::vector<Jet> ddf0 = ddf.eval(u, 0);
        const std::vector<Jet> V0 = V.eval(u, 0);
        const std::vector<Jet> dV0 = dV.eval(u, 0);
        const std::vector<Jet> ddV0 = ddV.eval(u, 0);
        const std::vector<Jet> dT0 = dT.eval(u, 0);
        const std::vector<Jet> dR0 = dR.eval(u, 0);

        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double lhs = ddf0[idx2(b, a, d)].value() - ddf0[idx2(a, b, d)].value();
                for (int g = 0; g < d; ++g)
                    lhs -= tor.full[idx3(g, a, b, d)].value() * df0[g].value();
                rep.commutatorScalar = std::max(rep.commutatorScalar, std::abs(lhs));
            }

        for (int dd = 0; dd < d; ++dd)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    double lhs = ddV0[idx3(dd, b, a, d)].value() - ddV0[idx3(dd, a, b, d)].value();
                    for (int g = 0; g < d; ++g) {
                        lhs -= R[idx4(dd, g, a, b, d)].value() * V0[g].value();
                        lhs -= tor.full[idx3(g, a, b, d)].value() * dV0[idx2(dd, g, d)].value();
                    }
                    rep.commutatorVector = std::max(rep.commutatorVector, std::abs(lhs));
                }

        for (int dd = 0; dd < d; ++dd)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    for (int g = 0; g < d; ++g) {
                        double acc = 0.0;
                        const int cyc[3][3] = {{a, b, g}, {b, g, a}, {g, a, b}};
                        for (const auto& p : cyc) {
                            acc += R[idx4(dd, p[2], p[0], p[1], d)].value();
                            acc += dT0[idx4(dd, p[1], p[2], p[0], d)].value();
                            for (int nu = 0; nu < d; ++nu)
                                acc += tor.full[idx3(nu, p[0], p[1], d)].value() *
                                       tor.full[idx3(dd, p[2], nu, d)].value();
                        }
                        rep.bianchiFirst = std::max(rep.bianchiFirst, std::abs(acc));
                    }

        for (int sg = 0; sg < d; ++sg)
            for (int nu = 0; nu < d; ++nu)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b)
                        for (int g = 0; g < d; ++g) {
                            double acc = 0.0;
                            const int cyc[3][3] = {{a, b, g}, {b, g, a}, {g, a, b}};
                            for (const auto& p : cyc) {
                                acc += dR0[((static_cast<std::size_t>(sg) * d + nu) * d + p[1]) *
                                               static_cast<std::size_t>(d) * d +
                                           static_cast<std::size_t>(p[2]) * d + p[0]]
                                           .value();
                                for (int e = 0; e < d; ++e)
                                    acc += tor.full[idx3(e, p[0], p[1], d)].value() *
                                           R[idx4(sg, nu, p[2], e, d)].value();
                            }
                            rep.bianchiSecond = std::max(rep.bianchiSecond, std::abs(acc));
                        }
    }
    return rep;
}

FieldEqResiduals fieldEquationResiduals(const DConnection& conn, const TensorField& E,
                                        const TensorField& S, double lambda, double kappa,
                                        const Point& u) {
    const Geometry& geom = conn.geometry();
    const int n = geom.shape().n;
    const int m = geom.shape().m;
    const int d = n + m;
    if (E.n != n || E.m != m || E.sig.size() != 2 || E.sig[0].upper || E.sig[1].upper ||
        E.sig[0].part != Part::Full || E.sig[1].part != Part::Full)
        throw DomainError("field equations: energy-momentum field must have two lower full slots");
    if (S.n != n || S.m != m || S.sig.size() != 3 || !S.sig[0].upper || S.sig[1].upper ||
        S.sig[2].upper || S.sig[0].part != Part::Full || S.sig[1].part != Part::Full ||
        S.sig[2].part != Part::Full)
        throw DomainError("field equations: spin field must have one upper and two lower full slots");

    const CurvatureSummary cs = curvatureSummary(conn, u);
    const std::vector<Jet> Gl = geom.dmetric(u, 0);
    const std::vector<Jet> Gu = geom.dmetricInverse(u, 0);
    const std::vector<Jet> E0 = E.eval(u, 0);
    const std::vector<Jet> S0 = S.eval(u, 0);
    const TorsionBlocks tor = torsion(conn, u, 0);
    const std::vector<Jet> dS = covDeriv(conn, S).eval(u, 0);

    FieldEqResiduals out;
    double etr = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) etr += Gu[idx2(a, b, d)].value() * E0[idx2(a, b, d)].value();

    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const double g = Gl[idx2(a, b, d)].value();
            const double r1 = cs.einstein[idx2(a, b, d)] + lambda * g - kappa * E0[idx2(a, b, d)].value();
            out.einstein = std::max(out.einstein, std::abs(r1));
            const double r2 =
                cs.phi[idx2(a, b, d)] + 0.5 * kappa * (E0[idx2(a, b, d)].value() - etr * g / d);
            out.phiForm = std::max(out.phiForm, std::abs(r2));
        }

    std::vector<double> t1(static_cast<std::size_t>(d), 0.0); // T^delta_{beta delta}
    std::vector<double> t2(static_cast<std::size_t>(d), 0.0); // T^delta_{delta gamma}
    for (int b = 0; b < d; ++b)
        for (int dd = 0; dd < d; ++dd) {
            t1[b] += tor.full[idx3(dd, b, dd, d)].value();
            t2[b] += tor.full[idx3(dd, dd, b, d)].value();
        }
    for (int g = 0; g < d; ++g)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const double r3 = tor.full[idx3(g, a, b, d)].value() + kron(g, a) * t1[b] -
                                  kron(g, b) * t1[a] - kappa * S0[idx3(g, a, b, d)].value();
                out.torsionSpin = std::max(out.torsionSpin, std::abs(r3));
            }

    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double lhs = 0.0;
            for (int g = 0; g < d; ++g) {
                lhs += dS[idx4(g, a, b, g, d)].value();
                lhs -= t2[g] * S0[idx3(g, a, b, d)].value();
            }
            const double rhs = E0[idx2(b, a, d)].value() - E0[idx2(a, b, d)].value();
            out.spinConservation = std::max(out.spinConservation, std::abs(lhs - rhs));
        }
    return out;
}

std::vector<double> conservationU(const DConnection& conn, const Point& u) {
    const Geometry& geom = conn.geometry();
    const int d = geom.shape().d();
    const std::vector<Jet> R = curvatureTensor(conn, u, 0);
    const TorsionBlocks tor = torsion(conn, u, 0);
    const std::vector<Jet> Gu = geom.dmetricInverse(u, 0);

    std::vector<double> ricci(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int t = 0; t < d; ++t) ricci[idx2(a, b, d)] += R[idx4(t, a, t, b, d)].value();
    std::vector<double> rmix(static_cast<std::size_t>(d) * d, 0.0); // R^b_f
    for (int b = 0; b < d; ++b)
        for (int f = 0; f < d; ++f)
            for (int s = 0; s < d; ++s)
                rmix[idx2(b, f, d)] += Gu[idx2(b, s, d)].value() * ricci[idx2(s, f, d)];

    std::vector<double> U(static_cast<std::size_t>(d), 0.0);
    for (int al = 0; al < d; ++al) {
        double acc = 0.0;
        for (int be = 0; be < d; ++be)
            for (int de = 0; de < d; ++de)
                for (int g = 0; g < d; ++g)
                    for (int f = 0; f < d; ++f) {
                        acc += Gu[idx2(be, de, d)].value() * R[idx4(g, de, f, be, d)].value() *
                               tor.full[idx3(f, al, g, d)].value();
                        acc -= Gu[idx2(be, de, d)].value() * R[idx4(g, de, f, al, d)].value() *
                               tor.full[idx3(f, be, g, d)].value();
                    }
        for (int be = 0; be < d; ++be)
            for (int f = 0; f < d; ++f)
                acc += rmix[idx2(be, f, d)] * tor.full[idx3(f, be, al, d)].value();
        U[al] = 0.5 * acc;
    }
    return U;
}

std::vector<double> conservationUAlt(const DConnection& conn, const Point& u) {
    const Geometry& geom = conn.geometry();
    const int d = geom.shape().d();
    const std::vector<Jet> R = curvatureTensor(conn, u, 0);
    const TorsionBlocks tor = torsion(conn, u, 0);
    const std::vector<Jet> Gu = geom.dmetricInverse(u, 0);

    // Raise the second curvature slot once, then contract against torsion.
    std::vector<double> raised(static_cast<std::size_t>(d) * d * d * d, 0.0); // [be][g][f][last]
    for (int be = 0; be < d; ++be)
        for (int g = 0; g < d; ++g)
            for (int f = 0; f < d; ++f)
                for (int l = 0; l < d; ++l) {
                    double acc = 0.0;
                    for (int de = 0; de < d; ++de)
                        acc += Gu[idx2(be, de, d)].value() * R[idx4(g, de, f, l, d)].value();
                    raised[idx4(be, g, f, l, d)] = acc;
                }
    std::vector<double> w1(static_cast<std::size_t>(d) * d, 0.0); // contract be with last slot
    for (int g = 0; g < d; ++g)
        for (int f = 0; f < d; ++f) {
            double acc = 0.0;
            for (int be = 0; be < d; ++be) acc += raised[idx4(be, g, f, be, d)];
            w1[idx2(g, f, d)] = acc;
        }
    std::vector<double> ricci(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int t = 0; t < d; ++t) ricci[idx2(a, b, d)] += R[idx4(t, a, t, b, d)].value();

    std::vector<double> U(static_cast<std::size_t>(d), 0.0);
    for (int al = 0; al < d; ++al) {
        double acc = 0.0;
        for (int g = 0; g < d; ++g)
            for (int f = 0; f < d; ++f) acc += w1[idx2(g, f, d)] * tor.full[idx3(f, al, g, d)].value();
        for (int be = 0; be < d; ++be)
            for (int g = 0; g < d; ++g)
                for (int f = 0; f < d; ++f)
                    acc -= raised[idx4(be, g, f, al, d)] * tor.full[idx3(f, be, g, d)].value();
        for (int be = 0; be < d; ++be)
            for (int f = 0; f < d; ++f) {
                double mixed = 0.0;
                for (int s = 0; s < d; ++s) mixed += Gu[idx2(be, s, d)].value() * ricci[idx2(s, f, d)];
                acc += mixed * tor.full[idx3(f, be, al, d)].value();
            }
        U[al] = 0.5 * acc;
    }
    return U;
}

} // namespace aniso
