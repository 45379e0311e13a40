#include "aniso/spinor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "aniso/connection.hpp"
#include "aniso/errors.hpp"
#include "aniso/jetalg.hpp"

namespace aniso {

namespace {

std::size_t uz(int k) { return static_cast<std::size_t>(k); }

// Gauss-Jordan solve of A X = B for complex row-major A (k x k) and B
// (k x nrhs); overwrites B with the solution.
void solveComplex(std::vector<Cplx> A, int k, std::vector<Cplx>& B, int nrhs, const char* what) {
    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(A[uz(col) * k + col]);
        for (int r = col + 1; r < k; ++r) {
            double mag = std::abs(A[uz(r) * k + col]);
            if (mag > best) {
                best = mag;
                piv = r;
            }
        }
        if (!(best > 1e-300))
            throw DomainError(std::string(what) + ": singular linear system");
        if (piv != col) {
            for (int c = 0; c < k; ++c) std::swap(A[uz(piv) * k + c], A[uz(col) * k + c]);
            for (int c = 0; c < nrhs; ++c) std::swap(B[uz(piv) * nrhs + c], B[uz(col) * nrhs + c]);
        }
        Cplx inv = 1.0 / A[uz(col) * k + col];
        for (int c = 0; c < k; ++c) A[uz(col) * k + c] *= inv;
        for (int c = 0; c < nrhs; ++c) B[uz(col) * nrhs + c] *= inv;
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            Cplx f = A[uz(r) * k + col];
            if (f == Cplx(0.0, 0.0)) continue;
            for (int c = 0; c < k; ++c) A[uz(r) * k + c] -= f * A[uz(col) * k + c];
            for (int c = 0; c < nrhs; ++c) B[uz(r) * nrhs + c] -= f * B[uz(col) * nrhs + c];
        }
    }
}

// Pair duals of a generator list: D[b] with sum_{rc} sig[a][rc] D[b][rc] =
// delta_ab, least-norm in the span of the conjugated generators.
std::vector<CMat> pairDuals(const std::vector<CMat>& sig, const char* what) {
    int d = static_cast<int>(sig.size());
    int Nt = sig[0].rows;
    std::vector<Cplx> M(uz(d) * d, Cplx(0.0, 0.0));
    for (int a = 0; a < d; ++a)
        for (int g = 0; g < d; ++g) {
            Cplx s(0.0, 0.0);
            for (int r = 0; r < Nt; ++r)
                for (int c = 0; c < Nt; ++c) s += sig[uz(a)].at(r, c) * std::conj(sig[uz(g)].at(r, c));
            M[uz(a) * d + g] = s;
        }
    std::vector<Cplx> coef(uz(d) * d, Cplx(0.0, 0.0));
    for (int a = 0; a < d; ++a) coef[uz(a) * d + a] = Cplx(1.0, 0.0);
    solveComplex(std::move(M), d, coef, d, what);
    std::vector<CMat> duals(uz(d), CMat(Nt, Nt));
    for (int b = 0; b < d; ++b)
        for (int g = 0; g < d; ++g) {
            Cplx c = coef[uz(g) * d + b];
            if (c == Cplx(0.0, 0.0)) continue;
            for (int r = 0; r < Nt; ++r)
                for (int cc = 0; cc < Nt; ++cc)
                    duals[uz(b)].at(r, cc) += c * std::conj(sig[uz(g)].at(r, cc));
        }
    return duals;
}

// Signed LDL^T of a symmetric jet block: g = l E l^T with E = diag(signs).
// l is lower triangular with positive diagonal; throws on a (numerically)
// degenerate pivot.
void factorBlock(const std::vector<Jet>& g, int k, int dims, int order, std::vector<Jet>& l,
                 std::vector<int>& signs) {
    std::vector<Jet> L(uz(k) * k, Jet::constant(dims, order, 0.0));
    std::vector<Jet> D;
    D.reserve(uz(k));
    for (int j = 0; j < k; ++j) {
        Jet dj = g[uz(j) * k + j];
        for (int t = 0; t < j; ++t) dj = dj - L[uz(j) * k + t] * L[uz(j) * k + t] * D[uz(t)];
        if (!(std::abs(dj.value()) > 1e-12))
            throw DomainError("frame lift: degenerate metric block");
        D.push_back(dj);
        L[uz(j) * k + j] = Jet::constant(dims, order, 1.0);
        Jet rec = dj.reciprocal();
        for (int i = j + 1; i < k; ++i) {
            Jet v = g[uz(i) * k + j];
            for (int t = 0; t < j; ++t) v = v - L[uz(i) * k + t] * L[uz(j) * k + t] * D[uz(t)];
            L[uz(i) * k + j] = v * rec;
        }
    }
    l.assign(uz(k) * k, Jet::constant(dims, order, 0.0));
    signs.assign(uz(k), 0);
    for (int j = 0; j < k; ++j) {
        signs[uz(j)] = D[uz(j)].value() > 0.0 ? 1 : -1;
        Jet root = sqrt(signs[uz(j)] > 0 ? D[uz(j)] : -D[uz(j)]);
        for (int i = j; i < k; ++i) l[uz(i) * k + j] = L[uz(i) * k + j] * root;
    }
}

bool matFinite(const CMat& M) {
    for (const Cplx& z : M.a)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

const EpsilonVariant& loweringVariant(const EpsilonObject& eps) {
    if (eps.plus.vanishes && eps.minus.vanishes)
        throw DomainError("spinor lowering: no surviving pair factor");
    if (eps.plus.vanishes) return eps.minus;
    return eps.plus;
}

} // namespace

SpinorFrame spinorFrame(const Geometry& geom, const CliffordRep& rep, const Point& u, int order) {
    const Shape& sh = geom.shape();
    if (rep.n != sh.n || rep.m != sh.m)
        throw DomainError("frame lift: representation split does not match the geometry shape");
    int n = sh.n, m = sh.m, d = sh.d();
    int Nt = rep.Nh + rep.Nv;

    SpinorFrame fr;
    fr.n = n;
    fr.m = m;
    fr.Nt = Nt;
    fr.rep = rep;
    fr.nconn = geom.nconn(u, order);

    std::vector<Jet> gh = geom.metricH(u, order);
    std::vector<Jet> gv = geom.metricV(u, order);
    std::vector<Jet> lh, lv;
    std::vector<int> sh_signs, sv_signs;
    factorBlock(gh, n, d, order, lh, sh_signs);
    factorBlock(gv, m, d, order, lv, sv_signs);
    for (int j = 0; j < n; ++j)
        if ((sh_signs[uz(j)] > 0) != (rep.gdiag[uz(j)] > 0.0))
            throw DomainError("frame lift: metric signature does not match the flat diagonal");
    for (int a = 0; a < m; ++a)
        if ((sv_signs[uz(a)] > 0) != (rep.gdiag[uz(n + a)] > 0.0))
            throw DomainError("frame lift: metric signature does not match the flat diagonal");

    fr.frameL.assign(uz(d) * d, Jet::constant(d, order, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) fr.frameL[uz(i) * d + j] = lh[uz(i) * n + j];
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) fr.frameL[uz(n + a) * d + (n + b)] = lv[uz(a) * m + b];
    fr.frameInv = jetMatInverse(fr.frameL, d);

    std::vector<double> lvals(uz(d) * d, 0.0);
    for (int i = 0; i < d * d; ++i) lvals[uz(i)] = fr.frameL[uz(i)].value();
    fr.sigmaU = sigmaFrameLift(rep, lvals);

    fr.dualFlat = pairDuals(rep.sigma, "frame lift");
    fr.dualU.assign(uz(d), CMat(Nt, Nt));
    for (int b = 0; b < d; ++b)
        for (int bh = 0; bh < d; ++bh) {
            double c = fr.frameInv[uz(bh) * d + b].value();
            if (c == 0.0) continue;
            for (int r = 0; r < Nt; ++r)
                for (int cc = 0; cc < Nt; ++cc)
                    fr.dualU[uz(b)].at(r, cc) += c * fr.dualFlat[uz(bh)].at(r, cc);
        }
    return fr;
}

SpinConnection spinConnection(const SpinorFrame& fr, const DConnection& conn, const Point& u) {
    int n = fr.n, m = fr.m, d = n + m, Nt = fr.Nt;
    std::vector<Jet> gamma = conn.gamma(u, 1); // [(alpha*d + beta)*d + dir]

    // Constant projection tensor C[ap][bp][mu][al] = sum_bh sigma_ap[mu][bh] dual_bp[al][bh]:
    // contracting it with the frame-transferred coefficients reproduces the
    // generator/dual pair contraction of the defining formula.
    std::vector<Cplx> C(uz(d) * d * Nt * Nt, Cplx(0.0, 0.0));
    for (int ap = 0; ap < d; ++ap)
        for (int bp = 0; bp < d; ++bp)
            for (int mu = 0; mu < Nt; ++mu)
                for (int al = 0; al < Nt; ++al) {
                    Cplx s(0.0, 0.0);
                    for (int bh = 0; bh < Nt; ++bh)
                        s += fr.rep.sigma[uz(ap)].at(mu, bh) * fr.dualFlat[uz(bp)].at(al, bh);
                    C[((uz(ap) * d + bp) * Nt + mu) * Nt + al] = s;
                }

    SpinConnection sc;
    sc.d = d;
    sc.Nt = Nt;
    int jorder = std::min(gamma[0].order(), fr.frameL[0].order() - 1);
    if (jorder < 0) jorder = 0;
    sc.re.assign(uz(d) * Nt * Nt, Jet::constant(d, jorder, 0.0));
    sc.im.assign(uz(d) * Nt * Nt, Jet::constant(d, jorder, 0.0));
    sc.gammaSpin.assign(uz(d), CMat(Nt, Nt));

    double norm = 1.0 / static_cast<double>(Nt);
    for (int dir = 0; dir < d; ++dir) {
        // Real frame-transferred coefficients per flat label pair: the
        // connection transfer minus the dual-contracted generator derivative.
        std::vector<Jet> PQ(uz(d) * d, Jet::constant(d, jorder, 0.0));
        for (int ap = 0; ap < d; ++ap)
            for (int bp = 0; bp < d; ++bp) {
                Jet acc = Jet::constant(d, jorder, 0.0);
                for (int a = 0; a < d; ++a) {
                    // block-diagonal frame: skip vanishing factors
                    if (fr.rep.blockOf(a) != fr.rep.blockOf(ap)) continue;
                    for (int b = 0; b < d; ++b) {
                        if (fr.rep.blockOf(b) != fr.rep.blockOf(bp)) continue;
                        acc = acc + fr.frameL[uz(a) * d + ap] * fr.frameInv[uz(bp) * d + b] *
                                        gamma[(uz(a) * d + b) * d + dir];
                    }
                }
                for (int b = 0; b < d; ++b) {
                    if (fr.rep.blockOf(b) != fr.rep.blockOf(ap) ||
                        fr.rep.blockOf(b) != fr.rep.blockOf(bp))
                        continue;
                    acc = acc - fr.frameInv[uz(bp) * d + b] *
                                    frameDeriv(fr.frameL[uz(b) * d + ap], fr.nconn, n, m, dir);
                }
                PQ[uz(ap) * d + bp] = acc;
            }
        for (int mu = 0; mu < Nt; ++mu)
            for (int al = 0; al < Nt; ++al) {
                Jet racc = Jet::constant(d, jorder, 0.0);
                Jet iacc = Jet::constant(d, jorder, 0.0);
                for (int ap = 0; ap < d; ++ap)
                    for (int bp = 0; bp < d; ++bp) {
                        Cplx c = C[((uz(ap) * d + bp) * Nt + mu) * Nt + al];
                        if (c == Cplx(0.0, 0.0)) continue;
                        const Jet& pq = PQ[uz(ap) * d + bp];
                        if (c.real() != 0.0) racc = racc + pq * c.real();
                        if (c.imag() != 0.0) iacc = iacc + pq * c.imag();
                    }
                std::size_t at = (uz(dir) * Nt + mu) * Nt + al;
                sc.re[at] = racc * norm;
                sc.im[at] = iacc * norm;
                sc.gammaSpin[uz(dir)].at(mu, al) = Cplx(sc.re[at].value(), sc.im[at].value());
            }
    }
    return sc;
}

double spinTraceResidual(const SpinConnection& sc) {
    double worst = 0.0;
    for (int dir = 0; dir < sc.d; ++dir)
        worst = std::max(worst, std::abs(matTrace(sc.gammaSpin[uz(dir)])));
    return worst;
}

std::vector<CMat> spinCurvatureOp(const SpinorFrame& fr, const SpinConnection& sc,
                                  const Geometry& geom, const Point& u) {
    int n = fr.n, m = fr.m, d = n + m, Nt = fr.Nt;
    std::vector<Jet> w = anholonomy(geom, u, 0);
    std::vector<CMat> out(uz(d) * d, CMat(Nt, Nt));
    for (int al = 0; al < d; ++al)
        for (int be = al + 1; be < d; ++be) {
            CMat M(Nt, Nt);
            for (int r = 0; r < Nt; ++r)
                for (int c = 0; c < Nt; ++c) {
                    std::size_t atB = (uz(be) * Nt + r) * Nt + c;
                    std::size_t atA = (uz(al) * Nt + r) * Nt + c;
                    double re = frameDeriv(sc.re[atB], fr.nconn, n, m, al).value() -
                                frameDeriv(sc.re[atA], fr.nconn, n, m, be).value();
                    double im = frameDeriv(sc.im[atB], fr.nconn, n, m, al).value() -
                                frameDeriv(sc.im[atA], fr.nconn, n, m, be).value();
                    M.at(r, c) = Cplx(re, im);
                }
            M = matAdd(M, matSub(matMul(sc.gammaSpin[uz(al)], sc.gammaSpin[uz(be)]),
                                 matMul(sc.gammaSpin[uz(be)], sc.gammaSpin[uz(al)])));
            for (int tau = 0; tau < d; ++tau) {
                double coef = w[(uz(tau) * d + al) * d + be].value();
                if (coef != 0.0) M = matSub(M, matScale(sc.gammaSpin[uz(tau)], coef));
            }
            out[uz(al) * d + be] = M;
            out[uz(be) * d + al] = matScale(M, -1.0);
        }
    return out;
}

SpinorCurvature curvatureSpinors(const Geometry& geom, const DConnection& conn,
                                 const CliffordRep& rep, const Point& u) {
    SpinorFrame fr = spinorFrame(geom, rep, u, 2);
    int n = fr.n, m = fr.m, d = n + m, Nt = fr.Nt;
    SpinConnection sc = spinConnection(fr, conn, u);

    SpinorCurvature out;
    out.d = d;
    out.Nt = Nt;
    out.opX = spinCurvatureOp(fr, sc, geom, u);

    std::vector<Jet> R = curvatureTensor(conn, u, 0); // [((de*d+ga)*d+al)*d+be]
    TorsionBlocks tor = torsion(conn, u, 0);
    out.torsionSpin.assign(uz(d) * d, CMat(Nt, Nt));
    for (int al = 0; al < d; ++al)
        for (int be = 0; be < d; ++be) {
            CMat T(Nt, Nt);
            for (int g = 0; g < d; ++g) {
                double coef = tor.full[(uz(g) * d + al) * d + be].value();
                if (coef != 0.0) T = matAdd(T, matScale(fr.sigmaU[uz(g)], coef));
            }
            out.torsionSpin[uz(al) * d + be] = T;
        }

    // Least-squares intertwining curvature per direction pair: solve
    //   X sigma_g - sigma_g X = sum_de R^de_{g al be} sigma_de    for all g
    // (the stored generators carry one upper and one lower spinor index, so
    // the induced action on them is the commutator), with one Gram
    // factorization shared by every pair (the normal matrix depends only on
    // the lifted generators). A tiny ridge keeps the solve well-posed on the
    // pair-space kernel; the recovered components below are kernel-invariant.
    int k = Nt * Nt;
    std::vector<CMat> rowDot(uz(d), CMat(Nt, Nt)), colDot(uz(d), CMat(Nt, Nt));
    for (int g = 0; g < d; ++g)
        for (int s = 0; s < Nt; ++s)
            for (int sp = 0; sp < Nt; ++sp) {
                Cplx rsum(0.0, 0.0), csum(0.0, 0.0);
                for (int t = 0; t < Nt; ++t) {
                    rsum += std::conj(fr.sigmaU[uz(g)].at(s, t)) * fr.sigmaU[uz(g)].at(sp, t);
                    csum += std::conj(fr.sigmaU[uz(g)].at(t, s)) * fr.sigmaU[uz(g)].at(t, sp);
                }
                rowDot[uz(g)].at(s, sp) = rsum;
                colDot[uz(g)].at(s, sp) = csum;
            }
    std::vector<Cplx> gram(uz(k) * k, Cplx(0.0, 0.0));
    for (int r = 0; r < Nt; ++r)
        for (int s = 0; s < Nt; ++s)
            for (int rp = 0; rp < Nt; ++rp)
                for (int sp = 0; sp < Nt; ++sp) {
                    Cplx acc(0.0, 0.0);
                    for (int g = 0; g < d; ++g) {
                        const CMat& sg = fr.sigmaU[uz(g)];
                        if (r == rp) acc += rowDot[uz(g)].at(s, sp);
                        if (s == sp) acc += colDot[uz(g)].at(r, rp);
                        acc -= std::conj(sg.at(s, sp)) * sg.at(r, rp);
                        acc -= std::conj(sg.at(rp, r)) * sg.at(sp, s);
                    }
                    gram[uz(r * Nt + s) * k + (rp * Nt + sp)] = acc;
                }
    double diagMax = 0.0;
    for (int i = 0; i < k; ++i) diagMax = std::max(diagMax, std::abs(gram[uz(i) * k + i]));
    Cplx ridge(1e-11 * (diagMax > 0.0 ? diagMax : 1.0), 0.0);
    for (int i = 0; i < k; ++i) gram[uz(i) * k + i] += ridge;

    int npairs = d * (d - 1) / 2;
    std::vector<Cplx> rhs(uz(k) * npairs, Cplx(0.0, 0.0));
    std::vector<std::vector<CMat>> Bg(uz(npairs), std::vector<CMat>(uz(d), CMat(Nt, Nt)));
    {
        int pidx = 0;
        for (int al = 0; al < d; ++al)
            for (int be = al + 1; be < d; ++be, ++pidx)
                for (int g = 0; g < d; ++g) {
                    CMat& Bm = Bg[uz(pidx)][uz(g)];
                    for (int de = 0; de < d; ++de) {
                        double coef = R[((uz(de) * d + g) * d + al) * d + be].value();
                        if (coef != 0.0) Bm = matAdd(Bm, matScale(fr.sigmaU[uz(de)], coef));
                    }
                    for (int r = 0; r < Nt; ++r)
                        for (int s = 0; s < Nt; ++s) {
                            Cplx acc(0.0, 0.0);
                            for (int q = 0; q < Nt; ++q) {
                                acc += std::conj(fr.sigmaU[uz(g)].at(s, q)) * Bm.at(r, q);
                                acc -= std::conj(fr.sigmaU[uz(g)].at(q, r)) * Bm.at(q, s);
                            }
                            rhs[uz(r * Nt + s) * npairs + pidx] += acc;
                        }
                }
    }
    solveComplex(std::move(gram), k, rhs, npairs, "curvature spinors");

    out.X.assign(uz(d) * d, CMat(Nt, Nt));
    out.intertwineResidual = 0.0;
    {
        int pidx = 0;
        for (int al = 0; al < d; ++al)
            for (int be = al + 1; be < d; ++be, ++pidx) {
                CMat X(Nt, Nt);
                for (int r = 0; r < Nt; ++r)
                    for (int s = 0; s < Nt; ++s) X.at(r, s) = rhs[uz(r * Nt + s) * npairs + pidx];
                out.X[uz(al) * d + be] = X;
                out.X[uz(be) * d + al] = matScale(X, -1.0);
                for (int g = 0; g < d; ++g) {
                    CMat lhs = matSub(matMul(X, fr.sigmaU[uz(g)]), matMul(fr.sigmaU[uz(g)], X));
                    out.intertwineResidual = std::max(out.intertwineResidual,
                                                      matMaxAbs(matSub(lhs, Bg[uz(pidx)][uz(g)])));
                }
            }
    }

    // Recovery through the pair duals; the first-direction contraction of the
    // recovered components gives the Ricci entries.
    std::vector<Jet> G = geom.dmetric(u, 0);
    std::vector<Jet> Ginv = geom.dmetricInverse(u, 0);
    out.ricci.assign(uz(d) * d, Cplx(0.0, 0.0));
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            Cplx acc(0.0, 0.0);
            for (int tau = 0; tau < d; ++tau) {
                if (tau == b) continue; // antisymmetric pair vanishes
                const CMat& X = out.X[uz(tau) * d + b];
                CMat tr = matSub(matMul(X, fr.sigmaU[uz(a)]),
                                 matMul(fr.sigmaU[uz(a)], X));
                for (int r = 0; r < Nt; ++r)
                    for (int c = 0; c < Nt; ++c) acc += fr.dualU[uz(tau)].at(r, c) * tr.at(r, c);
            }
            out.ricci[uz(a) * d + b] = acc;
        }
    out.scalar = Cplx(0.0, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            out.scalar += Ginv[uz(a) * d + b].value() * out.ricci[uz(a) * d + b];
    out.einstein.assign(uz(d) * d, Cplx(0.0, 0.0));
    out.phi.assign(uz(d) * d, Cplx(0.0, 0.0));
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double gab = G[uz(a) * d + b].value();
            Cplx ric = out.ricci[uz(a) * d + b];
            out.einstein[uz(a) * d + b] = ric - 0.5 * out.scalar * gab;
            out.phi[uz(a) * d + b] =
                -0.5 * (ric - out.scalar * gab / static_cast<double>(d));
        }

    // Gravitational spinor: move X to flat frame labels, lower the left
    // spinor index with the surviving pair factor of each block, carry the
    // antisymmetric direction pair onto a spinor pair through the two-fold
    // generator groups of its block, then symmetrize over the three
    // non-distinguished indices.
    std::vector<CMat> Xflat(uz(d) * d, CMat(Nt, Nt));
    for (int ih = 0; ih < d; ++ih)
        for (int jh = ih + 1; jh < d; ++jh) {
            CMat acc(Nt, Nt);
            for (int al = 0; al < d; ++al)
                for (int be = 0; be < d; ++be) {
                    if (al == be) continue;
                    double coef = fr.frameInv[uz(ih) * d + al].value() *
                                  fr.frameInv[uz(jh) * d + be].value();
                    if (coef != 0.0) acc = matAdd(acc, matScale(out.X[uz(al) * d + be], coef));
                }
            Xflat[uz(ih) * d + jh] = acc;
            Xflat[uz(jh) * d + ih] = matScale(acc, -1.0);
        }

    EpsilonObject epsH = epsilonObjects(rep.hsig);
    EpsilonObject epsV = epsilonObjects(rep.vsig);
    CMat elow(Nt, Nt);
    {
        const CMat& eh = loweringVariant(epsH).lower;
        const CMat& ev = loweringVariant(epsV).lower;
        for (int r = 0; r < rep.Nh; ++r)
            for (int c = 0; c < rep.Nh; ++c) elow.at(r, c) = eh.at(r, c);
        for (int r = 0; r < rep.Nv; ++r)
            for (int c = 0; c < rep.Nv; ++c) elow.at(rep.Nh + r, rep.Nh + c) = ev.at(r, c);
    }

    // Two-fold generator groups per block, embedded, one per in-block
    // direction pair (cross-block pairs carry no same-block group and drop).
    std::vector<CMat> pair2(uz(d) * d);
    auto fillPairs = [&](const BlockSignature& bs, int offset, int rowOffset, int blkDim) {
        int kb = bs.n();
        if (kb < 2) return;
        int nsub = kb * (kb - 1) / 2;
        int idx = 0;
        for (int i = 0; i < kb; ++i)
            for (int j = i + 1; j < kb; ++j, ++idx) {
                std::vector<Cplx> comps(uz(nsub), Cplx(0.0, 0.0));
                comps[uz(idx)] = Cplx(1.0, 0.0);
                CMat g = spinorizeAntisymGroup(comps, bs, 2);
                CMat emb(Nt, Nt);
                for (int r = 0; r < blkDim; ++r)
                    for (int c = 0; c < blkDim; ++c) emb.at(rowOffset + r, rowOffset + c) = g.at(r, c);
                pair2[uz(offset + i) * d + (offset + j)] = emb;
            }
    };
    fillPairs(rep.hsig, 0, 0, rep.Nh);
    fillPairs(rep.vsig, n, rep.Nh, rep.Nv);

    std::vector<Cplx> four(uz(Nt) * Nt * Nt * Nt, Cplx(0.0, 0.0));
    for (int ih = 0; ih < d; ++ih)
        for (int jh = ih + 1; jh < d; ++jh) {
            if (pair2[uz(ih) * d + jh].empty()) continue;
            CMat low = matMul(elow, Xflat[uz(ih) * d + jh]);
            const CMat& pr = pair2[uz(ih) * d + jh];
            for (int a = 0; a < Nt; ++a)
                for (int b = 0; b < Nt; ++b) {
                    Cplx lab = low.at(a, b);
                    if (lab == Cplx(0.0, 0.0)) continue;
                    for (int c = 0; c < Nt; ++c)
                        for (int e = 0; e < Nt; ++e)
                            four[((uz(a) * Nt + b) * Nt + c) * Nt + e] += lab * pr.at(c, e);
                }
        }
    out.psi.assign(uz(Nt) * Nt * Nt * Nt, Cplx(0.0, 0.0));
    static const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int a = 0; a < Nt; ++a)
        for (int b = 0; b < Nt; ++b)
            for (int c = 0; c < Nt; ++c)
                for (int e = 0; e < Nt; ++e) {
                    int v[3] = {a, c, e};
                    Cplx acc(0.0, 0.0);
                    for (const auto& p : perm)
                        acc += four[((uz(v[p[0]]) * Nt + b) * Nt + v[p[1]]) * Nt + v[p[2]]];
                    out.psi[((uz(a) * Nt + b) * Nt + c) * Nt + e] = acc / 6.0;
                }

    for (const CMat& M : out.X)
        if (!matFinite(M)) throw DomainError("curvature spinors: non-finite value");
    for (const Cplx& z : out.ricci)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw DomainError("curvature spinors: non-finite value");
    return out;
}

} // namespace aniso
