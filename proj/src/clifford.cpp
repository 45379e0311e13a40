#include "aniso/clifford.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "aniso/errors.hpp"

namespace aniso {

// ---------------------------------------------------------------------------
// Dense helpers

CMat matId(int n) {
    CMat M(n, n);
    for (int i = 0; i < n; ++i) M.at(i, i) = Cplx(1.0, 0.0);
    return M;
}

CMat matMul(const CMat& A, const CMat& B) {
    if (A.cols != B.rows) throw DomainError("matMul: shape mismatch");
    CMat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            Cplx aik = A.at(i, k);
            if (aik == Cplx(0.0, 0.0)) continue;
            for (int j = 0; j < B.cols; ++j) C.at(i, j) += aik * B.at(k, j);
        }
    return C;
}

CMat matAdd(const CMat& A, const CMat& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DomainError("matAdd: shape mismatch");
    CMat C = A;
    for (std::size_t t = 0; t < C.a.size(); ++t) C.a[t] += B.a[t];
    return C;
}

CMat matSub(const CMat& A, const CMat& B) {
    if (A.rows != B.rows || A.cols != B.cols) throw DomainError("matSub: shape mismatch");
    CMat C = A;
    for (std::size_t t = 0; t < C.a.size(); ++t) C.a[t] -= B.a[t];
    return C;
}

CMat matScale(const CMat& A, Cplx s) {
    CMat C = A;
    for (auto& v : C.a) v *= s;
    return C;
}

CMat matTranspose(const CMat& A) {
    CMat C(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) C.at(j, i) = A.at(i, j);
    return C;
}

CMat matKron(const CMat& A, const CMat& B) {
    CMat C(A.rows * B.rows, A.cols * B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) {
            Cplx aij = A.at(i, j);
            if (aij == Cplx(0.0, 0.0)) continue;
            for (int r = 0; r < B.rows; ++r)
                for (int c = 0; c < B.cols; ++c)
                    C.at(i * B.rows + r, j * B.cols + c) = aij * B.at(r, c);
        }
    return C;
}

Cplx matTrace(const CMat& A) {
    Cplx t(0.0, 0.0);
    int d = std::min(A.rows, A.cols);
    for (int i = 0; i < d; ++i) t += A.at(i, i);
    return t;
}

double matMaxAbs(const CMat& A) {
    double m = 0.0;
    for (const auto& v : A.a) m = std::max(m, std::abs(v));
    return m;
}

// ---------------------------------------------------------------------------
// Dimensions and classification

int spinorDim(int n) {
    if (n < 0) throw DomainError("spinorDim: negative generator count");
    return n % 2 == 1 ? (1 << ((n - 1) / 2)) : (1 << (n / 2));
}

std::vector<double> diagEntries(const BlockSignature& bs) {
    if (bs.p < 0 || bs.q < 0) throw DomainError("diagEntries: negative signature count");
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(bs.n()));
    for (int i = 0; i < bs.p; ++i) g.push_back(1.0);
    for (int i = 0; i < bs.q; ++i) g.push_back(-1.0);
    return g;
}

namespace {

std::string ringName(RingKind r) {
    switch (r) {
        case RingKind::R: return "R";
        case RingKind::C: return "C";
        case RingKind::H: return "H";
        case RingKind::RplusR: return "R";
        case RingKind::HplusH: return "H";
        case RingKind::CplusC: return "C";
    }
    return "?";
}

int ringRealDim(RingKind r) {
    switch (r) {
        case RingKind::R:
        case RingKind::RplusR: return 1;
        case RingKind::C:
        case RingKind::CplusC: return 2;
        case RingKind::H:
        case RingKind::HplusH: return 4;
    }
    return 1;
}

bool ringIsSum(RingKind r) {
    return r == RingKind::RplusR || r == RingKind::HplusH || r == RingKind::CplusC;
}

} // namespace

AlgebraDescriptor classifyClifford(int p, int q) {
    if (p < 0 || q < 0 || p + q > 40) throw DomainError("classifyClifford: signature out of range");
    AlgebraDescriptor d;
    d.p = p;
    d.q = q;
    int s = ((q - p) % 8 + 8) % 8;
    switch (s) {
        case 0: d.ring = RingKind::R; break;
        case 1: d.ring = RingKind::RplusR; break;
        case 2: d.ring = RingKind::R; break;
        case 3: d.ring = RingKind::C; break;
        case 4: d.ring = RingKind::H; break;
        case 5: d.ring = RingKind::HplusH; break;
        case 6: d.ring = RingKind::H; break;
        case 7: d.ring = RingKind::C; break;
    }
    long long dim = 1LL << (p + q);
    long long cell = static_cast<long long>(ringRealDim(d.ring)) * (ringIsSum(d.ring) ? 2 : 1);
    long long k2 = dim / cell;
    long long k = std::llround(std::sqrt(static_cast<double>(k2)));
    if (k * k * cell != dim) throw DomainError("classifyClifford: inconsistent dimension");
    d.size = static_cast<int>(k);
    std::string base = ringName(d.ring);
    std::string blockLabel = (k == 1) ? base : ("M" + std::to_string(k) + "(" + base + ")");
    d.label = ringIsSum(d.ring) ? blockLabel + " + " + blockLabel : blockLabel;
    return d;
}

// ---------------------------------------------------------------------------
// Monomial matrices: exactly one nonzero entry per column, M e_j = phase[j] e_perm[j]

namespace {

struct Monomial {
    std::vector<int> perm;
    std::vector<Cplx> phase;
    int dim() const { return static_cast<int>(perm.size()); }
};

Monomial monoId(int N) {
    Monomial M;
    M.perm.resize(static_cast<std::size_t>(N));
    M.phase.assign(static_cast<std::size_t>(N), Cplx(1.0, 0.0));
    for (int j = 0; j < N; ++j) M.perm[static_cast<std::size_t>(j)] = j;
    return M;
}

// (A o B) e_j = phase_B[j] * A e_{perm_B[j]}
Monomial monoMul(const Monomial& A, const Monomial& B) {
    Monomial C;
    int N = B.dim();
    C.perm.resize(static_cast<std::size_t>(N));
    C.phase.resize(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        int mid = B.perm[static_cast<std::size_t>(j)];
        C.perm[static_cast<std::size_t>(j)] = A.perm[static_cast<std::size_t>(mid)];
        C.phase[static_cast<std::size_t>(j)] = B.phase[static_cast<std::size_t>(j)] * A.phase[static_cast<std::size_t>(mid)];
    }
    return C;
}

Monomial monoKron(const Monomial& A, const Monomial& B) {
    Monomial C;
    int NB = B.dim();
    int N = A.dim() * NB;
    C.perm.resize(static_cast<std::size_t>(N));
    C.phase.resize(static_cast<std::size_t>(N));
    for (int a = 0; a < A.dim(); ++a)
        for (int b = 0; b < NB; ++b) {
            int j = a * NB + b;
            C.perm[static_cast<std::size_t>(j)] = A.perm[static_cast<std::size_t>(a)] * NB + B.perm[static_cast<std::size_t>(b)];
            C.phase[static_cast<std::size_t>(j)] = A.phase[static_cast<std::size_t>(a)] * B.phase[static_cast<std::size_t>(b)];
        }
    return C;
}

CMat monoDense(const Monomial& M) {
    int N = M.dim();
    CMat D(N, N);
    for (int j = 0; j < N; ++j) D.at(M.perm[static_cast<std::size_t>(j)], j) = M.phase[static_cast<std::size_t>(j)];
    return D;
}

Monomial monoScale(const Monomial& M, Cplx s) {
    Monomial C = M;
    for (auto& v : C.phase) v *= s;
    return C;
}

Monomial pauliX() {
    Monomial M;
    M.perm = {1, 0};
    M.phase = {Cplx(1.0, 0.0), Cplx(1.0, 0.0)};
    return M;
}

Monomial pauliY() {
    Monomial M;
    M.perm = {1, 0};
    M.phase = {Cplx(0.0, 1.0), Cplx(0.0, -1.0)};
    return M;
}

Monomial pauliZ() {
    Monomial M;
    M.perm = {0, 1};
    M.phase = {Cplx(1.0, 0.0), Cplx(-1.0, 0.0)};
    return M;
}

// n mutually anticommuting square-roots of +I on spinorDim(n) dimensions,
// built from chained Pauli factors.
std::vector<Monomial> gammaMonomials(int n) {
    int qubits = n / 2;
    std::vector<Monomial> out;
    out.reserve(static_cast<std::size_t>(n));
    auto buildChain = [&](int head, const Monomial& mid) {
        Monomial M = monoId(1);
        for (int f = 0; f < qubits; ++f) {
            if (f < head) M = monoKron(M, pauliZ());
            else if (f == head) M = monoKron(M, mid);
            else M = monoKron(M, monoId(2));
        }
        return M;
    };
    for (int j = 0; j < qubits; ++j) {
        out.push_back(buildChain(j, pauliX()));
        out.push_back(buildChain(j, pauliY()));
    }
    if (n % 2 == 1) out.push_back(buildChain(qubits, monoId(1))); // full Z chain
    return out;
}

// Generators with s_k^2 = -G_kk I: multiply the +1-square roots by i on the
// +1 diagonal entries.
std::vector<Monomial> signedGenerators(const BlockSignature& bs) {
    std::vector<double> g = diagEntries(bs);
    std::vector<Monomial> gm = gammaMonomials(bs.n());
    for (int k = 0; k < bs.n(); ++k)
        if (g[static_cast<std::size_t>(k)] > 0.0) gm[static_cast<std::size_t>(k)] = monoScale(gm[static_cast<std::size_t>(k)], Cplx(0.0, 1.0));
    return gm;
}

Cplx monoTrace(const Monomial& M) {
    Cplx t(0.0, 0.0);
    for (int j = 0; j < M.dim(); ++j)
        if (M.perm[static_cast<std::size_t>(j)] == j) t += M.phase[static_cast<std::size_t>(j)];
    return t;
}

int countTrailingZeros(unsigned long long x) {
    int c = 0;
    while ((x & 1ULL) == 0ULL) {
        x >>= 1;
        ++c;
    }
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// Representations

std::vector<CMat> buildBlockGenerators(const BlockSignature& bs) {
    std::vector<Monomial> s = signedGenerators(bs);
    std::vector<CMat> out;
    out.reserve(s.size());
    double inv = 1.0 / std::sqrt(2.0);
    for (const auto& M : s) out.push_back(matScale(monoDense(M), Cplx(inv, 0.0)));
    return out;
}

CliffordRep buildSigma(const SplitSignature& sig) {
    CliffordRep rep;
    rep.hsig = sig.h;
    rep.vsig = sig.v;
    rep.n = sig.h.n();
    rep.m = sig.v.n();
    rep.Nh = spinorDim(rep.n);
    rep.Nv = spinorDim(rep.m);
    rep.sigmaH = buildBlockGenerators(sig.h);
    rep.sigmaV = buildBlockGenerators(sig.v);
    std::vector<double> gh = diagEntries(sig.h);
    std::vector<double> gv = diagEntries(sig.v);
    rep.gdiag = gh;
    rep.gdiag.insert(rep.gdiag.end(), gv.begin(), gv.end());
    int Nt = rep.Nh + rep.Nv;
    for (int k = 0; k < rep.n; ++k) {
        CMat M(Nt, Nt);
        for (int r = 0; r < rep.Nh; ++r)
            for (int c = 0; c < rep.Nh; ++c) M.at(r, c) = rep.sigmaH[static_cast<std::size_t>(k)].at(r, c);
        rep.sigma.push_back(M);
    }
    for (int k = 0; k < rep.m; ++k) {
        CMat M(Nt, Nt);
        for (int r = 0; r < rep.Nv; ++r)
            for (int c = 0; c < rep.Nv; ++c) M.at(rep.Nh + r, rep.Nh + c) = rep.sigmaV[static_cast<std::size_t>(k)].at(r, c);
        rep.sigma.push_back(M);
    }
    return rep;
}

namespace {

// max |anti + G I| over the generators' own block; off-block entries of the
// anticommutator and whole cross-pair products are counted at face value.
double gradedAnticommDefect(const CliffordRep& rep, const std::vector<CMat>& sig,
                            const std::vector<double>& G, int d) {
    double worst = 0.0;
    int Nt = rep.Nh + rep.Nv;
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            CMat anti = matAdd(matMul(sig[static_cast<std::size_t>(a)], sig[static_cast<std::size_t>(b)]),
                               matMul(sig[static_cast<std::size_t>(b)], sig[static_cast<std::size_t>(a)]));
            double gab = G[static_cast<std::size_t>(a * d + b)];
            if (rep.blockOf(a) == rep.blockOf(b)) {
                int lo = rep.blockOf(a) == 0 ? 0 : rep.Nh;
                int hi = rep.blockOf(a) == 0 ? rep.Nh : Nt;
                for (int r = 0; r < Nt; ++r)
                    for (int c = 0; c < Nt; ++c) {
                        Cplx want(0.0, 0.0);
                        if (r >= lo && r < hi && c >= lo && c < hi && r == c) want = Cplx(-gab, 0.0);
                        worst = std::max(worst, std::abs(anti.at(r, c) - want));
                    }
            } else {
                worst = std::max(worst, matMaxAbs(anti));
                worst = std::max(worst, std::fabs(gab));
            }
        }
    return worst;
}

} // namespace

double anticommResidual(const CliffordRep& rep) {
    int d = rep.n + rep.m;
    std::vector<double> G(static_cast<std::size_t>(d) * d, 0.0);
    for (int a = 0; a < d; ++a) G[static_cast<std::size_t>(a * d + a)] = rep.gdiag[static_cast<std::size_t>(a)];
    return gradedAnticommDefect(rep, rep.sigma, G, d);
}

double traceIdentityResidual(const CliffordRep& rep) {
    double worst = 0.0;
    int d = rep.n + rep.m;
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            if (rep.blockOf(a) != rep.blockOf(b)) continue;
            Cplx tr = matTrace(matMul(rep.sigma[static_cast<std::size_t>(a)], rep.sigma[static_cast<std::size_t>(b)]));
            double gab = (a == b) ? rep.gdiag[static_cast<std::size_t>(a)] : 0.0;
            double nb = rep.blockOf(a) == 0 ? rep.Nh : rep.Nv;
            worst = std::max(worst, std::abs(2.0 * tr + Cplx(gab * nb, 0.0)));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Epsilon objects
//
// The weighted sum over antisymmetrized generator products reduces, after
// absorbing the 2^{|S|} weights into the unnormalized generators, to
//   E = prod_k ( I + chi_k s_k (x) s_k ),   chi_k = +-1/G_kk,
// a product of commuting involution factors. E/2^n is therefore a projector,
// so its rank equals trace(E)/2^n exactly, and a rank-1 reshape is determined
// by one nonzero weighted column and one nonzero row.

namespace {

struct EpsPassA {
    Cplx trace{0.0, 0.0};
    CMat col[2]; // weighted-column images anchored at rows 0 and 1
};

struct EpsPassB {
    CMat row;  // single-row image over the (i,j) pair
    CMat col2; // independently reweighted column image
};

// Iterate all generator subsets in reflected order, maintaining the running
// monomial product; the visitor receives the per-variant weights.
template <typename Fn>
void forEachSubset(const std::vector<Monomial>& s, const std::vector<double>& G, Fn&& visit) {
    int n = static_cast<int>(s.size());
    int N = n == 0 ? 1 : s[0].dim();
    Monomial cur = monoId(N);
    double wG = 1.0;
    int parity = 0;
    unsigned long long total = 1ULL << n;
    visit(cur, wG, parity);
    for (unsigned long long t = 1; t < total; ++t) {
        int k = countTrailingZeros(t);
        cur = monoMul(s[static_cast<std::size_t>(k)], cur);
        wG *= G[static_cast<std::size_t>(k)];
        parity ^= 1;
        visit(cur, wG, parity);
    }
}

int firstNonzeroIndex(const CMat& M, double tol) {
    for (std::size_t t = 0; t < M.a.size(); ++t)
        if (std::abs(M.a[t]) > tol) return static_cast<int>(t);
    return -1;
}

int measuredTransposeSign(const CMat& M, double tol) {
    double sym = 0.0, anti = 0.0;
    for (int r = 0; r < M.rows; ++r)
        for (int c = 0; c < M.cols; ++c) {
            sym = std::max(sym, std::abs(M.at(r, c) - M.at(c, r)));
            anti = std::max(anti, std::abs(M.at(r, c) + M.at(c, r)));
        }
    if (sym <= tol) return 1;
    if (anti <= tol) return -1;
    return 0;
}

} // namespace

EpsilonObject epsilonObjects(const BlockSignature& bs) {
    EpsilonObject out;
    out.n = bs.n();
    out.N = spinorDim(out.n);
    int n = out.n;
    int N = out.N;
    if (n < 1 || n > 24) throw DomainError("epsilonObjects: generator count out of range");
    std::vector<Monomial> s = signedGenerators(bs);
    std::vector<double> G = diagEntries(bs);
    double subsets = std::pow(2.0, n);

    // Half-spinor parity from the full ordered product (central/chirality
    // element); for even n it is diagonal.
    if (n % 2 == 0) {
        Monomial full = monoId(N);
        for (int k = n - 1; k >= 0; --k) full = monoMul(s[static_cast<std::size_t>(k)], full);
        out.chirality.assign(static_cast<std::size_t>(N), 0);
        for (int j = 0; j < N; ++j) {
            if (full.perm[static_cast<std::size_t>(j)] != j)
                throw DomainError("epsilonObjects: parity element is not diagonal");
            Cplx rel = full.phase[static_cast<std::size_t>(j)] / full.phase[0];
            if (std::abs(rel.imag()) > 1e-12 || std::fabs(std::fabs(rel.real()) - 1.0) > 1e-12)
                throw DomainError("epsilonObjects: parity element is not a sign pattern");
            out.chirality[static_cast<std::size_t>(j)] = rel.real() > 0.0 ? 1 : -1;
        }
    }

    std::mt19937_64 rng(0x5eedULL + static_cast<unsigned long long>(n));
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    std::vector<double> w1(static_cast<std::size_t>(N)), w2(static_cast<std::size_t>(N));
    for (auto& v : w1) v = unif(rng);
    for (auto& v : w2) v = unif(rng);

    int nAnchors = N > 1 ? 2 : 1;
    EpsPassA passA[2];
    for (int v = 0; v < 2; ++v)
        for (int a = 0; a < nAnchors; ++a) passA[v].col[a] = CMat(N, N);
    forEachSubset(s, G, [&](const Monomial& cur, double wG, int parity) {
        double w[2] = {wG, parity ? -wG : wG};
        Cplx tr = monoTrace(cur);
        for (int v = 0; v < 2; ++v) {
            passA[v].trace += w[v] * tr * tr;
            for (int a = 0; a < nAnchors; ++a) {
                int k0 = cur.perm[static_cast<std::size_t>(a)];
                Cplx base = w[v] * cur.phase[static_cast<std::size_t>(a)];
                for (int j = 0; j < N; ++j)
                    passA[v].col[a].at(k0, cur.perm[static_cast<std::size_t>(j)]) +=
                        base * cur.phase[static_cast<std::size_t>(j)] * w1[static_cast<std::size_t>(j)];
            }
        }
    });

    int rank[2];
    for (int v = 0; v < 2; ++v) {
        double raw = passA[v].trace.real() / subsets;
        if (std::abs(passA[v].trace.imag()) > 1e-6 * subsets || std::fabs(raw - std::llround(raw)) > 1e-6)
            throw DomainError("epsilonObjects: projector rank is not an integer");
        rank[v] = static_cast<int>(std::llround(raw));
        if (rank[v] > 1) throw DomainError("epsilonObjects: reshaped sum has rank above one");
    }

    int anchorK[2] = {0, 0}, anchorM[2] = {0, 0};
    int anchorRow[2] = {0, 0};
    int fnz[2] = {-1, -1};
    for (int v = 0; v < 2; ++v) {
        EpsilonVariant& var = v == 0 ? out.plus : out.minus;
        var.rank = rank[v];
        if (rank[v] == 0) {
            var.vanishes = true;
            var.factorResidual = matMaxAbs(passA[v].col[0]) / subsets;
            continue;
        }
        for (int a = 1; a < nAnchors; ++a)
            if (matMaxAbs(passA[v].col[a]) > matMaxAbs(passA[v].col[anchorRow[v]])) anchorRow[v] = a;
        const CMat& colSel = passA[v].col[anchorRow[v]];
        double scale = matMaxAbs(colSel);
        if (scale <= 0.0) throw DomainError("epsilonObjects: rank-one sum with empty column image");
        fnz[v] = firstNonzeroIndex(colSel, 1e-8 * scale);
        if (fnz[v] < 0) throw DomainError("epsilonObjects: rank-one sum with empty column image");
        Cplx fv = colSel.a[static_cast<std::size_t>(fnz[v])];
        var.lower = matScale(colSel, Cplx(1.0, 0.0) / fv);
        int best = 0;
        double bm = 0.0;
        for (std::size_t t = 0; t < var.lower.a.size(); ++t)
            if (std::abs(var.lower.a[t]) > bm) {
                bm = std::abs(var.lower.a[t]);
                best = static_cast<int>(t);
            }
        anchorK[v] = best / N;
        anchorM[v] = best % N;
    }

    EpsPassB passB[2];
    for (int v = 0; v < 2; ++v) {
        passB[v].row = CMat(N, N);
        passB[v].col2 = CMat(N, N);
    }
    std::vector<int> iperm(static_cast<std::size_t>(N));
    forEachSubset(s, G, [&](const Monomial& cur, double wG, int parity) {
        double w[2] = {wG, parity ? -wG : wG};
        for (int j = 0; j < N; ++j) iperm[static_cast<std::size_t>(cur.perm[static_cast<std::size_t>(j)])] = j;
        for (int v = 0; v < 2; ++v) {
            if (rank[v] == 0) continue;
            int ip = iperm[static_cast<std::size_t>(anchorK[v])];
            int jp = iperm[static_cast<std::size_t>(anchorM[v])];
            passB[v].row.at(ip, jp) += w[v] * cur.phase[static_cast<std::size_t>(ip)] * cur.phase[static_cast<std::size_t>(jp)];
            int k0 = cur.perm[static_cast<std::size_t>(anchorRow[v])];
            Cplx base = w[v] * cur.phase[static_cast<std::size_t>(anchorRow[v])];
            for (int j = 0; j < N; ++j)
                passB[v].col2.at(k0, cur.perm[static_cast<std::size_t>(j)]) +=
                    base * cur.phase[static_cast<std::size_t>(j)] * w2[static_cast<std::size_t>(j)];
        }
    });

    for (int v = 0; v < 2; ++v) {
        EpsilonVariant& var = v == 0 ? out.plus : out.minus;
        if (var.vanishes) continue;
        const CMat& colSel = passA[v].col[anchorRow[v]];
        Cplx fv = colSel.a[static_cast<std::size_t>(fnz[v])];
        Cplx anchorVal = colSel.at(anchorK[v], anchorM[v]);
        // E = col (x) row / col[anchor] and E = N lower (x) upper.
        var.upper = matScale(passB[v].row, fv / (anchorVal * static_cast<double>(N)));
        Cplx fv2 = passB[v].col2.a[static_cast<std::size_t>(fnz[v])];
        double defect = 0.0;
        if (std::abs(fv2) < 1e-10 * matMaxAbs(passB[v].col2)) {
            defect = 1.0; // reweighted image inconsistent with the candidate support
        } else {
            CMat other = matScale(passB[v].col2, Cplx(1.0, 0.0) / fv2);
            defect = matMaxAbs(matSub(other, var.lower));
        }
        var.factorResidual = defect;
        double scale = std::max(1.0, matMaxAbs(var.lower));
        var.transposeSign = measuredTransposeSign(var.lower, 1e-9 * scale);
        if (n % 2 == 0) {
            double same = 0.0, cross = 0.0;
            for (int r = 0; r < N; ++r)
                for (int c = 0; c < N; ++c) {
                    double mag = std::abs(var.lower.at(r, c));
                    if (out.chirality[static_cast<std::size_t>(r)] == out.chirality[static_cast<std::size_t>(c)])
                        same = std::max(same, mag);
                    else
                        cross = std::max(cross, mag);
                }
            var.blockDiagonal = cross <= 1e-9 * scale && same > 1e-9 * scale;
            var.blockOffDiagonal = same <= 1e-9 * scale && cross > 1e-9 * scale;
        }
    }
    return out;
}

EpsilonClassRow epsilonExpectedClass(int n) {
    EpsilonClassRow row;
    row.residue = ((n % 8) + 8) % 8;
    switch (row.residue) {
        case 0: row.symmetric = true; row.blockDiagonal = true; break;
        case 1: row.symmetric = true; break;
        case 2: row.blockOffDiagonal = true; break;
        case 3: row.antisymmetric = true; break;
        case 4: row.antisymmetric = true; row.blockDiagonal = true; break;
        case 5: row.antisymmetric = true; break;
        case 6: row.blockOffDiagonal = true; break;
        case 7: row.symmetric = true; break;
    }
    return row;
}

// ---------------------------------------------------------------------------
// Group-contraction symmetry

namespace {

// Epsilon factor used for raising the spinor pair: the surviving variant for
// odd n, the plus variant for even n.
const EpsilonVariant& raisingVariant(const EpsilonObject& eps) {
    if (eps.plus.vanishes && eps.minus.vanishes)
        throw DomainError("epsilon raising: no surviving factor");
    if (eps.plus.vanishes) return eps.minus;
    return eps.plus;
}

// Ordered product of the subset's generators times the raised epsilon factor.
CMat raisedGroupMatrix(const BlockSignature& bs, const std::vector<int>& subset,
                       const EpsilonObject& eps) {
    int N = eps.N;
    std::vector<Monomial> s = signedGenerators(bs);
    Monomial prod = monoId(N);
    for (int idx = static_cast<int>(subset.size()) - 1; idx >= 0; --idx) {
        int k = subset[static_cast<std::size_t>(idx)];
        if (k < 0 || k >= bs.n()) throw DomainError("group contraction: generator index out of range");
        if (idx > 0 && subset[static_cast<std::size_t>(idx - 1)] >= k)
            throw DomainError("group contraction: subset must be strictly increasing");
        prod = monoMul(s[static_cast<std::size_t>(k)], prod);
    }
    const EpsilonVariant& var = raisingVariant(eps);
    double norm = std::pow(std::sqrt(0.5), static_cast<double>(subset.size()));
    return matScale(matMul(monoDense(prod), var.upper), Cplx(norm, 0.0));
}

} // namespace

GroupSymmetryReport groupContractionSymmetry(const BlockSignature& bs, const std::vector<int>& subset) {
    GroupSymmetryReport rep;
    rep.n = bs.n();
    rep.q = static_cast<int>(subset.size());
    EpsilonObject eps = epsilonObjects(bs);
    CMat A = raisedGroupMatrix(bs, subset, eps);
    double scale = matMaxAbs(A);
    if (scale <= 1e-14) {
        rep.vanishes = true;
        return rep;
    }
    rep.transposeSign = measuredTransposeSign(A, 1e-9 * scale);
    if (rep.n % 2 == 0) {
        double same = 0.0, cross = 0.0;
        for (int r = 0; r < A.rows; ++r)
            for (int c = 0; c < A.cols; ++c) {
                double mag = std::abs(A.at(r, c));
                if (eps.chirality[static_cast<std::size_t>(r)] == eps.chirality[static_cast<std::size_t>(c)])
                    same = std::max(same, mag);
                else
                    cross = std::max(cross, mag);
            }
        rep.crossBlock = cross > same;
        rep.offSupport = std::min(same, cross);
    }
    return rep;
}

int predictedGroupSign(int n, int q) {
    int r = (((n - 2 * q) % 8) + 8) % 8;
    if (n % 2 == 1) return (r == 1 || r == 7) ? 1 : -1;
    // Even rank: diagonal-support rows alternate on n-2q, off-diagonal rows
    // alternate on n+2q.
    if (r == 0) return 1;
    if (r == 4) return -1;
    int rp = (((n + 2 * q) % 8) + 8) % 8;
    return rp == 6 ? 1 : -1;
}

bool predictedGroupCross(int n, int q) {
    if (n % 2 == 1) return false;
    return (((n - 2 * q) % 4) + 4) % 4 == 2;
}

// ---------------------------------------------------------------------------
// Spinor transfer

CMat spinorizeVector(const std::vector<Cplx>& omega, const CliffordRep& rep) {
    int d = rep.n + rep.m;
    if (static_cast<int>(omega.size()) != d) throw DomainError("spinorize: component count mismatch");
    int Nt = rep.Nh + rep.Nv;
    CMat M(Nt, Nt);
    for (int a = 0; a < d; ++a) {
        const CMat& S = rep.sigma[static_cast<std::size_t>(a)];
        for (std::size_t t = 0; t < M.a.size(); ++t) M.a[t] += omega[static_cast<std::size_t>(a)] * S.a[t];
    }
    return M;
}

std::vector<Cplx> despinorizeVector(const CMat& M, const CliffordRep& rep) {
    int d = rep.n + rep.m;
    int Nt = rep.Nh + rep.Nv;
    if (M.rows != Nt || M.cols != Nt) throw DomainError("despinorize: matrix size mismatch");
    std::vector<Cplx> omega(static_cast<std::size_t>(d), Cplx(0.0, 0.0));
    for (int b = 0; b < d; ++b) {
        int lo = rep.blockOf(b) == 0 ? 0 : rep.Nh;
        int hi = rep.blockOf(b) == 0 ? rep.Nh : Nt;
        double nb = static_cast<double>(hi - lo);
        Cplx tr(0.0, 0.0);
        const CMat& S = rep.sigma[static_cast<std::size_t>(b)];
        for (int r = lo; r < hi; ++r)
            for (int c = lo; c < hi; ++c) tr += S.at(r, c) * M.at(c, r);
        // tr_block(sigma_b M) = -1/2 N_block G_bb omega^b for diagonal G
        omega[static_cast<std::size_t>(b)] = -2.0 * tr / (nb * rep.gdiag[static_cast<std::size_t>(b)]);
    }
    return omega;
}

CMat spinorizeAntisymGroup(const std::vector<Cplx>& comps, const BlockSignature& bs, int q) {
    int n = bs.n();
    if (q < 0 || q > n) throw DomainError("group spinorize: order out of range");
    int N = spinorDim(n);
    std::vector<Monomial> s = signedGenerators(bs);
    double norm = std::pow(std::sqrt(0.5), static_cast<double>(q));
    CMat out(N, N);
    std::size_t count = 0;
    // lexicographic strictly-increasing subsets
    std::function<void(int, int, const Monomial&)> walk = [&](int pos, int from, const Monomial& acc) {
        if (pos == q) {
            if (count >= comps.size()) throw DomainError("group spinorize: component count mismatch");
            Cplx c = comps[count++] * norm;
            CMat D = monoDense(acc);
            for (std::size_t t = 0; t < out.a.size(); ++t) out.a[t] += c * D.a[t];
            return;
        }
        for (int k = from; k <= n - (q - pos); ++k)
            walk(pos + 1, k + 1, monoMul(acc, s[static_cast<std::size_t>(k)]));
    };
    walk(0, 0, monoId(N));
    if (count != comps.size()) throw DomainError("group spinorize: component count mismatch");
    return out;
}

// ---------------------------------------------------------------------------
// Fundamental-spinor values

FundamentalReport fundamentalSpinorCheck(const std::vector<Cplx>& xi, const BlockSignature& bs) {
    int n = bs.n();
    int N = spinorDim(n);
    if (static_cast<int>(xi.size()) != N) throw DomainError("fundamental check: spinor size mismatch");
    FundamentalReport rep;
    rep.qValue.assign(static_cast<std::size_t>(n) + 1, 0.0);
    EpsilonObject eps = epsilonObjects(bs);
    const EpsilonVariant& var = raisingVariant(eps);
    std::vector<Monomial> s = signedGenerators(bs);

    double xi2 = 0.0;
    for (const auto& v : xi) xi2 += std::norm(v);
    if (n % 2 == 0 && xi2 > 0.0) {
        double even = 0.0, odd = 0.0;
        for (int r = 0; r < N; ++r) {
            double mag = std::abs(xi[static_cast<std::size_t>(r)]);
            if (eps.chirality[static_cast<std::size_t>(r)] > 0) even = std::max(even, mag);
            else odd = std::max(odd, mag);
        }
        if (even > 1e-12 * std::sqrt(xi2) && odd > 1e-12 * std::sqrt(xi2))
            throw DomainError("fundamental check: even ranks classify single-parity spinors");
    }
    double scaleRef = std::max(1e-300, xi2 * matMaxAbs(var.upper) * N);

    std::function<void(int, int, const Monomial&)> walk = [&](int q, int from, const Monomial& acc) {
        CMat A = matMul(monoDense(acc), var.upper);
        Cplx val(0.0, 0.0);
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) val += xi[static_cast<std::size_t>(r)] * A.at(r, c) * xi[static_cast<std::size_t>(c)];
        double norm = std::pow(std::sqrt(0.5), static_cast<double>(q));
        rep.qValue[static_cast<std::size_t>(q)] = std::max(rep.qValue[static_cast<std::size_t>(q)], std::abs(val) * norm);
        for (int k = from; k < n; ++k) walk(q + 1, k + 1, monoMul(acc, s[static_cast<std::size_t>(k)]));
    };
    walk(0, 0, monoId(N));

    double anyVal = 0.0;
    for (double v : rep.qValue) anyVal = std::max(anyVal, v);
    if (xi2 == 0.0 || anyVal <= 1e-14 * scaleRef) {
        rep.degenerate = true;
        return rep;
    }
    auto allowed = [&](int q) {
        if (n % 2 == 0) return q == n / 2;
        return q == (n - 1) / 2 || q == (n + 1) / 2;
    };
    double stray = 0.0;
    for (int q = 0; q <= n; ++q)
        if (!allowed(q)) stray = std::max(stray, rep.qValue[static_cast<std::size_t>(q)]);
    rep.fundamental = stray <= 1e-9 * scaleRef;
    return rep;
}

// ---------------------------------------------------------------------------
// Frame lift

std::vector<CMat> sigmaFrameLift(const CliffordRep& rep, const std::vector<double>& frameL) {
    int d = rep.n + rep.m;
    if (static_cast<int>(frameL.size()) != d * d) throw DomainError("frame lift: frame size mismatch");
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            if (rep.blockOf(a) != rep.blockOf(b) && std::fabs(frameL[static_cast<std::size_t>(a * d + b)]) > 1e-12)
                throw DomainError("frame lift: frame mixes the split blocks");
    int Nt = rep.Nh + rep.Nv;
    std::vector<CMat> out(static_cast<std::size_t>(d), CMat(Nt, Nt));
    for (int a = 0; a < d; ++a)
        for (int ah = 0; ah < d; ++ah) {
            double l = frameL[static_cast<std::size_t>(a * d + ah)];
            if (l == 0.0) continue;
            const CMat& S = rep.sigma[static_cast<std::size_t>(ah)];
            for (std::size_t t = 0; t < S.a.size(); ++t) out[static_cast<std::size_t>(a)].a[t] += l * S.a[t];
        }
    return out;
}

double liftAnticommResidual(const CliffordRep& rep, const std::vector<CMat>& sigmaU,
                            const std::vector<double>& Gvals) {
    int d = rep.n + rep.m;
    if (static_cast<int>(sigmaU.size()) != d || static_cast<int>(Gvals.size()) != d * d)
        throw DomainError("lift residual: size mismatch");
    return gradedAnticommDefect(rep, sigmaU, Gvals, d);
}

// ---------------------------------------------------------------------------
// Flat-space spinor-field equation

TwistorField twistorSolutionField(const CliffordRep& rep, const std::vector<Cplx>& Omega,
                                  const std::vector<Cplx>& Pi) {
    int d = rep.n + rep.m;
    int Nt = rep.Nh + rep.Nv;
    if (static_cast<int>(Omega.size()) != Nt || static_cast<int>(Pi.size()) != Nt)
        throw DomainError("spinor-field solution: component size mismatch");
    // constant derivative table: D[e*Nt + b] = sum_r sigma_e[r][b] Pi[r]
    std::vector<Cplx> D(static_cast<std::size_t>(d) * Nt, Cplx(0.0, 0.0));
    for (int e = 0; e < d; ++e) {
        const CMat& S = rep.sigma[static_cast<std::size_t>(e)];
        for (int b = 0; b < Nt; ++b) {
            Cplx acc(0.0, 0.0);
            for (int r = 0; r < Nt; ++r) acc += S.at(r, b) * Pi[static_cast<std::size_t>(r)];
            D[static_cast<std::size_t>(e * Nt + b)] = acc;
        }
    }
    TwistorField f;
    f.value = [Omega, D, d, Nt](const Point& u) {
        if (static_cast<int>(u.size()) != d) throw DomainError("spinor-field solution: point size mismatch");
        std::vector<Cplx> w = Omega;
        for (int e = 0; e < d; ++e)
            for (int b = 0; b < Nt; ++b) w[static_cast<std::size_t>(b)] += u[static_cast<std::size_t>(e)] * D[static_cast<std::size_t>(e * Nt + b)];
        return w;
    };
    f.deriv = [D, d](const Point& u) {
        if (static_cast<int>(u.size()) != d) throw DomainError("spinor-field solution: point size mismatch");
        return D;
    };
    return f;
}

double twistorResidual(const CliffordRep& rep, const TwistorField& field,
                       const std::vector<Point>& pts) {
    int d = rep.n + rep.m;
    int Nt = rep.Nh + rep.Nv;
    double worst = 0.0;
    for (const Point& u : pts) {
        std::vector<Cplx> D = field.deriv(u);
        if (static_cast<int>(D.size()) != d * Nt) throw DomainError("spinor-field residual: derivative size mismatch");
        // F[a][B][g] = sum_e sigma_a[e][g] D[B*?]... stored flattened
        std::vector<Cplx> F(static_cast<std::size_t>(d) * d * Nt, Cplx(0.0, 0.0));
        for (int a = 0; a < d; ++a) {
            const CMat& S = rep.sigma[static_cast<std::size_t>(a)];
            for (int B = 0; B < d; ++B)
                for (int g = 0; g < Nt; ++g) {
                    Cplx acc(0.0, 0.0);
                    for (int e = 0; e < Nt; ++e) acc += S.at(e, g) * D[static_cast<std::size_t>(B * Nt + e)];
                    F[(static_cast<std::size_t>(a) * d + B) * Nt + g] = acc;
                }
        }
        // trace part per split block: raised-direction sums stay inside each
        // block because the two generator families live on separate factors
        std::vector<Cplx> tracePart(2 * static_cast<std::size_t>(Nt), Cplx(0.0, 0.0));
        for (int e = 0; e < d; ++e) {
            double raise = 1.0 / rep.gdiag[static_cast<std::size_t>(e)];
            std::size_t blk = static_cast<std::size_t>(rep.blockOf(e));
            for (int g = 0; g < Nt; ++g)
                tracePart[blk * Nt + g] += raise * F[(static_cast<std::size_t>(e) * d + e) * Nt + g];
        }
        for (int a = 0; a < d; ++a)
            for (int B = 0; B < d; ++B) {
                double gab = a == B ? rep.gdiag[static_cast<std::size_t>(a)] : 0.0;
                std::size_t blk = static_cast<std::size_t>(rep.blockOf(a));
                double blkSize = static_cast<double>(blk == 0 ? rep.n : rep.m);
                for (int g = 0; g < Nt; ++g) {
                    Cplx sym = 0.5 * (F[(static_cast<std::size_t>(a) * d + B) * Nt + g] +
                                      F[(static_cast<std::size_t>(B) * d + a) * Nt + g]);
                    Cplx rhs = gab == 0.0 ? Cplx(0.0, 0.0)
                                          : (gab / blkSize) * tracePart[blk * Nt + g];
                    worst = std::max(worst, std::abs(sym - rhs));
                }
            }
    }
    return worst;
}

} // namespace aniso
