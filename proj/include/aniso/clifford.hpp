#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aniso/geometry.hpp"

namespace aniso {

using Cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Small dense complex matrices

struct CMat {
    int rows = 0, cols = 0;
    std::vector<Cplx> a;
    CMat() = default;
    CMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, Cplx(0.0, 0.0)) {}
    Cplx& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    const Cplx& at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    bool empty() const { return a.empty(); }
};

CMat matId(int n);
CMat matMul(const CMat& A, const CMat& B);
CMat matAdd(const CMat& A, const CMat& B);
CMat matSub(const CMat& A, const CMat& B);
CMat matScale(const CMat& A, Cplx s);
CMat matTranspose(const CMat& A);
CMat matKron(const CMat& A, const CMat& B);
Cplx matTrace(const CMat& A);
double matMaxAbs(const CMat& A);

// ---------------------------------------------------------------------------
// Signatures and algebra classification

struct BlockSignature {
    int p = 0, q = 0; // p diagonal entries +1 followed by q entries -1
    int n() const { return p + q; }
};

struct SplitSignature {
    BlockSignature h, v;
};

// Minimal faithful-representation dimension: 2^{(n-1)/2} for odd n, 2^{n/2}
// for even n.
int spinorDim(int n);

std::vector<double> diagEntries(const BlockSignature& bs); // +1/-1 list

enum class RingKind { R, C, H, RplusR, HplusH, CplusC };

struct AlgebraDescriptor {
    RingKind ring = RingKind::R;
    int size = 1; // matrix block size over the ring
    int p = 0, q = 0;
    std::string label; // e.g. "M2(R)", "H + H"
};

// Real-algebra type of the (p,q) generator algebra via eightfold periodicity;
// the real dimension 2^{p+q} fixes the matrix size.
AlgebraDescriptor classifyClifford(int p, int q);

// ---------------------------------------------------------------------------
// Generator representations

struct CliffordRep {
    int n = 0, m = 0;   // generator counts of the two blocks
    BlockSignature hsig, vsig;
    int Nh = 0, Nv = 0; // spinor dimensions of the blocks
    std::vector<double> gdiag; // combined +-1 diagonal, size n+m
    std::vector<CMat> sigmaH;  // n matrices, Nh x Nh
    std::vector<CMat> sigmaV;  // m matrices, Nv x Nv
    std::vector<CMat> sigma;   // n+m block-embedded matrices, (Nh+Nv) square
    int blockOf(int k) const { return k < n ? 0 : 1; }
};

// Single-block generator matrices normalized so that s s' + s' s = -G I on
// the block.
std::vector<CMat> buildBlockGenerators(const BlockSignature& bs);

CliffordRep buildSigma(const SplitSignature& sig);

// Anticommutation defect of the graded split: same-block pairs are checked on
// their own block, cross pairs must multiply to zero.
double anticommResidual(const CliffordRep& rep);

// max |2 tr(s_a s_b) + G_ab tr(I)| over same-block pairs.
double traceIdentityResidual(const CliffordRep& rep);

// ---------------------------------------------------------------------------
// Epsilon objects (single block)

struct EpsilonVariant {
    bool vanishes = false;  // the weighted sum is identically zero
    int rank = 0;           // verified rank of the reshaped sum (0 or 1)
    CMat lower;             // eps_{km}, first nonzero entry normalized to +1
    CMat upper;             // eps^{ij}, scaled so the sum equals N * lower x upper
    int transposeSign = 0;  // +1 symmetric, -1 antisymmetric, 0 mixed
    bool blockDiagonal = false;    // couples equal half-spinor parities (even n)
    bool blockOffDiagonal = false; // couples opposite parities (even n)
    double factorResidual = 0.0;   // independent-reweighting consistency defect
};

struct EpsilonObject {
    int n = 0;
    int N = 0;
    EpsilonVariant plus, minus;
    std::vector<int> chirality; // per-basis-index parity (+1/-1), even n only
};

// Weighted sums over antisymmetrized generator products for both sign
// variants, factored through their rank-1 reshape.
EpsilonObject epsilonObjects(const BlockSignature& bs);

// Expected symmetry row for residue n mod 8.
struct EpsilonClassRow {
    int residue = 0;
    bool symmetric = false, antisymmetric = false;
    bool blockDiagonal = false, blockOffDiagonal = false;
};
EpsilonClassRow epsilonExpectedClass(int n);

// ---------------------------------------------------------------------------
// Symmetry of antisymmetrized-group contractions

struct GroupSymmetryReport {
    int n = 0, q = 0;
    bool crossBlock = false;   // support couples opposite parities (even n)
    int transposeSign = 0;     // measured on the support
    double offSupport = 0.0;   // magnitude outside the predicted support
    bool vanishes = false;     // the whole contraction is zero
};

// Symmetry of (product of the subset's generators) right-multiplied by the
// raised epsilon factor, measured in the spinor pair.
GroupSymmetryReport groupContractionSymmetry(const BlockSignature& bs,
                                             const std::vector<int>& subset);

// Predicted transpose sign for a q-fold group on an n-generator block.
// Odd n: +1 when n-2q = 1,7 (mod 8), -1 when 3,5. Even n, diagonal support
// (n-2q = 0 mod 4): +1 at residue 0, -1 at residue 4. Even n, off-diagonal
// support: +1 when n+2q = 6 (mod 8), -1 when 2.
int predictedGroupSign(int n, int q);
// Even n: whether the support couples opposite half-spinor parities.
bool predictedGroupCross(int n, int q);

// ---------------------------------------------------------------------------
// Spinor transfer of d-tensor slots

// M = sum_a omega^a sigma_a.
CMat spinorizeVector(const std::vector<Cplx>& omega, const CliffordRep& rep);
// Inverse of spinorizeVector through block traces of sigma_b M.
std::vector<Cplx> despinorizeVector(const CMat& M, const CliffordRep& rep);

// Contraction of a q-fold antisymmetric component set over one block with the
// ordered generator products: comps indexed by strictly increasing subsets in
// lexicographic order.
CMat spinorizeAntisymGroup(const std::vector<Cplx>& comps, const BlockSignature& bs, int q);

// ---------------------------------------------------------------------------
// Fundamental-spinor values

struct FundamentalReport {
    bool degenerate = false;  // all values vanish (zero spinor)
    bool fundamental = false; // only the distinguished group sizes survive
    std::vector<double> qValue; // max bilinear magnitude per group size q=0..n
};

// Bilinear values xi^T (sigma-group * raised epsilon) xi per group size.
// Values can be nonzero only when n-2q = 0,1,7 (mod 8); the spinor is
// fundamental when only the middle sizes survive (q = (n+-1)/2 for odd n,
// q = n/2 for even n), which holds for every nonzero spinor below rank 7.
// Even ranks classify single-parity spinors: xi must live in one half-spinor
// parity sector (mixed-parity input raises DomainError).
FundamentalReport fundamentalSpinorCheck(const std::vector<Cplx>& xi, const BlockSignature& bs);

// ---------------------------------------------------------------------------
// Frame lift

// sigma_alpha(u) = l_alpha^ahat sigma_ahat; l is (n+m) x (n+m) row-major and
// must be block-diagonal with respect to the split.
std::vector<CMat> sigmaFrameLift(const CliffordRep& rep, const std::vector<double>& frameL);

// max defect of s s' + s' s = -G(u) I per block for point matrices G(u)
// (block-diagonal (n+m)^2 row-major, real values).
double liftAnticommResidual(const CliffordRep& rep, const std::vector<CMat>& sigmaU,
                            const std::vector<double>& Gvals);

// ---------------------------------------------------------------------------
// Flat-space spinor-field equation

struct TwistorField {
    // omega^b(u) and its plain partial derivatives d omega^b / d u^e at
    // [e * dim + b], over the flat combined coordinates.
    std::function<std::vector<Cplx>(const Point&)> value;
    std::function<std::vector<Cplx>(const Point&)> deriv;
};

// omega(u) = Omega + u^a sigma_a Pi, the general solution family.
TwistorField twistorSolutionField(const CliffordRep& rep, const std::vector<Cplx>& Omega,
                                  const std::vector<Cplx>& Pi);

// Residual of the symmetrized sigma-weighted derivative equation against its
// trace part, maximized over the given points. The trace part is normalized
// per split block (the graded generator sum closes on each block separately).
double twistorResidual(const CliffordRep& rep, const TwistorField& field,
                       const std::vector<Point>& pts);

} // namespace aniso
