#pragma once

#include <complex>
#include <vector>

#include "aniso/clifford.hpp"
#include "aniso/curvature.hpp"

namespace aniso {

// ---------------------------------------------------------------------------
// Frame lift of the flat generators against a geometry's d-metric
//
// Each metric block is factored as g = l E l^T with E the flat diagonal of the
// representation (signed LDL^T with the square roots absorbed into l), so that
// sigma_alpha(u) = l_alpha^ahat sigma_ahat anticommutes to the point metric.
// Every ingredient is kept as a jet so the lifted generators can be
// frame-differentiated.

struct SpinorFrame {
    int n = 0, m = 0, Nt = 0;
    CliffordRep rep;               // flat generators; diagonal must match the metric signature
    std::vector<Jet> frameL;       // l_alpha^ahat, d*d row-major, block-diagonal
    std::vector<Jet> frameInv;     // (l^{-1})_ahat^alpha, d*d row-major
    std::vector<Jet> nconn;        // N-connection jets, n*m, for frame derivatives
    std::vector<CMat> sigmaU;      // lifted generator values at the point
    std::vector<CMat> dualFlat;    // flat pair duals: sum_{rc} sigma_ahat[rc] dualFlat[bhat][rc] = delta
    std::vector<CMat> dualU;       // point duals: same identity against sigmaU
};

// Throws DomainError when the representation split disagrees with the
// geometry shape or the metric's block signatures at u differ from the flat
// diagonal. order is the jet order retained (2 for curvature work).
SpinorFrame spinorFrame(const Geometry& geom, const CliffordRep& rep, const Point& u, int order);

// ---------------------------------------------------------------------------
// Spin connection
//
// One matrix per frame direction, from the projection formula
//   gamma_dir = (1/(N(n)+N(m))) (transferred Gamma - dual-contracted frame
//               derivative of the lifted generators),
// where the transfer contracts the connection coefficients with a lifted
// generator and a pair dual. Entries are kept as first-order jets so the
// curvature of the spin connection can be assembled by frame derivatives.

struct SpinConnection {
    int d = 0, Nt = 0;
    std::vector<CMat> gammaSpin; // values, [dir]
    std::vector<Jet> re, im;     // entries as jets at [(dir*Nt + r)*Nt + c]
};

SpinConnection spinConnection(const SpinorFrame& fr, const DConnection& conn, const Point& u);

// Max over directions of |trace gamma_dir|; vanishes for metric-compatible
// connections (the transferred coefficient trace cancels the logarithmic
// derivative of the frame determinant).
double spinTraceResidual(const SpinConnection& sc);

// Curvature of the spin connection by the same master formula as the tensor
// side (frame-derivative antisymmetrization, quadratic commutator, anholonomy
// term), one Nt x Nt matrix per direction pair at [alpha*d + beta].
std::vector<CMat> spinCurvatureOp(const SpinorFrame& fr, const SpinConnection& sc,
                                  const Geometry& geom, const Point& u);

// ---------------------------------------------------------------------------
// Curvature spinors
//
// X is the intertwining spin curvature: the least-squares solution of
//   X sigma_gamma - sigma_gamma X = R^delta_{gamma alpha beta} sigma_delta
// per direction pair (commutator action: the generators carry one upper and
// one lower spinor index). The attained equation residual is zero exactly when
// spinor parallel transport reproduces tensor transport (metric-compatible
// connections); opX keeps the master-formula curvature of the projected spin
// connection alongside, and the two coincide when the projection transports
// exactly. Ricci, scalar, Einstein, and the trace-adjusted form are recovered
// through X and the pair duals, so equality with the tensor-side summary is a
// cross-representation consistency check, not a restatement.

struct SpinorCurvature {
    int d = 0, Nt = 0;
    std::vector<CMat> X;           // intertwining curvature, [alpha*d + beta]
    std::vector<CMat> opX;         // master-formula curvature of the spin connection
    std::vector<CMat> torsionSpin; // generator-transferred torsion, [alpha*d + beta]
    double intertwineResidual = 0.0;
    std::vector<Cplx> ricci;       // d*d, first-direction contraction of the recovery
    Cplx scalar{0.0, 0.0};         // inverse-metric trace of ricci
    std::vector<Cplx> einstein;    // ricci - metric*scalar/2
    std::vector<Cplx> phi;         // -(ricci - metric*scalar/(n+m))/2
    std::vector<Cplx> psi;         // gravitational spinor, Nt^4 at ((a*Nt+b)*Nt+c)*Nt+e,
                                   // symmetrized over (a, c, e)
};

// psi dictionary: X is moved to flat frame labels, the matrix (upper, lower)
// pair is lowered with the surviving epsilon factor of each block, and the
// antisymmetric direction pair is carried onto a spinor pair by the two-fold
// generator groups of the same block (cross-block direction pairs carry no
// same-block group and drop).
SpinorCurvature curvatureSpinors(const Geometry& geom, const DConnection& conn,
                                 const CliffordRep& rep, const Point& u);

} // namespace aniso
