#pragma once

// Nearly autoparallel maps between two locally anisotropic spaces that share
// one adapted frame: deformation splitting, autoparallel-transport residuals,
// the defining first-order systems of the four deformation classes, and the
// per-class invariant packs whose equality is the practical map criterion.
//
// Conventions used throughout this module:
//  * d = n + m is the total dimension; combined indices run 0..d-1 with the
//    base block first.
//  * Connection coefficient arrays are flat row-major jets or values in the
//    layout [(alpha*d + beta)*d + dir]: upper index first, argument index
//    second, differentiation direction last.
//  * Rank-4 curvature-type arrays use [((delta*d + alpha)*d + beta)*d + gamma]:
//    upper index, argument index, then the two direction indices.
//  * A "symmetric part" of a coefficient array is the plain half-sum over the
//    two lower indices; the remainder is kept so that the two parts reassemble
//    the input exactly.
//  * Round-bracket symmetrization over two indices is the unnormalized
//    two-term sum; over three indices it is the unnormalized cyclic sum.

#include <string>
#include <vector>

#include "aniso/connection.hpp"
#include "aniso/geometry.hpp"

namespace aniso {

// ---------------------------------------------------------------------------
// Deformation splitting
// ---------------------------------------------------------------------------

// Symmetric/antisymmetric decomposition of two connection coefficient arrays
// and of their difference.  All arrays are d^3 jets in the coefficient layout;
// symA + antA reassembles the first input exactly (and likewise for B), and
// P + Q equals the raw coefficient difference exactly.
struct DeformationSplit {
    int n = 0;
    int m = 0;
    std::vector<Jet> symA;  // half-sum of the first connection over its lower pair
    std::vector<Jet> antA;  // remainder: first connection minus symA
    std::vector<Jet> symB;
    std::vector<Jet> antB;
    std::vector<Jet> P;  // symB - symA, symmetric deformation
    std::vector<Jet> Q;  // antB - antA, antisymmetric deformation
};

// Split two full coefficient arrays (d^3 jets each, coefficient layout).
DeformationSplit splitCoefficients(int n, int m, const std::vector<Jet>& gammaA,
                                   const std::vector<Jet>& gammaB);

// Split two distinguished connections at a point.  Both must live on the same
// shape and their nonlinear connections must agree at u to within 1e-10
// (DomainError otherwise); jets carry derivatives up to `order` (0..2).
DeformationSplit splitDeformation(const DConnection& connA, const DConnection& connB,
                                  const Point& u, int order = 1);

// Covector recovered from the trace of the symmetric deformation,
// psi_beta = P^tau_{beta tau} / (d + 1).  For a pure trace-type deformation
// P^alpha_{beta gamma} = psi_beta delta^alpha_gamma + psi_gamma delta^alpha_beta
// this returns psi exactly.
std::vector<Jet> traceCovector(const DeformationSplit& split);

// Build the trace-type symmetric deformation jets for a given covector psi
// (d jets), in the coefficient layout.
std::vector<Jet> traceDeformation(int n, int m, const std::vector<Jet>& psi);

// ---------------------------------------------------------------------------
// Autoparallel-transport residual along a sampled curve
// ---------------------------------------------------------------------------

// One sample of a parametrized curve: parameter value, position, coordinate
// tangent du/deta, and the proportionality factor of the transport law.
struct CurveSample {
    double eta = 0.0;
    Point u;
    std::vector<double> v;  // d entries, coordinate components of the tangent
    double rho = 0.0;
};

struct TransportReport {
    double maxResidual = 0.0;   // max abs residual of v^beta D_beta v^alpha - rho v^alpha
    double tangentError = 0.0;  // max abs mismatch between supplied tangents and
                                // central finite differences of the positions
};

// Evaluate the transport residual at the interior samples of a curve.  The
// supplied tangents are validated against central finite differences of the
// positions; a mismatch beyond `tangentTol` raises DomainError.  Needs at
// least three samples with strictly increasing parameter values.
TransportReport aparallelResidual(const DConnection& conn,
                                  const std::vector<CurveSample>& samples,
                                  double tangentTol = 1e-4);

// ---------------------------------------------------------------------------
// Map data
// ---------------------------------------------------------------------------

// Expression-grid description of a map between two spaces over a shared frame:
// the deformation tensors plus the optional per-class parameter fields.  Every
// grid is flat row-major over combined indices; an empty vector means the
// field is absent (treated as zero where a value is needed, or solved for
// where the class system permits).
struct NaMapData {
    int n = 0;
    int m = 0;
    std::vector<Expr> P;         // d^3, symmetric in the lower pair
    std::vector<Expr> Q;         // d^3, antisymmetric in the lower pair
    std::vector<Expr> K;         // d^3 target nonmetricity, index layout
                                 // [(dir*d + alpha)*d + beta] for K_{dir alpha beta}
    std::vector<Expr> psi;       // d, trace-class covector
    std::vector<Expr> b;         // d, class-1 covector
    std::vector<Expr> a;         // d^2, class-1 symmetric tensor
    std::vector<Expr> sigma;     // d, class-2 covector
    std::vector<Expr> F;         // d^2, class-2 structure tensor F^alpha_beta
    std::vector<Expr> phi;       // d, class-3 vector phi^alpha
    std::vector<Expr> q;         // d, class-3 covector with q.phi = +1 or -1
    std::vector<Expr> sigmaSym;  // d^2, class-3 symmetric tensor
    std::vector<Expr> nu;        // class 2: d covector; class 3: single entry
    std::vector<Expr> mu;        // d covector (classes 2 and 3)
};

// The same data evaluated to jets at one point (empty grids stay empty).
struct NaMapJets {
    int n = 0;
    int m = 0;
    std::vector<Jet> P;
    std::vector<Jet> Q;
    std::vector<Jet> K;
    std::vector<Jet> psi;
    std::vector<Jet> b;
    std::vector<Jet> a;
    std::vector<Jet> sigma;
    std::vector<Jet> F;
    std::vector<Jet> phi;
    std::vector<Jet> q;
    std::vector<Jet> sigmaSym;
    std::vector<Jet> nu;
    std::vector<Jet> mu;
};

NaMapJets evalMapData(const NaMapData& data, const Point& u, int order);

// ---------------------------------------------------------------------------
// Defining first-order systems
// ---------------------------------------------------------------------------

struct BasicResidualReport {
    double deformation = 0.0;  // the tangent-contracted transport deformation system
    double metricity = 0.0;    // the metric-deformation system against the
                               // declared target nonmetricity
};

// Residuals of the two defining equations of a nearly autoparallel map at u,
// contracted with the tangent v where the law demands it.  Derivatives are
// covariant with respect to `conn` (the undeformed side); the metric entering
// the second system is that connection's distinguished metric.  `data` must
// hold P (and Q, K when nonzero) as jets of order >= 1 at u.
BasicResidualReport naBasicResidual(const NaMapJets& data, const DConnection& conn,
                                    const std::vector<double>& v, const Point& u,
                                    double aParam, double bParam);

struct ClassResidualReport {
    double residual = 0.0;
    std::string parameterMode;  // "supplied" or "least-squares"
};

// Residual of the defining system of deformation class 1, 2, or 3 at u.
//  class 1: needs P (order >= 1); b and a are used when supplied, otherwise
//           solved pointwise by least squares.
//  class 2: needs F (order >= 1) and sigma; nu (d entries) and mu are used
//           when supplied, otherwise solved by least squares.
//  class 3: needs phi (order >= 1) and Q when nonzero; nu (1 entry) and mu
//           are used when supplied, otherwise solved by least squares.
// Missing required fields raise DomainError.
ClassResidualReport naClassResidual(int cls, const NaMapJets& data,
                                    const DConnection& conn, const Point& u);

// ---------------------------------------------------------------------------
// Invariant packs
// ---------------------------------------------------------------------------

// Numeric invariants of one space under maps of a given class, evaluated at a
// point.  For classes 0 and 2 `thomas` and `weyl` are the trace-adjusted
// symmetric connection and the trace-free curvature built from the working
// symmetric connection (class 2 first passes to its auxiliary connection,
// reported in `auxConn`).  For class 3 `thomas` is the structure-adjusted
// coefficient invariant, `weyl` the trace-completed curvature invariant built
// from the torsion-corrected curvature in `auxCurv` with completion tensor
// `pTensor`.
struct InvariantPack {
    int n = 0;
    int m = 0;
    int cls = 0;
    std::vector<double> thomas;   // d^3, coefficient layout
    std::vector<double> weyl;     // d^4, curvature layout
    std::vector<double> auxCurv;  // d^4, curvature the weyl tensor was built from
    std::vector<double> ricci;    // d^2 trace of auxCurv (first-direction for
                                  // classes 0/2, last-direction for class 3)
    std::vector<double> auxConn;  // class 2: d^3 auxiliary connection; else empty
    std::vector<double> pTensor;  // class 3: d^2 completion tensor; else empty
    double weylTrace = 0.0;       // max abs of the defining contraction of weyl
};

struct InvariantReport {
    InvariantPack packA;
    InvariantPack packB;
    double thomasMismatch = 0.0;    // max abs componentwise difference
    double weylMismatch = 0.0;
    double criterionResidual = 0.0;  // class 1 only: residual of the class-1
                                     // integrability criterion
    std::string parameterMode;       // class 1: "supplied" or "least-squares"
};

// Compare the invariant packs of two spaces sharing the frame of `geom`, with
// full connection coefficient jets given directly (order >= 1 for classes
// 0/2/3, order >= 1 plus curvature work for class 1).  `data` supplies the
// class parameter fields as jets (class 0 ignores it; class 1 uses b/a when
// present; class 2 needs F, sigma; class 3 needs phi, q and uses psi/sigmaSym
// when present).  Class 3 requires q.phi = +1 or -1 to within 1e-9 and total
// dimension >= 3 (DomainError otherwise).
InvariantReport invariantsFromJets(int cls, const Geometry& geom,
                                   const std::vector<Jet>& gammaA,
                                   const std::vector<Jet>& gammaB,
                                   const NaMapJets& data, const Point& u);

// Same comparison for two distinguished connections; shapes must match and
// the nonlinear connections must agree at u to within 1e-10.
InvariantReport invariants(int cls, const DConnection& connA, const DConnection& connB,
                           const NaMapJets& data, const Point& u);

// ---------------------------------------------------------------------------
// Conformal special case
// ---------------------------------------------------------------------------

// Map data of the conformal-factor special case of class 3: psi = 0, the
// covector field is the frame gradient of log Omega with index raised by the
// distinguished metric, the symmetric tensor is the metric itself, and
// P^alpha_{beta gamma} = sigma_{beta gamma} phi^alpha.  Omega must be positive
// at `probe` (DomainError otherwise); metric blocks must have dimension <= 3
// for the symbolic inverse.  The class-3 covector q is filled as
// phi_alpha / |phi|^2 when phi is nonzero at `probe`, else left empty.
NaMapData concircularCase(const Geometry& geom, const Expr& Omega, const Point& probe);

}  // namespace aniso
