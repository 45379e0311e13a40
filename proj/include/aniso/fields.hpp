#pragma once

#include <vector>

#include "aniso/curvature.hpp"

namespace aniso {

// Matter fields living on a geometry: multi-component scalars (a complex
// component is stored as two real ones, real part first; conjugation negates
// the imaginary parts) and covector fields of the massive-vector type (one
// group of d = n+m real components per field copy).

enum class FieldKind { Scalar, Covector };

struct MatterField {
    FieldKind kind = FieldKind::Scalar;
    std::vector<Expr> components; // scalar: any count >= 1; covector: multiple of d
    double mass = 0.0;            // >= 0
};

// ---------------------------------------------------------------------------
// Scalar fields

// Wave operator, curvature-coupled wave-equation residual, Lagrangian density,
// and the two energy-momentum tensors, all evaluated at one point.  The wave
// operator is the metric contraction of the second covariant derivative; the
// curvature coupling carries the conformal weight (d-2)/(4(d-1)) against the
// scalar curvature.
struct ScalarFieldReport {
    int components = 0;            // real component count
    std::vector<double> box;       // wave operator per component
    std::vector<double> residual;  // wave-equation residual per component
    double maxResidual = 0.0;
    double volume = 0.0;           // sqrt |det G| of the block metric
    double lagrangian = 0.0;       // density, volume factor included
    std::vector<double> canonical; // canonical energy-momentum, d*d
    std::vector<double> metric;    // symmetric metric energy-momentum, d*d
};

ScalarFieldReport scalarFieldOps(const Geometry& geom, const DConnection& conn,
                                 const MatterField& field, const Point& u);

// The symmetric metric energy-momentum tensor of a scalar field as a lazy
// point-evaluated tensor field (two lower combined slots).  Supports order-0
// jet requests only; it exists to source the gravitational field-equation
// residuals.
TensorField energyMomentumField(const Geometry& geom, const DConnection& conn,
                                const MatterField& field);

// ---------------------------------------------------------------------------
// Massive vector (Proca-type) fields

// Field strength f_{alpha beta} = D_alpha phi_beta - D_beta phi_alpha, the
// first-order equations D_alpha f^{alpha beta} + mu^2 phi^beta, the divergence
// constraint D_alpha phi^alpha, and the second-order form
// box phi_alpha + R_{alpha beta} phi^beta + mu^2 phi_alpha.  Multiple groups
// of d components are evaluated independently (a complex field is two groups).
struct ProcaReport {
    int groups = 0;
    std::vector<double> strength;    // groups * d * d, f_{alpha beta}
    std::vector<double> firstOrder;  // groups * d
    std::vector<double> constraint;  // groups
    std::vector<double> secondOrder; // groups * d
    double maxFirstOrder = 0.0;
    double maxConstraint = 0.0;
    double maxSecondOrder = 0.0;
};

ProcaReport procaOps(const Geometry& geom, const DConnection& conn, const MatterField& field,
                     const Point& u);

} // namespace aniso
