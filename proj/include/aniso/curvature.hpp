#pragma once

#include <cstdint>
#include <vector>

#include "aniso/connection.hpp"

namespace aniso {

// Nonholonomy coefficients of the adapted frame as jets over combined indices,
// w[(gamma*d + alpha)*d + beta]; only the fiber rows are nonzero.
std::vector<Jet> anholonomy(const Geometry& geom, const Point& u, int order);

// ---------------------------------------------------------------------------
// Torsion

struct TorsionBlocks {
    int n = 0, m = 0;
    std::vector<Jet> full; // T^gamma_{alpha beta} at (gamma*d + alpha)*d + beta
    // Closed-form block extracts (same values as the full tensor):
    std::vector<Jet> Th; // T^i_jk     at (i*n + j)*n + k
    std::vector<Jet> Tv; // T^a_ij     at (a*n + i)*n + j
    std::vector<Jet> Ph; // P^i_jb     at (i*n + j)*m + b   (= T^i_{j b})
    std::vector<Jet> Pv; // P^a_bi     at (a*m + b)*n + i   (= T^a_{i b})
    std::vector<Jet> S;  // S^a_bc     at (a*m + b)*m + c
};

// Coefficient antisymmetrization plus frame nonholonomy; jets to order <= 2.
TorsionBlocks torsion(const DConnection& conn, const Point& u, int order);

// ---------------------------------------------------------------------------
// Curvature

// R^delta_{gamma alpha beta} = delta_alpha Gamma^delta_{gamma beta}
//   - delta_beta Gamma^delta_{gamma alpha}
//   + Gamma^delta_{eps alpha} Gamma^eps_{gamma beta}
//   - Gamma^delta_{eps beta} Gamma^eps_{gamma alpha}
//   - w^eps_{alpha beta} Gamma^delta_{gamma eps},
// stored at ((delta*d + gamma)*d + alpha)*d + beta; jets to order <= 1.
std::vector<Jet> curvatureTensor(const DConnection& conn, const Point& u, int order);

struct CurvatureBlocks {
    int n = 0, m = 0;
    std::vector<Jet> full; // d^4
    std::vector<Jet> Rhh;  // R^i_{h jk}   ((i*n+h)*n+j)*n+k
    std::vector<Jet> Rvv;  // R^a_{b jk}   ((a*m+b)*n+j)*n+k
    std::vector<Jet> Phh;  // P^i_{j k c}  ((i*n+j)*n+k)*m+c
    std::vector<Jet> Pvv;  // P^a_{b k c}  ((a*m+b)*n+k)*m+c
    std::vector<Jet> Shh;  // S^i_{j b c}  ((i*n+j)*m+b)*m+c
    std::vector<Jet> Svv;  // S^a_{b c e}  ((a*m+b)*m+c)*m+e
};
CurvatureBlocks curvatureBlocks(const DConnection& conn, const Point& u, int order);

// Lazy tensor-field views for covariant differentiation.
TensorField torsionField(const DConnection& conn);   // {up, low, low}
TensorField curvatureField(const DConnection& conn); // {up, low, low, low}

// ---------------------------------------------------------------------------
// Contractions

struct CurvatureSummary {
    int n = 0, m = 0;
    std::vector<double> ricci;    // R_{alpha beta} = R^tau_{alpha tau beta}, d×d
    double scalar = 0.0;          // G^{alpha beta} R_{alpha beta}
    std::vector<double> einstein; // R_{ab} - scalar*G_{ab}/2
    std::vector<double> phi;      // -(R_{ab} - scalar*G_{ab}/(n+m))/2, trace-free
    bool weylDefined = false;     // n+m >= 3
    std::vector<double> weyl;     // C^gamma_{tau alpha beta}, d^4 (empty if undefined)
};

CurvatureSummary curvatureSummary(const DConnection& conn, const Point& u);

// The conformally weighted combination alone; throws for n+m < 3.
std::vector<double> weylTensor(const DConnection& conn, const Point& u);

// ---------------------------------------------------------------------------
// Identities

struct IdentityReport {
    double commutatorScalar = 0.0; // scalar-commutator-vs-torsion residual
    double commutatorVector = 0.0; // vector commutator vs curvature + torsion
    double bianchiFirst = 0.0;     // cyclic curvature/torsion identity
    double bianchiSecond = 0.0;    // cyclic covariant-derivative identity
    std::uint64_t seed = 0;        // seed of the generated polynomial test fields
};

// Residual maxima over the given points, using seeded random polynomial scalar
// and vector fields of degree <= 3.
IdentityReport identityResiduals(const DConnection& conn, const std::vector<Point>& pts,
                                 std::uint64_t seed);

// Degree-<=3 polynomial with seeded coefficients, for test fields.
Expr randomPolyExpr(const Shape& shape, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Field equations and conservation

struct FieldEqResiduals {
    double einstein = 0.0;         // Einstein block equation with cosmological term
    double phiForm = 0.0;          // trace-adjusted potential form
    double torsionSpin = 0.0;      // torsion vs spin-density algebraic relation
    double spinConservation = 0.0; // divergence law for the spin density
};

// E: energy-momentum (two lower slots); S: spin density (one upper, two lower).
FieldEqResiduals fieldEquationResiduals(const DConnection& conn, const TensorField& E,
                                        const TensorField& S, double lambda, double kappa,
                                        const Point& u);

// Conservation-law vector: torsion contracted twice against curvature and the
// Ricci tensor; identically zero for torsion-free connections. Two independent
// contraction orders for cross-checking.
std::vector<double> conservationU(const DConnection& conn, const Point& u);
std::vector<double> conservationUAlt(const DConnection& conn, const Point& u);

} // namespace aniso
