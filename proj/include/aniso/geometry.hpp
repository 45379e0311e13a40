#pragma once

#include <cstdint>
#include <vector>

#include "aniso/expr.hpp"
#include "aniso/jet.hpp"

namespace aniso {

// A point of the total space, listed base-first: (x1..xn, y1..ym).
using Point = std::vector<double>;

struct Shape {
    int n = 0; // base dimension
    int m = 0; // fiber dimension
    int d() const { return n + m; }
    bool operator==(const Shape&) const = default;
};

using ExprGrid = std::vector<std::vector<Expr>>;

// How the metric data is supplied:
//   Blocks     — base block g_ij, fiber block h_ab, and N_i^a as expression grids;
//   Lagrangian — a scalar L(x,y) with n == m; g = h = half the y-Hessian of L,
//                N supplied separately;
//   FullMetric — the full (n+m)x(n+m) coordinate-basis metric; N and the blocks
//                are recovered from it pointwise.
enum class MetricForm { Blocks, Lagrangian, FullMetric };

struct GeometrySpec {
    Shape shape;
    MetricForm form = MetricForm::Blocks;
    ExprGrid g, h; // Blocks: n×n and m×m, symmetric
    ExprGrid N;    // Blocks/Lagrangian: n rows × m columns, N[i][a]
    Expr lagrangian;
    ExprGrid G;    // FullMetric: (n+m)×(n+m), symmetric
};

// Deterministic probe points: uniform in [lo,hi]^dim from a seeded generator.
// The default box sits inside [-1,1] but off-center so that coordinate
// symmetries and singular loci at the origin are avoided.
std::vector<Point> probePoints(int dim, int count = 8, std::uint64_t seed = 20240801,
                               double lo = -0.85, double hi = 0.95);

class Geometry {
public:
    // Validates grids (dimensions, symmetry, invertibility) on the probe
    // points; throws DomainError on violation.
    static Geometry load(const GeometrySpec& spec, std::vector<Point> probes = {});

    const Shape& shape() const { return shape_; }
    const GeometrySpec& spec() const { return spec_; }

    // Jets of all components at once, row-major, to the requested order (0..3).
    std::vector<Jet> metricH(const Point& u, int order) const; // g_ij, n×n
    std::vector<Jet> metricV(const Point& u, int order) const; // h_ab, m×m
    std::vector<Jet> nconn(const Point& u, int order) const;   // N_i^a, n×m (i*m+a)

    // Adapted-frame d-metric blockdiag(g,h) over the combined index 0..n+m-1,
    // and its inverse.
    std::vector<Jet> dmetric(const Point& u, int order) const;
    std::vector<Jet> dmetricInverse(const Point& u, int order) const;

private:
    Shape shape_;
    MetricForm form_ = MetricForm::Blocks;
    GeometrySpec spec_;
    ExprGrid g_, h_, N_; // compiled grids (empty for FullMetric)
    ExprGrid G_;         // FullMetric only

    void fullBlocks(const Point& u, int order, std::vector<Jet>* g, std::vector<Jet>* h,
                    std::vector<Jet>* N) const;
};

// Pointwise frame data in the coordinate basis.
struct FrameStructure {
    int n = 0, m = 0;
    // Row alpha holds the components of the adapted frame vector (first n rows
    // are the horizontal fields, last m the vertical ones) on (d/dx, d/dy).
    std::vector<double> frame;   // d×d
    // Row alpha holds the components of the dual coframe covector on (dx, dy).
    std::vector<double> coframe; // d×d
    // Nonholonomy coefficients of the frame: [e_alpha, e_beta] = w^gamma_{alpha beta} e_gamma,
    // stored as w[(gamma*d + alpha)*d + beta].
    std::vector<double> w; // d×d×d
    // Fiber curvature of N, omega[(a*n + i)*n + j] = Omega^a_{ij}.
    std::vector<double> omega; // m×n×n
};

// Frame, coframe, bracket coefficients (from jets of N), and N-curvature at u.
FrameStructure frameStructure(const Geometry& geom, const Point& u);

// N recovered from a full coordinate-basis metric: N_i^a = h^{ab} G_{ib} with
// h the fiber block of G. Row-major n×m.
std::vector<double> nFromBlockMetric(const ExprGrid& G, const Shape& shape, const Point& u);

// max_i,a |G_{ia} - N_i^b h_ab| measuring whether geom's N matches the mixed
// block of the supplied full metric.
double compatibilityResidual(const Geometry& geom, const ExprGrid& G, const Point& u);

} // namespace aniso
