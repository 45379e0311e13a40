#pragma once

#include <functional>
#include <vector>

#include "aniso/geometry.hpp"
#include "aniso/jet.hpp"

namespace aniso {

// ---------------------------------------------------------------------------
// Distinguished tensor fields
//
// A slot ranges over the base indices (H, size n), the fiber indices (V, size
// m), or the combined index 0..n+m-1 (Full). Components are produced all at
// once as jets, row-major over the slots, by a pure evaluator; fields chain
// (covariant derivatives of covariant derivatives) because the evaluator
// interface is uniform in the requested jet order.

enum class Part { H, V, Full };

struct Slot {
    Part part;
    bool upper;
};

struct TensorField {
    int n = 0, m = 0;
    std::vector<Slot> sig;
    std::function<std::vector<Jet>(const Point&, int order)> eval;

    int slotSize(std::size_t k) const {
        switch (sig[k].part) {
            case Part::H: return n;
            case Part::V: return m;
            case Part::Full: return n + m;
        }
        return 0;
    }
    std::size_t size() const {
        std::size_t s = 1;
        for (std::size_t k = 0; k < sig.size(); ++k) s *= static_cast<std::size_t>(slotSize(k));
        return s;
    }
};

// Map a slot-local index to the combined index 0..n+m-1.
inline int combinedIndex(const Slot& slot, int e, int n) {
    return slot.part == Part::V ? n + e : e;
}

// Frame derivative of a jet-valued component: direction gamma < n applies
// d/dx^gamma - N_gamma^a d/dy^a, direction gamma >= n applies d/dy^(gamma-n).
// N must hold jets of at least the order of f minus one.
Jet frameDeriv(const Jet& f, const std::vector<Jet>& N, int n, int m, int gamma);

// ---------------------------------------------------------------------------
// Distinguished connections

enum class ConnKind { Berwald, Canonical, ChristoffelD, Custom };

// Expression grids for a custom connection, row-major: Lh[(i*n+j)*n+k] is the
// base-block coefficient with direction last, and likewise for the others.
struct CustomConnGrids {
    std::vector<Expr> Lh; // n*n*n  — upper/lower base, base direction
    std::vector<Expr> Lv; // m*m*n  — upper/lower fiber, base direction
    std::vector<Expr> Ch; // n*n*m  — upper/lower base, fiber direction
    std::vector<Expr> Cv; // m*m*m  — upper/lower fiber, fiber direction
};

struct ConnBlocks {
    std::vector<Jet> Lh; // L^i_jk at (i*n+j)*n+k
    std::vector<Jet> Lv; // L^a_bk at (a*m+b)*n+k
    std::vector<Jet> Ch; // C^i_jc at (i*n+j)*m+c
    std::vector<Jet> Cv; // C^a_bc at (a*m+b)*m+c
};

class DConnection {
public:
    static DConnection build(const Geometry& geom, ConnKind kind);
    static DConnection custom(const Geometry& geom, const CustomConnGrids& grids);

    ConnKind kind() const { return kind_; }
    const Geometry& geometry() const { return geom_; }

    // All four coefficient blocks as jets of the requested order (0..2).
    ConnBlocks blocks(const Point& u, int order) const;

    // The blocks assembled over combined indices, direction last:
    // gamma[(alpha*d + beta)*d + gamma_dir]; the base-fiber mixing positions
    // are identically zero.
    std::vector<Jet> gamma(const Point& u, int order) const;

private:
    ConnKind kind_ = ConnKind::Canonical;
    Geometry geom_;
    CustomConnGrids grids_; // Custom only
};

// Covariant derivative: appends one lower Full slot (the direction) after the
// existing slots. Supports input rank <= 5.
TensorField covDeriv(const DConnection& conn, const TensorField& T);

// Field constructors.
TensorField exprTensorField(const Geometry& geom, std::vector<Slot> sig, std::vector<Expr> comps);
TensorField scalarExprField(const Geometry& geom, const Expr& f);
TensorField dmetricField(const Geometry& geom);        // G_{alpha beta}, two lower Full slots
TensorField dmetricInverseField(const Geometry& geom); // two upper Full slots
TensorField kroneckerField(const Geometry& geom);      // delta^alpha_beta

// Coefficient difference connA - connB over combined indices (same layout as
// DConnection::gamma).
std::vector<Jet> deformation(const DConnection& connA, const DConnection& connB, const Point& u,
                             int order);

// Max |covariant derivative of the d-metric| over the given points.
double metricityResidual(const DConnection& conn, const std::vector<Point>& pts);

} // namespace aniso
