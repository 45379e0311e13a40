#include "aniso/connection.hpp"

#include <sstream>

#include "aniso/jetalg.hpp"

namespace aniso {

Jet frameDeriv(const Jet& f, const std::vector<Jet>& N, int n, int m, int gamma) {
    if (gamma >= n) return f.deriv_jet(gamma);
    Jet v = f.deriv_jet(gamma);
    for (int a = 0; a < m; ++a) v -= N[gamma * m + a] * f.deriv_jet(n + a);
    return v;
}

namespace {

// delta-derivative of every entry of a jet matrix block, direction i < n.
Jet deltaOf(const Jet& f, const std::vector<Jet>& N, int n, int m, int i) {
    return frameDeriv(f, N, n, m, i);
}

} // namespace

DConnection DConnection::build(const Geometry& geom, ConnKind kind) {
    if (kind == ConnKind::Custom)
        throw DomainError("custom connections need coefficient grids; use DConnection::custom");
    DConnection c;
    c.kind_ = kind;
    c.geom_ = geom;
    return c;
}

DConnection DConnection::custom(const Geometry& geom, const CustomConnGrids& grids) {
    const std::size_t n = static_cast<std::size_t>(geom.shape().n);
    const std::size_t m = static_cast<std::size_t>(geom.shape().m);
    auto need = [&](const std::vector<Expr>& v, std::size_t want, const char* what) {
        if (v.size() != want) {
            std::ostringstream os;
            os << "custom connection block " << what << ": expected " << want
               << " entries, got " << v.size();
            throw DomainError(os.str());
        }
        for (const auto& e : v) {
            if (e.empty()) throw DomainError("custom connection: missing entry expression");
            if (e.n() != geom.shape().n || e.m() != geom.shape().m)
                throw DomainError("custom connection: entry over the wrong dimensions");
        }
    };
    need(grids.Lh, n * n * n, "base-base");
    need(grids.Lv, m * m * n, "fiber-base");
    need(grids.Ch, n * n * m, "base-fiber");
    need(grids.Cv, m * m * m, "fiber-fiber");
    DConnection c;
    c.kind_ = ConnKind::Custom;
    c.geom_ = geom;
    c.grids_ = grids;
    return c;
}

ConnBlocks DConnection::blocks(const Point& u, int order) const {
    const int n = geom_.shape().n, m = geom_.shape().m, d = geom_.shape().d();
    if (order < 0 || order > 2)
        throw DomainError("connection coefficients support jet orders 0..2");

    ConnBlocks out;
    const Jet zero = Jet::constant(d, order, 0.0);
    out.Lh.assign(static_cast<std::size_t>(n) * n * n, zero);
    out.Lv.assign(static_cast<std::size_t>(m) * m * n, zero);
    out.Ch.assign(static_cast<std::size_t>(n) * n * m, zero);
    out.Cv.assign(static_cast<std::size_t>(m) * m * m, zero);

    if (kind_ == ConnKind::Custom) {
        for (std::size_t k = 0; k < grids_.Lh.size(); ++k) out.Lh[k] = grids_.Lh[k].evalJet(u, order);
        for (std::size_t k = 0; k < grids_.Lv.size(); ++k) out.Lv[k] = grids_.Lv[k].evalJet(u, order);
        for (std::size_t k = 0; k < grids_.Ch.size(); ++k) out.Ch[k] = grids_.Ch[k].evalJet(u, order);
        for (std::size_t k = 0; k < grids_.Cv.size(); ++k) out.Cv[k] = grids_.Cv[k].evalJet(u, order);
        return out;
    }

    std::vector<Jet> g = geom_.metricH(u, order + 1);
    std::vector<Jet> h = geom_.metricV(u, order + 1);
    std::vector<Jet> N = geom_.nconn(u, order + 1);
    std::vector<Jet> gInv = jetMatInverse(g, n);
    std::vector<Jet> hInv = jetMatInverse(h, m);

    // Generalized Christoffel base block from frame derivatives of g.
    std::vector<Jet> dg(static_cast<std::size_t>(n) * n * n, zero); // delta_k g_ij at (i*n+j)*n+k
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) dg[(i * n + j) * n + k] = deltaOf(g[i * n + j], N, n, m, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Jet s = Jet::constant(d, order, 0.0);
                for (int r = 0; r < n; ++r)
                    s += gInv[i * n + r] *
                         (dg[(r * n + k) * n + j] + dg[(j * n + r) * n + k] - dg[(j * n + k) * n + r]);
                out.Lh[(i * n + j) * n + k] = s * 0.5;
            }

    // Fiber Christoffel block from plain y-derivatives of h.
    std::vector<Jet> dh(static_cast<std::size_t>(m) * m * m, zero); // d_c h_ab at (a*m+b)*m+c
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) dh[(a * m + b) * m + c] = h[a * m + b].deriv_jet(n + c);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) {
                Jet s = Jet::constant(d, order, 0.0);
                for (int e = 0; e < m; ++e)
                    s += hInv[a * m + e] *
                         (dh[(e * m + c) * m + b] + dh[(b * m + e) * m + c] - dh[(b * m + c) * m + e]);
                out.Cv[(a * m + b) * m + c] = s * 0.5;
            }

    if (kind_ == ConnKind::ChristoffelD) return out; // (L, 0, 0, C)

    // Fiber derivative of N: tilde N^a_bk = dN_k^a/dy^b.
    std::vector<Jet> tN(static_cast<std::size_t>(m) * m * n, zero);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int k = 0; k < n; ++k) tN[(a * m + b) * n + k] = N[k * m + a].deriv_jet(n + b);

    if (kind_ == ConnKind::Berwald) {
        out.Lv = tN; // (L, dN/dy, 0, C)
        return out;
    }

    // Canonical connection: metric corrections on both mixed blocks.
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int k = 0; k < n; ++k) {
                Jet s = tN[(a * m + b) * n + k];
                for (int c = 0; c < m; ++c) {
                    Jet corr = deltaOf(h[b * m + c], N, n, m, k);
                    for (int e = 0; e < m; ++e) {
                        corr -= tN[(e * m + b) * n + k] * h[e * m + c];
                        corr -= tN[(e * m + c) * n + k] * h[e * m + b];
                    }
                    s += hInv[a * m + c] * corr * 0.5;
                }
                out.Lv[(a * m + b) * n + k] = s;
            }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < m; ++c) {
                Jet s = Jet::constant(d, order, 0.0);
                for (int k = 0; k < n; ++k) s += gInv[i * n + k] * g[j * n + k].deriv_jet(n + c);
                out.Ch[(i * n + j) * m + c] = s * 0.5;
            }
    return out;
}

std::vector<Jet> DConnection::gamma(const Point& u, int order) const {
    const int n = geom_.shape().n, m = geom_.shape().m, d = geom_.shape().d();
    ConnBlocks b = blocks(u, order);
    std::vector<Jet> G(static_cast<std::size_t>(d) * d * d, Jet::constant(d, order, 0.0));
    auto put = [&](int al, int be, int ga, const Jet& v) { G[(al * d + be) * d + ga] = v; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) put(i, j, k, b.Lh[(i * n + j) * n + k]);
            for (int c = 0; c < m; ++c) put(i, j, n + c, b.Ch[(i * n + j) * m + c]);
        }
    for (int a = 0; a < m; ++a)
        for (int bb = 0; bb < m; ++bb) {
            for (int k = 0; k < n; ++k) put(n + a, n + bb, k, b.Lv[(a * m + bb) * n + k]);
            for (int c = 0; c < m; ++c) put(n + a, n + bb, n + c, b.Cv[(a * m + bb) * m + c]);
        }
    return G;
}

TensorField covDeriv(const DConnection& conn, const TensorField& T) {
    if (T.sig.size() > 5) throw DomainError("covariant derivative supports rank <= 5");
    const Geometry& geom = conn.geometry();
    if (T.n != geom.shape().n || T.m != geom.shape().m)
        throw DomainError("tensor field and connection live on different geometries");

    TensorField out;
    out.n = T.n;
    out.m = T.m;
    out.sig = T.sig;
    out.sig.push_back(Slot{Part::Full, false});

    // Copies keep the closure self-contained.
    out.eval = [conn, T](const Point& u, int order) -> std::vector<Jet> {
        if (order < 0 || order > 2)
            throw DomainError("covariant derivative components support jet orders 0..2");
        const int n = T.n, m = T.m, d = n + m;
        const std::size_t rank = T.sig.size();
        std::vector<Jet> Tj = T.eval(u, order + 1);
        std::vector<Jet> N = conn.geometry().nconn(u, order);
        std::vector<Jet> Gam = conn.gamma(u, order);

        std::vector<int> sizes(rank);
        for (std::size_t k = 0; k < rank; ++k) sizes[k] = T.slotSize(k);

        std::vector<Jet> out_(Tj.size() * static_cast<std::size_t>(d),
                              Jet::constant(d, order, 0.0));
        std::vector<int> idx(rank, 0);
        std::size_t flat = 0;
        const std::size_t total = Tj.size();
        while (flat < total) {
            for (int gamma = 0; gamma < d; ++gamma) {
                Jet v = frameDeriv(Tj[flat], N, n, m, gamma);
                for (std::size_t s = 0; s < rank; ++s) {
                    const int sz = sizes[s];
                    // Stride of slot s in the flattened layout.
                    std::size_t stride = 1;
                    for (std::size_t t = s + 1; t < rank; ++t)
                        stride *= static_cast<std::size_t>(sizes[t]);
                    const int is = idx[s];
                    const int ci = combinedIndex(T.sig[s], is, n);
                    const std::size_t base = flat - static_cast<std::size_t>(is) * stride;
                    for (int e = 0; e < sz; ++e) {
                        const int ce = combinedIndex(T.sig[s], e, n);
                        const Jet& comp = Tj[base + static_cast<std::size_t>(e) * stride];
                        if (T.sig[s].upper)
                            v += Gam[(ci * d + ce) * d + gamma] * comp;
                        else
                            v -= Gam[(ce * d + ci) * d + gamma] * comp;
                    }
                }
                out_[flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(gamma)] = v;
            }
            // Odometer over the multi-index.
            ++flat;
            for (std::size_t s = rank; s-- > 0;) {
                if (++idx[s] < sizes[s]) break;
                idx[s] = 0;
            }
        }
        return out_;
    };
    return out;
}

TensorField exprTensorField(const Geometry& geom, std::vector<Slot> sig, std::vector<Expr> comps) {
    TensorField f;
    f.n = geom.shape().n;
    f.m = geom.shape().m;
    f.sig = std::move(sig);
    if (comps.size() != f.size()) throw DomainError("component count does not match signature");
    for (const auto& e : comps) {
        if (e.empty()) throw DomainError("tensor field: missing component expression");
        if (e.n() != f.n || e.m() != f.m)
            throw DomainError("tensor field: component over the wrong dimensions");
    }
    f.eval = [comps](const Point& u, int order) {
        std::vector<Jet> out;
        out.reserve(comps.size());
        for (const auto& e : comps) out.push_back(e.evalJet(u, order));
        return out;
    };
    return f;
}

TensorField scalarExprField(const Geometry& geom, const Expr& f) {
    return exprTensorField(geom, {}, {f});
}

TensorField dmetricField(const Geometry& geom) {
    TensorField f;
    f.n = geom.shape().n;
    f.m = geom.shape().m;
    f.sig = {Slot{Part::Full, false}, Slot{Part::Full, false}};
    f.eval = [geom](const Point& u, int order) { return geom.dmetric(u, order); };
    return f;
}

TensorField dmetricInverseField(const Geometry& geom) {
    TensorField f;
    f.n = geom.shape().n;
    f.m = geom.shape().m;
    f.sig = {Slot{Part::Full, true}, Slot{Part::Full, true}};
    f.eval = [geom](const Point& u, int order) { return geom.dmetricInverse(u, order); };
    return f;
}

TensorField kroneckerField(const Geometry& geom) {
    TensorField f;
    f.n = geom.shape().n;
    f.m = geom.shape().m;
    f.sig = {Slot{Part::Full, true}, Slot{Part::Full, false}};
    const int d = geom.shape().d();
    f.eval = [d](const Point&, int order) {
        std::vector<Jet> out(static_cast<std::size_t>(d) * d, Jet::constant(d, order, 0.0));
        for (int a = 0; a < d; ++a) out[a * d + a] = Jet::constant(d, order, 1.0);
        return out;
    };
    return f;
}

std::vector<Jet> deformation(const DConnection& connA, const DConnection& connB, const Point& u,
                             int order) {
    if (!(connA.geometry().shape() == connB.geometry().shape()))
        throw DomainError("deformation needs connections over the same dimensions");
    std::vector<Jet> A = connA.gamma(u, order), B = connB.gamma(u, order);
    for (std::size_t k = 0; k < A.size(); ++k) A[k] -= B[k];
    return A;
}

double metricityResidual(const DConnection& conn, const std::vector<Point>& pts) {
    TensorField nablaG = covDeriv(conn, dmetricField(conn.geometry()));
    double worst = 0.0;
    for (const Point& u : pts) {
        std::vector<Jet> v = nablaG.eval(u, 0);
        for (const Jet& j : v) worst = std::max(worst, std::abs(j.value()));
    }
    return worst;
}

} // namespace aniso
