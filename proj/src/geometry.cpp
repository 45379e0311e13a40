#include "aniso/geometry.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "aniso/jetalg.hpp"

namespace aniso {

namespace {

void requireGrid(const ExprGrid& grid, std::size_t rows, std::size_t cols, const Shape& shape,
                 const char* what) {
    std::ostringstream os;
    if (grid.size() != rows) {
        os << what << ": expected " << rows << " rows, got " << grid.size();
        throw DomainError(os.str());
    }
    for (const auto& row : grid) {
        if (row.size() != cols) {
            os << what << ": expected " << cols << " columns, got " << row.size();
            throw DomainError(os.str());
        }
        for (const auto& e : row) {
            if (e.empty()) {
                os << what << ": missing entry expression";
                throw DomainError(os.str());
            }
            if (e.n() != shape.n || e.m() != shape.m) {
                os << what << ": entry declared over (" << e.n() << "," << e.m()
                   << "), geometry is (" << shape.n << "," << shape.m << ")";
                throw DomainError(os.str());
            }
        }
    }
}

std::vector<Jet> evalGrid(const ExprGrid& grid, const Point& u, int order) {
    std::vector<Jet> out;
    out.reserve(grid.size() * (grid.empty() ? 0 : grid[0].size()));
    for (const auto& row : grid)
        for (const auto& e : row) out.push_back(e.evalJet(u, order));
    return out;
}

void checkSymmetricInvertible(const std::vector<Jet>& M, int k, const char* what) {
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (std::abs(M[i * k + j].value() - M[j * k + i].value()) > 1e-12) {
                std::ostringstream os;
                os << what << ": block is not symmetric at a probe point (entry " << i << ","
                   << j << ")";
                throw DomainError(os.str());
            }
    try {
        jetMatInverse(M, k);
    } catch (const DomainError&) {
        std::ostringstream os;
        os << what << ": block is singular at a probe point";
        throw DomainError(os.str());
    }
}

} // namespace

std::vector<Point> probePoints(int dim, int count, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<Point> pts(static_cast<std::size_t>(count), Point(static_cast<std::size_t>(dim)));
    for (auto& p : pts)
        for (auto& c : p) c = dist(rng);
    return pts;
}

Geometry Geometry::load(const GeometrySpec& spec, std::vector<Point> probes) {
    const Shape& s = spec.shape;
    if (s.n < 1 || s.m < 1) throw DomainError("geometry dimensions must be positive");

    Geometry geom;
    geom.shape_ = s;
    geom.form_ = spec.form;
    geom.spec_ = spec;

    switch (spec.form) {
        case MetricForm::Blocks:
            requireGrid(spec.g, s.n, s.n, s, "base metric block");
            requireGrid(spec.h, s.m, s.m, s, "fiber metric block");
            requireGrid(spec.N, s.n, s.m, s, "nonlinear connection");
            geom.g_ = spec.g;
            geom.h_ = spec.h;
            geom.N_ = spec.N;
            break;
        case MetricForm::Lagrangian: {
            if (s.n != s.m)
                throw DomainError("a Lagrangian geometry needs equal base and fiber dimensions");
            if (spec.lagrangian.empty()) throw DomainError("missing Lagrangian expression");
            if (spec.lagrangian.n() != s.n || spec.lagrangian.m() != s.m)
                throw DomainError("Lagrangian declared over the wrong dimensions");
            requireGrid(spec.N, s.n, s.m, s, "nonlinear connection");
            Expr half = exprConst(0.5, s.n, s.m);
            geom.g_.assign(static_cast<std::size_t>(s.n), std::vector<Expr>(s.m));
            for (int i = 0; i < s.n; ++i) {
                for (int j = 0; j < s.m; ++j) {
                    Expr dij = derivative(derivative(spec.lagrangian, s.n + i), s.n + j);
                    geom.g_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                        exprMul(half, dij);
                }
            }
            geom.h_ = geom.g_;
            geom.N_ = spec.N;
            break;
        }
        case MetricForm::FullMetric:
            requireGrid(spec.G, static_cast<std::size_t>(s.d()), static_cast<std::size_t>(s.d()),
                        s, "full metric");
            geom.G_ = spec.G;
            break;
    }

    if (probes.empty()) probes = probePoints(s.d());
    for (const Point& u : probes) {
        if (spec.form == MetricForm::FullMetric) {
            std::vector<Jet> GJ = evalGrid(geom.G_, u, 0);
            checkSymmetricInvertible(GJ, s.d(), "full metric");
            std::vector<Jet> hJ(static_cast<std::size_t>(s.m) * s.m, Jet::constant(s.d(), 0, 0.0));
            for (int a = 0; a < s.m; ++a)
                for (int b = 0; b < s.m; ++b)
                    hJ[a * s.m + b] = GJ[(s.n + a) * s.d() + (s.n + b)];
            checkSymmetricInvertible(hJ, s.m, "fiber block of the full metric");
        } else {
            checkSymmetricInvertible(evalGrid(geom.g_, u, 0), s.n, "base metric block");
            checkSymmetricInvertible(evalGrid(geom.h_, u, 0), s.m, "fiber metric block");
        }
    }
    return geom;
}

void Geometry::fullBlocks(const Point& u, int order, std::vector<Jet>* g, std::vector<Jet>* h,
                          std::vector<Jet>* N) const {
    const int n = shape_.n, m = shape_.m, d = shape_.d();
    std::vector<Jet> GJ = evalGrid(G_, u, order);
    std::vector<Jet> hJ(static_cast<std::size_t>(m) * m, Jet::constant(d, order, 0.0));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) hJ[a * m + b] = GJ[(n + a) * d + (n + b)];
    std::vector<Jet> hInv = jetMatInverse(hJ, m);
    std::vector<Jet> NJ(static_cast<std::size_t>(n) * m, Jet::constant(d, order, 0.0));
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < m; ++a) {
            Jet sum = Jet::constant(d, order, 0.0);
            for (int b = 0; b < m; ++b) sum += hInv[a * m + b] * GJ[i * d + (n + b)];
            NJ[i * m + a] = sum;
        }
    if (g) {
        g->assign(static_cast<std::size_t>(n) * n, Jet::constant(d, order, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Jet sum = GJ[i * d + j];
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b)
                        sum -= NJ[i * m + a] * NJ[j * m + b] * hJ[a * m + b];
                (*g)[i * n + j] = sum;
            }
    }
    if (h) *h = hJ;
    if (N) *N = NJ;
}

std::vector<Jet> Geometry::metricH(const Point& u, int order) const {
    if (form_ == MetricForm::FullMetric) {
        std::vector<Jet> g;
        fullBlocks(u, order, &g, nullptr, nullptr);
        return g;
    }
    return evalGrid(g_, u, order);
}

std::vector<Jet> Geometry::metricV(const Point& u, int order) const {
    if (form_ == MetricForm::FullMetric) {
        std::vector<Jet> h;
        fullBlocks(u, order, nullptr, &h, nullptr);
        return h;
    }
    return evalGrid(h_, u, order);
}

std::vector<Jet> Geometry::nconn(const Point& u, int order) const {
    if (form_ == MetricForm::FullMetric) {
        std::vector<Jet> N;
        fullBlocks(u, order, nullptr, nullptr, &N);
        return N;
    }
    return evalGrid(N_, u, order);
}

std::vector<Jet> Geometry::dmetric(const Point& u, int order) const {
    const int n = shape_.n, m = shape_.m, d = shape_.d();
    std::vector<Jet> g = metricH(u, order), h = metricV(u, order);
    std::vector<Jet> G(static_cast<std::size_t>(d) * d, Jet::constant(d, order, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G[i * d + j] = g[i * n + j];
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) G[(n + a) * d + (n + b)] = h[a * m + b];
    return G;
}

std::vector<Jet> Geometry::dmetricInverse(const Point& u, int order) const {
    const int n = shape_.n, m = shape_.m, d = shape_.d();
    std::vector<Jet> gInv = jetMatInverse(metricH(u, order), n);
    std::vector<Jet> hInv = jetMatInverse(metricV(u, order), m);
    std::vector<Jet> G(static_cast<std::size_t>(d) * d, Jet::constant(d, order, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G[i * d + j] = gInv[i * n + j];
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) G[(n + a) * d + (n + b)] = hInv[a * m + b];
    return G;
}

FrameStructure frameStructure(const Geometry& geom, const Point& u) {
    const int n = geom.shape().n, m = geom.shape().m, d = geom.shape().d();
    FrameStructure fs;
    fs.n = n;
    fs.m = m;

    std::vector<Jet> N = geom.nconn(u, 1);

    // Frame rows: horizontal fields d/dx^i - N_i^a d/dy^a, vertical fields d/dy^a.
    fs.frame.assign(static_cast<std::size_t>(d) * d, 0.0);
    fs.coframe.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < n; ++i) {
        fs.frame[i * d + i] = 1.0;
        fs.coframe[i * d + i] = 1.0;
        for (int a = 0; a < m; ++a) {
            fs.frame[i * d + (n + a)] = -N[i * m + a].value();
            fs.coframe[(n + a) * d + i] = N[i * m + a].value();
        }
    }
    for (int a = 0; a < m; ++a) {
        fs.frame[(n + a) * d + (n + a)] = 1.0;
        fs.coframe[(n + a) * d + (n + a)] = 1.0;
    }

    // Bracket coefficients from jets: with frame coefficient functions
    // A_alpha^mu, the bracket [e_alpha, e_beta]^mu = A_alpha^nu d_nu A_beta^mu
    // - A_beta^nu d_nu A_alpha^mu, then w^gamma = coframe(bracket). Only the
    // -N entries of A vary, so d_nu A_beta^mu is a jet first derivative.
    auto A = [&](int alpha, int mu) -> double {
        return fs.frame[alpha * d + mu];
    };
    auto dA = [&](int nu, int beta, int mu) -> double {
        if (beta < n && mu >= n) return -N[beta * m + (mu - n)].d1(nu);
        return 0.0;
    };
    fs.w.assign(static_cast<std::size_t>(d) * d * d, 0.0);
    for (int alpha = 0; alpha < d; ++alpha) {
        for (int beta = 0; beta < d; ++beta) {
            for (int mu = 0; mu < d; ++mu) {
                double c = 0.0;
                for (int nu = 0; nu < d; ++nu)
                    c += A(alpha, nu) * dA(nu, beta, mu) - A(beta, nu) * dA(nu, alpha, mu);
                if (c == 0.0) continue;
                for (int gamma = 0; gamma < d; ++gamma) {
                    double wg = c * fs.coframe[gamma * d + mu];
                    if (wg != 0.0) fs.w[(gamma * d + alpha) * d + beta] += wg;
                }
            }
        }
    }

    // Fiber curvature of N from its closed form (equal to the vertical bracket
    // coefficients of horizontal pairs; the test suite checks the match).
    fs.omega.assign(static_cast<std::size_t>(m) * n * n, 0.0);
    auto deltaN = [&](int j, int i, int a) -> double {
        // delta_j N_i^a = d_j N_i^a - N_j^b d_b N_i^a
        double v = N[i * m + a].d1(j);
        for (int b = 0; b < m; ++b) v -= N[j * m + b].value() * N[i * m + a].d1(n + b);
        return v;
    };
    for (int a = 0; a < m; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                fs.omega[(a * n + i) * n + j] = deltaN(j, i, a) - deltaN(i, j, a);

    return fs;
}

std::vector<double> nFromBlockMetric(const ExprGrid& G, const Shape& shape, const Point& u) {
    const int n = shape.n, m = shape.m, d = shape.d();
    requireGrid(G, static_cast<std::size_t>(d), static_cast<std::size_t>(d), shape, "full metric");
    std::vector<Jet> hJ(static_cast<std::size_t>(m) * m, Jet::constant(d, 0, 0.0));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            hJ[a * m + b] = G[static_cast<std::size_t>(n + a)][static_cast<std::size_t>(n + b)]
                                .evalJet(u, 0);
    std::vector<Jet> hInv = jetMatInverse(hJ, m);
    std::vector<double> N(static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < m; ++a) {
            double s = 0.0;
            for (int b = 0; b < m; ++b)
                s += hInv[a * m + b].value() *
                     G[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + b)].eval(u);
            N[i * m + a] = s;
        }
    return N;
}

double compatibilityResidual(const Geometry& geom, const ExprGrid& G, const Point& u) {
    const int n = geom.shape().n, m = geom.shape().m, d = geom.shape().d();
    requireGrid(G, static_cast<std::size_t>(d), static_cast<std::size_t>(d), geom.shape(),
                "full metric");
    std::vector<Jet> N = geom.nconn(u, 0), h = geom.metricV(u, 0);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < m; ++a) {
            double lhs = G[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + a)].eval(u);
            double rhs = 0.0;
            for (int b = 0; b < m; ++b) rhs += N[i * m + b].value() * h[b * m + a].value();
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

} // namespace aniso
