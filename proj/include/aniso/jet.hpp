#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "aniso/errors.hpp"

namespace aniso {

// Truncated multivariate Taylor expansion ("jet") of a scalar function of d
// real variables, kept to total degree <= ord with 0 <= ord <= 3.
//
// Coefficients are stored in the Taylor-coefficient convention,
//   f(u0 + t) = sum_M c_M t^M  (|M| <= ord),
// one slot per sorted multi-index:
//   [0]                 constant term
//   [1 .. d]            degree-1 terms, variable i at 1+i
//   [off2 ...]          degree-2 terms, sorted pairs (i <= j)
//   [off3 ...]          degree-3 terms, sorted triples (i <= j <= k)
// Mixed-partial symmetry is structural: each unordered index set is stored once.
//
// Binary operations take the minimum of the operand orders; deriv_jet lowers
// the order by one. Every jet participating in an operation must share d.
class Jet {
public:
    Jet() : d_(0), ord_(0), c_(1, 0.0) {}

    Jet(int dims, int order) : d_(dims), ord_(order), c_(size(dims, order), 0.0) {}

    static Jet constant(int dims, int order, double value) {
        Jet j(dims, order);
        j.c_[0] = value;
        return j;
    }

    // The coordinate function u^var expanded at a point with value `value`.
    static Jet variable(int dims, int order, int var, double value) {
        Jet j(dims, order);
        j.c_[0] = value;
        if (order >= 1) j.c_[1 + var] = 1.0;
        return j;
    }

    int dims() const { return d_; }
    int order() const { return ord_; }

    double value() const { return c_[0]; }

    // First partial derivative d f / d u^i.
    double d1(int i) const { return ord_ >= 1 ? c_[1 + i] : 0.0; }

    // Second partial derivative d^2 f / d u^i d u^j (any index order).
    double d2(int i, int j) const {
        if (ord_ < 2) return 0.0;
        if (i > j) std::swap(i, j);
        double c = c_[off2() + pos2(d_, i, j)];
        return i == j ? 2.0 * c : c;
    }

    // Third partial derivative d^3 f / d u^i d u^j d u^k (any index order).
    double d3(int i, int j, int k) const {
        if (ord_ < 3) return 0.0;
        int a = i, b = j, c = k;
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        double coeff = c_[off3() + pos3(a, b, c)];
        double fact = (a == c) ? 6.0 : ((a == b || b == c) ? 2.0 : 1.0);
        return fact * coeff;
    }

    // Jet of the partial derivative d f / d u^var, valid to order ord-1.
    Jet deriv_jet(int var) const {
        if (ord_ < 1) throw DomainError("deriv_jet: jet order is already 0");
        Jet g(d_, ord_ - 1);
        g.c_[0] = c_[1 + var];
        if (g.ord_ >= 1) {
            for (int i = 0; i < d_; ++i) {
                int lo = std::min(i, var), hi = std::max(i, var);
                double c = c_[off2() + pos2(d_, lo, hi)];
                g.c_[1 + i] = (i == var ? 2.0 : 1.0) * c;
            }
        }
        if (g.ord_ >= 2) {
            for (int i = 0; i < d_; ++i) {
                for (int j = i; j < d_; ++j) {
                    int a = i, b = j, c = var;
                    if (a > b) std::swap(a, b);
                    if (b > c) std::swap(b, c);
                    if (a > b) std::swap(a, b);
                    // multiplicity of var within the merged triple
                    int mult = (i == var ? 1 : 0) + (j == var ? 1 : 0) + 1;
                    g.c_[g.off2() + pos2(d_, i, j)] = static_cast<double>(mult) * c_[off3() + pos3(a, b, c)];
                }
            }
        }
        return g;
    }

    Jet operator-() const {
        Jet r = *this;
        for (double& x : r.c_) x = -x;
        return r;
    }

    Jet& operator+=(const Jet& o) { return merge(o, +1.0); }
    Jet& operator-=(const Jet& o) { return merge(o, -1.0); }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }

    friend Jet operator+(Jet a, double s) { a.c_[0] += s; return a; }
    friend Jet operator+(double s, Jet a) { a.c_[0] += s; return a; }
    friend Jet operator-(Jet a, double s) { a.c_[0] -= s; return a; }
    friend Jet operator-(double s, const Jet& a) { return (-a) + s; }

    friend Jet operator*(Jet a, double s) {
        for (double& x : a.c_) x *= s;
        return a;
    }
    friend Jet operator*(double s, Jet a) { return a * s; }
    friend Jet operator/(Jet a, double s) { return a * (1.0 / s); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        int d = a.d_;
        int ord = std::min(a.ord_, b.ord_);
        Jet r(d, ord);
        // degree-0 x everything
        for (std::size_t s = 0; s < r.c_.size(); ++s)
            r.c_[s] = a.c_[0] * b.cAt(s) + (s == 0 ? 0.0 : a.cAt(s) * b.c_[0]);
        if (ord >= 2) {
            // degree-1 x degree-1
            for (int i = 0; i < d; ++i) {
                double ai = a.c_[1 + i];
                if (ai == 0.0) continue;
                for (int j = 0; j < d; ++j) {
                    int lo = std::min(i, j), hi = std::max(i, j);
                    r.c_[r.off2() + pos2(d, lo, hi)] += ai * b.c_[1 + j];
                }
            }
        }
        if (ord >= 3) {
            // degree-1 x degree-2 (both orders)
            for (int i = 0; i < d; ++i) {
                double ai = a.c_[1 + i];
                double bi = b.c_[1 + i];
                if (ai == 0.0 && bi == 0.0) continue;
                for (int j = 0; j < d; ++j) {
                    for (int k = j; k < d; ++k) {
                        std::size_t s2 = static_cast<std::size_t>(pos2(d, j, k));
                        int x = i, y = j, z = k;
                        if (x > y) std::swap(x, y);
                        if (y > z) std::swap(y, z);
                        if (x > y) std::swap(x, y);
                        std::size_t s3 = r.off3() + r.pos3(x, y, z);
                        r.c_[s3] += ai * b.c_[b.off2() + s2] + bi * a.c_[a.off2() + s2];
                    }
                }
            }
        }
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        return a * b.reciprocal();
    }

    // Composition with a univariate outer function given by its derivatives
    // F^(k) evaluated at this jet's constant term.
    Jet compose(double f0, double f1, double f2, double f3) const {
        Jet t = *this;
        t.c_[0] = 0.0;  // the deviation series g - g(u0)
        Jet r = Jet::constant(d_, ord_, f0);
        if (ord_ >= 1) r += f1 * t;
        if (ord_ >= 2) {
            Jet t2 = t * t;
            r += (f2 / 2.0) * t2;
            if (ord_ >= 3) r += (f3 / 6.0) * (t2 * t);
        }
        return r;
    }

    Jet reciprocal() const {
        double v = c_[0];
        if (std::fabs(v) < 1e-300)
            throw DomainError("division by a value smaller than 1e-300 in magnitude");
        double iv = 1.0 / v;
        return compose(iv, -iv * iv, 2.0 * iv * iv * iv, -6.0 * iv * iv * iv * iv);
    }

    // Integer power by binary exponentiation (exponent >= 0).
    Jet pow_int(long long e) const {
        Jet result = Jet::constant(d_, ord_, 1.0);
        if (e == 0) return result;
        Jet base = *this;
        while (e > 0) {
            if (e & 1) result = result * base;
            base = (e >>= 1) ? base * base : base;
        }
        return result;
    }

    bool finite() const {
        for (double x : c_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double maxAbs() const {
        double m = 0.0;
        for (double x : c_) m = std::max(m, std::fabs(x));
        return m;
    }

    static std::size_t size(int d, int ord) {
        std::size_t n = 1;
        if (ord >= 1) n += static_cast<std::size_t>(d);
        if (ord >= 2) n += static_cast<std::size_t>(d) * (d + 1) / 2;
        if (ord >= 3) n += static_cast<std::size_t>(d) * (d + 1) * (d + 2) / 6;
        return n;
    }

private:
    int d_;
    int ord_;
    std::vector<double> c_;

    std::size_t off2() const { return 1 + static_cast<std::size_t>(d_); }
    std::size_t off3() const { return off2() + static_cast<std::size_t>(d_) * (d_ + 1) / 2; }

    double cAt(std::size_t s) const { return s < c_.size() ? c_[s] : 0.0; }

    static int pos2(int d, int i, int j) { return i * (2 * d - i + 1) / 2 + (j - i); }

    // Position of sorted triple (i <= j <= k) within the degree-3 block.
    std::size_t pos3(int i, int j, int k) const {
        std::size_t base = 0;
        for (int a = 0; a < i; ++a) {
            int r = d_ - a;  // remaining dims for triples starting at a
            base += static_cast<std::size_t>(r) * (r + 1) / 2;
        }
        return base + static_cast<std::size_t>(pos2(d_ - i, j - i, k - i));
    }

    Jet& merge(const Jet& o, double sign) {
        int ord = std::min(ord_, o.ord_);
        if (ord < ord_) {
            // shrink to common order
            c_.resize(size(d_, ord));
            ord_ = ord;
        }
        std::size_t n = size(d_, ord);
        for (std::size_t s = 0; s < n; ++s) c_[s] += sign * o.c_[s];
        return *this;
    }
};

inline Jet sin(const Jet& g) {
    double v = g.value(), s = std::sin(v), c = std::cos(v);
    return g.compose(s, c, -s, -c);
}

inline Jet cos(const Jet& g) {
    double v = g.value(), s = std::sin(v), c = std::cos(v);
    return g.compose(c, -s, -c, s);
}

inline Jet exp(const Jet& g) {
    double e = std::exp(g.value());
    return g.compose(e, e, e, e);
}

inline Jet log(const Jet& g) {
    double v = g.value();
    if (v <= 0.0) throw DomainError("log of a non-positive value");
    double iv = 1.0 / v;
    return g.compose(std::log(v), iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline Jet sqrt(const Jet& g) {
    double v = g.value();
    if (v <= 0.0) throw DomainError("sqrt of a non-positive value");
    double r = std::sqrt(v);
    return g.compose(r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v));
}

inline Jet tanh(const Jet& g) {
    double u = std::tanh(g.value());
    double s = 1.0 - u * u;  // sech^2
    return g.compose(u, s, -2.0 * u * s, s * (6.0 * u * u - 2.0));
}

} // namespace aniso
