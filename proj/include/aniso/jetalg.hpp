#pragma once

#include <cmath>
#include <vector>

#include "aniso/errors.hpp"
#include "aniso/jet.hpp"

namespace aniso {

// Dense linear algebra over jets. Matrices are row-major k×k vectors of jets
// that all share dims and order.

inline std::vector<Jet> jetMatMul(const std::vector<Jet>& A, const std::vector<Jet>& B, int k) {
    const int d = A[0].dims(), ord = std::min(A[0].order(), B[0].order());
    std::vector<Jet> C(static_cast<std::size_t>(k) * k, Jet::constant(d, ord, 0.0));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            Jet s = Jet::constant(d, ord, 0.0);
            for (int l = 0; l < k; ++l) s += A[i * k + l] * B[l * k + j];
            C[i * k + j] = s;
        }
    return C;
}

// Inverse by Gaussian elimination with partial pivoting on the order-0 part.
inline std::vector<Jet> jetMatInverse(std::vector<Jet> A, int k) {
    const int d = A[0].dims(), ord = A[0].order();
    std::vector<Jet> I(static_cast<std::size_t>(k) * k, Jet::constant(d, ord, 0.0));
    for (int i = 0; i < k; ++i) I[i * k + i] = Jet::constant(d, ord, 1.0);

    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(A[col * k + col].value());
        for (int r = col + 1; r < k; ++r) {
            double v = std::abs(A[r * k + col].value());
            if (v > best) { best = v; piv = r; }
        }
        if (best < 1e-300) throw DomainError("matrix inverse: singular matrix");
        if (piv != col)
            for (int c = 0; c < k; ++c) {
                std::swap(A[piv * k + c], A[col * k + c]);
                std::swap(I[piv * k + c], I[col * k + c]);
            }
        Jet inv = A[col * k + col].reciprocal();
        for (int c = 0; c < k; ++c) {
            A[col * k + c] = A[col * k + c] * inv;
            I[col * k + c] = I[col * k + c] * inv;
        }
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            Jet f = A[r * k + col];
            if (f.value() == 0.0 && f.maxAbs() == 0.0) continue;
            for (int c = 0; c < k; ++c) {
                A[r * k + c] -= f * A[col * k + c];
                I[r * k + c] -= f * I[col * k + c];
            }
        }
    }
    return I;
}

// log|det A| as a jet, via LU factorization with partial pivoting (the sign of
// the determinant is dropped; only |det| enters logarithmic derivatives).
inline Jet jetLogAbsDet(std::vector<Jet> A, int k) {
    const int d = A[0].dims(), ord = A[0].order();
    Jet acc = Jet::constant(d, ord, 0.0);
    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(A[col * k + col].value());
        for (int r = col + 1; r < k; ++r) {
            double v = std::abs(A[r * k + col].value());
            if (v > best) { best = v; piv = r; }
        }
        if (best < 1e-300) throw DomainError("log-determinant: singular matrix");
        if (piv != col)
            for (int c = 0; c < k; ++c) std::swap(A[piv * k + c], A[col * k + c]);
        Jet pivot = A[col * k + col];
        Jet absPivot = pivot.value() < 0.0 ? -pivot : pivot;
        acc += log(absPivot);
        Jet inv = pivot.reciprocal();
        for (int r = col + 1; r < k; ++r) {
            Jet f = A[r * k + col] * inv;
            if (f.value() == 0.0 && f.maxAbs() == 0.0) continue;
            for (int c = col; c < k; ++c) A[r * k + c] -= f * A[col * k + c];
        }
    }
    return acc;
}

} // namespace aniso
