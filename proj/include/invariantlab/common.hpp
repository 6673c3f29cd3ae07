#pragma once

// Small fixed-capacity complex vectors and matrices for points of C^k and
// k x k Jacobians/linear parts.  Capacity is bounded so the hot iteration
// kernels never touch the heap.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace invariantlab {

using cplx = std::complex<double>;

inline constexpr int kMaxDim = 8;  // ambient dimension cap (k = 2 in practice)

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Computation that could not complete (escape, cap reached, empty result, ...).
struct ComputationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegreeOverflowError : ComputationError {
    using ComputationError::ComputationError;
};

struct BudgetError : ComputationError {
    using ComputationError::ComputationError;
};

struct CapError : ComputationError {
    using ComputationError::ComputationError;
};

struct EscapeError : ComputationError {
    using ComputationError::ComputationError;
};

// ---------------------------------------------------------------------------
// CVec: a point of C^k
// ---------------------------------------------------------------------------

struct CVec {
    std::array<cplx, kMaxDim> c{};
    int k = 0;

    CVec() = default;
    explicit CVec(int dim) : k(dim) { check_dim(dim); }
    CVec(std::initializer_list<cplx> init) : k(static_cast<int>(init.size())) {
        check_dim(k);
        int i = 0;
        for (const cplx& v : init) c[i++] = v;
    }

    static CVec zero(int dim) { return CVec(dim); }

    static void check_dim(int dim) {
        if (dim < 1 || dim > kMaxDim)
            throw DimensionError("dimension must be in [1, " + std::to_string(kMaxDim) +
                                 "], got " + std::to_string(dim));
    }

    cplx& operator[](int i) { return c[static_cast<size_t>(i)]; }
    const cplx& operator[](int i) const { return c[static_cast<size_t>(i)]; }

    bool finite() const {
        for (int i = 0; i < k; ++i)
            if (!std::isfinite(c[i].real()) || !std::isfinite(c[i].imag())) return false;
        return true;
    }

    double norm_sq() const {
        double s = 0;
        for (int i = 0; i < k; ++i) s += std::norm(c[i]);
        return s;
    }
    double norm() const { return std::sqrt(norm_sq()); }

    CVec& operator+=(const CVec& o) {
        for (int i = 0; i < k; ++i) c[i] += o.c[i];
        return *this;
    }
    CVec& operator-=(const CVec& o) {
        for (int i = 0; i < k; ++i) c[i] -= o.c[i];
        return *this;
    }
    CVec& operator*=(cplx s) {
        for (int i = 0; i < k; ++i) c[i] *= s;
        return *this;
    }

    friend CVec operator+(CVec a, const CVec& b) { return a += b; }
    friend CVec operator-(CVec a, const CVec& b) { return a -= b; }
    friend CVec operator*(cplx s, CVec a) { return a *= s; }
    friend CVec operator*(CVec a, cplx s) { return a *= s; }

    friend bool operator==(const CVec& a, const CVec& b) {
        if (a.k != b.k) return false;
        for (int i = 0; i < a.k; ++i)
            if (a.c[i] != b.c[i]) return false;
        return true;
    }
};

inline double dist(const CVec& a, const CVec& b) {
    double s = 0;
    for (int i = 0; i < a.k; ++i) s += std::norm(a.c[i] - b.c[i]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// CMatrix: k x k complex matrix, row-major
// ---------------------------------------------------------------------------

struct CMatrix {
    std::array<cplx, kMaxDim * kMaxDim> e{};
    int k = 0;

    CMatrix() = default;
    explicit CMatrix(int dim) : k(dim) { CVec::check_dim(dim); }
    CMatrix(std::initializer_list<std::initializer_list<cplx>> rows)
        : k(static_cast<int>(rows.size())) {
        CVec::check_dim(k);
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != k)
                throw DimensionError("matrix rows must all have length k");
            int j = 0;
            for (const cplx& v : row) e[static_cast<size_t>(i * kMaxDim + j++)] = v;
            ++i;
        }
    }

    static CMatrix identity(int dim) {
        CMatrix m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }
    static CMatrix diagonal(std::initializer_list<cplx> d) {
        CMatrix m(static_cast<int>(d.size()));
        int i = 0;
        for (const cplx& v : d) m(i, i) = v, ++i;
        return m;
    }

    cplx& operator()(int i, int j) { return e[static_cast<size_t>(i * kMaxDim + j)]; }
    const cplx& operator()(int i, int j) const {
        return e[static_cast<size_t>(i * kMaxDim + j)];
    }

    bool finite() const {
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                if (!std::isfinite((*this)(i, j).real()) || !std::isfinite((*this)(i, j).imag()))
                    return false;
        return true;
    }

    CVec apply(const CVec& v) const {
        if (v.k != k) throw DimensionError("matrix/vector dimension mismatch");
        CVec r(k);
        for (int i = 0; i < k; ++i) {
            cplx s = 0;
            for (int j = 0; j < k; ++j) s += (*this)(i, j) * v[j];
            r[i] = s;
        }
        return r;
    }

    CMatrix mul(const CMatrix& o) const {
        if (o.k != k) throw DimensionError("matrix dimension mismatch");
        CMatrix r(k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                cplx s = 0;
                for (int l = 0; l < k; ++l) s += (*this)(i, l) * o(l, j);
                r(i, j) = s;
            }
        return r;
    }

    CMatrix adjoint() const {
        CMatrix r(k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) r(i, j) = std::conj((*this)(j, i));
        return r;
    }

    double frobenius_norm() const {
        double s = 0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) s += std::norm((*this)(i, j));
        return std::sqrt(s);
    }

    cplx determinant() const;
    CMatrix inverse() const;
};

// LU with partial pivoting; k is tiny so this is plenty.
inline cplx CMatrix::determinant() const {
    CMatrix a = *this;
    cplx det = 1.0;
    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(a(col, col));
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a(r, col)) > best) best = std::abs(a(r, col)), piv = r;
        if (best == 0.0) return 0.0;
        if (piv != col) {
            for (int j = 0; j < k; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < k; ++r) {
            cplx f = a(r, col) / a(col, col);
            for (int j = col; j < k; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

inline CMatrix CMatrix::inverse() const {
    CMatrix a = *this;
    CMatrix inv = CMatrix::identity(k);
    for (int col = 0; col < k; ++col) {
        int piv = col;
        double best = std::abs(a(col, col));
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a(r, col)) > best) best = std::abs(a(r, col)), piv = r;
        if (best == 0.0) throw ComputationError("matrix is singular, cannot invert");
        if (piv != col)
            for (int j = 0; j < k; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        cplx d = a(col, col);
        for (int j = 0; j < k; ++j) a(col, j) /= d, inv(col, j) /= d;
        for (int r = 0; r < k; ++r) {
            if (r == col) continue;
            cplx f = a(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < k; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

}  // namespace invariantlab
