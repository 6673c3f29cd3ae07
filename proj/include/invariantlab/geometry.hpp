#pragma once

// Spectral helpers for small complex matrices: eigenvalues of 2x2 linear
// parts, singular values, and tolerance-based numerical rank.

#include <algorithm>
#include <cmath>

#include "invariantlab/common.hpp"

namespace invariantlab {

// max_i |z_i| -- the natural escape norm for polydisc-style filtrations.
inline double sup_norm(const CVec& v) {
    double m = 0;
    for (int i = 0; i < v.k; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

struct Spectrum {
    std::array<cplx, kMaxDim> values{};
    int k = 0;

    cplx operator[](int i) const { return values[static_cast<size_t>(i)]; }
    double modulus(int i) const { return std::abs(values[static_cast<size_t>(i)]); }

    cplx product() const {
        cplx p = 1.0;
        for (int i = 0; i < k; ++i) p *= values[static_cast<size_t>(i)];
        return p;
    }
};

namespace detail {

// Argument in (-pi, pi]; std::arg can return -pi when the imaginary part
// is a negative zero, so fold that branch-cut value back to +pi.
inline double principal_arg(cplx z) {
    double a = std::arg(z);
    const double pi = std::acos(-1.0);
    if (a == -pi) a = pi;
    return a;
}

inline bool spectral_before(cplx a, cplx b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;           // descending modulus
    return principal_arg(a) < principal_arg(b);  // ties: ascending argument
}

}  // namespace detail

// Eigenvalues of a 2x2 complex matrix by the quadratic formula, with the
// discriminant sign chosen to avoid cancellation against the trace.
// Ordered by descending modulus, ties by ascending argument in (-pi, pi].
inline Spectrum eigenvalues_2x2(const CMatrix& m) {
    if (m.k != 2) throw DimensionError("eigenvalues_2x2 requires a 2x2 matrix");
    if (!m.finite()) throw InvalidInputError("eigenvalues_2x2: non-finite entries");
    cplx tr = m(0, 0) + m(1, 1);
    cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    cplx d = std::sqrt(tr * tr - 4.0 * det);
    // Pick the root of the discriminant that adds constructively to tr.
    if (std::real(std::conj(tr) * d) < 0.0) d = -d;
    cplx l1 = 0.5 * (tr + d);
    // Second root via the product to dodge subtractive cancellation.
    cplx l2 = (l1 != 0.0) ? det / l1 : 0.5 * (tr - d);

    Spectrum s;
    s.k = 2;
    if (detail::spectral_before(l2, l1)) std::swap(l1, l2);
    s.values[0] = l1;
    s.values[1] = l2;
    return s;
}

// Singular values in descending order.  k = 1 and k = 2 use closed forms of
// the Gram matrix spectrum; larger k falls back to one-sided cyclic Jacobi
// sweeps (off-diagonal threshold 1e-12 relative).
inline std::array<double, kMaxDim> singular_values(const CMatrix& m) {
    if (!m.finite()) throw InvalidInputError("singular_values: non-finite entries");
    std::array<double, kMaxDim> sv{};
    const int k = m.k;

    if (k == 1) {
        sv[0] = std::abs(m(0, 0));
        return sv;
    }
    if (k == 2) {
        // Eigenvalues of M*M: mu = (T +- sqrt(T^2 - 4D)) / 2 with
        // T = sum |m_ij|^2 and D = |det M|^2.  Both are real and >= 0.
        double t = 0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) t += std::norm(m(i, j));
        double d = std::norm(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
        double disc = std::sqrt(std::max(0.0, t * t - 4.0 * d));
        double hi = 0.5 * (t + disc);
        double lo = (hi > 0.0) ? d / hi : 0.0;  // product form, stable for small lo
        sv[0] = std::sqrt(hi);
        sv[1] = std::sqrt(std::max(0.0, lo));
        return sv;
    }

    // One-sided Jacobi on columns of a working copy.
    CMatrix a = m;
    const double tol = 1e-12;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0, diag = 0;
        for (int p = 0; p < k; ++p) {
            for (int q = p + 1; q < k; ++q) {
                cplx apq = 0;
                double app = 0, aqq = 0;
                for (int i = 0; i < k; ++i) {
                    apq += std::conj(a(i, p)) * a(i, q);
                    app += std::norm(a(i, p));
                    aqq += std::norm(a(i, q));
                }
                off = std::max(off, std::abs(apq));
                diag = std::max(diag, std::max(app, aqq));
                if (std::abs(apq) <= tol * std::max(app, aqq)) continue;
                // Complex Jacobi rotation diagonalizing the 2x2 Gram block:
                // absorb the phase of <a_p, a_q> into column q, then rotate.
                double theta = 0.5 * std::atan2(2.0 * std::abs(apq), app - aqq);
                cplx phase = (std::abs(apq) > 0) ? apq / std::abs(apq) : cplx(1.0);
                double cth = std::cos(theta), sth = std::sin(theta);
                for (int i = 0; i < k; ++i) {
                    cplx vp = a(i, p), vq = a(i, q);
                    a(i, p) = cth * vp + sth * std::conj(phase) * vq;
                    a(i, q) = -sth * phase * vp + cth * vq;
                }
            }
        }
        if (off <= tol * std::max(diag, 1e-300)) break;
    }
    for (int p = 0; p < k; ++p) {
        double s = 0;
        for (int i = 0; i < k; ++i) s += std::norm(a(i, p));
        sv[static_cast<size_t>(p)] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.begin() + k, std::greater<double>());
    return sv;
}

// Largest singular value = operator 2-norm.
inline double operator_norm(const CMatrix& m) { return singular_values(m)[0]; }

// Rank by singular-value thresholding.  Relative cutoff tol * sigma_max, with
// an absolute fallback: if even sigma_max <= tol the rank is 0 (so a uniform
// contraction with tiny Jacobian reads as rank zero rather than full).
inline int numerical_rank(const CMatrix& m, double tol) {
    if (tol < 0) throw InvalidInputError("numerical_rank: tolerance must be >= 0");
    auto sv = singular_values(m);
    if (sv[0] <= tol) return 0;
    int r = 0;
    for (int i = 0; i < m.k; ++i)
        if (sv[static_cast<size_t>(i)] > tol * sv[0]) ++r;
    return r;
}

}  // namespace invariantlab
