#pragma once

// Holomorphic self-maps of C^k in two representations:
//   * PolynomialMap   -- sparse multivariate polynomial components
//   * AutomorphismChain -- a word in affine / shear / coordinate-swap factors,
//                          invertible factor by factor in closed form
// plus evaluation, Jacobians, composition, scaling z -> f(mu z), orbit
// iteration, and a text-literal parser used by the CLI.

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "invariantlab/common.hpp"
#include "invariantlab/geometry.hpp"

namespace invariantlab {

inline constexpr int kDefaultDegreeCap = 16;
inline constexpr double kCoefCleanupRel = 1e-15;  // drop |c| below this times max |c|

// ---------------------------------------------------------------------------
// Sparse polynomials
// ---------------------------------------------------------------------------

struct Monomial {
    std::array<uint8_t, kMaxDim> exp{};
    cplx coef{};

    int total_degree() const {
        int d = 0;
        for (uint8_t e : exp) d += e;
        return d;
    }
};

namespace detail {
// Canonical term order: ascending total degree, then lexicographic exponents.
inline bool term_before(const Monomial& a, const Monomial& b) {
    int da = a.total_degree(), db = b.total_degree();
    if (da != db) return da < db;
    return a.exp < b.exp;
}
}  // namespace detail

struct Polynomial {
    int k = 0;  // number of variables
    std::vector<Monomial> terms;  // canonical order, exponents unique

    static Polynomial zero(int k) { return Polynomial{k, {}}; }

    static Polynomial constant(int k, cplx c) {
        Polynomial p{k, {}};
        if (c != 0.0) p.terms.push_back(Monomial{{}, c});
        return p;
    }

    static Polynomial variable(int k, int var) {
        if (var < 0 || var >= k) throw DimensionError("variable index out of range");
        Monomial m;
        m.exp[static_cast<size_t>(var)] = 1;
        m.coef = 1.0;
        return Polynomial{k, {m}};
    }

    bool is_zero() const { return terms.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& t : terms) d = std::max(d, t.total_degree());
        return d;
    }

    cplx eval(const CVec& z) const {
        if (z.k != k) throw DimensionError("polynomial evaluated at wrong dimension");
        cplx s = 0;
        for (const auto& t : terms) {
            cplx m = t.coef;
            for (int i = 0; i < k; ++i) {
                cplx zi = z[i];
                for (int e = 0; e < t.exp[static_cast<size_t>(i)]; ++e) m *= zi;
            }
            s += m;
        }
        return s;
    }

    Polynomial derivative(int var) const {
        if (var < 0 || var >= k) throw DimensionError("derivative variable out of range");
        Polynomial d{k, {}};
        for (const auto& t : terms) {
            uint8_t e = t.exp[static_cast<size_t>(var)];
            if (e == 0) continue;
            Monomial m = t;
            m.exp[static_cast<size_t>(var)] = static_cast<uint8_t>(e - 1);
            m.coef = t.coef * static_cast<double>(e);
            d.terms.push_back(m);
        }
        d.normalize();
        return d;
    }

    // Sort into canonical order, merge duplicate exponents, drop relatively
    // negligible coefficients.
    void normalize() {
        std::sort(terms.begin(), terms.end(), detail::term_before);
        std::vector<Monomial> merged;
        merged.reserve(terms.size());
        for (const auto& t : terms) {
            if (!merged.empty() && merged.back().exp == t.exp)
                merged.back().coef += t.coef;
            else
                merged.push_back(t);
        }
        double top = 0;
        for (const auto& t : merged) top = std::max(top, std::abs(t.coef));
        terms.clear();
        for (const auto& t : merged)
            if (std::abs(t.coef) > kCoefCleanupRel * top && t.coef != 0.0)
                terms.push_back(t);
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        if (a.k != b.k) throw DimensionError("polynomial dimension mismatch");
        Polynomial r = a;
        r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
        r.normalize();
        return r;
    }

    friend Polynomial operator*(cplx s, const Polynomial& p) {
        Polynomial r = p;
        for (auto& t : r.terms) t.coef *= s;
        r.normalize();
        return r;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.k != b.k) throw DimensionError("polynomial dimension mismatch");
        Polynomial r{a.k, {}};
        r.terms.reserve(a.terms.size() * b.terms.size());
        for (const auto& ta : a.terms)
            for (const auto& tb : b.terms) {
                Monomial m;
                for (int i = 0; i < a.k; ++i)
                    m.exp[static_cast<size_t>(i)] =
                        static_cast<uint8_t>(ta.exp[static_cast<size_t>(i)] +
                                             tb.exp[static_cast<size_t>(i)]);
                m.coef = ta.coef * tb.coef;
                r.terms.push_back(m);
            }
        r.normalize();
        return r;
    }
};

// Substitute polynomials q[0..k-1] for the variables of p.  Throws
// DegreeOverflowError if the (a-priori) composed degree exceeds the cap.
inline Polynomial substitute(const Polynomial& p, const std::vector<Polynomial>& q,
                             int degree_cap = kDefaultDegreeCap) {
    if (static_cast<int>(q.size()) != p.k)
        throw DimensionError("substitute needs one polynomial per variable");
    int kq = q.empty() ? 0 : q[0].k;
    for (const auto& qi : q)
        if (qi.k != kq) throw DimensionError("substituted polynomials must share dimension");

    std::array<int, kMaxDim> qdeg{};
    for (int i = 0; i < p.k; ++i) qdeg[static_cast<size_t>(i)] = q[static_cast<size_t>(i)].degree();
    int bound = 0;
    for (const auto& t : p.terms) {
        int d = 0;
        for (int i = 0; i < p.k; ++i)
            d += t.exp[static_cast<size_t>(i)] * qdeg[static_cast<size_t>(i)];
        bound = std::max(bound, d);
    }
    if (bound > degree_cap)
        throw DegreeOverflowError("composed degree " + std::to_string(bound) +
                                  " exceeds cap " + std::to_string(degree_cap));

    // Power cache per substituted component.
    std::vector<std::vector<Polynomial>> pow(static_cast<size_t>(p.k));
    for (int i = 0; i < p.k; ++i)
        pow[static_cast<size_t>(i)].push_back(Polynomial::constant(kq, 1.0));

    Polynomial r = Polynomial::zero(kq);
    for (const auto& t : p.terms) {
        Polynomial m = Polynomial::constant(kq, t.coef);
        for (int i = 0; i < p.k; ++i) {
            auto& cache = pow[static_cast<size_t>(i)];
            int e = t.exp[static_cast<size_t>(i)];
            while (static_cast<int>(cache.size()) <= e)
                cache.push_back(cache.back() * q[static_cast<size_t>(i)]);
            if (e > 0) m = m * cache[static_cast<size_t>(e)];
        }
        r = r + m;
    }
    return r;
}

// ---------------------------------------------------------------------------
// PolynomialMap
// ---------------------------------------------------------------------------

struct PolynomialMap {
    int k = 0;
    std::vector<Polynomial> comp;

    static PolynomialMap identity(int k) {
        PolynomialMap f;
        f.k = k;
        for (int i = 0; i < k; ++i) f.comp.push_back(Polynomial::variable(k, i));
        return f;
    }

    int degree() const {
        int d = 0;
        for (const auto& c : comp) d = std::max(d, c.degree());
        return d;
    }
};

inline CVec evaluate(const PolynomialMap& f, const CVec& z) {
    if (z.k != f.k) throw DimensionError("point dimension does not match map");
    CVec r(f.k);
    for (int i = 0; i < f.k; ++i) r[i] = f.comp[static_cast<size_t>(i)].eval(z);
    return r;
}

inline CMatrix jacobian(const PolynomialMap& f, const CVec& z) {
    if (z.k != f.k) throw DimensionError("point dimension does not match map");
    CMatrix j(f.k);
    for (int i = 0; i < f.k; ++i)
        for (int v = 0; v < f.k; ++v)
            j(i, v) = f.comp[static_cast<size_t>(i)].derivative(v).eval(z);
    return j;
}

inline PolynomialMap compose(const PolynomialMap& f, const PolynomialMap& g,
                             int degree_cap = kDefaultDegreeCap) {
    if (f.k != g.k) throw DimensionError("composed maps must share dimension");
    PolynomialMap r;
    r.k = f.k;
    for (const auto& c : f.comp) r.comp.push_back(substitute(c, g.comp, degree_cap));
    return r;
}

// f_mu(z) = f(mu z): multiply each coefficient by mu^degree.
inline PolynomialMap scale_map(const PolynomialMap& f, double mu) {
    if (!(mu > 0)) throw InvalidInputError("scale factor must be positive");
    PolynomialMap r = f;
    for (auto& c : r.comp) {
        for (auto& t : c.terms) t.coef *= std::pow(mu, t.total_degree());
        c.normalize();
    }
    return r;
}

// ---------------------------------------------------------------------------
// AutomorphismChain
// ---------------------------------------------------------------------------

struct ChainFactor {
    enum class Kind : uint8_t { Affine, Shear, Swap };
    Kind kind = Kind::Swap;

    // Affine: z -> A z + b, A invertible.
    CMatrix a;
    CVec b;

    // Shear: adds a polynomial in the other coordinates onto one axis.
    int axis = 0;
    Polynomial poly;

    // Swap/permutation: y_i = x_perm[i].
    std::array<uint8_t, kMaxDim> perm{};

    static ChainFactor affine(CMatrix a, CVec b) {
        if (a.k != b.k) throw DimensionError("affine factor: matrix/offset dimension mismatch");
        if (a.determinant() == 0.0) throw InvalidInputError("affine factor must be invertible");
        ChainFactor f;
        f.kind = Kind::Affine;
        f.a = std::move(a);
        f.b = std::move(b);
        return f;
    }

    static ChainFactor shear(int axis, Polynomial p) {
        if (axis < 0 || axis >= p.k) throw DimensionError("shear axis out of range");
        for (const auto& t : p.terms)
            if (t.exp[static_cast<size_t>(axis)] != 0)
                throw InvalidInputError("shear polynomial must not involve its own axis");
        ChainFactor f;
        f.kind = Kind::Shear;
        f.axis = axis;
        f.poly = std::move(p);
        return f;
    }

    static ChainFactor swap2(int k, int i, int j) {
        ChainFactor f;
        f.kind = Kind::Swap;
        for (int v = 0; v < k; ++v) f.perm[static_cast<size_t>(v)] = static_cast<uint8_t>(v);
        std::swap(f.perm[static_cast<size_t>(i)], f.perm[static_cast<size_t>(j)]);
        return f;
    }

    int dim() const {
        switch (kind) {
            case Kind::Affine: return a.k;
            case Kind::Shear: return poly.k;
            case Kind::Swap: return 0;  // dimension-agnostic
        }
        return 0;
    }
};

struct AutomorphismChain {
    int k = 0;
    std::vector<ChainFactor> factors;  // applied left to right
};

namespace detail {

inline void apply_factor(const ChainFactor& f, CVec& z) {
    switch (f.kind) {
        case ChainFactor::Kind::Affine: {
            CVec r(z.k);
            for (int i = 0; i < z.k; ++i) {
                cplx s = f.b[i];
                for (int j = 0; j < z.k; ++j) s += f.a(i, j) * z[j];
                r[i] = s;
            }
            z = r;
            break;
        }
        case ChainFactor::Kind::Shear:
            // poly never reads f.axis, so in-place update is safe
            z[f.axis] += f.poly.eval(z);
            break;
        case ChainFactor::Kind::Swap: {
            CVec r(z.k);
            for (int i = 0; i < z.k; ++i) r[i] = z[f.perm[static_cast<size_t>(i)]];
            z = r;
            break;
        }
    }
}

inline CMatrix factor_jacobian(const ChainFactor& f, const CVec& z) {
    switch (f.kind) {
        case ChainFactor::Kind::Affine: return f.a;
        case ChainFactor::Kind::Shear: {
            CMatrix j = CMatrix::identity(z.k);
            for (int v = 0; v < z.k; ++v) {
                if (v == f.axis) continue;
                j(f.axis, v) = f.poly.derivative(v).eval(z);
            }
            return j;
        }
        case ChainFactor::Kind::Swap: {
            CMatrix j(z.k);
            for (int i = 0; i < z.k; ++i) j(i, f.perm[static_cast<size_t>(i)]) = 1.0;
            return j;
        }
    }
    return CMatrix::identity(z.k);
}

}  // namespace detail

inline void apply_in_place(const AutomorphismChain& f, CVec& z) {
    for (const auto& fac : f.factors) detail::apply_factor(fac, z);
}

inline CVec evaluate(const AutomorphismChain& f, const CVec& z) {
    if (z.k != f.k) throw DimensionError("point dimension does not match map");
    CVec r = z;
    apply_in_place(f, r);
    return r;
}

inline CMatrix jacobian(const AutomorphismChain& f, const CVec& z) {
    if (z.k != f.k) throw DimensionError("point dimension does not match map");
    CMatrix j = CMatrix::identity(f.k);
    CVec x = z;
    for (const auto& fac : f.factors) {
        j = detail::factor_jacobian(fac, x).mul(j);
        detail::apply_factor(fac, x);
    }
    return j;
}

// Reverse the word and invert each factor; exact for shears and swaps.
inline AutomorphismChain invert_chain(const AutomorphismChain& f) {
    AutomorphismChain r;
    r.k = f.k;
    for (auto it = f.factors.rbegin(); it != f.factors.rend(); ++it) {
        switch (it->kind) {
            case ChainFactor::Kind::Affine: {
                CMatrix ainv = it->a.inverse();
                CVec b(f.k);
                for (int i = 0; i < f.k; ++i) {
                    cplx s = 0;
                    for (int j = 0; j < f.k; ++j) s += ainv(i, j) * it->b[j];
                    b[i] = -s;
                }
                r.factors.push_back(ChainFactor::affine(ainv, b));
                break;
            }
            case ChainFactor::Kind::Shear:
                r.factors.push_back(ChainFactor::shear(it->axis, -1.0 * it->poly));
                break;
            case ChainFactor::Kind::Swap: {
                ChainFactor inv;
                inv.kind = ChainFactor::Kind::Swap;
                for (int i = 0; i < f.k; ++i)
                    inv.perm[it->perm[static_cast<size_t>(i)]] = static_cast<uint8_t>(i);
                r.factors.push_back(inv);
                break;
            }
        }
    }
    return r;
}

inline AutomorphismChain scale_map(const AutomorphismChain& f, double mu) {
    if (!(mu > 0)) throw InvalidInputError("scale factor must be positive");
    AutomorphismChain r;
    r.k = f.k;
    CMatrix s(f.k);
    for (int i = 0; i < f.k; ++i) s(i, i) = mu;
    r.factors.push_back(ChainFactor::affine(s, CVec::zero(f.k)));
    r.factors.insert(r.factors.end(), f.factors.begin(), f.factors.end());
    return r;
}

inline AutomorphismChain compose(const AutomorphismChain& f, const AutomorphismChain& g) {
    if (f.k != g.k) throw DimensionError("composed maps must share dimension");
    AutomorphismChain r;
    r.k = f.k;
    r.factors = g.factors;  // (f o g): g acts first
    r.factors.insert(r.factors.end(), f.factors.begin(), f.factors.end());
    return r;
}

// Expand a chain into an explicit polynomial map (subject to the degree cap).
inline PolynomialMap to_polynomial(const AutomorphismChain& f,
                                   int degree_cap = kDefaultDegreeCap) {
    PolynomialMap p = PolynomialMap::identity(f.k);
    for (const auto& fac : f.factors) {
        switch (fac.kind) {
            case ChainFactor::Kind::Affine: {
                std::vector<Polynomial> next;
                for (int i = 0; i < f.k; ++i) {
                    Polynomial c = Polynomial::constant(f.k, fac.b[i]);
                    for (int j = 0; j < f.k; ++j)
                        c = c + fac.a(i, j) * p.comp[static_cast<size_t>(j)];
                    next.push_back(std::move(c));
                }
                p.comp = std::move(next);
                break;
            }
            case ChainFactor::Kind::Shear: {
                Polynomial add = substitute(fac.poly, p.comp, degree_cap);
                p.comp[static_cast<size_t>(fac.axis)] =
                    p.comp[static_cast<size_t>(fac.axis)] + add;
                break;
            }
            case ChainFactor::Kind::Swap: {
                std::vector<Polynomial> next;
                for (int i = 0; i < f.k; ++i)
                    next.push_back(p.comp[fac.perm[static_cast<size_t>(i)]]);
                p.comp = std::move(next);
                break;
            }
        }
        if (p.degree() > degree_cap)
            throw DegreeOverflowError("chain expansion exceeds degree cap " +
                                      std::to_string(degree_cap));
    }
    return p;
}

// The basic quadratic automorphism (z, w) -> (z^2 + w, z): swap the
// coordinates, then shear the first axis by the square of the second.
inline AutomorphismChain henon_chain() {
    AutomorphismChain f;
    f.k = 2;
    f.factors.push_back(ChainFactor::swap2(2, 0, 1));
    Polynomial sq = Polynomial::variable(2, 1) * Polynomial::variable(2, 1);
    f.factors.push_back(ChainFactor::shear(0, std::move(sq)));
    return f;
}

// Runtime-dispatched wrapper used by CLI / config plumbing (helpers below).
using AnyMap = std::variant<AutomorphismChain, PolynomialMap>;

// ---------------------------------------------------------------------------
// Pre-differentiated Jacobian evaluation (for per-point loops over clouds)
// ---------------------------------------------------------------------------

class JacobianTable {
public:
    explicit JacobianTable(const PolynomialMap& f) : k_(f.k) {
        rows_.resize(static_cast<size_t>(f.k));
        for (int i = 0; i < f.k; ++i)
            for (int v = 0; v < f.k; ++v)
                rows_[static_cast<size_t>(i)].push_back(
                    f.comp[static_cast<size_t>(i)].derivative(v));
    }

    explicit JacobianTable(const AutomorphismChain& f) : k_(f.k), chain_(&f) {
        for (const auto& fac : f.factors) {
            std::vector<Polynomial> d;
            if (fac.kind == ChainFactor::Kind::Shear)
                for (int v = 0; v < f.k; ++v) d.push_back(fac.poly.derivative(v));
            shear_derivs_.push_back(std::move(d));
        }
    }

    explicit JacobianTable(const AnyMap& m)
        : JacobianTable(std::holds_alternative<AutomorphismChain>(m)
                            ? JacobianTable(std::get<AutomorphismChain>(m))
                            : JacobianTable(std::get<PolynomialMap>(m))) {}

    CMatrix at(const CVec& z) const {
        if (chain_) {
            CMatrix j = CMatrix::identity(k_);
            CVec x = z;
            size_t fi = 0;
            for (const auto& fac : chain_->factors) {
                CMatrix fj = CMatrix::identity(k_);
                switch (fac.kind) {
                    case ChainFactor::Kind::Affine: fj = fac.a; break;
                    case ChainFactor::Kind::Shear:
                        for (int v = 0; v < k_; ++v) {
                            if (v == fac.axis) continue;
                            fj(fac.axis, v) = shear_derivs_[fi][static_cast<size_t>(v)].eval(x);
                        }
                        break;
                    case ChainFactor::Kind::Swap:
                        fj = CMatrix(k_);
                        for (int i = 0; i < k_; ++i) fj(i, fac.perm[static_cast<size_t>(i)]) = 1.0;
                        break;
                }
                j = fj.mul(j);
                detail::apply_factor(fac, x);
                ++fi;
            }
            return j;
        }
        CMatrix j(k_);
        for (int i = 0; i < k_; ++i)
            for (int v = 0; v < k_; ++v)
                j(i, v) = rows_[static_cast<size_t>(i)][static_cast<size_t>(v)].eval(z);
        return j;
    }

private:
    int k_;
    const AutomorphismChain* chain_ = nullptr;       // non-owning
    std::vector<std::vector<Polynomial>> rows_;       // polynomial-map case
    std::vector<std::vector<Polynomial>> shear_derivs_;  // chain case, per factor
};

// ---------------------------------------------------------------------------
// Orbits
// ---------------------------------------------------------------------------

struct OrbitRecord {
    std::vector<CVec> points;       // points[0] is the start
    std::optional<int> escaped_at;  // first index with sup_norm > escape_radius
};

template <class MapT>
OrbitRecord iterate(const MapT& f, const CVec& z0, int n, double escape_radius) {
    if (n < 0) throw InvalidInputError("iterate: step count must be >= 0");
    OrbitRecord rec;
    rec.points.reserve(static_cast<size_t>(n) + 1);
    rec.points.push_back(z0);
    if (sup_norm(z0) > escape_radius || !z0.finite()) {
        rec.escaped_at = 0;
        return rec;
    }
    CVec z = z0;
    for (int i = 1; i <= n; ++i) {
        z = evaluate(f, z);
        rec.points.push_back(z);
        if (!z.finite() || sup_norm(z) > escape_radius) {
            rec.escaped_at = i;
            break;
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// AnyMap helpers
// ---------------------------------------------------------------------------

inline int map_dim(const AnyMap& m) {
    return std::visit([](const auto& f) { return f.k; }, m);
}

inline CVec evaluate(const AnyMap& m, const CVec& z) {
    return std::visit([&](const auto& f) { return evaluate(f, z); }, m);
}

inline CMatrix jacobian(const AnyMap& m, const CVec& z) {
    return std::visit([&](const auto& f) { return jacobian(f, z); }, m);
}

inline bool is_chain(const AnyMap& m) {
    return std::holds_alternative<AutomorphismChain>(m);
}

inline AnyMap compose_any(const AnyMap& f, const AnyMap& g,
                          int degree_cap = kDefaultDegreeCap) {
    if (is_chain(f) && is_chain(g))
        return compose(std::get<AutomorphismChain>(f), std::get<AutomorphismChain>(g));
    PolynomialMap pf = is_chain(f) ? to_polynomial(std::get<AutomorphismChain>(f), degree_cap)
                                   : std::get<PolynomialMap>(f);
    PolynomialMap pg = is_chain(g) ? to_polynomial(std::get<AutomorphismChain>(g), degree_cap)
                                   : std::get<PolynomialMap>(g);
    return compose(pf, pg, degree_cap);
}

// ---------------------------------------------------------------------------
// Map literals
//
//   henon                         the quadratic automorphism above
//   scale:C                       z -> C z                  (C complex literal)
//   diag:C1,...,Ck                componentwise scaling
//   rotation:T1,...,Tk            diag(e^{i T1}, ..., e^{i Tk})
//   linear:[[C,...],[...]]        invertible linear map
//   chain:F; F; ...               factors: swap(i,j) | shear(axis)=POLY |
//                                 linear:[[...]] | scale:C | diag:...
//   poly:P1|P2|...|Pk             polynomial components
//   pow:LIT,N                     N-fold self-composition
//
// Complex literals: 1.5, -2e-3, 0.5i, 1+2i, 3-0.25i.  Polynomial variables
// are z, w for k = 2 (or x1..xk in general); terms like 2z^2w - 0.5i w^3.
// ---------------------------------------------------------------------------

namespace detail {

inline void skip_ws(const std::string& s, size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

inline bool parse_real(const std::string& s, size_t& i, double& out) {
    size_t j = i;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    size_t digits = j;
    while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
    if (j == digits) return false;
    if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        size_t e = j + 1;
        if (e < s.size() && (s[e] == '+' || s[e] == '-')) ++e;
        size_t ed = e;
        while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
        if (e > ed) j = e;
    }
    try {
        out = std::stod(s.substr(i, j - i));
    } catch (const std::exception&) {
        return false;
    }
    i = j;
    return true;
}

// Complex literal: [real][+|-][imag]i with either part optional.
inline cplx parse_complex(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    if (s.empty()) throw InvalidInputError("empty complex literal");

    size_t i = 0;
    double re = 0, im = 0;
    bool have_any = false;

    while (i < s.size()) {
        double v;
        size_t before = i;
        bool sign_only = false;
        if (!parse_real(s, i, v)) {
            // allow bare "i", "+i", "-i"
            double sgn = 1;
            if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
                sgn = (s[i] == '-') ? -1 : 1;
                ++i;
            }
            if (i < s.size() && s[i] == 'i') {
                v = sgn;
                sign_only = true;
            } else {
                throw InvalidInputError("bad complex literal '" + text + "'");
            }
        }
        if (i < s.size() && s[i] == 'i') {
            ++i;
            im += v;
        } else if (!sign_only) {
            re += v;
        } else {
            throw InvalidInputError("bad complex literal '" + text + "'");
        }
        have_any = true;
        if (i == before) break;
    }
    if (!have_any) throw InvalidInputError("bad complex literal '" + text + "'");
    return {re, im};
}

inline int var_index(const std::string& s, size_t& i, int k) {
    char c = s[i];
    if (c == 'z' && k >= 1) {
        ++i;
        return 0;
    }
    if (c == 'w' && k >= 2) {
        ++i;
        return 1;
    }
    if (c == 'x' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
        size_t j = i + 1;
        int v = 0;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
            v = v * 10 + (s[j++] - '0');
        if (v < 1 || v > k)
            throw InvalidInputError("variable x" + std::to_string(v) + " out of range for k=" +
                                    std::to_string(k));
        i = j;
        return v - 1;
    }
    return -1;
}

}  // namespace detail

// Parse a polynomial expression such as "2z^2w - 0.5i w^3 + 1".
inline Polynomial parse_polynomial(const std::string& text, int k) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    if (s.empty()) throw InvalidInputError("empty polynomial literal");

    Polynomial p = Polynomial::zero(k);
    size_t i = 0;
    while (i < s.size()) {
        double sign = 1;
        while (i < s.size() && (s[i] == '+' || s[i] == '-')) {
            if (s[i] == '-') sign = -sign;
            ++i;
        }
        if (i >= s.size()) throw InvalidInputError("dangling sign in polynomial '" + text + "'");

        Monomial m;
        m.coef = sign;
        bool saw_factor = false;

        while (i < s.size() && s[i] != '+' && s[i] != '-') {
            if (s[i] == '*') {
                ++i;
                continue;
            }
            double v;
            if (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.') {
                if (!detail::parse_real(s, i, v))
                    throw InvalidInputError("bad number in polynomial '" + text + "'");
                if (i < s.size() && s[i] == 'i') {
                    ++i;  // 'i' is reserved for the imaginary unit, never a variable
                    m.coef *= cplx(0, v);
                } else {
                    m.coef *= v;
                }
                saw_factor = true;
                continue;
            }
            if (s[i] == 'i') {
                ++i;
                m.coef *= cplx(0, 1);
                saw_factor = true;
                continue;
            }
            int var = detail::var_index(s, i, k);
            if (var < 0)
                throw InvalidInputError("unexpected character '" + std::string(1, s[i]) +
                                        "' in polynomial '" + text + "'");
            int e = 1;
            if (i < s.size() && s[i] == '^') {
                ++i;
                if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
                    throw InvalidInputError("bad exponent in polynomial '" + text + "'");
                e = 0;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
                    e = e * 10 + (s[i++] - '0');
            }
            if (m.exp[static_cast<size_t>(var)] + e > 255)
                throw InvalidInputError("exponent overflow in polynomial '" + text + "'");
            m.exp[static_cast<size_t>(var)] = static_cast<uint8_t>(m.exp[static_cast<size_t>(var)] + e);
            saw_factor = true;
        }
        if (!saw_factor) throw InvalidInputError("empty term in polynomial '" + text + "'");
        p.terms.push_back(m);
    }
    p.normalize();
    return p;
}

namespace detail {

inline std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '[' || c == '(') ++depth;
        if (c == ']' || c == ')') --depth;
        if (c == sep && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trimmed(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline CMatrix parse_matrix(const std::string& text, int expect_k) {
    std::string s = trimmed(text);
    if (s.size() < 4 || s.front() != '[' || s.back() != ']')
        throw InvalidInputError("matrix literal must look like [[a,b],[c,d]]");
    s = s.substr(1, s.size() - 2);
    std::vector<std::string> row_strs;
    {
        int depth = 0;
        std::string cur;
        for (char c : s) {
            if (c == '[') {
                if (depth == 0) cur.clear();
                ++depth;
                if (depth == 1) continue;
            }
            if (c == ']') {
                --depth;
                if (depth == 0) {
                    row_strs.push_back(cur);
                    continue;
                }
            }
            if (depth >= 1) cur.push_back(c);
        }
        if (depth != 0) throw InvalidInputError("unbalanced brackets in matrix literal");
    }
    int k = static_cast<int>(row_strs.size());
    if (expect_k > 0 && k != expect_k)
        throw InvalidInputError("matrix has " + std::to_string(k) + " rows, expected " +
                                std::to_string(expect_k));
    CMatrix m(k);
    for (int i = 0; i < k; ++i) {
        auto cells = split_top(row_strs[static_cast<size_t>(i)], ',');
        if (static_cast<int>(cells.size()) != k)
            throw InvalidInputError("matrix rows must all have " + std::to_string(k) + " entries");
        for (int j = 0; j < k; ++j) m(i, j) = parse_complex(cells[static_cast<size_t>(j)]);
    }
    return m;
}

inline ChainFactor parse_factor(const std::string& text, int k);

}  // namespace detail

inline AnyMap parse_map(const std::string& text, int k = 2);

namespace detail {

inline ChainFactor parse_factor(const std::string& text, int k) {
    std::string s = trimmed(text);
    if (s.rfind("swap", 0) == 0) {
        size_t open = s.find('(');
        if (open == std::string::npos) {
            if (k != 2) throw InvalidInputError("bare 'swap' factor requires k=2");
            return ChainFactor::swap2(2, 0, 1);
        }
        size_t close = s.find(')', open);
        if (close == std::string::npos) throw InvalidInputError("bad swap factor '" + s + "'");
        auto parts = split_top(s.substr(open + 1, close - open - 1), ',');
        if (parts.size() != 2) throw InvalidInputError("swap takes two axis indices");
        int i = std::stoi(trimmed(parts[0])), j = std::stoi(trimmed(parts[1]));
        if (i < 0 || j < 0 || i >= k || j >= k)
            throw InvalidInputError("swap axis out of range");
        return ChainFactor::swap2(k, i, j);
    }
    if (s.rfind("shear", 0) == 0) {
        size_t open = s.find('(');
        size_t close = (open == std::string::npos) ? std::string::npos : s.find(')', open);
        size_t eq = (close == std::string::npos) ? std::string::npos : s.find('=', close);
        if (eq == std::string::npos)
            throw InvalidInputError("shear factor must look like shear(AXIS)=POLY");
        int axis = std::stoi(trimmed(s.substr(open + 1, close - open - 1)));
        Polynomial p = parse_polynomial(s.substr(eq + 1), k);
        return ChainFactor::shear(axis, std::move(p));
    }
    if (s.rfind("linear:", 0) == 0)
        return ChainFactor::affine(parse_matrix(s.substr(7), k), CVec::zero(k));
    if (s.rfind("scale:", 0) == 0) {
        cplx c = parse_complex(s.substr(6));
        CMatrix m(k);
        for (int i = 0; i < k; ++i) m(i, i) = c;
        return ChainFactor::affine(m, CVec::zero(k));
    }
    if (s.rfind("diag:", 0) == 0) {
        auto cells = split_top(s.substr(5), ',');
        if (static_cast<int>(cells.size()) != k)
            throw InvalidInputError("diag needs " + std::to_string(k) + " entries");
        CMatrix m(k);
        for (int i = 0; i < k; ++i) m(i, i) = parse_complex(cells[static_cast<size_t>(i)]);
        return ChainFactor::affine(m, CVec::zero(k));
    }
    throw InvalidInputError("unknown chain factor '" + s + "'");
}

}  // namespace detail

inline AnyMap parse_map(const std::string& text, int k) {
    std::string s = detail::trimmed(text);
    if (s.empty()) throw InvalidInputError("empty map literal");

    if (s == "henon") {
        if (k != 2) throw InvalidInputError("henon requires k=2");
        return henon_chain();
    }
    if (s.rfind("pow:", 0) == 0) {
        auto parts = detail::split_top(s.substr(4), ',');
        if (parts.size() != 2) throw InvalidInputError("pow takes a map literal and a count");
        int n = std::stoi(detail::trimmed(parts[1]));
        if (n < 1) throw InvalidInputError("pow count must be >= 1");
        AnyMap base = parse_map(detail::trimmed(parts[0]), k);
        AnyMap r = base;
        for (int i = 1; i < n; ++i) r = compose_any(r, base);
        return r;
    }
    if (s.rfind("chain:", 0) == 0) {
        AutomorphismChain c;
        c.k = k;
        for (const auto& part : detail::split_top(s.substr(6), ';'))
            c.factors.push_back(detail::parse_factor(part, k));
        if (c.factors.empty()) throw InvalidInputError("chain needs at least one factor");
        return c;
    }
    if (s.rfind("poly:", 0) == 0) {
        auto parts = detail::split_top(s.substr(5), '|');
        if (static_cast<int>(parts.size()) != k)
            throw InvalidInputError("poly map needs " + std::to_string(k) + " components");
        PolynomialMap p;
        p.k = k;
        for (const auto& part : parts) p.comp.push_back(parse_polynomial(part, k));
        return p;
    }
    if (s.rfind("rotation:", 0) == 0) {
        auto cells = detail::split_top(s.substr(9), ',');
        if (static_cast<int>(cells.size()) != k)
            throw InvalidInputError("rotation needs " + std::to_string(k) + " angles");
        CMatrix m(k);
        for (int i = 0; i < k; ++i) {
            double t = std::stod(detail::trimmed(cells[static_cast<size_t>(i)]));
            m(i, i) = cplx(std::cos(t), std::sin(t));
        }
        AutomorphismChain c;
        c.k = k;
        c.factors.push_back(ChainFactor::affine(m, CVec::zero(k)));
        return c;
    }
    if (s.rfind("linear:", 0) == 0 || s.rfind("scale:", 0) == 0 || s.rfind("diag:", 0) == 0) {
        AutomorphismChain c;
        c.k = k;
        c.factors.push_back(detail::parse_factor(s, k));
        return c;
    }
    throw InvalidInputError("unrecognized map literal '" + s + "'");
}

}  // namespace invariantlab
