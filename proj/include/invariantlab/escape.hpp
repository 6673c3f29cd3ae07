#pragma once

// Escape-time analysis for polynomial automorphisms of C^k: bounded-orbit
// clouds in forward / backward / both directions, decay of a cloud toward an
// invariant core, strict-contraction powers, and iterated-image cores.

#include <optional>
#include <vector>

#include "invariantlab/compact.hpp"
#include "invariantlab/maps.hpp"

namespace invariantlab {

inline constexpr int kDefaultEscapeSteps = 200;
inline constexpr double kDefaultEscapeCutoff = 1e3;  // sup-norm proxy for "gone"

enum class OrbitDirection { Forward, Backward };

// ---------------------------------------------------------------------------
// GridSpec: deterministic sample enumeration over a box of R^{2k}
//
// Two modes share one enumeration interface:
//   * grid  -- cell-centered product lattice over the free axes (sliced axes
//              pinned to a value); the natural shape for 2D renders
//   * low-discrepancy -- Halton stream over all free axes, with sample 0
//              replaced by the box center so the center is always present
// ---------------------------------------------------------------------------

namespace detail {

inline double radical_inverse(uint64_t i, uint32_t base) {
    double inv = 1.0 / base, digit = inv, x = 0;
    while (i) {
        x += static_cast<double>(i % base) * digit;
        i /= base;
        digit *= inv;
    }
    return x;
}

inline constexpr std::array<uint32_t, 2 * kMaxDim> kHaltonBases = {
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace detail

struct GridSpec {
    int k = 2;
    std::array<double, 2 * kMaxDim> lo{};
    std::array<double, 2 * kMaxDim> hi{};
    std::array<int64_t, 2 * kMaxDim> counts{};
    std::array<bool, 2 * kMaxDim> sliced{};
    std::array<double, 2 * kMaxDim> slice_value{};
    bool low_discrepancy = false;

    // Full-dimensional box [-half, half]^{2k}, Halton-sampled, center first.
    static GridSpec box(int k, double half, int64_t per_axis) {
        GridSpec g;
        g.k = k;
        g.low_discrepancy = true;
        for (int a = 0; a < 2 * k; ++a) {
            g.lo[static_cast<size_t>(a)] = -half;
            g.hi[static_cast<size_t>(a)] = half;
            g.counts[static_cast<size_t>(a)] = per_axis;
        }
        g.validate();
        return g;
    }

    // The real slice Im z = Im w = 0 of C^2, as an nx-by-ny lattice.
    static GridSpec real_slice(double half, int64_t nx, int64_t ny) {
        GridSpec g;
        g.k = 2;
        for (int a = 0; a < 4; ++a) {
            g.lo[static_cast<size_t>(a)] = -half;
            g.hi[static_cast<size_t>(a)] = half;
        }
        g.counts[0] = nx;
        g.counts[2] = ny;
        g.sliced[1] = g.sliced[3] = true;
        g.counts[1] = g.counts[3] = 1;
        g.validate();
        return g;
    }

    void validate() const {
        CVec::check_dim(k);
        bool any_free = false;
        for (int a = 0; a < 2 * k; ++a) {
            size_t s = static_cast<size_t>(a);
            if (sliced[s]) {
                if (!std::isfinite(slice_value[s]))
                    throw InvalidInputError("grid slice value must be finite");
                continue;
            }
            any_free = true;
            if (!(std::isfinite(lo[s]) && std::isfinite(hi[s]) && lo[s] < hi[s]))
                throw InvalidInputError("grid box bounds must be finite with lo < hi");
            if (counts[s] < 2)
                throw InvalidInputError("grid needs at least 2 samples per free axis");
        }
        if (!any_free) throw InvalidInputError("grid must have at least one free axis");
    }

    int free_axes() const {
        int n = 0;
        for (int a = 0; a < 2 * k; ++a)
            if (!sliced[static_cast<size_t>(a)]) ++n;
        return n;
    }

    int64_t total() const {
        int64_t n = 1;
        for (int a = 0; a < 2 * k; ++a)
            if (!sliced[static_cast<size_t>(a)]) n *= counts[static_cast<size_t>(a)];
        return n;
    }

    double cell_diagonal() const {
        double s = 0;
        for (int a = 0; a < 2 * k; ++a) {
            size_t i = static_cast<size_t>(a);
            if (sliced[i]) continue;
            double h = (hi[i] - lo[i]) / static_cast<double>(counts[i]);
            s += h * h;
        }
        return std::sqrt(s);
    }

    CVec sample(int64_t i) const {
        std::array<double, 2 * kMaxDim> x{};
        if (low_discrepancy) {
            int f = 0;
            for (int a = 0; a < 2 * k; ++a) {
                size_t s = static_cast<size_t>(a);
                if (sliced[s]) {
                    x[s] = slice_value[s];
                    continue;
                }
                double u = (i == 0) ? 0.5
                                    : detail::radical_inverse(static_cast<uint64_t>(i),
                                                              detail::kHaltonBases[static_cast<size_t>(f)]);
                x[s] = lo[s] + u * (hi[s] - lo[s]);
                ++f;
            }
        } else {
            int64_t rem = i;
            for (int a = 0; a < 2 * k; ++a) {
                size_t s = static_cast<size_t>(a);
                if (sliced[s]) {
                    x[s] = slice_value[s];
                    continue;
                }
                int64_t c = counts[s];
                int64_t j = rem % c;
                rem /= c;
                x[s] = lo[s] + (static_cast<double>(j) + 0.5) * (hi[s] - lo[s]) /
                                   static_cast<double>(c);
            }
        }
        CVec p(k);
        for (int j = 0; j < k; ++j)
            p[j] = cplx(x[static_cast<size_t>(2 * j)], x[static_cast<size_t>(2 * j + 1)]);
        return p;
    }
};

// ---------------------------------------------------------------------------
// Filtration regions
//
// For the quadratic swap-shear automorphism (z,w) -> (z^2+w, z), any point
// with |z| >= max(|w|, 2) escapes with strictly growing sup-norm, and the
// region is forward invariant.  The recognizer also covers the scaled variant
// f(mu z) and the inverses of both; each gets its own provably safe radius:
//
//   (z,w) -> (mu^2 z^2 + mu w, mu z):  |z'| >= mu|z|(mu|z| - 1) exceeds |z|
//   once |z| > (1+mu)/mu^2, and dominates |w'| = mu|z| once |z| >= 2/mu,
//   so R(mu) = max((1+mu)/mu^2, 2/mu)  (= 2 at mu = 1).
//
//   (u,v) -> (s v, s(u - v^2)):  the roles of the coordinates swap; growth
//   is strict once |v| > 1 + 1/s, containment once |v| >= 2, so
//   R = max(2, 1 + 1/s).
// ---------------------------------------------------------------------------

struct FiltrationForm {
    int big_axis = 0;   // escape region: |z_big| >= max(|z_small|, radius)
    double radius = 2;
};

namespace detail {

// Exactly c * x_other^2 for a shear on `axis` of a 2-variable polynomial.
inline bool is_square_shear(const ChainFactor& f, int axis, double c) {
    if (f.kind != ChainFactor::Kind::Shear || f.axis != axis) return false;
    if (f.poly.k != 2 || f.poly.terms.size() != 1) return false;
    const Monomial& t = f.poly.terms[0];
    if (t.coef != cplx(c, 0)) return false;
    return t.exp[static_cast<size_t>(axis)] == 0 && t.exp[static_cast<size_t>(1 - axis)] == 2;
}

inline bool is_swap01(const ChainFactor& f) {
    return f.kind == ChainFactor::Kind::Swap && f.perm[0] == 1 && f.perm[1] == 0;
}

// A pure homothety factor mu * I with mu real and positive.
inline std::optional<double> scalar_affine(const ChainFactor& f) {
    if (f.kind != ChainFactor::Kind::Affine || f.a.k != 2) return std::nullopt;
    for (int i = 0; i < 2; ++i)
        if (f.b[i] != 0.0) return std::nullopt;
    cplx d = f.a(0, 0);
    if (f.a(1, 1) != d || f.a(0, 1) != 0.0 || f.a(1, 0) != 0.0) return std::nullopt;
    if (d.imag() != 0.0 || !(d.real() > 0)) return std::nullopt;
    return d.real();
}

inline std::optional<FiltrationForm> filtration_form(const AutomorphismChain& f) {
    if (f.k != 2) return std::nullopt;
    const auto& fs = f.factors;

    // (z,w) -> (z^2 + w, z), optionally precomposed with mu * I
    if (fs.size() == 2 && is_swap01(fs[0]) && is_square_shear(fs[1], 0, 1.0))
        return FiltrationForm{0, 2.0};
    if (fs.size() == 3 && is_swap01(fs[1]) && is_square_shear(fs[2], 0, 1.0)) {
        if (auto mu = scalar_affine(fs[0]))
            return FiltrationForm{0, std::max((1 + *mu) / (*mu * *mu), 2 / *mu)};
    }

    // the inverse orientation (u,v) -> (v, u - v^2), optionally postscaled
    if (fs.size() == 2 && is_square_shear(fs[0], 0, -1.0) && is_swap01(fs[1]))
        return FiltrationForm{1, 2.0};
    if (fs.size() == 3 && is_square_shear(fs[0], 0, -1.0) && is_swap01(fs[1])) {
        if (auto s = scalar_affine(fs[2]))
            return FiltrationForm{1, std::max(2.0, 1 + 1 / *s)};
    }
    return std::nullopt;
}

}  // namespace detail

inline double filtration_radius(const AutomorphismChain& f) {
    if (auto form = detail::filtration_form(f)) return form->radius;
    throw InvalidInputError(
        "filtration_radius: unsupported map form (expected the quadratic "
        "swap-shear chain, its inverse, or a scaled variant)");
}

// ---------------------------------------------------------------------------
// Escape fields
// ---------------------------------------------------------------------------

struct EscapeField {
    GridSpec grid;
    std::vector<int32_t> steps;  // -1 = bounded through nmax
    int nmax = kDefaultEscapeSteps;
    double escape_radius = kDefaultEscapeCutoff;
    double filtration_r = 0;  // region radius actually used; 0 = none applied
    OrbitDirection direction = OrbitDirection::Forward;

    std::optional<int32_t> escape_step(int64_t i) const {
        int32_t s = steps[static_cast<size_t>(i)];
        if (s < 0) return std::nullopt;
        return s;
    }

    int64_t bounded_count() const {
        int64_t n = 0;
        for (int32_t s : steps)
            if (s < 0) ++n;
        return n;
    }
};

namespace detail {

// First step at which the orbit is provably/proxy-escaped: entering the
// filtration region (when one applies) or exceeding the sup-norm cutoff.
template <class MapT>
int32_t orbit_escape_step(const MapT& f, CVec p, int nmax, double cutoff,
                          const std::optional<FiltrationForm>& region) {
    auto gone = [&](const CVec& z) {
        if (!z.finite() || sup_norm(z) > cutoff) return true;
        if (region) {
            double big = std::abs(z[region->big_axis]);
            double small = std::abs(z[1 - region->big_axis]);
            if (big >= std::max(small, region->radius)) return true;
        }
        return false;
    };
    if (nmax == 0) return -1;  // zero-step field asserts nothing
    if (gone(p)) return 0;
    for (int32_t j = 1; j <= nmax; ++j) {
        p = evaluate(f, p);
        if (gone(p)) return j;
    }
    return -1;
}

// Orientation from the chain when recognized; the region radius is never
// allowed below the derived safe value, so a too-small override cannot
// mislabel bounded points.
inline std::optional<FiltrationForm> region_for(const AnyMap& f, double R) {
    if (!is_chain(f)) return std::nullopt;
    auto form = filtration_form(std::get<AutomorphismChain>(f));
    if (!form) return std::nullopt;
    form->radius = std::max(form->radius, R);
    return form;
}

}  // namespace detail

inline EscapeField escape_field(const AnyMap& f, const GridSpec& g, double R, int nmax,
                                OrbitDirection direction = OrbitDirection::Forward,
                                double escape_radius = kDefaultEscapeCutoff) {
    g.validate();
    if (map_dim(f) != g.k) throw DimensionError("escape_field: map/grid dimension mismatch");
    if (nmax < 0) throw InvalidInputError("escape_field: nmax must be >= 0");
    if (!(R > 0) || !(escape_radius > 0))
        throw InvalidInputError("escape_field: radii must be positive");

    // Backward fields are, by definition, forward fields of the inverted
    // chain -- one code path keeps them identical sample-for-sample.
    AnyMap iter_map = f;
    if (direction == OrbitDirection::Backward) {
        if (!is_chain(f))
            throw InvalidInputError("escape_field: backward direction needs an invertible chain");
        iter_map = invert_chain(std::get<AutomorphismChain>(f));
    }
    auto region = detail::region_for(iter_map, R);

    EscapeField field;
    field.grid = g;
    field.nmax = nmax;
    field.escape_radius = escape_radius;
    field.filtration_r = region ? region->radius : 0.0;
    field.direction = direction;
    field.steps.assign(static_cast<size_t>(g.total()), -1);

    parallel_for(g.total(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i)
            field.steps[static_cast<size_t>(i)] = detail::orbit_escape_step(
                iter_map, g.sample(i), nmax, escape_radius, region);
    });
    return field;
}

inline CompactCloud bounded_cloud(const EscapeField& field) {
    CompactCloud out(field.grid.k, field.grid.cell_diagonal());
    const int64_t n = field.grid.total();
    for (int64_t i = 0; i < n; ++i)
        if (field.steps[static_cast<size_t>(i)] < 0) out.append(field.grid.sample(i));
    if (out.empty()) throw EscapeError("bounded_cloud: every sample escaped");
    return out;
}

// Samples bounded in both directions; streamed so the full field is never
// materialized (the both-ways-bounded set is small, the grid is not).
inline CompactCloud k_compact(const AnyMap& f, const GridSpec& g, double R,
                              int nmax = kDefaultEscapeSteps,
                              double escape_radius = kDefaultEscapeCutoff) {
    g.validate();
    if (!is_chain(f))
        throw InvalidInputError("k_compact: needs an invertible chain (both directions)");
    if (map_dim(f) != g.k) throw DimensionError("k_compact: map/grid dimension mismatch");
    if (nmax < 0 || !(R > 0) || !(escape_radius > 0))
        throw InvalidInputError("k_compact: invalid nmax or radius");

    const AutomorphismChain& fwd = std::get<AutomorphismChain>(f);
    AutomorphismChain bwd = invert_chain(fwd);
    auto fwd_region = detail::region_for(f, R);
    auto bwd_region = detail::region_for(AnyMap{bwd}, R);

    const int64_t n = g.total();
    const int workers = worker_count();
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<CompactCloud> partial(static_cast<size_t>(std::max(workers, 1)),
                                      CompactCloud(g.k, 0));

    parallel_for(n, [&](int64_t lo, int64_t hi) {
        size_t slot = static_cast<size_t>(lo / std::max<int64_t>(chunk, 1));
        CompactCloud& local = partial[slot];
        for (int64_t i = lo; i < hi; ++i) {
            CVec p = g.sample(i);
            if (detail::orbit_escape_step(fwd, p, nmax, escape_radius, fwd_region) >= 0)
                continue;
            if (detail::orbit_escape_step(bwd, p, nmax, escape_radius, bwd_region) >= 0)
                continue;
            local.append(p);
        }
    });

    CompactCloud out(g.k, g.cell_diagonal());
    for (const auto& part : partial) out.data.insert(out.data.end(), part.data.begin(),
                                                     part.data.end());
    if (out.empty()) throw EscapeError("k_compact: every sample escaped");
    return out;
}

// ---------------------------------------------------------------------------
// Decay toward a core, strict-contraction power, iterated-image core
// ---------------------------------------------------------------------------

namespace detail {

inline void require_bounded(const CompactCloud& c, double cutoff, int step,
                            const char* who) {
    for (int64_t i = 0; i < c.size(); ++i) {
        CVec p = c.point(i);
        if (!p.finite() || sup_norm(p) > cutoff)
            throw EscapeError(std::string(who) + ": orbit of sample " + std::to_string(i) +
                              " escaped at step " + std::to_string(step));
    }
}

}  // namespace detail

// Entry j = directed Hausdorff distance from f^j(X) to K, j = 0..n.
template <class MapT>
std::vector<double> attraction_decay(const MapT& f, const CompactCloud& X,
                                     const CompactCloud& K, int n,
                                     double escape_cutoff = kDefaultEscapeCutoff) {
    if (X.empty() || K.empty())
        throw InvalidInputError("attraction_decay: clouds must be nonempty");
    if (n < 0) throw InvalidInputError("attraction_decay: step count must be >= 0");
    KdTree core = build_index(K);
    CompactCloud cur = X;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n) + 1);
    out.push_back(directed_hausdorff(cur, K, core).distance);
    for (int j = 1; j <= n; ++j) {
        transform_in_place(f, cur);
        detail::require_bounded(cur, escape_cutoff, j, "attraction_decay");
        out.push_back(directed_hausdorff(cur, K, core).distance);
    }
    return out;
}

struct ContractionPower {
    int power = 0;
    double image_to_core = 0;  // directed distance from f^power(X) to K
    double threshold = 0;      // half the gap between K and the boundary of U
};

// Smallest n <= cap with f^n(X) still inside X at resolution and the image
// pulled closer to the core K than half of K's distance to the boundary of U.
template <class MapT>
ContractionPower find_strict_contraction_power(const MapT& f, const CompactCloud& X,
                                               const CompactCloud& K, const DomainShape& U,
                                               int cap = 60,
                                               double escape_cutoff = kDefaultEscapeCutoff) {
    if (X.empty() || K.empty())
        throw InvalidInputError("find_strict_contraction_power: clouds must be nonempty");
    if (cap < 1) throw InvalidInputError("find_strict_contraction_power: cap must be >= 1");

    auto pre = forward_invariance_defect(f, X);
    if (pre.distance > X.resolution + 1e-12)
        throw InvalidInputError("find_strict_contraction_power: X is not forward invariant "
                                "at its resolution (defect " +
                                std::to_string(pre.distance) + ")");

    double gap = std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < K.size(); ++i)
        gap = std::min(gap, std::abs(U.signed_distance(K.point(i))));
    ContractionPower r;
    r.threshold = 0.5 * gap;

    KdTree xidx = build_index(X);
    KdTree kidx = build_index(K);
    CompactCloud cur = X;
    for (int n = 1; n <= cap; ++n) {
        transform_in_place(f, cur);
        detail::require_bounded(cur, escape_cutoff, n, "find_strict_contraction_power");
        double to_x = directed_hausdorff(cur, X, xidx).distance;
        double to_k = directed_hausdorff(cur, K, kidx).distance;
        if (to_x <= X.resolution + 1e-12 && to_k < r.threshold) {
            r.power = n;
            r.image_to_core = to_k;
            return r;
        }
    }
    throw ComputationError("find_strict_contraction_power: no power up to " +
                           std::to_string(cap) + " pulls X inside the half-gap threshold");
}

struct CoreIntersection {
    CompactCloud core;
    DirectedHausdorff forward_defect;
    std::optional<DirectedHausdorff> backward_defect;  // chains only
};

// Points of K staying within K.resolution of every forward image f^j(K),
// j <= n -- the sampled version of the nested intersection of images.
inline CoreIntersection core_intersection(const AnyMap& f, const CompactCloud& K, int n,
                                          double escape_cutoff = kDefaultEscapeCutoff) {
    if (K.empty()) throw InvalidInputError("core_intersection: cloud must be nonempty");
    if (n < 0) throw InvalidInputError("core_intersection: step count must be >= 0");

    auto pre = forward_invariance_defect(f, K);
    if (pre.distance > K.resolution + 1e-12)
        throw InvalidInputError("core_intersection: K is not forward invariant at its "
                                "resolution (defect " +
                                std::to_string(pre.distance) + ")");

    std::vector<char> keep(static_cast<size_t>(K.size()), 1);
    CompactCloud image = K;
    for (int j = 1; j <= n; ++j) {
        transform_in_place(f, image);
        detail::require_bounded(image, escape_cutoff, j, "core_intersection");
        KdTree idx = build_index(image);
        const int dims = K.real_dims();
        parallel_for(K.size(), [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                if (!keep[static_cast<size_t>(i)]) continue;
                if (idx.nearest(K.raw() + i * dims).distance > K.resolution)
                    keep[static_cast<size_t>(i)] = 0;
            }
        });
    }

    CoreIntersection r;
    r.core = CompactCloud(K.k, K.resolution);
    for (int64_t i = 0; i < K.size(); ++i)
        if (keep[static_cast<size_t>(i)]) r.core.append(K.point(i));
    if (r.core.empty())
        throw ComputationError("core_intersection: empty intersection at cloud resolution");

    r.forward_defect = forward_invariance_defect(f, r.core);
    if (is_chain(f)) {
        AnyMap inv{invert_chain(std::get<AutomorphismChain>(f))};
        r.backward_defect = forward_invariance_defect(inv, r.core);
    }
    return r;
}

}  // namespace invariantlab
