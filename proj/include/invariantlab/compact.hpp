#pragma once

// Compact subsets of C^k represented as finite epsilon-nets ("clouds") with
// explicit resolution metadata, plus the domain shapes (balls, polydiscs,
// scaled copies) used as ambient bodies: Hausdorff distances, membership and
// boundary queries, epsilon-connectivity, images under maps, and
// deterministic lattice sampling.

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "invariantlab/kdtree.hpp"
#include "invariantlab/maps.hpp"
#include "invariantlab/parallel.hpp"

namespace invariantlab {

inline constexpr int64_t kDefaultSampleBudget = 8'000'000;

// ---------------------------------------------------------------------------
// CompactCloud
// ---------------------------------------------------------------------------

struct CompactCloud {
    int k = 0;
    double resolution = 0;       // covering radius of the represented set
    std::vector<cplx> data;      // k entries per point

    CompactCloud() = default;
    CompactCloud(int dim, double res) : k(dim), resolution(res) { CVec::check_dim(dim); }

    int64_t size() const { return k ? static_cast<int64_t>(data.size()) / k : 0; }
    bool empty() const { return data.empty(); }

    CVec point(int64_t i) const {
        CVec v(k);
        for (int j = 0; j < k; ++j) v[j] = data[static_cast<size_t>(i * k + j)];
        return v;
    }

    void append(const CVec& v) {
        if (v.k != k) throw DimensionError("cloud append: dimension mismatch");
        for (int j = 0; j < k; ++j) data.push_back(v[j]);
    }

    void set_point(int64_t i, const CVec& v) {
        for (int j = 0; j < k; ++j) data[static_cast<size_t>(i * k + j)] = v[j];
    }

    // std::complex<double> is guaranteed array-compatible with double[2],
    // so the cloud doubles as a flat real array for spatial indexing.
    const double* raw() const { return reinterpret_cast<const double*>(data.data()); }
    int real_dims() const { return 2 * k; }

    double max_euclid_norm() const {
        double m = 0;
        for (int64_t i = 0; i < size(); ++i) m = std::max(m, point(i).norm());
        return m;
    }
};

inline KdTree build_index(const CompactCloud& c) {
    return KdTree(c.raw(), c.size(), c.real_dims());
}

// ---------------------------------------------------------------------------
// Hausdorff distances
// ---------------------------------------------------------------------------

struct DirectedHausdorff {
    double distance = 0;
    int64_t witness_from = -1;  // farthest point of the source cloud
    int64_t witness_to = -1;    // its nearest neighbour in the target
};

// max over a in A of min over b in B -- exact, index-accelerated.
inline DirectedHausdorff directed_hausdorff(const CompactCloud& a, const CompactCloud& b,
                                            const KdTree& b_index) {
    if (a.k != b.k) throw DimensionError("hausdorff: cloud dimension mismatch");
    if (a.empty() || b.empty()) throw InvalidInputError("hausdorff of an empty cloud");

    const int64_t n = a.size();
    const int dims = a.real_dims();
    int workers = worker_count();
    std::vector<DirectedHausdorff> partial(static_cast<size_t>(std::max(workers, 1)));
    int64_t chunk = (n + workers - 1) / workers;

    parallel_for(n, [&](int64_t lo, int64_t hi) {
        size_t slot = static_cast<size_t>(lo / std::max<int64_t>(chunk, 1));
        DirectedHausdorff best;
        best.distance = -1;
        for (int64_t i = lo; i < hi; ++i) {
            auto hit = b_index.nearest(a.raw() + i * dims);
            if (hit.distance > best.distance) {
                best.distance = hit.distance;
                best.witness_from = i;
                best.witness_to = hit.index;
            }
        }
        partial[slot] = best;
    });

    DirectedHausdorff best;
    best.distance = -1;
    for (const auto& p : partial)
        if (p.witness_from >= 0 && p.distance > best.distance) best = p;
    return best;
}

inline DirectedHausdorff directed_hausdorff(const CompactCloud& a, const CompactCloud& b) {
    KdTree idx = build_index(b);
    return directed_hausdorff(a, b, idx);
}

struct HausdorffReport {
    double distance = 0;          // max of the two directed distances
    DirectedHausdorff a_to_b;
    DirectedHausdorff b_to_a;
    CVec witness_a, witness_b;    // realizing pair of the larger direction
};

inline HausdorffReport hausdorff_distance(const CompactCloud& a, const CompactCloud& b) {
    HausdorffReport r;
    KdTree ia = build_index(a);
    KdTree ib = build_index(b);
    r.a_to_b = directed_hausdorff(a, b, ib);
    r.b_to_a = directed_hausdorff(b, a, ia);
    r.distance = std::max(r.a_to_b.distance, r.b_to_a.distance);
    if (r.a_to_b.distance >= r.b_to_a.distance) {
        r.witness_a = a.point(r.a_to_b.witness_from);
        r.witness_b = b.point(r.a_to_b.witness_to);
    } else {
        r.witness_a = a.point(r.b_to_a.witness_to);
        r.witness_b = b.point(r.b_to_a.witness_from);
    }
    return r;
}

// ---------------------------------------------------------------------------
// DomainShape: Ball / Polydisc / Scaled, all star-shaped about their center
// ---------------------------------------------------------------------------

struct DomainShape {
    enum class Kind { Ball, Polydisc, Scaled };

    Kind kind = Kind::Ball;
    int k = 0;
    CVec center;                       // Ball / Polydisc
    double radius = 0;                 // Ball
    std::vector<double> radii;         // Polydisc
    std::shared_ptr<DomainShape> base; // Scaled
    double factor = 1;                 // Scaled

    static DomainShape ball(CVec c, double r) {
        if (!(r > 0)) throw InvalidInputError("ball radius must be positive");
        DomainShape s;
        s.kind = Kind::Ball;
        s.k = c.k;
        s.center = std::move(c);
        s.radius = r;
        return s;
    }

    static DomainShape polydisc(CVec c, std::vector<double> r) {
        if (static_cast<int>(r.size()) != c.k)
            throw DimensionError("polydisc needs one radius per coordinate");
        for (double ri : r)
            if (!(ri > 0)) throw InvalidInputError("polydisc radii must be positive");
        DomainShape s;
        s.kind = Kind::Polydisc;
        s.k = c.k;
        s.center = std::move(c);
        s.radii = std::move(r);
        return s;
    }

    static DomainShape scaled(DomainShape b, double t) {
        if (!(t > 0)) throw InvalidInputError("scale factor must be positive");
        DomainShape s;
        s.kind = Kind::Scaled;
        s.k = b.k;
        s.factor = t;
        s.base = std::make_shared<DomainShape>(std::move(b));
        return s;
    }

    // Signed distance to the boundary: negative inside, positive outside.
    // Exact for balls; for polydiscs it is the sup-metric gap, a 1-Lipschitz
    // proxy adequate for tolerance tests.
    double signed_distance(const CVec& p) const {
        if (p.k != k) throw DimensionError("signed_distance: dimension mismatch");
        switch (kind) {
            case Kind::Ball:
                return dist(p, center) - radius;
            case Kind::Polydisc: {
                double m = -std::numeric_limits<double>::infinity();
                for (int i = 0; i < k; ++i)
                    m = std::max(m, std::abs(p[i] - center[i]) - radii[static_cast<size_t>(i)]);
                return m;
            }
            case Kind::Scaled: {
                CVec q = p;
                q *= 1.0 / factor;
                return factor * base->signed_distance(q);
            }
        }
        return 0;
    }

    // Nearest-boundary representative along shape-adapted directions:
    // radial for balls, per-coordinate clamp / radial push for polydiscs.
    CVec project_to_boundary(const CVec& p) const {
        switch (kind) {
            case Kind::Ball: {
                CVec d = p - center;
                double n = d.norm();
                if (n == 0) {
                    CVec q = center;
                    q[0] += radius;
                    return q;
                }
                return center + (radius / n) * d;
            }
            case Kind::Polydisc: {
                if (signed_distance(p) > 0) {
                    CVec q = p;
                    for (int i = 0; i < k; ++i) {
                        cplx d = p[i] - center[i];
                        double m = std::abs(d);
                        double r = radii[static_cast<size_t>(i)];
                        if (m > r) q[i] = center[i] + (r / m) * d;
                    }
                    return q;
                }
                // inside: scale radially until the closest coordinate circle is hit
                double t = std::numeric_limits<double>::infinity();
                for (int i = 0; i < k; ++i) {
                    double m = std::abs(p[i] - center[i]);
                    if (m > 0) t = std::min(t, radii[static_cast<size_t>(i)] / m);
                }
                if (!std::isfinite(t)) {  // p is the center
                    CVec q = center;
                    q[0] += radii[0];
                    return q;
                }
                return center + t * (p - center);
            }
            case Kind::Scaled: {
                CVec q = p;
                q *= 1.0 / factor;
                return factor * base->project_to_boundary(q);
            }
        }
        return p;
    }

    bool origin_centered() const {
        switch (kind) {
            case Kind::Ball:
            case Kind::Polydisc:
                for (int i = 0; i < k; ++i)
                    if (center[i] != 0.0) return false;
                return true;
            case Kind::Scaled:
                return base->origin_centered();
        }
        return false;
    }

    // Half-width of the bounding box along each real axis, about the center.
    double half_width(int complex_axis) const {
        switch (kind) {
            case Kind::Ball: return radius;
            case Kind::Polydisc: return radii[static_cast<size_t>(complex_axis)];
            case Kind::Scaled: return factor * base->half_width(complex_axis);
        }
        return 0;
    }

    CVec effective_center() const {
        switch (kind) {
            case Kind::Ball:
            case Kind::Polydisc: return center;
            case Kind::Scaled: return factor * base->effective_center();
        }
        return CVec(k);
    }

    double diameter() const {
        switch (kind) {
            case Kind::Ball: return 2 * radius;
            case Kind::Polydisc: {
                double s = 0;
                for (double r : radii) s += 4 * r * r;
                return std::sqrt(s);
            }
            case Kind::Scaled: return factor * base->diameter();
        }
        return 0;
    }
};

enum class Region { Inside, BoundaryWithin, Outside };

inline Region membership(const DomainShape& shape, const CVec& p, double tau) {
    if (tau < 0) throw InvalidInputError("membership tolerance must be >= 0");
    double sd = shape.signed_distance(p);
    if (std::abs(sd) <= tau) return Region::BoundaryWithin;
    return sd < 0 ? Region::Inside : Region::Outside;
}

struct InclusionReport {
    bool inside = true;
    int64_t witness = -1;   // first violating point, if any
    double worst_sd = -std::numeric_limits<double>::infinity();
};

// Every point inside or within tau of the boundary (signed distance <= tau).
inline InclusionReport cloud_inside(const DomainShape& shape, const CompactCloud& cloud,
                                    double tau) {
    if (cloud.empty()) throw InvalidInputError("cloud_inside on empty cloud");
    InclusionReport r;
    for (int64_t i = 0; i < cloud.size(); ++i) {
        double sd = shape.signed_distance(cloud.point(i));
        if (sd > r.worst_sd) r.worst_sd = sd;
        if (sd > tau && r.inside) {
            r.inside = false;
            r.witness = i;
        }
    }
    return r;
}

struct TouchReport {
    bool touches = false;
    int64_t witness = -1;
    double min_abs_sd = std::numeric_limits<double>::infinity();
};

inline TouchReport touches_boundary(const DomainShape& shape, const CompactCloud& cloud,
                                    double tau) {
    if (cloud.empty()) throw InvalidInputError("touches_boundary on empty cloud");
    TouchReport r;
    for (int64_t i = 0; i < cloud.size(); ++i) {
        double sd = std::abs(shape.signed_distance(cloud.point(i)));
        if (sd < r.min_abs_sd) {
            r.min_abs_sd = sd;
            r.witness = i;
        }
    }
    r.touches = r.min_abs_sd <= tau;
    return r;
}

// ---------------------------------------------------------------------------
// Epsilon-connectivity (union-find over a grid bucketing; agrees with the
// brute-force pair graph exactly)
// ---------------------------------------------------------------------------

namespace detail {

// Cell key for bucketing by integer lattice coordinates.  Up to 4 real axes
// (k <= 2) the coordinates pack exactly into 64 bits, so distinct cells can
// never alias; beyond that a 64-bit mix is used (collision odds negligible).
inline uint64_t cell_key(const int64_t* coords, int d) {
    if (d <= 4) {
        bool in_range = true;
        uint64_t key = 0;
        for (int a = 0; a < d; ++a) {
            int64_t c = coords[a];
            if (c < -16000 || c > 16000) {
                in_range = false;
                break;
            }
            key |= static_cast<uint64_t>(c + 16384) << (15 * a);  // 15 bits per axis
        }
        if (in_range) return key;  // bit 63 clear: exact, never aliases
    }
    uint64_t h = 1469598103934665603ULL;
    for (int a = 0; a < d; ++a)
        h ^= static_cast<uint64_t>(coords[a]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h | (1ULL << 63);  // disjoint from the packed range
}

class UnionFind {
public:
    explicit UnionFind(int64_t n) : parent_(static_cast<size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), int64_t{0});
    }
    int64_t find(int64_t x) {
        while (parent_[static_cast<size_t>(x)] != x) {
            parent_[static_cast<size_t>(x)] = parent_[static_cast<size_t>(parent_[static_cast<size_t>(x)])];
            x = parent_[static_cast<size_t>(x)];
        }
        return x;
    }
    bool unite(int64_t a, int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (a > b) std::swap(a, b);
        parent_[static_cast<size_t>(b)] = a;
        return true;
    }

private:
    std::vector<int64_t> parent_;
};

}  // namespace detail

struct ConnectivityReport {
    bool connected = false;
    int64_t components = 0;
};

inline ConnectivityReport is_eps_connected(const CompactCloud& cloud, double eps) {
    if (cloud.empty()) throw InvalidInputError("connectivity of an empty cloud");
    if (!(eps > 0)) throw InvalidInputError("connectivity epsilon must be positive");
    const int64_t n = cloud.size();
    const int d = cloud.real_dims();
    const double* pts = cloud.raw();

    // Cell side eps/sqrt(d): a cell's diagonal is exactly eps, so same-cell
    // points are always eps-neighbours and can be united wholesale.
    const double side = eps / std::sqrt(static_cast<double>(d));

    auto cell_coord = [&](int64_t i, int axis) {
        return static_cast<int64_t>(std::floor(pts[i * d + axis] / side));
    };

    auto key_of = [&](int64_t i) {
        std::array<int64_t, 2 * kMaxDim> c{};
        for (int a = 0; a < d; ++a) c[static_cast<size_t>(a)] = cell_coord(i, a);
        return detail::cell_key(c.data(), d);
    };

    // Bucket points by cell.
    std::unordered_map<uint64_t, std::vector<int64_t>> cells;
    cells.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) cells[key_of(i)].push_back(i);

    detail::UnionFind uf(n);
    for (auto& [key, members] : cells)
        for (size_t j = 1; j < members.size(); ++j) uf.unite(members[0], members[j]);

    // Neighbour cells with gap possibly <= eps: offsets o with
    // sum_a max(|o_a|-1, 0)^2 <= d.  Enumerate once per dimension count.
    std::vector<std::vector<int>> offsets;
    {
        int reach = static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))) + 1;
        std::vector<int> cur(static_cast<size_t>(d), -reach);
        while (true) {
            int s = 0;
            for (int v : cur) {
                int g = std::abs(v) > 1 ? std::abs(v) - 1 : 0;
                s += g * g;
            }
            bool nonzero = false, positive_lead = false;
            for (int v : cur)
                if (v != 0) {
                    nonzero = true;
                    positive_lead = v > 0;
                    break;
                }
            if (s <= d && nonzero && positive_lead) offsets.push_back(cur);  // forward half
            int a = 0;
            for (; a < d; ++a) {
                if (cur[static_cast<size_t>(a)] < reach) {
                    ++cur[static_cast<size_t>(a)];
                    break;
                }
                cur[static_cast<size_t>(a)] = -reach;
            }
            if (a == d) break;
        }
    }

    auto shifted_key = [&](int64_t i, const std::vector<int>& off) {
        std::array<int64_t, 2 * kMaxDim> c{};
        for (int a = 0; a < d; ++a)
            c[static_cast<size_t>(a)] = cell_coord(i, a) + off[static_cast<size_t>(a)];
        return detail::cell_key(c.data(), d);
    };

    const double eps_sq = eps * eps;
    auto close = [&](int64_t a, int64_t b) {
        double s = 0;
        for (int x = 0; x < d; ++x) {
            double t = pts[a * d + x] - pts[b * d + x];
            s += t * t;
        }
        return s <= eps_sq;
    };

    for (auto& [key, members] : cells) {
        for (const auto& off : offsets) {
            auto it = cells.find(shifted_key(members[0], off));
            if (it == cells.end()) continue;
            auto& other = it->second;
            if (uf.find(members[0]) == uf.find(other[0])) continue;
            bool linked = false;
            for (int64_t a : members) {
                for (int64_t b : other)
                    if (close(a, b)) {
                        uf.unite(a, b);
                        linked = true;
                        break;
                    }
                if (linked) break;
            }
        }
    }

    std::unordered_set<int64_t> roots;
    for (int64_t i = 0; i < n; ++i) roots.insert(uf.find(i));
    return {roots.size() == 1, static_cast<int64_t>(roots.size())};
}

// ---------------------------------------------------------------------------
// Images and invariance defect
// ---------------------------------------------------------------------------

// Apply f to every point.  Resolution is inflated by (1 + max Jacobian norm),
// a deliberately conservative Lipschitz bound for the transported net.
template <class MapT>
CompactCloud image_cloud(const MapT& f, const CompactCloud& cloud) {
    CompactCloud out(cloud.k, cloud.resolution);
    out.data.resize(cloud.data.size());
    const int64_t n = cloud.size();
    std::vector<double> jac_norm(static_cast<size_t>(std::max<int64_t>(n, 1)), 0.0);
    std::atomic<int64_t> bad{-1};
    JacobianTable jt(f);

    parallel_for(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            CVec p = cloud.point(i);
            CVec q = evaluate(f, p);
            if (!q.finite()) {
                int64_t expect = -1;
                bad.compare_exchange_strong(expect, i);
                q = CVec::zero(cloud.k);
            } else {
                jac_norm[static_cast<size_t>(i)] = operator_norm(jt.at(p));
            }
            out.set_point(i, q);
        }
    });

    if (bad.load() >= 0)
        throw EscapeError("image_cloud: non-finite image at point index " +
                          std::to_string(bad.load()));
    double lmax = 0;
    for (int64_t i = 0; i < n; ++i) lmax = std::max(lmax, jac_norm[static_cast<size_t>(i)]);
    out.resolution = cloud.resolution * (1.0 + lmax);
    return out;
}

// Raw transport without resolution bookkeeping; used inside iteration loops.
template <class MapT>
void transform_in_place(const MapT& f, CompactCloud& cloud) {
    const int64_t n = cloud.size();
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) cloud.set_point(i, evaluate(f, cloud.point(i)));
    });
}

// Directed distance from f(C) to C: zero (up to resolution) iff the cloud is
// forward invariant at its own scale.
template <class MapT>
DirectedHausdorff forward_invariance_defect(const MapT& f, const CompactCloud& cloud,
                                            const KdTree* index = nullptr) {
    CompactCloud img(cloud.k, cloud.resolution);
    img.data.resize(cloud.data.size());
    const int64_t n = cloud.size();
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) img.set_point(i, evaluate(f, cloud.point(i)));
    });
    if (index) return directed_hausdorff(img, cloud, *index);
    return directed_hausdorff(img, cloud);
}

// ---------------------------------------------------------------------------
// Deterministic lattice sampling of domain shapes
// ---------------------------------------------------------------------------

struct SampleOptions {
    bool surface_only = false;
    int64_t budget = kDefaultSampleBudget;
};

// Solid bodies: an axis-aligned lattice (step 2*spacing/sqrt(d), anchored at
// the center so the center itself is a sample) restricted to the closed body,
// with the just-outside shell projected onto the boundary.  Covering radius
// of the body is <= spacing by construction.  Surface mode keeps only the
// shell around the boundary, projected onto it.
inline CompactCloud sample_domain(const DomainShape& shape, double spacing,
                                  const SampleOptions& opts = {}) {
    if (!(spacing > 0)) throw InvalidInputError("sample spacing must be positive");

    if (shape.kind == DomainShape::Kind::Scaled) {
        CompactCloud base = sample_domain(*shape.base, spacing / shape.factor, opts);
        CompactCloud out(shape.k, spacing);
        out.data.reserve(base.data.size());
        for (cplx v : base.data) out.data.push_back(shape.factor * v);
        return out;
    }

    const int k = shape.k;
    const int d = 2 * k;
    const double h = 2.0 * spacing / std::sqrt(static_cast<double>(d));
    const double shell = 0.5 * h * std::sqrt(static_cast<double>(d));  // = spacing

    std::array<int64_t, 2 * kMaxDim> steps{};
    double expected = 1;
    for (int a = 0; a < k; ++a) {
        int64_t m = static_cast<int64_t>(std::ceil((shape.half_width(a) + shell) / h));
        steps[static_cast<size_t>(2 * a)] = m;
        steps[static_cast<size_t>(2 * a + 1)] = m;
        expected *= static_cast<double>(2 * m + 1) * (2 * m + 1);
    }
    if (expected > 4.0e9 || expected > 64.0 * static_cast<double>(opts.budget))
        throw BudgetError("sample_domain: lattice of ~" + std::to_string(expected) +
                          " cells exceeds the point budget (" + std::to_string(opts.budget) +
                          "); increase spacing");

    const CVec c = shape.effective_center();
    CompactCloud out(k, spacing);

    std::array<int64_t, 2 * kMaxDim> idx{};
    for (int a = 0; a < d; ++a) idx[static_cast<size_t>(a)] = -steps[static_cast<size_t>(a)];
    while (true) {
        CVec p(k);
        for (int a = 0; a < k; ++a)
            p[a] = c[a] + cplx(h * static_cast<double>(idx[static_cast<size_t>(2 * a)]),
                               h * static_cast<double>(idx[static_cast<size_t>(2 * a + 1)]));
        double sd = shape.signed_distance(p);
        if (opts.surface_only) {
            if (std::abs(sd) <= shell) out.append(shape.project_to_boundary(p));
        } else {
            if (sd <= 0)
                out.append(p);
            else if (sd <= shell)
                out.append(shape.project_to_boundary(p));
        }
        if (out.size() > opts.budget)
            throw BudgetError("sample_domain: point budget " + std::to_string(opts.budget) +
                              " exceeded; increase spacing");
        int a = 0;
        for (; a < d; ++a) {
            if (idx[static_cast<size_t>(a)] < steps[static_cast<size_t>(a)]) {
                ++idx[static_cast<size_t>(a)];
                break;
            }
            idx[static_cast<size_t>(a)] = -steps[static_cast<size_t>(a)];
        }
        if (a == d) break;
    }
    if (out.empty()) throw ComputationError("sample_domain produced an empty cloud");
    return out;
}

// ---------------------------------------------------------------------------
// Cloud utilities
// ---------------------------------------------------------------------------

// Grid deduplication, used to keep unions of overlapping clouds from
// ballooning.  One representative per cell, chosen canonically (smallest
// euclidean norm, ties broken coordinate-wise) so the survivor set does not
// depend on input order and an exact origin sample always survives.
inline CompactCloud dedup_cloud(const CompactCloud& cloud, double cell) {
    if (!(cell > 0)) return cloud;
    const int d = cloud.real_dims();
    const double* pts = cloud.raw();

    auto better = [&](int64_t a, int64_t b) {  // is a a better representative than b
        double na = 0, nb = 0;
        for (int j = 0; j < d; ++j) {
            na += pts[a * d + j] * pts[a * d + j];
            nb += pts[b * d + j] * pts[b * d + j];
        }
        if (na != nb) return na < nb;
        for (int j = 0; j < d; ++j)
            if (pts[a * d + j] != pts[b * d + j]) return pts[a * d + j] < pts[b * d + j];
        return false;
    };

    std::unordered_map<uint64_t, int64_t> best;
    best.reserve(static_cast<size_t>(cloud.size()));
    std::vector<uint64_t> order;  // first-seen cell order keeps the output stable
    std::array<int64_t, 2 * kMaxDim> coords{};
    for (int64_t i = 0; i < cloud.size(); ++i) {
        for (int a = 0; a < d; ++a)
            coords[static_cast<size_t>(a)] =
                static_cast<int64_t>(std::floor(pts[i * d + a] / cell));
        uint64_t key = detail::cell_key(coords.data(), d);
        auto [it, fresh] = best.emplace(key, i);
        if (fresh)
            order.push_back(key);
        else if (better(i, it->second))
            it->second = i;
    }
    CompactCloud out(cloud.k, cloud.resolution);
    for (uint64_t key : order) out.append(cloud.point(best[key]));
    return out;
}

inline void union_into(CompactCloud& acc, const CompactCloud& extra) {
    if (acc.empty()) {
        acc = extra;
        return;
    }
    if (acc.k != extra.k) throw DimensionError("cloud union: dimension mismatch");
    acc.data.insert(acc.data.end(), extra.data.begin(), extra.data.end());
    acc.resolution = std::max(acc.resolution, extra.resolution);
}

// Per-sample distance to the nearest other sample.
inline std::vector<double> nn_gaps(const CompactCloud& cloud) {
    const int64_t n = cloud.size();
    std::vector<double> gap(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    if (n < 2) return gap;
    KdTree idx = build_index(cloud);
    const int dims = cloud.real_dims();
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        std::vector<int64_t> nearby;
        for (int64_t i = lo; i < hi; ++i) {
            // nearest excluding self: search a widening radius
            double r = cloud.resolution > 0 ? cloud.resolution : 1e-6;
            double best = std::numeric_limits<double>::infinity();
            for (int attempt = 0; attempt < 40; ++attempt) {
                idx.within(cloud.raw() + i * dims, r, nearby);
                for (int64_t j : nearby) {
                    if (j == i) continue;
                    double s = 0;
                    for (int a = 0; a < dims; ++a) {
                        double t = cloud.raw()[i * dims + a] - cloud.raw()[j * dims + a];
                        s += t * t;
                    }
                    best = std::min(best, std::sqrt(s));
                }
                if (best < std::numeric_limits<double>::infinity()) break;
                r *= 2;
            }
            gap[static_cast<size_t>(i)] = best;
        }
    });
    return gap;
}

// Largest nearest-neighbour gap within the cloud: an empirical read on how
// fine the net actually is after maps have distorted it.
inline double empirical_spacing(const CompactCloud& cloud) {
    if (cloud.size() < 2) return cloud.resolution;
    std::vector<double> gap = nn_gaps(cloud);
    double m = 0;
    for (double g : gap) m = std::max(m, g);
    return m;
}

}  // namespace invariantlab
