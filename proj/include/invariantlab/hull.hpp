#pragma once

#include <functional>
#include <string>
#include <vector>

#include "invariantlab/compact.hpp"
#include "invariantlab/escape.hpp"
#include "invariantlab/maps.hpp"
#include "invariantlab/rng.hpp"

namespace invariantlab {

// ---------------------------------------------------------------------------
// Degree-bounded outer test for the polynomial hull of a point cloud.
//
// A point z is *excluded* from the hull of K when some polynomial p satisfies
// |p(z)| > sup_K |p|.  With a finite family of test polynomials this is a
// one-sided certificate: "excluded" is trustworthy (up to K's resolution),
// "candidate" only means no tested polynomial separated z.
//
// The family consists of
//   * every monomial of total degree 1..d, and
//   * num_random random streams; stream j draws one unit-modulus phase per
//     monomial (depending only on the stream and the exponent), and
//     contributes its truncations to total degree 1, 2, .., d.
// Keeping every truncation makes the family nested in d, so the score is
// exactly monotone when the degree bound grows.
//
// All coefficients are normalized per monomial by s^{-|alpha|}, where s is
// the largest Euclidean norm over K.  This keeps sups O(1) regardless of the
// cloud's scale and makes verdicts invariant under scaling K and z jointly
// (exactly so when the factor is a power of two).
// ---------------------------------------------------------------------------

struct PolyBasisSpec {
    int max_degree = 6;
    int num_random = 64;
    uint64_t seed = 0;

    void validate() const {
        if (max_degree < 1) throw InvalidInputError("polynomial degree bound must be >= 1");
        if (num_random < 1) throw InvalidInputError("need at least one random stream");
    }
};

enum class HullVerdict { Candidate, Excluded };

struct HullTestReport {
    double score = 0;       // max over tested p of |p(z)| / sup_K |p|
    double tau = 0;         // slack used for the verdict
    HullVerdict verdict = HullVerdict::Candidate;
    int worst_poly = -1;    // basis index attaining the score (-1: nothing scored)
    std::string worst_id;   // human-readable description of that polynomial
    int skipped = 0;        // basis members with sup_K below the degeneracy cutoff
};

namespace detail {

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One unit-modulus coefficient per (seed, stream, exponent); independent of
// the degree bound so truncations share their lower-order terms.
inline cplx stream_phase(uint64_t seed, int stream, const std::array<uint8_t, kMaxDim>& exp) {
    uint64_t key = 0;
    for (uint8_t e : exp) key = key * 64 + e;
    Rng rng(mix64(mix64(seed ^ 0x68756c6cULL) + static_cast<uint64_t>(stream + 1)) ^ mix64(key));
    return rng.unit_phase();
}

inline void enumerate_exponents(int k, int max_total,
                                std::vector<std::array<uint8_t, kMaxDim>>& out) {
    std::array<uint8_t, kMaxDim> cur{};
    // odometer over exponent vectors with total degree <= max_total, by degree
    for (int total = 0; total <= max_total; ++total) {
        std::function<void(int, int)> rec = [&](int axis, int left) {
            if (axis == k - 1) {
                cur[static_cast<size_t>(axis)] = static_cast<uint8_t>(left);
                out.push_back(cur);
                return;
            }
            for (int e = left; e >= 0; --e) {
                cur[static_cast<size_t>(axis)] = static_cast<uint8_t>(e);
                rec(axis + 1, left - e);
            }
        };
        rec(0, total);
    }
}

}  // namespace detail

inline constexpr double kHullDegenerateSup = 1e-14;

class HullTester {
  public:
    HullTester(const CompactCloud& K, const PolyBasisSpec& spec) : spec_(spec) {
        spec.validate();
        if (K.size() == 0) throw InvalidInputError("hull test needs a nonempty cloud");
        k_ = K.k;
        scale_ = K.max_euclid_norm();
        if (!(scale_ > 0)) scale_ = 1.0;
        tau_ = 2.0 * spec.max_degree * K.resolution / scale_;

        std::vector<double> spow(static_cast<size_t>(spec.max_degree) + 1, 1.0);
        for (int e = 1; e <= spec.max_degree; ++e)
            spow[static_cast<size_t>(e)] = spow[static_cast<size_t>(e) - 1] * scale_;

        std::vector<std::array<uint8_t, kMaxDim>> exps;
        detail::enumerate_exponents(k_, spec.max_degree, exps);

        // deterministic part: each monomial of degree 1..d on its own
        for (const auto& e : exps) {
            int deg = 0;
            for (uint8_t x : e) deg += x;
            if (deg == 0) continue;
            Polynomial p{k_, {Monomial{e, cplx(1.0 / spow[static_cast<size_t>(deg)], 0)}}};
            polys_.push_back(std::move(p));
            ids_.push_back(monomial_id(e));
        }

        // random streams: the constant term participates, and every truncation
        // by total degree is kept so the basis is nested in max_degree
        for (int j = 0; j < spec.num_random; ++j) {
            Polynomial acc = Polynomial::zero(k_);
            int done = 0;
            for (int deg = 0; deg <= spec.max_degree; ++deg) {
                while (done < static_cast<int>(exps.size())) {
                    const auto& e = exps[static_cast<size_t>(done)];
                    int d = 0;
                    for (uint8_t x : e) d += x;
                    if (d > deg) break;
                    acc.terms.push_back(Monomial{
                        e, detail::stream_phase(spec.seed, j, e) / spow[static_cast<size_t>(d)]});
                    ++done;
                }
                if (deg == 0) continue;
                Polynomial snap = acc;
                snap.normalize();
                polys_.push_back(std::move(snap));
                ids_.push_back("random[" + std::to_string(j) + "] deg<=" + std::to_string(deg));
            }
        }

        // sup over K, once per polynomial, shared by every later score call
        sup_.assign(polys_.size(), 0.0);
        parallel_for(static_cast<int64_t>(polys_.size()), [&](int64_t lo, int64_t hi) {
            for (int64_t b = lo; b < hi; ++b) {
                double m = 0;
                for (int64_t i = 0; i < K.size(); ++i)
                    m = std::max(m, std::abs(polys_[static_cast<size_t>(b)].eval(K.point(i))));
                sup_[static_cast<size_t>(b)] = m;
            }
        });
        for (double s : sup_)
            if (s < kHullDegenerateSup) ++skipped_;
    }

    HullTestReport score(const CVec& z) const { return score(z, tau_); }

    HullTestReport score(const CVec& z, double tau) const {
        if (z.k != k_) throw DimensionError("point dimension does not match the cloud");
        HullTestReport r;
        r.tau = tau;
        r.skipped = skipped_;
        for (size_t b = 0; b < polys_.size(); ++b) {
            if (sup_[b] < kHullDegenerateSup) continue;
            double ratio = std::abs(polys_[b].eval(z)) / sup_[b];
            if (ratio > r.score || r.worst_poly < 0) {
                r.score = ratio;
                r.worst_poly = static_cast<int>(b);
            }
        }
        if (r.worst_poly >= 0) r.worst_id = ids_[static_cast<size_t>(r.worst_poly)];
        r.verdict = (r.score > 1.0 + tau) ? HullVerdict::Excluded : HullVerdict::Candidate;
        return r;
    }

    double default_tau() const { return tau_; }
    int skipped() const { return skipped_; }
    int basis_size() const { return static_cast<int>(polys_.size()); }
    const std::string& id(int i) const { return ids_.at(static_cast<size_t>(i)); }
    const Polynomial& poly(int i) const { return polys_.at(static_cast<size_t>(i)); }

  private:
    static std::string monomial_id(const std::array<uint8_t, kMaxDim>& e) {
        std::string s;
        for (size_t a = 0; a < e.size(); ++a) {
            if (e[a] == 0) continue;
            if (!s.empty()) s += "*";
            s += "z" + std::to_string(a);
            if (e[a] > 1) s += "^" + std::to_string(static_cast<int>(e[a]));
        }
        return s.empty() ? "1" : s;
    }

    PolyBasisSpec spec_;
    int k_ = 2;
    double scale_ = 1;
    double tau_ = 0;
    std::vector<Polynomial> polys_;
    std::vector<std::string> ids_;
    std::vector<double> sup_;
    int skipped_ = 0;
};

inline HullTestReport hull_membership_score(const CVec& z, const CompactCloud& K,
                                            const PolyBasisSpec& spec) {
    return HullTester(K, spec).score(z);
}

inline HullTestReport hull_membership_score(const CVec& z, const CompactCloud& K,
                                            const PolyBasisSpec& spec, double tau) {
    return HullTester(K, spec).score(z, tau);
}

namespace detail {

inline void require_probe_covers(const GridSpec& probe, const CompactCloud& K) {
    double pad = std::max(K.resolution, 1e-12);
    for (int64_t i = 0; i < K.size(); ++i) {
        const double* raw = K.raw() + static_cast<size_t>(i) * K.real_dims();
        for (int a = 0; a < 2 * K.k; ++a) {
            size_t s = static_cast<size_t>(a);
            double x = raw[a];
            bool ok = probe.sliced[s] ? std::abs(x - probe.slice_value[s]) <= pad
                                      : (x >= probe.lo[s] - pad && x <= probe.hi[s] + pad);
            if (!ok)
                throw InvalidInputError("probe box does not contain the cloud (point " +
                                        std::to_string(i) + ", axis " + std::to_string(a) + ")");
        }
    }
}

}  // namespace detail

// All probe samples the polynomial family cannot exclude: an outer
// approximation (at the probe's resolution) of the hull of K.
inline CompactCloud outer_hull_cloud(const CompactCloud& K, const GridSpec& probe,
                                     const PolyBasisSpec& spec, double tau) {
    probe.validate();
    detail::require_probe_covers(probe, K);
    HullTester tester(K, spec);

    const int64_t n = probe.total();
    const int workers = worker_count();
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<CompactCloud> partial(static_cast<size_t>(std::max(workers, 1)),
                                      CompactCloud(K.k, 0));
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        CompactCloud& mine = partial[static_cast<size_t>(lo / std::max<int64_t>(chunk, 1))];
        for (int64_t i = lo; i < hi; ++i) {
            CVec z = probe.sample(i);
            if (tester.score(z, tau).verdict == HullVerdict::Candidate) mine.append(z);
        }
    });

    CompactCloud out(K.k, probe.cell_diagonal());
    for (const auto& part : partial)
        out.data.insert(out.data.end(), part.data.begin(), part.data.end());
    if (out.size() == 0)
        throw ComputationError("no probe point survived the hull test; tau is inconsistent "
                               "with the cloud resolution");
    return out;
}

struct HullInvarianceReport {
    int64_t candidates = 0;   // probe points with verdict candidate
    int64_t violations = 0;   // candidate -> excluded with a jump beyond slack
    double worst_jump = 0;    // max of score(f(z)) - score(z) over candidates
    double defect = 0;        // forward invariance defect of C under f
    double tau = 0;
    double slack = 0;
};

// Statistical check that the candidate hull of an f-invariant cloud is itself
// f-invariant: images of candidates must not become excluded by more than the
// discretization slack.
inline HullInvarianceReport hull_invariance_check(const AnyMap& f, const CompactCloud& C,
                                                  const GridSpec& probe, const PolyBasisSpec& spec,
                                                  double tau, double slack = -1) {
    probe.validate();
    HullTester tester(C, spec);
    HullInvarianceReport rep;
    rep.tau = tau;
    rep.slack = (slack < 0) ? tester.default_tau() : slack;
    rep.defect = forward_invariance_defect(f, C).distance;
    if (rep.defect > C.resolution + 1e-12)
        throw InvalidInputError("hull invariance check needs an f-invariant cloud; defect " +
                                std::to_string(rep.defect) + " exceeds resolution " +
                                std::to_string(C.resolution));

    const int64_t n = probe.total();
    const int workers = worker_count();
    const int64_t chunk = (n + workers - 1) / workers;
    struct Acc {
        int64_t candidates = 0, violations = 0;
        double worst = 0;
    };
    std::vector<Acc> partial(static_cast<size_t>(std::max(workers, 1)));
    parallel_for(n, [&](int64_t lo, int64_t hi) {
        Acc& mine = partial[static_cast<size_t>(lo / std::max<int64_t>(chunk, 1))];
        for (int64_t i = lo; i < hi; ++i) {
            CVec z = probe.sample(i);
            HullTestReport rz = tester.score(z, tau);
            if (rz.verdict != HullVerdict::Candidate) continue;
            ++mine.candidates;
            CVec w = evaluate(f, z);
            if (!w.finite())
                throw EscapeError("image of probe sample " + std::to_string(i) +
                                  " is not finite");
            HullTestReport rw = tester.score(w, tau);
            double jump = rw.score - rz.score;
            mine.worst = std::max(mine.worst, jump);
            if (rw.verdict == HullVerdict::Excluded && jump > rep.slack) ++mine.violations;
        }
    });
    for (const Acc& a : partial) {
        rep.candidates += a.candidates;
        rep.violations += a.violations;
        rep.worst_jump = std::max(rep.worst_jump, a.worst);
    }
    return rep;
}

}  // namespace invariantlab
