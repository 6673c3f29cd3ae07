#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "invariantlab/compact.hpp"
#include "invariantlab/escape.hpp"
#include "invariantlab/geometry.hpp"
#include "invariantlab/maps.hpp"
#include "invariantlab/rng.hpp"

namespace invariantlab {

// ---------------------------------------------------------------------------
// Construction of a forward-invariant compact set touching the boundary of a
// star-shaped domain U, for automorphisms fixing 0 with unitary-modulus
// eigenvalues.  The route: damp the map to g = f_mu (mu < 1) so 0 becomes
// attracting, pull a small body B = eps*U backwards until it exits the basin
// inside U (index n0), calibrate the body size t so the n0-th preimage just
// touches the boundary, take F_mu = g^{-n0}(solid B_t), and drive mu -> 1
// watching the Hausdorff distance between successive F_mu.
//
// Only automorphism chains are accepted: damping a chain is again a chain, so
// no holomorphic approximation step is needed, and injectivity / Runge-ness
// hold by construction.
// ---------------------------------------------------------------------------

inline std::vector<double> default_mu_schedule(int stages = 8) {
    std::vector<double> v;
    for (int j = 1; j <= stages; ++j) v.push_back(1.0 - std::pow(2.0, -j));
    return v;
}

struct BirkhoffConfig {
    DomainShape U = DomainShape::ball(CVec::zero(2), 1.0);
    std::vector<double> mu_schedule = default_mu_schedule();
    double epsilon_B = 0.1;              // seed body B = epsilon * U
    std::vector<double> epsilon_seeds;   // empty -> {eps/2, eps, 2*eps}
    double t_tol = 1e-3;                 // bisection tolerance on t
    double spacing = 0.05;               // target net density of the output
    int n0_cap = 60;                     // give up if the basin needs more steps
    double hausdorff_cauchy_tol = 0.05;  // stop when successive stages are this close
    int64_t refine_budget = 400000;      // extra pulled-back samples per stage for gap closing
    OrbitDirection direction = OrbitDirection::Forward;

    void validate() const {
        if (!(epsilon_B > 0) || !(t_tol > 0) || !(spacing > 0) || !(hausdorff_cauchy_tol > 0))
            throw InvalidInputError("config entries must be positive");
        if (refine_budget < 0) throw InvalidInputError("refine budget must be >= 0");
        if (n0_cap < 1) throw InvalidInputError("n0_cap must be at least 1");
        if (mu_schedule.empty()) throw InvalidInputError("mu schedule must not be empty");
        double prev = 0;
        for (double mu : mu_schedule) {
            if (!(mu > prev && mu < 1))
                throw InvalidInputError("mu schedule must be strictly increasing inside (0,1)");
            prev = mu;
        }
        for (double e : epsilon_seeds)
            if (!(e > 0)) throw InvalidInputError("epsilon seeds must be positive");
    }

    std::vector<double> seeds() const {
        if (!epsilon_seeds.empty()) return epsilon_seeds;
        return {epsilon_B / 2, epsilon_B, 2 * epsilon_B};
    }

    // slack under which the calibrated preimage is guaranteed to reach the
    // boundary of U
    double touch_tau() const { return std::max(t_tol * U.diameter(), 2 * spacing); }
};

// ---------------------------------------------------------------------------
// Hypothesis check
// ---------------------------------------------------------------------------

struct HypothesisReport {
    double fixed_point_error = 0;
    Spectrum spectrum;         // eigenvalues of the differential at 0 (exact for k = 2)
    double modulus_lo = 0;     // smallest / largest eigenvalue modulus (or bounds)
    double modulus_hi = 0;
    bool star_shaped = false;
    std::string runge = "by construction";       // chains are entire automorphisms
    std::string injectivity = "by construction";
};

namespace detail {

// Upper bound on the spectral radius: exact eigenvalues for k = 2, else the
// norm of A^64 taken to the 1/64 (adequate for diagonalizable linear parts).
inline double spectral_radius_bound(const CMatrix& a) {
    if (a.k == 2) {
        Spectrum s = eigenvalues_2x2(a);
        return std::max(s.modulus(0), s.modulus(1));
    }
    CMatrix p = a;
    for (int i = 0; i < 6; ++i) p = p.mul(p);
    return std::pow(operator_norm(p), 1.0 / 64.0);
}

}  // namespace detail

inline HypothesisReport check_hypotheses(const AutomorphismChain& f, const DomainShape& U) {
    if (U.k != f.k) throw DimensionError("domain dimension does not match the map");
    HypothesisReport rep;
    std::vector<std::string> bad;

    rep.fixed_point_error = sup_norm(evaluate(f, CVec::zero(f.k)));
    if (!(rep.fixed_point_error <= 1e-12))
        bad.push_back("origin is not fixed: |f(0)| = " + std::to_string(rep.fixed_point_error));

    CMatrix a = jacobian(f, CVec::zero(f.k));
    if (f.k == 2) {
        rep.spectrum = eigenvalues_2x2(a);
        rep.modulus_lo = std::min(rep.spectrum.modulus(0), rep.spectrum.modulus(1));
        rep.modulus_hi = std::max(rep.spectrum.modulus(0), rep.spectrum.modulus(1));
    } else {
        rep.modulus_hi = detail::spectral_radius_bound(a);
        rep.modulus_lo = 1.0 / detail::spectral_radius_bound(a.inverse());
    }
    if (!(rep.modulus_lo >= 1.0 - 1e-9 && rep.modulus_hi <= 1.0 + 1e-9))
        bad.push_back("differential at 0 has eigenvalue moduli in [" +
                      std::to_string(rep.modulus_lo) + ", " + std::to_string(rep.modulus_hi) +
                      "], expected all 1");

    rep.star_shaped = U.origin_centered();
    if (!rep.star_shaped) bad.push_back("domain is not an origin-centered star body");

    if (!bad.empty()) {
        std::string msg = "hypothesis check failed:";
        for (const auto& b : bad) msg += " [" + b + "]";
        throw InvalidInputError(msg);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Basin escape index and t-calibration
// ---------------------------------------------------------------------------

namespace detail {

// Boundary net of a body, spaced proportionally to its size so that the
// expanded preimages land near the configured absolute spacing.
inline CompactCloud body_shell(const DomainShape& body, double rel, double spacing) {
    SampleOptions surf;
    surf.surface_only = true;
    return sample_domain(body, std::max(spacing * rel, 1e-12), surf);
}

inline void require_finite_cloud(const CompactCloud& c, const char* who, int step) {
    for (int64_t i = 0; i < c.size(); ++i)
        if (!c.point(i).finite())
            throw EscapeError(std::string(who) + ": preimage of sample " + std::to_string(i) +
                              " is not finite at step " + std::to_string(step));
}

inline bool cloud_within(const CompactCloud& c, double cutoff) {
    for (int64_t i = 0; i < c.size(); ++i) {
        CVec p = c.point(i);
        if (!p.finite() || sup_norm(p) > cutoff) return false;
    }
    return true;
}

// The pullback stretches the seed net anisotropically -- severely so at deep
// damping stages -- leaving the image sparser than the target spacing along
// the expanded directions.  Close the gaps from the seed side: wherever a
// pulled sample sits farther than the target from its nearest neighbour,
// insert the surrounding seed-lattice points at half the local step and pull
// them back too, until the net is dense, nothing improves, or the budget is
// spent.  The resolution stamp is re-measured afterwards, so an exhausted
// budget shows up as a coarser (honest) figure, never as overstated density.
inline void refine_pullback(const AutomorphismChain& ginv, int n0, const DomainShape& body,
                            double lattice_step, CompactCloud& S, CompactCloud& F,
                            double target, int64_t budget) {
    if (budget <= 0 || S.size() < 2) return;
    const int k = S.k;
    const int64_t cap = S.size() + budget;
    std::vector<double> step(static_cast<size_t>(S.size()), lattice_step);

    auto seed_key = [k](const CVec& p) {
        uint64_t h = 1469598103934665603ull;
        for (int a = 0; a < k; ++a)
            for (double x : {p[a].real(), p[a].imag()}) {
                uint64_t bits;
                std::memcpy(&bits, &x, sizeof bits);
                h = (h ^ bits) * 1099511628211ull;
            }
        return h;
    };
    std::unordered_set<uint64_t> seen;
    seen.reserve(static_cast<size_t>(S.size()) * 2);
    for (int64_t i = 0; i < S.size(); ++i) seen.insert(seed_key(S.point(i)));

    for (int round = 0; round < 48 && F.size() < cap; ++round) {
        std::vector<double> gap = nn_gaps(F);
        CompactCloud fresh(k, S.resolution);
        std::vector<double> fresh_step;
        for (int64_t i = 0; i < F.size() && F.size() + fresh.size() < cap; ++i) {
            if (!(gap[static_cast<size_t>(i)] > target)) continue;
            double s = step[static_cast<size_t>(i)] / 2;
            if (!(s > 1e-13)) continue;
            step[static_cast<size_t>(i)] = s;
            for (int a = 0; a < 2 * k; ++a)
                for (double sign : {-1.0, 1.0}) {
                    CVec q = S.point(i);
                    q[a / 2] += (a % 2 ? cplx(0, sign * s) : cplx(sign * s, 0));
                    if (body.signed_distance(q) > 0) q = body.project_to_boundary(q);
                    if (!seen.insert(seed_key(q)).second) continue;
                    fresh.append(q);
                    fresh_step.push_back(s);
                }
        }
        if (fresh.empty()) break;
        CompactCloud img = fresh;
        for (int j = 0; j < n0; ++j) transform_in_place(ginv, img);
        // inserts live on the exact calibrated body, so a blown-up pullback
        // can only be a rounding casualty near the boundary: drop it and let
        // the re-measured resolution carry the cost
        for (int64_t i = 0; i < img.size(); ++i) {
            CVec p = img.point(i);
            if (!p.finite() || sup_norm(p) > kDefaultEscapeCutoff) continue;
            S.append(fresh.point(i));
            step.push_back(fresh_step[static_cast<size_t>(i)]);
            F.append(p);
        }
    }
}

}  // namespace detail

// Number of inverse steps after which the pulled-back body first leaves U.
inline int basin_escape_index(const AutomorphismChain& g, const DomainShape& B,
                              const DomainShape& U, const BirkhoffConfig& cfg) {
    double rho = detail::spectral_radius_bound(jacobian(g, CVec::zero(g.k)));
    if (!(rho < 1.0))
        throw InvalidInputError("basin index needs an attracting origin; spectral radius about " +
                                std::to_string(rho));
    const double rel = B.diameter() / U.diameter();
    CompactCloud cur = detail::body_shell(B, rel, cfg.spacing);
    if (!cloud_inside(U, cur, 0.0).inside)
        throw InvalidInputError("seed body is not inside the domain");

    AutomorphismChain ginv = invert_chain(g);
    std::vector<double> trail;
    for (int n = 1; n <= cfg.n0_cap + 1; ++n) {
        transform_in_place(ginv, cur);
        detail::require_finite_cloud(cur, "basin_escape_index", n);
        trail.push_back(cur.max_euclid_norm());
        if (!cloud_inside(U, cur, 0.0).inside) {
            if (n == 1)
                throw InvalidInputError(
                    "one inverse step already leaves the domain; the seed body is too large");
            return n - 1;
        }
    }
    std::string msg = "basin index exceeded the cap " + std::to_string(cfg.n0_cap) +
                      "; preimage max-norm trail:";
    for (size_t i = trail.size() > 8 ? trail.size() - 8 : 0; i < trail.size(); ++i)
        msg += " " + std::to_string(trail[i]);
    throw ComputationError(msg);
}

// Largest t (to t_tol) for which the n0-th preimage of t*B stays inside U.
inline double calibrate_t(const AutomorphismChain& g, int n0, const DomainShape& B,
                          const DomainShape& U, const BirkhoffConfig& cfg) {
    if (n0 < 1) throw InvalidInputError("calibration needs n0 >= 1");
    AutomorphismChain ginv = invert_chain(g);
    const double rel = B.diameter() / U.diameter();

    // A pullback that blows past the escape cutoff mid-chain cannot end inside
    // U: beyond the filtration region the coordinate-dominance argument makes
    // backward escape irreversible, so the bisection gets a definite "no"
    // instead of an overflow error.
    auto included = [&](double t) {
        CompactCloud shell = detail::body_shell(DomainShape::scaled(B, t), rel * t, cfg.spacing);
        for (int i = 0; i < n0; ++i) {
            transform_in_place(ginv, shell);
            if (!detail::cloud_within(shell, kDefaultEscapeCutoff)) return false;
        }
        return cloud_inside(U, shell, 0.0).inside;
    };

    if (!included(1.0))
        throw ComputationError("inclusion fails already at t=1; the basin index is inconsistent "
                               "with this sampling");
    double lo = 1.0, hi = 2.0;
    int doublings = 0;
    while (included(hi)) {
        lo = hi;
        hi *= 2;
        if (++doublings > 50)
            throw ComputationError("no exit found while growing t; the domain looks unbounded "
                                   "from inside");
    }
    while (hi - lo > cfg.t_tol) {
        double mid = 0.5 * (lo + hi);
        if (included(mid))
            lo = mid;
        else
            hi = mid;
    }
    // Inclusion is monotone in t for exact bodies (they are nested); sampling
    // can break that, which would make the bisection answer meaningless.
    if (lo - cfg.t_tol >= 1.0 && !included(lo - cfg.t_tol))
        throw ComputationError("inclusion is not monotone in t at this sampling density; "
                               "use a finer spacing");
    return lo;
}

// ---------------------------------------------------------------------------
// One damping stage
// ---------------------------------------------------------------------------

struct MuStageResult {
    double mu = 0;
    double epsilon_used = 0;   // after the automatic shrink
    int n0 = 0;
    double t_bar = 0;
    CompactCloud F;
    double defect = 0;         // directed distance from g(F) to F
    ConnectivityReport connectivity;
    bool contains_zero = false;
    TouchReport touch;
};

namespace detail {

// g must map the seed body into itself for the preimages to nest; shrink the
// body until it does.  The needed smallness is map-dependent, so probing is
// the only honest option.
inline double shrink_epsilon(const AutomorphismChain& g, const DomainShape& U, double eps) {
    for (int tries = 0; tries < 48; ++tries) {
        DomainShape B = DomainShape::scaled(U, eps);
        CompactCloud probe = sample_domain(B, std::max(eps * U.diameter() / 12.0, 1e-14));
        CompactCloud img = probe;
        transform_in_place(g, img);
        if (cloud_inside(B, img, 0.0).inside) return eps;
        eps /= 2;
    }
    throw ComputationError("could not find a seed body mapped into itself; the origin does "
                           "not look attracting at any sampled scale");
}

}  // namespace detail

inline MuStageResult forward_invariant_compact_for_mu(
    const AutomorphismChain& f, double mu, const BirkhoffConfig& cfg,
    std::optional<double> eps_override = std::nullopt,
    std::optional<int> n0_override = std::nullopt) {
    cfg.validate();
    if (!(mu > 0 && mu < 1)) throw InvalidInputError("stage needs mu inside (0,1)");

    AutomorphismChain g = scale_map(f, mu);
    MuStageResult out;
    out.mu = mu;

    double eps = detail::shrink_epsilon(g, cfg.U, eps_override.value_or(cfg.epsilon_B));
    DomainShape B = DomainShape::scaled(cfg.U, eps);
    // the basin call rejects bodies whose first preimage already leaves U;
    // treat that as "still too large" and keep halving
    int n0 = 0;
    if (n0_override) {
        n0 = *n0_override;
        if (n0 < 1) throw InvalidInputError("stage needs n0 >= 1");
    } else {
        for (;;) {
            try {
                n0 = basin_escape_index(g, B, cfg.U, cfg);
                break;
            } catch (const InvalidInputError&) {
                eps /= 2;
                if (eps < 1e-14)
                    throw ComputationError("seed body shrank away without entering the basin");
                B = DomainShape::scaled(cfg.U, eps);
            }
        }
    }
    out.epsilon_used = eps;
    out.n0 = n0;
    out.t_bar = calibrate_t(g, n0, B, cfg.U, cfg);

    // solid sample of the calibrated body, spaced so the expanded image
    // approaches cfg.spacing, then refined where the pullback stretched it
    DomainShape Bt = DomainShape::scaled(B, out.t_bar);
    double rel = Bt.diameter() / cfg.U.diameter();
    const double seed_spacing = std::max(cfg.spacing * rel, 1e-14);
    CompactCloud S = sample_domain(Bt, seed_spacing);
    CompactCloud F = S;
    AutomorphismChain ginv = invert_chain(g);
    for (int i = 0; i < n0; ++i) transform_in_place(ginv, F);
    detail::require_finite_cloud(F, "forward_invariant_compact_for_mu", n0);
    detail::refine_pullback(ginv, n0, Bt, 2.0 * seed_spacing / std::sqrt(2.0 * g.k), S, F,
                            cfg.spacing, cfg.refine_budget);
    F.resolution = std::max(cfg.spacing, empirical_spacing(F));

    out.defect = forward_invariance_defect(g, F).distance;
    out.connectivity = is_eps_connected(F, 3 * cfg.spacing);
    for (int64_t i = 0; i < F.size(); ++i)
        if (sup_norm(F.point(i)) == 0.0) out.contains_zero = true;
    out.touch = touches_boundary(cfg.U, F, cfg.touch_tau());
    out.F = std::move(F);
    return out;
}

// ---------------------------------------------------------------------------
// Limit over the damping schedule
// ---------------------------------------------------------------------------

struct MuSummary {
    double mu = 0;
    double epsilon_used = 0;
    int n0 = 0;
    double t_bar = 0;
    int64_t points = 0;
    double defect = 0;
    bool connected = false;
    bool contains_zero = false;
};

struct BirkhoffResult {
    CompactCloud K;
    std::vector<MuSummary> per_mu;
    std::vector<double> deltas;        // Hausdorff distance between successive stages
    bool converged = false;            // Cauchy tolerance reached
    bool schedule_exhausted = false;
    double k_defect = 0;               // invariance defect of K under the undamped map
    bool contains_zero = false;
    TouchReport touch;
    ConnectivityReport connectivity;
    OrbitDirection direction = OrbitDirection::Forward;
    std::vector<std::string> notes;    // stages or seed variants that had to be dropped
};

namespace detail {

inline MuSummary summarize(const MuStageResult& s) {
    MuSummary m;
    m.mu = s.mu;
    m.epsilon_used = s.epsilon_used;
    m.n0 = s.n0;
    m.t_bar = s.t_bar;
    m.points = s.F.size();
    m.defect = s.defect;
    m.connected = s.connectivity.connected;
    m.contains_zero = s.contains_zero;
    return m;
}

}  // namespace detail

inline BirkhoffResult birkhoff_limit(const AutomorphismChain& f, const BirkhoffConfig& cfg) {
    cfg.validate();
    check_hypotheses(f, cfg.U);
    // the backward variant (damping schedules above 1) is the forward pipeline
    // on the inverse map
    AutomorphismChain iter =
        (cfg.direction == OrbitDirection::Backward) ? invert_chain(f) : f;

    BirkhoffResult res;
    res.direction = cfg.direction;

    std::optional<MuStageResult> last;
    bool stopped_early = false;
    for (double mu : cfg.mu_schedule) {
        MuStageResult cur;
        try {
            cur = forward_invariant_compact_for_mu(iter, mu, cfg);
        } catch (const ComputationError& e) {
            // a later stage becoming infeasible (basin cap, budget) is a stop,
            // not a total failure -- provided an earlier stage succeeded
            if (!last) throw;
            res.notes.push_back("schedule stopped before mu=" + std::to_string(mu) + ": " +
                                e.what());
            stopped_early = true;
            break;
        }
        res.per_mu.push_back(detail::summarize(cur));
        if (last) {
            double delta = hausdorff_distance(last->F, cur.F).distance;
            res.deltas.push_back(delta);
            if (delta <= cfg.hausdorff_cauchy_tol) {
                last = std::move(cur);
                res.converged = true;
                break;
            }
        }
        last = std::move(cur);
    }
    res.schedule_exhausted = !res.converged && !stopped_early;
    const double mu_star = last->mu;

    // Maximality is approximated by a union over seed bodies and, for each,
    // both adjacent calibrations: the basin index n0 (the base run) and n0-1,
    // the last two indices at which the t=1 inclusion still holds.
    CompactCloud K = last->F;
    for (double eps : cfg.seeds()) {
        try {
            std::optional<MuStageResult> extra;
            if (!(eps == cfg.epsilon_B))
                extra = forward_invariant_compact_for_mu(iter, mu_star, cfg, eps);
            const MuStageResult& base = extra ? *extra : *last;
            if (extra) union_into(K, extra->F);
            if (base.n0 >= 2) {
                MuStageResult adj = forward_invariant_compact_for_mu(
                    iter, mu_star, cfg, base.epsilon_used, base.n0 - 1);
                union_into(K, adj.F);
            }
        } catch (const ComputationError& e) {
            res.notes.push_back("seed eps=" + std::to_string(eps) + " dropped: " + e.what());
        }
    }
    K = dedup_cloud(K, cfg.spacing / 2);
    // deduplication relocates cell-mates, so the union's net is only as fine
    // as a fresh measurement says, not as fine as the stage stamps promised
    K.resolution = std::max(cfg.spacing, empirical_spacing(K));

    res.k_defect = forward_invariance_defect(iter, K).distance;
    for (int64_t i = 0; i < K.size(); ++i)
        if (sup_norm(K.point(i)) == 0.0) res.contains_zero = true;
    res.touch = touches_boundary(cfg.U, K, cfg.touch_tau());
    res.connectivity = is_eps_connected(K, 3 * cfg.spacing);
    res.K = std::move(K);
    return res;
}

// ---------------------------------------------------------------------------
// Cesaro average toward the linearization
// ---------------------------------------------------------------------------

struct LinearizationReport {
    std::vector<CVec> h;       // average at 2n, one value per sample
    double cesaro_gap = 0;     // max sample-wise distance between the n and 2n averages
    double h0_norm = 0;        // norm of the average at the origin
    double jac_gap = 0;        // ||Jac h(0) - I|| by central differences
    double residual = 0;       // max over samples of ||h(f(z)) - A h(z)||
};

namespace detail {

// Cesaro averages (1/m) sum_{j<m} A^{-j} f^j(z) at m = n and m = 2n.
inline std::pair<CVec, CVec> cesaro_pair(const AnyMap& f, const CMatrix& ainv, const CVec& z,
                                         int n, double cutoff, int64_t sample_id) {
    CVec orbit = z;
    CMatrix m = CMatrix::identity(z.k);
    CVec sum = CVec::zero(z.k);
    CVec at_n = CVec::zero(z.k);
    for (int j = 0; j < 2 * n; ++j) {
        if (!orbit.finite() || sup_norm(orbit) > cutoff)
            throw EscapeError("orbit of sample " + std::to_string(sample_id) +
                              " escaped at step " + std::to_string(j));
        sum += m.apply(orbit);
        if (j + 1 == n) {
            at_n = sum;
            at_n *= 1.0 / n;
        }
        orbit = evaluate(f, orbit);
        m = m.mul(ainv);
    }
    sum *= 1.0 / (2 * n);
    return {at_n, sum};
}

}  // namespace detail

inline LinearizationReport linearization_average(const AnyMap& f, const CMatrix& A,
                                                 const CompactCloud& samples, int n,
                                                 double escape_cutoff = kDefaultEscapeCutoff) {
    if (n < 1) throw InvalidInputError("average length must be >= 1");
    if (std::abs(A.determinant()) == 0.0)
        throw InvalidInputError("linear part must be invertible");
    if (samples.empty()) throw InvalidInputError("need at least one sample");
    const int k = samples.k;
    CMatrix ainv = A.inverse();

    LinearizationReport rep;
    rep.h.reserve(static_cast<size_t>(samples.size()));
    for (int64_t i = 0; i < samples.size(); ++i) {
        auto [hn, h2n] = detail::cesaro_pair(f, ainv, samples.point(i), n, escape_cutoff, i);
        rep.cesaro_gap = std::max(rep.cesaro_gap, dist(hn, h2n));
        rep.h.push_back(h2n);
    }

    auto avg = [&](const CVec& z) {
        return detail::cesaro_pair(f, ainv, z, n, escape_cutoff, -1).second;
    };
    rep.h0_norm = avg(CVec::zero(k)).norm();

    // one-sided scale for the finite-difference step
    double r = samples.max_euclid_norm();
    double step = (r > 0 ? r : 1.0) * 1e-4;
    CMatrix jac(k);
    for (int col = 0; col < k; ++col) {
        CVec plus = CVec::zero(k), minus = CVec::zero(k);
        plus[col] += step;
        minus[col] -= step;
        CVec d = avg(plus) - avg(minus);
        for (int row = 0; row < k; ++row) jac(row, col) = d[row] / (2 * step);
    }
    for (int i = 0; i < k; ++i) jac(i, i) -= 1.0;
    rep.jac_gap = operator_norm(jac);

    for (int64_t i = 0; i < samples.size(); ++i) {
        CVec w = evaluate(f, samples.point(i));
        CVec hw = avg(w);
        CVec want = A.apply(rep.h[static_cast<size_t>(i)]);
        rep.residual = std::max(rep.residual, dist(hw, want));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Commuting maps share their invariant compact
// ---------------------------------------------------------------------------

struct SharedInvariantReport {
    HausdorffReport distance;             // between the two compacts
    DirectedHausdorff g_defect_on_kf;     // directed distance from g(K_f) to K_f
    DirectedHausdorff f_defect_on_kg;
    double commutation_error = 0;
};

inline SharedInvariantReport shared_invariant_check(const AutomorphismChain& f,
                                                    const AutomorphismChain& g,
                                                    const CompactCloud& Kf,
                                                    const CompactCloud& Kg) {
    if (f.k != g.k) throw DimensionError("maps act on different dimensions");
    SharedInvariantReport rep;
    Rng rng(0x636f6d6dULL);
    for (int i = 0; i < 64; ++i) {
        CVec p = rng.in_polydisc(f.k, 1.0);
        CVec fg = evaluate(f, evaluate(g, p));
        CVec gf = evaluate(g, evaluate(f, p));
        double err = dist(fg, gf);
        rep.commutation_error = std::max(rep.commutation_error, err);
        if (err > 1e-10) {
            std::string w = "maps do not commute at (";
            for (int j = 0; j < p.k; ++j)
                w += (j ? ", " : "") + std::to_string(p[j].real()) +
                     (p[j].imag() < 0 ? "" : "+") + std::to_string(p[j].imag()) + "i";
            throw InvalidInputError(w + "); |fg - gf| = " + std::to_string(err));
        }
    }
    rep.distance = hausdorff_distance(Kf, Kg);
    rep.g_defect_on_kf = forward_invariance_defect(g, Kf);
    rep.f_defect_on_kg = forward_invariance_defect(f, Kg);
    return rep;
}

}  // namespace invariantlab
