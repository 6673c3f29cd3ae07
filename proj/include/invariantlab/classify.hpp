#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "invariantlab/compact.hpp"
#include "invariantlab/escape.hpp"
#include "invariantlab/geometry.hpp"
#include "invariantlab/maps.hpp"
#include "invariantlab/parallel.hpp"

namespace invariantlab {

// ---------------------------------------------------------------------------
// Recurrence detection and the rank trichotomy.  A point is recurrent (at
// tolerance delta, horizon nmax) when its orbit returns delta-close at least
// twice.  The subsequential limit map h of the return iterates is surrogated
// by the single best return gap; its numerical rank splits the dynamics into
// attracting / full-rank rotation / intermediate-rank cases.
// ---------------------------------------------------------------------------

struct RecurrenceRecord {
    CVec p0;
    std::vector<int> return_times;  // increasing n with |f^n(p0) - p0| <= delta
    std::vector<int> gaps;          // consecutive differences (first entry = first return)
    double delta = 0;

    void validate() const {
        if (!(delta > 0)) throw InvalidInputError("recurrence delta must be positive");
        int prev = 0;
        for (int n : return_times) {
            if (n <= prev) throw InvalidInputError("return times must be strictly increasing");
            prev = n;
        }
    }

    static RecurrenceRecord make(CVec p, std::vector<int> times, double delta) {
        RecurrenceRecord r;
        r.p0 = std::move(p);
        r.return_times = std::move(times);
        r.delta = delta;
        r.validate();
        int prev = 0;
        for (int n : r.return_times) {
            r.gaps.push_back(n - prev);
            prev = n;
        }
        return r;
    }
};

struct RecurrenceScan {
    std::vector<RecurrenceRecord> records;
    int64_t escaped = 0;   // samples dropped because the orbit left the cutoff
    int64_t scanned = 0;
};

inline RecurrenceScan detect_recurrent_points(const AnyMap& f, const CompactCloud& W, int nmax,
                                              double delta,
                                              double escape_cutoff = kDefaultEscapeCutoff) {
    if (W.empty()) throw InvalidInputError("recurrence scan needs a non-empty cloud");
    if (nmax < 2) throw InvalidInputError("recurrence scan needs nmax >= 2");
    if (!(delta > 0)) throw InvalidInputError("recurrence delta must be positive");

    const int64_t n = W.size();
    const int64_t chunk = (n + worker_count() - 1) / worker_count();
    struct Slot {
        std::vector<RecurrenceRecord> records;
        int64_t escaped = 0;
    };
    std::vector<Slot> slots(static_cast<size_t>((n + chunk - 1) / chunk));

    parallel_for(n, [&](int64_t lo, int64_t hi) {
        Slot& slot = slots[static_cast<size_t>(lo / chunk)];
        for (int64_t i = lo; i < hi; ++i) {
            CVec p0 = W.point(i);
            CVec z = p0;
            std::vector<int> times;
            bool escaped = false;
            for (int step = 1; step <= nmax; ++step) {
                z = evaluate(f, z);
                if (!z.finite() || sup_norm(z) > escape_cutoff) {
                    escaped = true;
                    break;
                }
                if (dist(z, p0) <= delta) times.push_back(step);
            }
            if (escaped)
                ++slot.escaped;
            else if (times.size() >= 2)
                slot.records.push_back(RecurrenceRecord::make(p0, std::move(times), delta));
        }
    });

    RecurrenceScan out;
    out.scanned = n;
    for (Slot& s : slots) {
        out.escaped += s.escaped;
        for (RecurrenceRecord& r : s.records) out.records.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Limit-map estimate at the best return gap
// ---------------------------------------------------------------------------

struct LimitMapEstimate {
    CVec p0;
    int m = 0;                       // gap used
    double residual = 0;             // |f^m(p0) - p0|
    std::vector<CVec> stencil;       // p0 +/- r along every real axis
    std::vector<CVec> values;        // f^m on the stencil
    CMatrix jac;                     // d(f^m) at p0, central differences
    double stencil_radius = 0;
    double delta = 0;                // carried from the record
    bool residual_ok = true;         // false -> classification is inconclusive
};

namespace detail {

inline CVec iterate_checked(const AnyMap& f, CVec z, int m, double cutoff,
                            const std::string& who) {
    for (int j = 0; j < m; ++j) {
        z = evaluate(f, z);
        if (!z.finite() || sup_norm(z) > cutoff)
            throw EscapeError(who + " escaped at step " + std::to_string(j + 1));
    }
    return z;
}

}  // namespace detail

inline LimitMapEstimate extract_limit_map(const AnyMap& f, const RecurrenceRecord& rec,
                                          double stencil_radius,
                                          double escape_cutoff = kDefaultEscapeCutoff) {
    rec.validate();
    if (rec.return_times.size() < 2)
        throw InvalidInputError("limit map needs at least two return times");
    if (!(stencil_radius > 0))
        throw InvalidInputError("stencil radius must be positive");
    const int k = rec.p0.k;

    // Residuals |f^m(p0) - p0| for every candidate gap come from one orbit
    // sweep up to the largest gap.
    std::vector<int> cand = rec.gaps;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    const int top = cand.back();
    std::vector<double> residual(static_cast<size_t>(top) + 1, 0.0);
    {
        CVec z = rec.p0;
        for (int j = 1; j <= top; ++j) {
            z = evaluate(f, z);
            if (!z.finite() || sup_norm(z) > escape_cutoff)
                throw EscapeError("base-point orbit escaped at step " + std::to_string(j));
            residual[static_cast<size_t>(j)] = dist(z, rec.p0);
        }
    }

    LimitMapEstimate est;
    est.p0 = rec.p0;
    est.delta = rec.delta;
    est.stencil_radius = stencil_radius;
    // smallest residual wins; equal residuals favor the longer gap (closer to
    // the subsequential limit)
    est.m = cand.front();
    for (int m : cand)
        if (residual[static_cast<size_t>(m)] <= residual[static_cast<size_t>(est.m)]) est.m = m;
    est.residual = residual[static_cast<size_t>(est.m)];
    est.residual_ok = est.residual <= 10 * rec.delta;

    const int d = 2 * k;
    for (int axis = 0; axis < d; ++axis) {
        for (double sgn : {1.0, -1.0}) {
            CVec s = rec.p0;
            s[axis / 2] += (axis % 2 == 0) ? cplx(sgn * stencil_radius, 0)
                                           : cplx(0, sgn * stencil_radius);
            est.stencil.push_back(s);
            est.values.push_back(detail::iterate_checked(
                f, s, est.m, escape_cutoff,
                "stencil point " + std::to_string(est.stencil.size() - 1)));
        }
    }

    const double h = stencil_radius / 4;
    est.jac = CMatrix(k);
    for (int col = 0; col < k; ++col) {
        CVec plus = rec.p0, minus = rec.p0;
        plus[col] += h;
        minus[col] -= h;
        CVec fp = detail::iterate_checked(f, plus, est.m, escape_cutoff, "jacobian probe");
        CVec fm = detail::iterate_checked(f, minus, est.m, escape_cutoff, "jacobian probe");
        for (int row = 0; row < k; ++row) est.jac(row, col) = (fp[row] - fm[row]) / (2 * h);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Trichotomy
// ---------------------------------------------------------------------------

enum class Verdict { AttractingPeriodic, Siegel, IntermediateRank, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::AttractingPeriodic: return "attracting-periodic";
        case Verdict::Siegel: return "siegel";
        case Verdict::IntermediateRank: return "intermediate-rank";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct TrichotomyTols {
    double rank_tol = 1e-4;        // singular-value cutoff (absolute fallback + relative)
    double identity_factor = 10.0; // Siegel: stencil deviation <= factor * delta

    void validate() const {
        if (!(rank_tol > 0) || !(identity_factor > 0))
            throw InvalidInputError("trichotomy tolerances must be positive");
    }
};

struct TrichotomyResult {
    Verdict verdict = Verdict::Inconclusive;
    int rank = -1;
    int period_estimate = 0;        // the gap m, meaningful for the attracting case
    double identity_deviation = 0;  // max over stencil of |f^m(s) - s|
    double residual = 0;
    double rank_tol_used = 0;
    std::array<double, kMaxDim> sigma{};  // singular values of the gap-map differential
    std::string note;
};

inline TrichotomyResult classify_trichotomy(const LimitMapEstimate& est, int k,
                                            const TrichotomyTols& tols = {}) {
    tols.validate();
    if (est.p0.k != k) throw DimensionError("estimate dimension does not match k");

    TrichotomyResult out;
    out.residual = est.residual;
    out.rank_tol_used = tols.rank_tol;
    out.sigma = singular_values(est.jac);
    for (size_t i = 0; i < est.stencil.size(); ++i)
        out.identity_deviation =
            std::max(out.identity_deviation, dist(est.values[i], est.stencil[i]));

    if (!est.residual_ok) {
        out.note = "fixed-point residual above bound; gap map is not a credible limit";
        return out;
    }

    out.rank = numerical_rank(est.jac, tols.rank_tol);
    if (out.rank == 0) {
        out.verdict = Verdict::AttractingPeriodic;
        out.period_estimate = est.m;
        return out;
    }
    if (out.rank == k) {
        out.verdict = Verdict::Siegel;
        if (out.identity_deviation > tols.identity_factor * est.delta)
            out.note = "maximal rank but far from the identity at this gap; rotation-like "
                       "only along a better subsequence";
        return out;
    }
    out.verdict = Verdict::IntermediateRank;
    return out;
}

}  // namespace invariantlab
