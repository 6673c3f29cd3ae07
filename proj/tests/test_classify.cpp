#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "invariantlab/classify.hpp"

using namespace invariantlab;
using Catch::Approx;

namespace {

CompactCloud cloud_of(std::initializer_list<CVec> pts) {
    CompactCloud c(2, 0.1);
    for (const CVec& p : pts) c.append(p);
    return c;
}

CVec pt(cplx a, cplx b) {
    CVec v(2);
    v[0] = a;
    v[1] = b;
    return v;
}

// Orbit of a k=2 diagonal rotation computed from closed form (one polar call
// per step), deliberately different arithmetic from the library's repeated
// multiplication.
double direct_rotation_return(const CVec& p, double t1, double t2, int n) {
    cplx z = std::polar(1.0, t1 * n) * p[0] - p[0];
    cplx w = std::polar(1.0, t2 * n) * p[1] - p[1];
    return std::sqrt(std::norm(z) + std::norm(w));
}

}  // namespace

TEST_CASE("recurrence detection", "[classify]") {
    SECTION("every point of a sphere sample recurs under an irrational rotation") {
        const double t1 = 1.0, t2 = std::sqrt(2.0);
        AnyMap rot = parse_map("rotation:1.0,1.4142135623730951");
        SampleOptions surf;
        surf.surface_only = true;
        CompactCloud W = sample_domain(DomainShape::ball(CVec::zero(2), 1.0), 0.35, surf);
        REQUIRE(W.size() > 50);

        // the near-balanced band |z| ~ |w| needs both angles close at once, so
        // its first two returns can sit past 10^4 steps; 4*10^4 covers the
        // whole sphere with margin
        RecurrenceScan scan = detect_recurrent_points(rot, W, 40000, 0.05);
        REQUIRE(scan.scanned == W.size());
        REQUIRE(scan.escaped == 0);
        REQUIRE(static_cast<int64_t>(scan.records.size()) == W.size());

        // closed-form cross-check on a few records, with a guard band so the
        // two arithmetic routes cannot disagree about borderline returns
        for (size_t r = 0; r < scan.records.size(); r += 37) {
            const RecurrenceRecord& rec = scan.records[r];
            REQUIRE(rec.return_times.size() >= 2);
            for (int n : rec.return_times)
                REQUIRE(direct_rotation_return(rec.p0, t1, t2, n) <= 0.05 + 1e-9);
            size_t idx = 0;
            for (int n = 1; n <= 40000; ++n) {
                if (direct_rotation_return(rec.p0, t1, t2, n) <= 0.05 - 1e-9) {
                    while (idx < rec.return_times.size() && rec.return_times[idx] < n) ++idx;
                    REQUIRE(idx < rec.return_times.size());
                    REQUIRE(rec.return_times[idx] == n);
                }
            }
        }
    }

    SECTION("for a contraction only points near the fixed point recur") {
        AnyMap half = parse_map("scale:0.5");
        CompactCloud W = sample_domain(DomainShape::ball(CVec::zero(2), 0.2), 0.05);
        const double delta = 0.05;
        RecurrenceScan scan = detect_recurrent_points(half, W, 40, delta);
        REQUIRE(scan.escaped == 0);
        REQUIRE_FALSE(scan.records.empty());

        // oracle: |f^n(p) - p| = |p| (1 - 2^-n), increasing in n, so two
        // returns exist iff 0.75 |p| <= delta
        std::map<std::vector<double>, size_t> by_coords;
        for (size_t i = 0; i < scan.records.size(); ++i) {
            const CVec& p = scan.records[i].p0;
            std::vector<double> key;
            for (int a = 0; a < 2; ++a) {
                key.push_back(p[a].real());
                key.push_back(p[a].imag());
            }
            by_coords[key] = i;
        }
        for (int64_t i = 0; i < W.size(); ++i) {
            CVec p = W.point(i);
            std::vector<double> key;
            for (int a = 0; a < 2; ++a) {
                key.push_back(p[a].real());
                key.push_back(p[a].imag());
            }
            bool expect = 0.75 * p.norm() <= delta;
            REQUIRE(by_coords.count(key) == (expect ? 1u : 0u));
        }

        // the exact fixed point returns at every step
        CVec zero = CVec::zero(2);
        bool found = false;
        for (const RecurrenceRecord& rec : scan.records)
            if (rec.p0.norm() == 0.0) {
                found = true;
                REQUIRE(rec.return_times.size() == 40);
                REQUIRE(rec.gaps.front() == 1);
            }
        REQUIRE(found);
    }

    SECTION("escaping samples are dropped and counted") {
        AnyMap h = parse_map("henon");
        CompactCloud W = cloud_of({pt(cplx(10, 0), cplx(0, 0)), pt(cplx(0, 0), cplx(9, 1))});
        RecurrenceScan scan = detect_recurrent_points(h, W, 100, 0.05);
        REQUIRE(scan.scanned == 2);
        REQUIRE(scan.escaped == 2);
        REQUIRE(scan.records.empty());
    }

    SECTION("the record list does not depend on sample order") {
        AnyMap rot = parse_map("rotation:1.0,1.4142135623730951");
        CompactCloud W = sample_domain(DomainShape::ball(CVec::zero(2), 0.6), 0.2);
        CompactCloud rev(W.k, W.resolution);
        for (int64_t i = W.size() - 1; i >= 0; --i) rev.append(W.point(i));

        auto signature = [](const RecurrenceScan& s) {
            std::vector<std::pair<std::vector<double>, std::vector<int>>> sig;
            for (const RecurrenceRecord& r : s.records) {
                std::vector<double> key;
                for (int a = 0; a < r.p0.k; ++a) {
                    key.push_back(r.p0[a].real());
                    key.push_back(r.p0[a].imag());
                }
                sig.emplace_back(std::move(key), r.return_times);
            }
            std::sort(sig.begin(), sig.end());
            return sig;
        };
        RecurrenceScan a = detect_recurrent_points(rot, W, 300, 0.1);
        RecurrenceScan b = detect_recurrent_points(rot, rev, 300, 0.1);
        REQUIRE(a.records.size() == b.records.size());
        REQUIRE(signature(a) == signature(b));
    }

    SECTION("input validation") {
        AnyMap rot = parse_map("rotation:1.0,0.7");
        CompactCloud W = cloud_of({pt(cplx(0.1, 0), cplx(0, 0))});
        REQUIRE_THROWS_AS(detect_recurrent_points(rot, W, 1, 0.05), InvalidInputError);
        REQUIRE_THROWS_AS(detect_recurrent_points(rot, W, 100, 0.0), InvalidInputError);
    }
}

TEST_CASE("limit map extraction", "[classify]") {
    SECTION("the identity map gives the identity estimate, largest gap on ties") {
        AnyMap id = parse_map("linear:[[1,0],[0,1]]");
        RecurrenceRecord rec =
            RecurrenceRecord::make(pt(cplx(0.3, 0), cplx(-0.2, 0.1)), {3, 7}, 1e-6);
        LimitMapEstimate est = extract_limit_map(id, rec, 0.05);
        REQUIRE(est.m == 4);  // gaps {3, 4}, equal residual, longer wins
        REQUIRE(est.residual == 0.0);
        REQUIRE(est.residual_ok);
        REQUIRE(est.stencil.size() == 8);
        for (size_t i = 0; i < est.stencil.size(); ++i)
            REQUIRE(dist(est.values[i], est.stencil[i]) == 0.0);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                REQUIRE(std::abs(est.jac(r, c) - (r == c ? 1.0 : 0.0)) <= 1e-9);
    }

    SECTION("rotation gaps recover the rotation power") {
        const double t1 = 1.0, t2 = 0.7;
        AnyMap rot = parse_map("rotation:1.0,0.7");
        CompactCloud W = cloud_of({pt(cplx(0.5, 0), cplx(0.3, 0))});
        RecurrenceScan scan = detect_recurrent_points(rot, W, 2000, 0.05);
        REQUIRE(scan.records.size() == 1);
        LimitMapEstimate est = extract_limit_map(rot, scan.records[0], 0.02);
        REQUIRE(est.residual <= 0.05);
        // a linear map: finite differences are exact up to rounding
        cplx e1 = std::polar(1.0, t1 * est.m), e2 = std::polar(1.0, t2 * est.m);
        REQUIRE(std::abs(est.jac(0, 0) - e1) <= 1e-9);
        REQUIRE(std::abs(est.jac(1, 1) - e2) <= 1e-9);
        REQUIRE(std::abs(est.jac(0, 1)) <= 1e-9);
        REQUIRE(std::abs(est.jac(1, 0)) <= 1e-9);
    }

    SECTION("finite differences match the chain-rule Jacobian on a nonlinear map") {
        AnyMap h = parse_map("henon");
        RecurrenceRecord rec =
            RecurrenceRecord::make(pt(cplx(0.1, 0.05), cplx(-0.08, 0.02)), {2, 5}, 10.0);
        LimitMapEstimate est = extract_limit_map(h, rec, 0.01);

        CMatrix chain = CMatrix::identity(2);
        CVec z = rec.p0;
        for (int j = 0; j < est.m; ++j) {
            chain = jacobian(h, z).mul(chain);
            z = evaluate(h, z);
        }
        double scale = operator_norm(chain);
        CMatrix diff = est.jac;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) diff(r, c) -= chain(r, c);
        REQUIRE(operator_norm(diff) <= 1e-5 * scale);
    }

    SECTION("a mixed diagonal at a near-axis point has a long best gap") {
        AnyMap f = parse_map("diag:0.5,0.5403023058681398+0.8414709848078965i");  // (1/2, e^i)
        CompactCloud W = cloud_of({pt(cplx(0.02, 0), cplx(0.5, 0))});
        RecurrenceScan scan = detect_recurrent_points(f, W, 500, 0.05);
        REQUIRE(scan.records.size() == 1);
        LimitMapEstimate est = extract_limit_map(f, scan.records[0], 0.05);
        REQUIRE(est.m >= 27);  // 2^-m below any rank tolerance in use
        REQUIRE(std::abs(est.jac(0, 0)) <= 1e-8);
        REQUIRE(std::abs(std::abs(est.jac(1, 1)) - 1.0) <= 1e-9);
    }

    SECTION("orbit escape during extraction is an error") {
        AnyMap h = parse_map("henon");
        RecurrenceRecord rec = RecurrenceRecord::make(pt(cplx(10, 0), cplx(0, 0)), {1, 8}, 1.0);
        REQUIRE_THROWS_AS(extract_limit_map(h, rec, 0.1), EscapeError);
    }

    SECTION("a record needs two returns") {
        AnyMap id = parse_map("linear:[[1,0],[0,1]]");
        RecurrenceRecord rec = RecurrenceRecord::make(pt(cplx(0.1, 0), cplx(0, 0)), {5}, 0.1);
        REQUIRE_THROWS_AS(extract_limit_map(id, rec, 0.05), InvalidInputError);
    }
}

TEST_CASE("trichotomy classification", "[classify]") {
    SECTION("long-gap contractions are attracting-periodic, stable under stencil halving") {
        for (double c : {0.3, 0.5, 0.8}) {
            AnyMap f = parse_map("scale:" + std::to_string(c));
            RecurrenceRecord rec = RecurrenceRecord::make(CVec::zero(2), {60, 120}, 1e-9);
            for (double r : {0.05, 0.025}) {
                LimitMapEstimate est = extract_limit_map(f, rec, r);
                TrichotomyResult t = classify_trichotomy(est, 2);
                REQUIRE(t.verdict == Verdict::AttractingPeriodic);
                REQUIRE(t.rank == 0);
                REQUIRE(t.period_estimate == 60);
            }
        }
    }

    SECTION("rotations are Siegel with a near-identity gap map") {
        for (double theta : {0.7, 1.0, 2.2}) {
            AnyMap f = parse_map("rotation:" + std::to_string(theta) + ",1.0");
            CompactCloud W = cloud_of({pt(cplx(0.5, 0), cplx(0.3, 0))});
            RecurrenceScan scan = detect_recurrent_points(f, W, 3000, 0.05);
            REQUIRE(scan.records.size() == 1);
            for (double r : {0.05, 0.025}) {
                LimitMapEstimate est = extract_limit_map(f, scan.records[0], r);
                TrichotomyResult t = classify_trichotomy(est, 2);
                REQUIRE(t.verdict == Verdict::Siegel);
                REQUIRE(t.rank == 2);
                REQUIRE(t.identity_deviation <= 10 * 0.05);
                REQUIRE(t.note.empty());
            }
        }
    }

    SECTION("a mixed diagonal lands strictly between") {
        AnyMap f = parse_map("diag:0.5,0.5403023058681398+0.8414709848078965i");
        CompactCloud W = cloud_of({pt(cplx(0.02, 0), cplx(0.5, 0))});
        RecurrenceScan scan = detect_recurrent_points(f, W, 500, 0.05);
        for (double r : {0.05, 0.025}) {
            LimitMapEstimate est = extract_limit_map(f, scan.records[0], r);
            TrichotomyResult t = classify_trichotomy(est, 2);
            REQUIRE(t.verdict == Verdict::IntermediateRank);
            REQUIRE(t.rank == 1);
        }
    }

    SECTION("full rank far from the identity is Siegel with a note") {
        AnyMap f = parse_map("rotation:1.0,0.7");
        RecurrenceRecord rec =
            RecurrenceRecord::make(pt(cplx(0.05, 0), cplx(0.05, 0)), {3, 6}, 0.02);
        LimitMapEstimate est = extract_limit_map(f, rec, 1.0);
        REQUIRE(est.residual_ok);  // the tiny base point keeps the residual small
        TrichotomyResult t = classify_trichotomy(est, 2);
        REQUIRE(t.verdict == Verdict::Siegel);
        REQUIRE(t.identity_deviation > 10 * 0.02);
        REQUIRE_FALSE(t.note.empty());
    }

    SECTION("a residual above bound is inconclusive, never a guess") {
        AnyMap f = parse_map("rotation:1.0,0.7");
        RecurrenceRecord rec =
            RecurrenceRecord::make(pt(cplx(0.5, 0), cplx(0.3, 0)), {3, 6}, 0.01);
        LimitMapEstimate est = extract_limit_map(f, rec, 0.05);
        REQUIRE_FALSE(est.residual_ok);
        TrichotomyResult t = classify_trichotomy(est, 2);
        REQUIRE(t.verdict == Verdict::Inconclusive);
        REQUIRE_FALSE(t.note.empty());
    }

    SECTION("verdict labels") {
        REQUIRE(std::string(to_string(Verdict::AttractingPeriodic)) == "attracting-periodic");
        REQUIRE(std::string(to_string(Verdict::Siegel)) == "siegel");
        REQUIRE(std::string(to_string(Verdict::IntermediateRank)) == "intermediate-rank");
        REQUIRE(std::string(to_string(Verdict::Inconclusive)) == "inconclusive");
    }
}
