#include <catch2/catch_amalgamated.hpp>

#include "invariantlab/hull.hpp"
#include "invariantlab/rng.hpp"

using namespace invariantlab;
using Catch::Approx;

namespace {

CompactCloud circle_cloud(int n) {
    const double pi = std::acos(-1.0);
    CompactCloud c(2, 2 * std::sin(pi / n));
    for (int i = 0; i < n; ++i) {
        double t = 2 * pi * i / n;
        c.append(CVec{cplx(std::cos(t), std::sin(t)), cplx(0, 0)});
    }
    return c;
}

CompactCloud two_points() {
    CompactCloud c(2, 0.05);
    c.append(CVec::zero(2));
    c.append(CVec{cplx(1, 0), cplx(0, 0)});
    return c;
}

// probe lattice over the z-plane slice w = 0
GridSpec zplane_slice(double half, int64_t nx, int64_t ny) {
    GridSpec g;
    g.k = 2;
    for (int a = 0; a < 2; ++a) {
        g.lo[static_cast<size_t>(a)] = -half;
        g.hi[static_cast<size_t>(a)] = half;
    }
    g.counts[0] = nx;
    g.counts[1] = ny;
    g.sliced[2] = g.sliced[3] = true;
    g.counts[2] = g.counts[3] = 1;
    g.validate();
    return g;
}

CompactCloud scaled_copy(const CompactCloud& c, double s) {
    CompactCloud out(c.k, c.resolution * s);
    for (int64_t i = 0; i < c.size(); ++i) {
        CVec p = c.point(i);
        for (int j = 0; j < c.k; ++j) p[j] *= s;
        out.append(p);
    }
    return out;
}

}  // namespace

TEST_CASE("basis layout and defaults", "[hull]") {
    PolyBasisSpec def;
    REQUIRE(def.max_degree == 6);
    REQUIRE(def.num_random == 64);

    PolyBasisSpec bad;
    bad.max_degree = 0;
    REQUIRE_THROWS_AS(bad.validate(), InvalidInputError);
    bad = PolyBasisSpec{};
    bad.num_random = 0;
    REQUIRE_THROWS_AS(bad.validate(), InvalidInputError);

    PolyBasisSpec small;
    small.max_degree = 2;
    small.num_random = 3;
    DomainShape ball = DomainShape::ball(CVec::zero(2), 1.0);
    CompactCloud K = sample_domain(ball, 0.4);
    HullTester t(K, small);
    // 5 monomials of degree 1..2, plus 3 streams x 2 truncations
    REQUIRE(t.basis_size() == 5 + 3 * 2);
    REQUIRE(t.skipped() == 0);

    REQUIRE_THROWS_AS(HullTester(CompactCloud(2, 0.1), small), InvalidInputError);
}

TEST_CASE("points of the cloud are never excluded", "[hull]") {
    Rng rng(4821);
    CompactCloud K(2, 0.1);
    for (int i = 0; i < 150; ++i) K.append(rng.in_polydisc(2, 1.5));
    PolyBasisSpec spec;
    spec.num_random = 16;
    HullTester t(K, spec);
    for (int64_t i = 0; i < K.size(); ++i) {
        HullTestReport r = t.score(K.point(i));
        REQUIRE(r.score <= 1.0 + 1e-12);
        REQUIRE(r.verdict == HullVerdict::Candidate);
    }
}

TEST_CASE("a far point is excluded by an explicit monomial", "[hull]") {
    PolyBasisSpec spec;
    spec.num_random = 8;
    HullTestReport r = hull_membership_score(CVec{cplx(5, 0), cplx(0, 0)}, two_points(), spec);
    REQUIRE(r.verdict == HullVerdict::Excluded);
    REQUIRE(r.score >= 5.0);
    REQUIRE(r.worst_poly >= 0);
    REQUIRE_FALSE(r.worst_id.empty());
}

TEST_CASE("circle cloud: the analytic disc stays candidate", "[hull]") {
    CompactCloud K = circle_cloud(2048);
    PolyBasisSpec spec;
    HullTester t(K, spec);

    // monomials touching the second coordinate are degenerate on the circle
    REQUIRE(t.skipped() == 27 - 6);

    SECTION("the center scores within the documented slack") {
        HullTestReport r = t.score(CVec::zero(2));
        REQUIRE(r.score <= 1.0 + 2 * t.default_tau());
        REQUIRE(r.verdict == HullVerdict::Candidate);
    }

    SECTION("interior points are candidates, exterior points excluded") {
        Rng rng(99);
        for (int i = 0; i < 100; ++i) {
            cplx z = rng.in_disc(0.95);
            REQUIRE(t.score(CVec{z, cplx(0, 0)}).verdict == HullVerdict::Candidate);
        }
        REQUIRE(t.score(CVec{cplx(1.2, 0), cplx(0, 0)}).verdict == HullVerdict::Excluded);
        REQUIRE(t.score(CVec{cplx(0, -1.15), cplx(0, 0)}).verdict == HullVerdict::Excluded);
    }

    SECTION("the candidate cloud fills the disc slice") {
        GridSpec probe = zplane_slice(1.5, 21, 21);
        CompactCloud cand = outer_hull_cloud(K, probe, spec, 0.05);
        REQUIRE(cand.resolution == probe.cell_diagonal());
        int64_t inner = 0;
        for (int64_t i = 0; i < cand.size(); ++i) {
            REQUIRE(std::abs(cand.point(i)[0]) <= 1.01);  // z^6 cuts just past the circle
            if (std::abs(cand.point(i)[0]) <= 0.95) ++inner;
        }
        // every probe point well inside the disc must be present
        int64_t expect_inner = 0;
        for (int64_t i = 0; i < probe.total(); ++i)
            if (std::abs(probe.sample(i)[0]) <= 0.95) ++expect_inner;
        REQUIRE(inner == expect_inner);
    }
}

TEST_CASE("finite sets keep only nearby probes as candidates", "[hull]") {
    CompactCloud K = two_points();
    GridSpec probe = GridSpec::real_slice(2.0, 10, 10);
    PolyBasisSpec spec;
    double tau = HullTester(K, spec).default_tau();
    CompactCloud cand = outer_hull_cloud(K, probe, spec, tau);
    REQUIRE(cand.size() > 0);
    KdTree idx = build_index(K);
    for (int64_t i = 0; i < cand.size(); ++i) {
        const double* raw = cand.raw() + static_cast<size_t>(i) * cand.real_dims();
        REQUIRE(idx.nearest(raw).distance <= probe.cell_diagonal());
    }
}

TEST_CASE("solid ball: probes inside the ball survive", "[hull]") {
    DomainShape ball = DomainShape::ball(CVec::zero(2), 1.0);
    CompactCloud K = sample_domain(ball, 0.25);
    PolyBasisSpec spec;
    spec.num_random = 32;
    GridSpec probe = GridSpec::box(2, 1.2, 5);
    CompactCloud cand = outer_hull_cloud(K, probe, spec, 0.1);
    HullTester t(K, spec);
    for (int64_t i = 0; i < probe.total(); ++i) {
        CVec z = probe.sample(i);
        if (z.norm() <= 0.85)
            REQUIRE(t.score(z, 0.1).verdict == HullVerdict::Candidate);
    }
    REQUIRE(cand.size() > 0);
}

TEST_CASE("score is exactly monotone in the degree bound", "[hull]") {
    Rng rng(1312);
    CompactCloud K(2, 0.1);
    for (int i = 0; i < 80; ++i) K.append(rng.in_polydisc(2, 1.0));
    for (int probe = 0; probe < 10; ++probe) {
        CVec z = rng.in_polydisc(2, 1.8);
        double prev = -1;
        for (int d = 1; d <= 5; ++d) {
            PolyBasisSpec spec;
            spec.max_degree = d;
            spec.num_random = 12;
            spec.seed = 7;
            double s = hull_membership_score(z, K, spec).score;
            REQUIRE(s >= prev);
            prev = s;
        }
    }
}

TEST_CASE("verdicts are scale equivariant", "[hull]") {
    Rng rng(2718);
    CompactCloud K(2, 0.08);
    for (int i = 0; i < 120; ++i) K.append(rng.in_polydisc(2, 1.3));
    PolyBasisSpec spec;
    spec.num_random = 16;
    spec.seed = 5;
    HullTester base(K, spec);

    for (double s : {2.0, 0.5}) {
        CompactCloud Ks = scaled_copy(K, s);
        HullTester scaled(Ks, spec);
        for (int i = 0; i < 25; ++i) {
            CVec z = rng.in_polydisc(2, 2.0);
            CVec zs = z;
            for (int j = 0; j < 2; ++j) zs[j] *= s;
            HullTestReport a = base.score(z, 0.03);
            HullTestReport b = scaled.score(zs, 0.03);
            REQUIRE(a.score == b.score);  // powers of two scale exactly
            REQUIRE(a.verdict == b.verdict);
        }
    }

    SECTION("non-dyadic factors still agree to rounding") {
        CompactCloud K3 = scaled_copy(K, 3.0);
        HullTester scaled(K3, spec);
        for (int i = 0; i < 25; ++i) {
            CVec z = rng.in_polydisc(2, 2.0);
            CVec zs = z;
            for (int j = 0; j < 2; ++j) zs[j] *= 3.0;
            REQUIRE(base.score(z, 0.03).score ==
                    Approx(scaled.score(zs, 0.03).score).epsilon(1e-9));
        }
    }
}

TEST_CASE("probe box must contain the cloud", "[hull]") {
    CompactCloud K = two_points();
    PolyBasisSpec spec;
    spec.num_random = 4;
    REQUIRE_THROWS_AS(outer_hull_cloud(K, GridSpec::real_slice(0.5, 5, 5), spec, 0.1),
                      InvalidInputError);
    // a τ that excludes everything is reported, not returned empty
    REQUIRE_THROWS_AS(outer_hull_cloud(K, GridSpec::real_slice(2.0, 6, 6), spec, -2.0),
                      ComputationError);
}

TEST_CASE("invariant clouds produce no hull violations", "[hull]") {
    DomainShape ball = DomainShape::ball(CVec::zero(2), 1.0);
    CompactCloud C = sample_domain(ball, 0.25);
    PolyBasisSpec spec;
    spec.num_random = 24;
    GridSpec probe = GridSpec::box(2, 1.1, 5);

    SECTION("identity") {
        auto rep = hull_invariance_check(parse_map("linear:[[1,0],[0,1]]"), C, probe, spec, 0.1);
        REQUIRE(rep.defect == 0.0);
        REQUIRE(rep.candidates > 0);
        REQUIRE(rep.violations == 0);
        REQUIRE(rep.worst_jump == 0.0);
    }

    SECTION("coordinate rotation") {
        auto rep = hull_invariance_check(parse_map("rotation:1.0,0.7"), C, probe, spec, 0.1,
                                         2 * C.resolution);
        REQUIRE(rep.defect <= C.resolution + 1e-12);
        REQUIRE(rep.candidates > 0);
        REQUIRE(rep.violations == 0);
    }

    SECTION("contraction toward the origin") {
        auto rep = hull_invariance_check(parse_map("scale:0.5"), C, probe, spec, 0.1,
                                         2 * C.resolution);
        REQUIRE(rep.candidates > 0);
        REQUIRE(rep.violations == 0);
        REQUIRE(rep.worst_jump <= 0.0 + 1e-12);
    }

    SECTION("a shell is not invariant under the contraction") {
        SampleOptions surf;
        surf.surface_only = true;
        CompactCloud shell = sample_domain(ball, 0.25, surf);
        REQUIRE_THROWS_AS(hull_invariance_check(parse_map("scale:0.5"), shell, probe, spec, 0.1),
                          InvalidInputError);
    }
}
