#include <catch2/catch_amalgamated.hpp>

#include "invariantlab/geometry.hpp"
#include "invariantlab/rng.hpp"

using namespace invariantlab;
using Catch::Approx;

namespace {

CMatrix random_matrix(Rng& rng, int k, double scale) {
    CMatrix m(k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            m(i, j) = cplx(rng.uniform(-scale, scale), rng.uniform(-scale, scale));
    return m;
}

// Independent check: an eigenvalue must kill the characteristic polynomial.
double char_poly_residual(const CMatrix& m, cplx lambda) {
    cplx tr = m(0, 0) + m(1, 1);
    cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return std::abs(lambda * lambda - tr * lambda + det);
}

}  // namespace

TEST_CASE("sup_norm is the max coordinate modulus", "[geometry]") {
    CVec v{cplx(3, 4), cplx(1, 0)};
    REQUIRE(sup_norm(v) == Approx(5.0));
    REQUIRE(sup_norm(CVec{cplx(0, 0)}) == 0.0);

    SECTION("never exceeds the euclidean norm, and dominates it over sqrt(k)") {
        Rng rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            CVec z = rng.in_polydisc(2, 3.0);
            REQUIRE(sup_norm(z) <= z.norm() + 1e-15);
            REQUIRE(z.norm() <= std::sqrt(2.0) * sup_norm(z) + 1e-15);
        }
    }
}

TEST_CASE("eigenvalues of the swap matrix are {1, -1}", "[geometry]") {
    CMatrix swap{{0, 1}, {1, 0}};
    Spectrum s = eigenvalues_2x2(swap);
    REQUIRE(std::abs(s[0] - cplx(1, 0)) < 1e-14);
    REQUIRE(std::abs(s[1] - cplx(-1, 0)) < 1e-14);
}

TEST_CASE("eigenvalue ordering: descending modulus, ties by argument", "[geometry]") {
    Spectrum s = eigenvalues_2x2(CMatrix::diagonal({0.25, 0.5}));
    REQUIRE(std::abs(s[0] - cplx(0.5, 0)) < 1e-14);
    REQUIRE(std::abs(s[1] - cplx(0.25, 0)) < 1e-14);

    // equal moduli, distinct arguments
    cplx a = std::polar(1.0, 2.0), b = std::polar(1.0, -1.0);
    Spectrum t = eigenvalues_2x2(CMatrix::diagonal({a, b}));
    REQUIRE(std::arg(t[0]) < std::arg(t[1]));
}

TEST_CASE("eigenvalues satisfy the characteristic polynomial", "[geometry][property]") {
    Rng rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        CMatrix m = random_matrix(rng, 2, 5.0);
        Spectrum s = eigenvalues_2x2(m);
        double scale = std::max(1.0, m.frobenius_norm());
        REQUIRE(char_poly_residual(m, s[0]) < 1e-10 * scale * scale);
        REQUIRE(char_poly_residual(m, s[1]) < 1e-10 * scale * scale);

        // product of eigenvalues = determinant (relative)
        cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        REQUIRE(std::abs(s.product() - det) <= 1e-10 * std::max(1.0, std::abs(det)));
    }
}

TEST_CASE("eigenvalues are stable under near-cancellation", "[geometry]") {
    // trace large, one eigenvalue tiny: naive formula would cancel
    CMatrix m{{1e8, 1.0}, {0.0, 1e-8}};
    Spectrum s = eigenvalues_2x2(m);
    REQUIRE(s[0].real() == Approx(1e8));
    REQUIRE(s[1].real() == Approx(1e-8).margin(1e-18));
}

TEST_CASE("singular values: closed 2x2 form matches the Jacobi path", "[geometry][property]") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        CMatrix m = random_matrix(rng, 2, 2.0);
        auto direct = singular_values(m);

        // embed into 3x3 with a zero row/column: same nonzero singular values
        CMatrix big(3);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) big(i, j) = m(i, j);
        auto via_jacobi = singular_values(big);

        REQUIRE(direct[0] == Approx(via_jacobi[0]).margin(1e-10));
        REQUIRE(direct[1] == Approx(via_jacobi[1]).margin(1e-10));
        REQUIRE(via_jacobi[2] == Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("singular values of a unitary matrix are all one", "[geometry]") {
    double c = std::cos(0.7), s = std::sin(0.7);
    CMatrix u{{cplx(c, 0), cplx(0, s)}, {cplx(0, s), cplx(c, 0)}};
    auto sv = singular_values(u);
    REQUIRE(sv[0] == Approx(1.0).epsilon(1e-12));
    REQUIRE(sv[1] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("numerical rank thresholds", "[geometry]") {
    REQUIRE(numerical_rank(CMatrix::diagonal({1.0, 1e-9}), 1e-4) == 1);
    REQUIRE(numerical_rank(CMatrix::diagonal({1.0, 1.0}), 1e-4) == 2);
    REQUIRE(numerical_rank(CMatrix(2), 1e-4) == 0);

    SECTION("absolute fallback: uniformly tiny matrix has rank zero") {
        REQUIRE(numerical_rank(CMatrix::diagonal({1e-6, 1e-6}), 1e-4) == 0);
    }

    SECTION("rank is invariant under unitary factors") {
        Rng rng(3);
        double c = std::cos(1.1), s = std::sin(1.1);
        CMatrix u{{cplx(c, 0), cplx(-s, 0)}, {cplx(s, 0), cplx(c, 0)}};
        for (int trial = 0; trial < 100; ++trial) {
            CMatrix m = random_matrix(rng, 2, 1.0);
            if (trial % 2) m(1, 0) = m(0, 0), m(1, 1) = m(0, 1);  // force rank <= 1
            REQUIRE(numerical_rank(u.mul(m), 1e-8) == numerical_rank(m, 1e-8));
        }
    }
}

TEST_CASE("rank rejects negative tolerance", "[geometry]") {
    REQUIRE_THROWS_AS(numerical_rank(CMatrix::identity(2), -1.0), InvalidInputError);
}

TEST_CASE("matrix inverse and determinant round-trip", "[geometry][property]") {
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        CMatrix m = random_matrix(rng, 2, 2.0);
        if (std::abs(m.determinant()) < 1e-3) continue;
        CMatrix id = m.mul(m.inverse());
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                REQUIRE(std::abs(id(i, j) - (i == j ? cplx(1) : cplx(0))) < 1e-10);
    }
}
