#include <catch2/catch_amalgamated.hpp>

#include "cislunav/linalg.hpp"
#include "cislunav/rng.hpp"

using namespace cislunav;

namespace {

Matrix random_symmetric(int n, Rng& rng, double scale = 1.0) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-scale, scale);
    return a;
}

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
    Matrix a(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) a(i, j) = rng.uniform(-scale, scale);
    return a;
}

} // namespace

TEST_CASE("sym_eig identity and diagonal cases") {
    const auto e3 = sym_eig(Matrix::identity(3));
    for (double v : e3.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(1.0, 1e-14));

    const auto ed = sym_eig(Matrix{{2, 0}, {0, -1}});
    CHECK_THAT(ed.values[0], Catch::Matchers::WithinAbs(-1.0, 1e-14));
    CHECK_THAT(ed.values[1], Catch::Matchers::WithinAbs(2.0, 1e-14));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
    Rng rng(42);
    for (int n : {2, 6, 13, 30}) {
        Matrix a = random_symmetric(n, rng, 3.0);
        const auto e = sym_eig(a);

        // A V = V diag(lambda)
        Matrix av = a * e.vectors;
        Matrix vl = e.vectors;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) vl(i, j) *= e.values[j];
        CHECK(max_abs_diff(av, vl) <= 1e-10 * std::max(1.0, max_abs(a)));

        // V^T V = I
        CHECK(max_abs_diff(e.vectors.transposed() * e.vectors, Matrix::identity(n)) <= 1e-10);

        // A = V diag V^T
        Matrix rec = vl * e.vectors.transposed();
        CHECK(frobenius_norm(rec - a) <= 1e-10 * frobenius_norm(a));

        // ascending order
        CHECK(std::is_sorted(e.values.begin(), e.values.end()));
    }
}

TEST_CASE("sym_eig rejects non-symmetric input") {
    CHECK_THROWS_AS(sym_eig(Matrix{{1, 2}, {0, 1}}), NotSymmetricError);
}

TEST_CASE("chol_posdef basic cases") {
    const auto li = chol_posdef(Matrix::identity(2));
    REQUIRE(li.has_value());
    CHECK(max_abs_diff(*li, Matrix::identity(2)) == 0.0);

    CHECK_FALSE(chol_posdef(Matrix{{1, 0}, {0, -1}}).has_value());

    const Matrix a{{4, 2}, {2, 3}};
    const auto l = chol_posdef(a);
    REQUIRE(l.has_value());
    CHECK(max_abs_diff(*l * l->transposed(), a) <= 1e-10 * max_abs(a));
}

TEST_CASE("chol_posdef round-trips random SPD matrices") {
    Rng rng(7);
    for (int n : {3, 8, 20}) {
        Matrix b = random_matrix(n, n, rng);
        Matrix a = b * b.transposed() + 0.1 * Matrix::identity(n);
        const auto l = chol_posdef(a);
        REQUIRE(l.has_value());
        CHECK(frobenius_norm(*l * l->transposed() - a) <= 1e-10 * frobenius_norm(a));
    }
}

TEST_CASE("solve_lu solves and flags singularity") {
    Rng rng(3);
    const Matrix a = random_matrix(6, 6, rng) + 3.0 * Matrix::identity(6);
    const Matrix x_true = random_matrix(6, 2, rng);
    const Matrix x = solve_lu(a, a * x_true);
    CHECK(max_abs_diff(x, x_true) <= 1e-10);

    CHECK_THROWS_AS(solve_lu(Matrix{{1, 2}, {2, 4}}, Matrix::identity(2)), SingularMatrixError);
}

TEST_CASE("solve_complex matches hand-computed 1x1 case") {
    // (1 + 2i) x = 5  =>  x = 1 - 2i
    const auto x = solve_complex(Matrix{{1}}, Matrix{{2}}, Matrix{{5}}, Matrix{{0}});
    CHECK_THAT(x.re(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-14));
    CHECK_THAT(x.im(0, 0), Catch::Matchers::WithinAbs(-2.0, 1e-14));
}

TEST_CASE("max_sv_freq of a scalar first-order lag") {
    const Matrix a{{-1}}, b{{1}}, c{{1}};
    CHECK_THAT(max_sv_freq(a, b, c, 0.0), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(max_sv_freq(a, b, c, 1e9) < 1e-8);

    CHECK_THAT(max_sv_freq(Matrix{{-2}}, b, c, 0.0), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("max_sv_freq matches closed-form first-order magnitude on a grid") {
    const Matrix a{{-1.7}}, b{{2.5}}, c{{-0.8}};
    for (double w : {0.0, 0.3, 1.0, 4.5, 100.0}) {
        const double expected = std::abs(c(0, 0) * b(0, 0)) / std::hypot(w, a(0, 0));
        CHECK_THAT(max_sv_freq(a, b, c, w), Catch::Matchers::WithinRel(expected, 1e-12));
    }
}

TEST_CASE("max_sv_freq reports a singular resolvent distinctly") {
    // Pure oscillator: jw I - A singular at w = 1.
    const Matrix a{{0, 1}, {-1, 0}};
    const Matrix b{{0}, {1}};
    const Matrix c{{1, 0}};
    CHECK_THROWS_AS(max_sv_freq(a, b, c, 1.0), SingularResolventError);
}

TEST_CASE("max_singular_value agrees with eigenvalue route on random complex matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 1 + static_cast<int>(rng.uniform() * 4.0);
        const int n = 1 + static_cast<int>(rng.uniform() * 5.0);
        ComplexMatrix z(random_matrix(m, n, rng), random_matrix(m, n, rng));
        // Independent route: real 2m x 2n embedding has the same singular values.
        Matrix big(2 * m, 2 * n);
        big.set_block(0, 0, z.re);
        big.set_block(0, n, -z.im);
        big.set_block(m, 0, z.im);
        big.set_block(m, n, z.re);
        const Matrix g = big.transposed() * big;
        const double expected = std::sqrt(std::max(0.0, sym_eig(g).values.back()));
        CHECK_THAT(max_singular_value(z), Catch::Matchers::WithinRel(expected, 1e-10));
    }
}

TEST_CASE("min_singular_value vanishes for singular matrices") {
    CHECK(min_singular_value(Matrix{{1, 2}, {2, 4}}) < 1e-12);
    CHECK_THAT(min_singular_value(Matrix::identity(3)), Catch::Matchers::WithinAbs(1.0, 1e-12));
}
