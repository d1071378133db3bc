#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cislunav/ode.hpp"

using namespace cislunav;

TEST_CASE("zero dynamics stays constant") {
    const std::array<double, 3> y0{1.0, -2.0, 0.5};
    const std::array<double, 4> times{0.0, 0.7, 1.3, 5.0};
    auto out = integrate(std::span<const double>(y0), 0.0, std::span<const double>(times),
                         [](double, const std::vector<double>&, std::vector<double>& dy) {
                             std::fill(dy.begin(), dy.end(), 0.0);
                         });
    REQUIRE(out.size() == 4);
    for (const auto& s : out)
        for (int i = 0; i < 3; ++i) CHECK(s.y[i] == y0[i]);
}

TEST_CASE("harmonic oscillator over one period returns to start") {
    // y'' = -y; closed-form solution (cos t, -sin t) from (1, 0).
    const std::array<double, 2> y0{1.0, 0.0};
    const std::array<double, 2> times{M_PI, 2.0 * M_PI};
    auto out = integrate(std::span<const double>(y0), 0.0, std::span<const double>(times),
                         [](double, const std::vector<double>& y, std::vector<double>& dy) {
                             dy[0] = y[1];
                             dy[1] = -y[0];
                         });
    CHECK(std::abs(out[0].y[0] + 1.0) < 1e-9);
    CHECK(std::abs(out[1].y[0] - 1.0) < 1e-9);
    CHECK(std::abs(out[1].y[1]) < 1e-9);
}

TEST_CASE("sampled output matches the closed form along the way") {
    std::vector<double> times;
    for (int i = 0; i <= 50; ++i) times.push_back(0.13 * i);
    const std::array<double, 2> y0{0.0, 1.0};
    auto out = integrate(std::span<const double>(y0), 0.0, std::span<const double>(times),
                         [](double, const std::vector<double>& y, std::vector<double>& dy) {
                             dy[0] = y[1];
                             dy[1] = -y[0];
                         });
    for (const auto& s : out) {
        CHECK(std::abs(s.y[0] - std::sin(s.t)) < 1e-10);
        CHECK(std::abs(s.y[1] - std::cos(s.t)) < 1e-10);
    }
}

TEST_CASE("tolerance scaling: loose tolerance gives larger error") {
    const std::array<double, 2> y0{1.0, 0.0};
    const std::array<double, 1> times{2.0 * M_PI};
    auto rhs = [](double, const std::vector<double>& y, std::vector<double>& dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    };
    OdeOptions loose;
    loose.abs_tol = loose.rel_tol = 1e-6;
    auto a = integrate(std::span<const double>(y0), 0.0, std::span<const double>(times), rhs,
                       loose);
    OdeOptions tight;
    tight.abs_tol = tight.rel_tol = 1e-13;
    auto b = integrate(std::span<const double>(y0), 0.0, std::span<const double>(times), rhs,
                       tight);
    const double err_loose = std::abs(a[0].y[0] - 1.0);
    const double err_tight = std::abs(b[0].y[0] - 1.0);
    CHECK(err_tight < err_loose);
    CHECK(err_tight < 1e-11);
}

TEST_CASE("step-size underflow is reported with the failure time") {
    // 1/(1-t) blows up at t = 1; integration cannot reach t = 2.
    const std::array<double, 1> y0{1.0};
    const std::array<double, 1> times{2.0};
    try {
        integrate(std::span<const double>(y0), 0.0, std::span<const double>(times),
                  [](double, const std::vector<double>& y, std::vector<double>& dy) {
                      dy[0] = y[0] * y[0];
                  });
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.t > 0.9);
        CHECK(e.t <= 1.05);
    }
}

TEST_CASE("invalid tolerances and unsorted samples are rejected") {
    const std::array<double, 1> y0{1.0};
    const std::array<double, 2> bad_times{1.0, 0.5};
    auto rhs = [](double, const std::vector<double>&, std::vector<double>& dy) { dy[0] = 0.0; };
    CHECK_THROWS_AS(integrate(std::span<const double>(y0), 0.0,
                              std::span<const double>(bad_times), rhs),
                    NumericError);
    OdeOptions opts;
    opts.abs_tol = 0.0;
    const std::array<double, 1> times{1.0};
    CHECK_THROWS_AS(integrate(std::span<const double>(y0), 0.0, std::span<const double>(times),
                              rhs, opts),
                    NumericError);
}

TEST_CASE("RkIntegrator advances across segment boundaries") {
    RkIntegrator rk([](double, const std::vector<double>& y, std::vector<double>& dy) {
                        dy[0] = -y[0];
                    },
                    std::vector<double>{1.0}, 0.0);
    for (int k = 1; k <= 20; ++k) rk.advance_to(0.1 * k);
    CHECK(std::abs(rk.state()[0] - std::exp(-2.0)) < 1e-12);
    CHECK(rk.time() == 2.0);
}
