#pragma once

// Planar circular restricted three-body dynamics in the rotating frame,
// normalized units: lengths by the primary separation r12, time by
// t_c = sqrt(r12^3 / mu). The primaries sit at (-pi2, 0) and (1 - pi2, 0).
//
// The dynamics are kept in two deliberately separate forms that must agree
// to machine precision everywhere:
//   truth_deriv      - direct Newtonian force evaluation
//   lpv_matrices     - A(rho) x + b(rho) with rho = (sigma, psi)
// The second is exact, not a linearization; the scheduling parameters are
// the distances to the primaries.

#include <array>
#include <cmath>
#include <ostream>

#include "cislunav/linalg.hpp"
#include "cislunav/ode.hpp"

namespace cislunav {

class SingularityError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Physical constants of a two-primary system and the derived normalized
/// quantities.
struct Constants {
    double m1 = 0, m2 = 0, grav = 0, r12 = 0; // inputs
    double pi1 = 0, pi2 = 0;                  // mass fractions, pi1 + pi2 = 1
    double mu1 = 0, mu2 = 0, mu = 0;          // gravitational parameters
    double omega = 0;                         // circular angular rate
    double period = 0;                        // 2 pi / omega
    double t_c = 0;                           // time normalization sqrt(r12^3/mu)
};

inline Constants constants_from(double m1, double m2, double grav, double r12) {
    if (!(m1 > 0) || !(m2 > 0) || !(grav > 0) || !(r12 > 0))
        throw NumericError("constants_from: all inputs must be positive");
    if (m1 < m2) throw NumericError("constants_from: expected m1 >= m2");
    Constants c;
    c.m1 = m1;
    c.m2 = m2;
    c.grav = grav;
    c.r12 = r12;
    c.pi1 = m1 / (m1 + m2);
    c.pi2 = m2 / (m1 + m2);
    c.mu1 = grav * m1;
    c.mu2 = grav * m2;
    c.mu = c.mu1 + c.mu2;
    c.omega = std::sqrt(c.mu / (r12 * r12 * r12));
    c.period = 2.0 * M_PI / c.omega;
    c.t_c = std::sqrt(r12 * r12 * r12 / c.mu);
    return c;
}

/// Normalized planar state in the rotating frame.
struct State {
    double x = 0, y = 0, vx = 0, vy = 0;
};

/// Scheduling parameters: normalized distances to the two primaries.
struct Rho {
    double sigma = 0, psi = 0;
};

/// Admissible intervals for the scheduling parameters.
struct ParameterBox {
    double sigma_min = 0, sigma_max = 0, psi_min = 0, psi_max = 0;

    void validate() const {
        if (!(sigma_min > 0) || !(psi_min > 0) || sigma_max < sigma_min || psi_max < psi_min)
            throw NumericError("ParameterBox: need 0 < min <= max in both coordinates");
    }

    bool contains(const Rho& r) const {
        return r.sigma >= sigma_min && r.sigma <= sigma_max && r.psi >= psi_min &&
               r.psi <= psi_max;
    }

    Rho clamp(const Rho& r) const {
        return {std::min(std::max(r.sigma, sigma_min), sigma_max),
                std::min(std::max(r.psi, psi_min), psi_max)};
    }

    bool degenerate() const { return sigma_max <= sigma_min || psi_max <= psi_min; }
};

// Distances below this are treated as collisions with a primary; the flight
// envelope of interest never gets near them.
inline constexpr double kSingularityGuard = 1e-6;

inline Rho sigma_psi(const State& s, double pi2) {
    const double sx = s.x + pi2, py = s.y;
    const double px = s.x + pi2 - 1.0;
    Rho r{std::hypot(sx, py), std::hypot(px, py)};
    if (r.sigma < kSingularityGuard || r.psi < kSingularityGuard)
        throw SingularityError("sigma_psi: state at or near a primary");
    return r;
}

struct LpvMatrices {
    Matrix a; // 4x4
    Matrix b; // 4x1
};

/// Parameter-dependent system matrices. Row 3 carries Coriolis +2 on vy,
/// row 4 carries -2 on vx; a31 and a42 are the same expression by
/// construction.
inline LpvMatrices lpv_matrices(const Rho& rho, double pi2) {
    if (!(rho.sigma > 0) || !(rho.psi > 0))
        throw NumericError("lpv_matrices: rho must be positive");
    const double is3 = 1.0 / (rho.sigma * rho.sigma * rho.sigma);
    const double ip3 = 1.0 / (rho.psi * rho.psi * rho.psi);
    const double a31 = (pi2 - 1.0) * is3 - pi2 * ip3 + 1.0;
    const double b3 = pi2 * (1.0 - pi2) * (ip3 - is3);

    LpvMatrices m{Matrix(4, 4), Matrix(4, 1)};
    m.a(0, 2) = 1.0;
    m.a(1, 3) = 1.0;
    m.a(2, 0) = a31;
    m.a(2, 3) = 2.0;
    m.a(3, 1) = a31; // a42 == a31
    m.a(3, 2) = -2.0;
    m.b(2, 0) = b3;
    return m;
}

/// Direct Newtonian right-hand side, plus an optional disturbance
/// acceleration (dx, dy) on the velocity rows.
inline std::array<double, 4> truth_deriv(const State& s, double pi2, double dx = 0.0,
                                         double dy = 0.0) {
    const Rho r = sigma_psi(s, pi2);
    const double is3 = 1.0 / (r.sigma * r.sigma * r.sigma);
    const double ip3 = 1.0 / (r.psi * r.psi * r.psi);
    const double ax = s.x - (1.0 - pi2) * (s.x + pi2) * is3 - pi2 * (s.x + pi2 - 1.0) * ip3;
    const double ay = s.y - (1.0 - pi2) * s.y * is3 - pi2 * s.y * ip3;
    return {s.vx, s.vy, 2.0 * s.vy + ax + dx, -2.0 * s.vx + ay + dy};
}

/// Conserved along disturbance-free trajectories; the integration-accuracy
/// oracle for this module.
inline double jacobi_constant(const State& s, double pi2) {
    const Rho r = sigma_psi(s, pi2);
    return s.x * s.x + s.y * s.y + 2.0 * (1.0 - pi2) / r.sigma + 2.0 * pi2 / r.psi -
           (s.vx * s.vx + s.vy * s.vy);
}

struct TrajectorySample {
    double t = 0;
    State state;
};

/// Disturbance-free propagation sampled at the given times.
inline std::vector<TrajectorySample> propagate(const State& s0, double pi2,
                                               std::span<const double> times,
                                               const OdeOptions& opts = {}) {
    const std::array<double, 4> y0{s0.x, s0.y, s0.vx, s0.vy};
    auto rhs = [pi2](double, const std::vector<double>& y, std::vector<double>& dy) {
        const auto d = truth_deriv({y[0], y[1], y[2], y[3]}, pi2);
        std::copy(d.begin(), d.end(), dy.begin());
    };
    auto raw = integrate(std::span<const double>(y0), times.empty() ? 0.0 : times[0], times,
                         rhs, opts);
    std::vector<TrajectorySample> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i)
        out[i] = {raw[i].t, {raw[i].y[0], raw[i].y[1], raw[i].y[2], raw[i].y[3]}};
    return out;
}

inline void write_trajectory_csv(std::ostream& os, std::span<const TrajectorySample> traj,
                                 double pi2) {
    os << "t,x,y,vx,vy,sigma,psi,c_jacobi\n";
    char line[256];
    for (const auto& s : traj) {
        const Rho r = sigma_psi(s.state, pi2);
        std::snprintf(line, sizeof(line),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.state.x,
                      s.state.y, s.state.vx, s.state.vy, r.sigma, r.psi,
                      jacobi_constant(s.state, pi2));
        os << line;
    }
}

namespace detail {

// Net rotating-frame x-acceleration on the x-axis; roots are the collinear
// equilibria.
inline double collinear_residual(double x, double pi2) {
    const double ds = x + pi2;
    const double dp = x + pi2 - 1.0;
    const double s3 = std::abs(ds) * std::abs(ds) * std::abs(ds);
    const double p3 = std::abs(dp) * std::abs(dp) * std::abs(dp);
    return x - (1.0 - pi2) * ds / s3 - pi2 * dp / p3;
}

inline double bisect_collinear(double lo, double hi, double pi2) {
    double flo = collinear_residual(lo, pi2);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = collinear_residual(mid, pi2);
        if ((flo < 0) == (fm < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// x-coordinates of the collinear equilibrium points {L1, L2, L3}.
inline std::array<double, 3> collinear_lagrange_points(double pi2) {
    const double eps = 1e-7;
    const double l1 = detail::bisect_collinear(-pi2 + eps, 1.0 - pi2 - eps, pi2);
    const double l2 = detail::bisect_collinear(1.0 - pi2 + eps, 3.0, pi2);
    const double l3 = detail::bisect_collinear(-3.0, -pi2 - eps, pi2);
    return {l1, l2, l3};
}

/// Positions of the equilateral equilibrium points {L4, L5}.
inline std::array<State, 2> equilateral_lagrange_points(double pi2) {
    const double h = std::sqrt(3.0) / 2.0;
    return {State{0.5 - pi2, h, 0, 0}, State{0.5 - pi2, -h, 0, 0}};
}

} // namespace cislunav
