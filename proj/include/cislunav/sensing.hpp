#pragma once

// Bearing-derived measurements and their range-weighted noise models. The
// four channels are the sines/cosines of the two bearing angles to the
// primaries, so noise-free channels satisfy ym1^2 + ym2^2 = 1 and
// ym3^2 + ym4^2 = 1 identically.

#include <array>
#include <cmath>
#include <optional>

#include "cislunav/cr3bp.hpp"
#include "cislunav/linalg.hpp"
#include "cislunav/rng.hpp"

namespace cislunav {

inline constexpr double kArcsecToRad = M_PI / 648000.0;

struct Measurement {
    double ym1 = 0, ym2 = 0, ym3 = 0, ym4 = 0;

    Matrix as_column() const {
        Matrix m(4, 1);
        m(0, 0) = ym1;
        m(1, 0) = ym2;
        m(2, 0) = ym3;
        m(3, 0) = ym4;
        return m;
    }
};

/// Noise-free bearing channels.
inline Measurement measure(const State& s, double pi2) {
    const Rho r = sigma_psi(s, pi2); // throws near a primary
    return {s.y / r.sigma, (s.x + pi2) / r.sigma, s.y / r.psi, (s.x + pi2 - 1.0) / r.psi};
}

struct MeasurementMatrices {
    Matrix c_y; // 4x4
    Matrix d;   // 4x1
};

/// Matrix form of the bearing channels: C_y(rho) x + d(rho) reproduces
/// measure() whenever rho matches the state. Row 4 follows the scalar
/// channel definition ym4 = (x + pi2 - 1)/psi, i.e. +1/psi on x with
/// offset (pi2 - 1)/psi.
inline MeasurementMatrices measurement_matrices(const Rho& rho, double pi2) {
    if (!(rho.sigma > 0) || !(rho.psi > 0))
        throw NumericError("measurement_matrices: rho must be positive");
    MeasurementMatrices m{Matrix(4, 4), Matrix(4, 1)};
    m.c_y(0, 1) = 1.0 / rho.sigma;
    m.c_y(1, 0) = 1.0 / rho.sigma;
    m.c_y(2, 1) = 1.0 / rho.psi;
    m.c_y(3, 0) = 1.0 / rho.psi;
    m.d(1, 0) = pi2 / rho.sigma;
    m.d(3, 0) = (pi2 - 1.0) / rho.psi;
    return m;
}

enum class WeightModel {
    linear,    // eta_min..eta_max interpolated linearly across the box
    quadratic, // sqrt(alpha) * range
};

/// Noise configuration. Angles are radians and ranges are normalized by
/// r12 here; unit conversion happens at config load.
struct NoiseSpec {
    double eta_min = 50.0 * kArcsecToRad;
    double eta_max = 500.0 * kArcsecToRad;
    double range_err_min = 0.0;             // normalized length
    double range_err_max = 0.0;             // normalized length
    std::optional<double> band_limit;       // rad per normalized time; nullopt = white
    double process_bound = 0.0;             // acceleration bound on each axis
    double sample_dt = 1e-3;                // noise sample-and-hold period
    WeightModel weight_model = WeightModel::linear;
    double alpha_sigma = 0.0;               // quadratic-energy coefficients
    double alpha_psi = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (eta_min < 0 || eta_max < eta_min || range_err_min < 0 ||
            range_err_max < range_err_min || process_bound < 0 || !(sample_dt > 0))
            throw NumericError("NoiseSpec: bounds must be nonnegative with min <= max");
        if (band_limit && !(*band_limit > 0))
            throw NumericError("NoiseSpec: band limit must be positive");
    }
};

namespace detail {

inline double lerp_weight(double v, double lo, double hi, double w_lo, double w_hi) {
    const double f = (v - lo) / (hi - lo);
    return w_lo + f * (w_hi - w_lo);
}

} // namespace detail

/// Channel weights (W1..W4). W1 = W2 depend on sigma, W3 = W4 on psi; the
/// linear model hits eta_min/eta_max exactly at the box edges.
inline std::array<double, 4> noise_weights(const Rho& rho, const ParameterBox& box,
                                           const NoiseSpec& spec) {
    box.validate();
    if (box.degenerate())
        throw NumericError("noise_weights: degenerate parameter box");
    double w_sigma, w_psi;
    if (spec.weight_model == WeightModel::linear) {
        w_sigma = detail::lerp_weight(rho.sigma, box.sigma_min, box.sigma_max, spec.eta_min,
                                      spec.eta_max);
        w_psi = detail::lerp_weight(rho.psi, box.psi_min, box.psi_max, spec.eta_min,
                                    spec.eta_max);
    } else {
        w_sigma = std::sqrt(spec.alpha_sigma) * rho.sigma;
        w_psi = std::sqrt(spec.alpha_psi) * rho.psi;
    }
    return {w_sigma, w_sigma, w_psi, w_psi};
}

/// 4x6 noise input matrix [0 | blkdiag(W_sigma I2, W_psi I2)].
inline Matrix dw_matrix(const std::array<double, 4>& w) {
    Matrix m(4, 6);
    for (int i = 0; i < 4; ++i) m(i, 2 + i) = w[i];
    return m;
}

/// 4x6 disturbance input matrix: process acceleration enters the velocity
/// rows, sensor channels do not touch the dynamics.
inline Matrix bw_matrix() {
    Matrix m(4, 6);
    m(2, 0) = 1.0;
    m(3, 1) = 1.0;
    return m;
}

/// 2x4 performance output: position error only.
inline Matrix cz_matrix() {
    Matrix m(2, 4);
    m(0, 0) = 1.0;
    m(1, 1) = 1.0;
    return m;
}

/// Noisy range observation of the scheduling parameters. Error magnitude
/// interpolates [range_err_min, range_err_max] linearly in range; the
/// result is clamped to the box since the observer gain is certified only
/// there.
inline Rho range_measure(const State& s, double pi2, const ParameterBox& box,
                         const NoiseSpec& spec, Rng& rng) {
    const Rho truth = sigma_psi(s, pi2);
    auto bound = [&](double v, double lo, double hi) {
        double f = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        f = std::min(std::max(f, 0.0), 1.0);
        return spec.range_err_min + f * (spec.range_err_max - spec.range_err_min);
    };
    Rho noisy{truth.sigma + rng.symmetric(bound(truth.sigma, box.sigma_min, box.sigma_max)),
              truth.psi + rng.symmetric(bound(truth.psi, box.psi_min, box.psi_max))};
    return box.clamp(noisy);
}

/// Exogenous input sample: (d_x, d_y, n1..n4).
struct ExogenousSample {
    std::array<double, 6> w{};
};

/// Seeded generator for the exogenous vector, sampled once per hold
/// period. In band-limited mode each channel passes through a first-order
/// low-pass at the sample rate; the filter is a convex combination, so
/// samples stay inside the configured bounds. band_limit -> infinity
/// recovers the white sequence.
class NoiseGenerator {
public:
    NoiseGenerator(const NoiseSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
        spec_.validate();
        if (spec_.band_limit)
            alpha_ = std::exp(-(*spec_.band_limit) * spec_.sample_dt);
    }

    ExogenousSample next() {
        ExogenousSample s;
        for (int i = 0; i < 6; ++i) {
            const double bound = i < 2 ? spec_.process_bound : 1.0;
            const double draw = rng_.symmetric(bound);
            if (spec_.band_limit && primed_) {
                state_[i] = alpha_ * state_[i] + (1.0 - alpha_) * draw;
            } else {
                state_[i] = draw;
            }
            s.w[i] = state_[i];
        }
        primed_ = true;
        return s;
    }

    Rng& rng() { return rng_; }

private:
    NoiseSpec spec_;
    Rng rng_;
    double alpha_ = 0.0;
    bool primed_ = false;
    std::array<double, 6> state_{};
};

/// One-off white draw; band-limited sequences need the stateful generator.
inline ExogenousSample sample_exogenous(const NoiseSpec& spec, Rng& rng) {
    ExogenousSample s;
    for (int i = 0; i < 6; ++i)
        s.w[i] = rng.symmetric(i < 2 ? spec.process_bound : 1.0);
    return s;
}

} // namespace cislunav
