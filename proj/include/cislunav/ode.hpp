#pragma once

// Embedded Dormand-Prince 5(4) integration with adaptive step control.
// Sample times are honored exactly by clipping steps to land on them, so
// sampled output carries no interpolation error on top of the local error
// control.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cislunav/linalg.hpp"

namespace cislunav {

class IntegrationError : public NumericError {
public:
    IntegrationError(double t, const std::string& what) : NumericError(what), t(t) {}
    double t;
};

struct OdeOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double initial_step = 0.0; // 0 = choose automatically
    long max_steps = 100000000;
};

struct OdeSample {
    double t = 0.0;
    std::vector<double> y;
};

/// Forward-time adaptive stepper. The derivative callback fills dy from
/// (t, y); state dimension is fixed by the initial condition.
template <class F>
class RkIntegrator {
public:
    RkIntegrator(F f, std::vector<double> y0, double t0, OdeOptions opts = {})
        : f_(std::move(f)), y_(std::move(y0)), t_(t0), opts_(opts) {
        if (!(opts_.abs_tol > 0.0) || !(opts_.rel_tol > 0.0))
            throw NumericError("integrate: tolerances must be positive");
        n_ = y_.size();
        for (auto& k : k_) k.resize(n_);
        ytmp_.resize(n_);
        f_(t_, y_, k_[0]);
        h_ = opts_.initial_step;
    }

    double time() const { return t_; }
    const std::vector<double>& state() const { return y_; }

    /// Step until reaching t_end exactly. The derivative at t_end is left
    /// in the FSAL slot for the next segment.
    void advance_to(double t_end) {
        if (!(t_end >= t_) || !std::isfinite(t_end))
            throw NumericError("advance_to: target must be finite and >= current time");
        if (t_end == t_) return;
        if (h_ <= 0.0) h_ = initial_step_guess(t_end - t_);

        while (t_ < t_end) {
            double h = std::min(h_, t_end - t_);
            const bool clipped = (h < h_);
            if (++steps_ > opts_.max_steps)
                throw IntegrationError(t_, "integrate: max step count exceeded");
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_)))
                throw IntegrationError(t_, "integrate: step size underflow");

            const double err = try_step(h);
            if (err <= 1.0) {
                t_ = (t_ + h >= t_end && clipped) ? t_end : t_ + h;
                y_.swap(ytmp_);
                k_[0].swap(k_[6]); // FSAL
                const double grow = clipped ? 1.0 : safety_factor(err);
                if (!clipped) h_ = h * grow;
                else h_ = std::max(h_, h * safety_factor(err));
            } else {
                h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
            }
        }
    }

private:
    static double safety_factor(double err) {
        double f = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        return std::min(5.0, std::max(0.2, f));
    }

    double initial_step_guess(double span) const {
        double dy = 0.0, df = 0.0;
        for (size_t i = 0; i < n_; ++i) {
            dy = std::max(dy, std::abs(y_[i]));
            df = std::max(df, std::abs(k_[0][i]));
        }
        double h = (df > 0.0) ? 0.01 * (dy + opts_.abs_tol) / df : 1e-6 * span;
        h = std::min(h, 0.1 * span);
        return std::max(h, 1e-12 * span);
    }

    // One trial step of size h; fills ytmp_ with the 5th-order result and
    // k_[6] with the end-point derivative. Returns the scaled error norm.
    double try_step(double h) {
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                                a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

        const auto& y = y_;
        auto& k = k_;

        for (size_t i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * a21 * k[0][i];
        f_(t_ + c2 * h, ytmp_, k[1]);
        for (size_t i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
        f_(t_ + c3 * h, ytmp_, k[2]);
        for (size_t i = 0; i < n_; ++i)
            ytmp_[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
        f_(t_ + c4 * h, ytmp_, k[3]);
        for (size_t i = 0; i < n_; ++i)
            ytmp_[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
        f_(t_ + c5 * h, ytmp_, k[4]);
        for (size_t i = 0; i < n_; ++i)
            ytmp_[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] +
                                   a65 * k[4][i]);
        f_(t_ + h, ytmp_, k[5]);
        for (size_t i = 0; i < n_; ++i)
            ytmp_[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] +
                                   b6 * k[5][i]);
        f_(t_ + h, ytmp_, k[6]);

        double err2 = 0.0;
        for (size_t i = 0; i < n_; ++i) {
            const double e = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] +
                                  e6 * k[5][i] + e7 * k[6][i]);
            const double sc = opts_.abs_tol +
                              opts_.rel_tol * std::max(std::abs(y[i]), std::abs(ytmp_[i]));
            err2 += (e / sc) * (e / sc);
        }
        return std::sqrt(err2 / static_cast<double>(n_));
    }

    F f_;
    std::vector<double> y_;
    double t_;
    OdeOptions opts_;
    size_t n_ = 0;
    double h_ = 0.0;
    long steps_ = 0;
    std::vector<double> k_[7];
    std::vector<double> ytmp_;
};

/// Integrate y' = f(t, y) from t0, returning the state at each requested
/// sample time (ascending, first >= t0).
template <class F>
std::vector<OdeSample> integrate(std::span<const double> y0, double t0,
                                 std::span<const double> sample_times, F&& f,
                                 const OdeOptions& opts = {}) {
    for (size_t i = 0; i < sample_times.size(); ++i) {
        if (!std::isfinite(sample_times[i]) || sample_times[i] < t0 ||
            (i > 0 && sample_times[i] < sample_times[i - 1]))
            throw NumericError("integrate: sample times must be ascending and >= t0");
    }
    RkIntegrator<std::decay_t<F>> rk(std::forward<F>(f),
                                     std::vector<double>(y0.begin(), y0.end()), t0, opts);
    std::vector<OdeSample> out;
    out.reserve(sample_times.size());
    for (double ts : sample_times) {
        rk.advance_to(ts);
        out.push_back({ts, rk.state()});
    }
    return out;
}

} // namespace cislunav
