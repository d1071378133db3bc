#pragma once

// Feasibility of small dense LMI systems { G_i(theta) < 0 } with affine
// symmetric G_i, solved as a phase-I problem
//     minimize s   s.t.   G_i(theta) <= s * R_i
// by a log-det barrier Newton method on (theta, s). R_i = c_i * I with a
// per-constraint scale equalizes badly scaled blocks without changing the
// sign of the answer: s < 0 iff all constraints are strictly negative
// definite. Problem sizes here are tiny (tens of variables, blocks up to
// ~30x30), so exact Hessians are cheap.

#include <functional>
#include <vector>

#include "cislunav/linalg.hpp"

namespace cislunav {

/// Affine symmetric-matrix constraint G(theta) = constant + sum theta_k coeff[k].
struct LmiConstraint {
    Matrix constant;
    std::vector<Matrix> coeff; // one symmetric matrix per variable
    std::string name;

    Matrix value(std::span<const double> theta) const {
        Matrix g = constant;
        for (size_t k = 0; k < coeff.size(); ++k) {
            if (theta[k] == 0.0 || coeff[k].empty()) continue;
            g += theta[k] * coeff[k];
        }
        return g;
    }
};

struct LmiOptions {
    double margin_tol = 1e-9;   // resolve the sign of min s to this accuracy
    double early_exit = 0.0;    // stop once s < -early_exit (0 = solve to optimum)
    int max_newton = 200;
    int max_outer = 30;
    double t_init = 1.0;
    double t_factor = 12.0;
    // Variable box |theta_k| <= var_bound, added to the phase-I internally.
    // Without it the barrier runs off along semidefinite recession
    // directions (log det grows while s stalls); a face too far out wrecks
    // the Newton conditioning instead.
    double var_bound = 3e4;
    // Optional starting theta (interiority is arranged by lifting s).
    std::vector<double> warm_start;
};

struct LmiResult {
    bool feasible = false;           // a strictly feasible theta was found
    bool certified_infeasible = false; // barrier lower bound on min s is > 0
    bool numerical_failure = false;  // solver broke down before deciding
    std::vector<double> theta;
    double margin = 0.0;             // max_i lambda_max(G_i(theta)), < 0 if feasible
    double s_lower_bound = 0.0;      // barrier bound: min s >= this
    int worst_constraint = -1;
};

namespace detail {

// Zero-matrix coefficients are stored empty to skip work; treat them as 0.
inline bool coeff_empty(const Matrix& m) { return m.empty(); }

} // namespace detail

/// Phase-I barrier solve. nvars is the length of theta; every constraint
/// must carry exactly nvars coefficient slots (empty Matrix = zero).
inline LmiResult solve_lmi_feasibility(std::span<const LmiConstraint> user_constraints,
                                       int nvars, const LmiOptions& opts = {}) {
    LmiResult res;
    res.theta.assign(nvars, 0.0);
    if (user_constraints.empty()) {
        res.feasible = true;
        res.margin = -1.0;
        return res;
    }

    // Internal variable box theta_k in [-B, B], one 1x1 block per side.
    std::vector<LmiConstraint> constraints(user_constraints.begin(), user_constraints.end());
    const int nuser = static_cast<int>(user_constraints.size());
    const double bound = opts.var_bound;
    for (int k = 0; k < nvars; ++k) {
        for (double sign : {1.0, -1.0}) {
            LmiConstraint box;
            box.name = "var-box";
            box.constant = Matrix{{-bound}};
            box.coeff.resize(nvars);
            box.coeff[k] = Matrix{{sign}};
            constraints.push_back(std::move(box));
        }
    }
    const int ncon = static_cast<int>(constraints.size());

    // Per-constraint slack metric R_i = c_i I.
    std::vector<double> scale(ncon, 1.0);
    int total_dim = 0;
    for (int i = 0; i < ncon; ++i) {
        double c = max_abs(constraints[i].constant);
        for (const auto& m : constraints[i].coeff)
            if (!detail::coeff_empty(m)) c = std::max(c, max_abs(m));
        scale[i] = std::max(c, 1.0);
        total_dim += constraints[i].constant.rows();
    }

    // Current point: theta, s. Start strictly inside the barrier domain,
    // from the warm start when one is provided (s is lifted to cover it).
    std::vector<double> v(nvars + 1, 0.0);
    if (static_cast<int>(opts.warm_start.size()) == nvars) {
        for (int k = 0; k < nvars; ++k)
            v[k] = std::min(std::max(opts.warm_start[k], -0.9 * bound), 0.9 * bound);
    }
    {
        double s0 = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < ncon; ++i) {
            const double lam = sym_lambda_max(constraints[i].value(std::span(v).subspan(0, nvars)));
            s0 = std::max(s0, lam / scale[i]);
        }
        v[nvars] = s0 + 0.1 * std::abs(s0) + 0.1;
    }

    // Feasibility is judged on the user constraints; the box is internal.
    auto eval_margin = [&](std::span<const double> theta) {
        double worst = -std::numeric_limits<double>::infinity();
        int worst_i = -1;
        for (int i = 0; i < nuser; ++i) {
            const double lam = sym_lambda_max(constraints[i].value(theta));
            if (lam > worst) {
                worst = lam;
                worst_i = i;
            }
        }
        return std::pair<double, int>(worst, worst_i);
    };

    // Cholesky factors of S_i = s R_i - G_i(theta); returns false if any
    // S_i is not positive definite.
    auto factor_all = [&](std::span<const double> vv, std::vector<Matrix>& ls) {
        ls.clear();
        for (int i = 0; i < ncon; ++i) {
            Matrix s_i = -constraints[i].value(vv.subspan(0, nvars));
            const double sval = vv[nvars] * scale[i];
            for (int d = 0; d < s_i.rows(); ++d) s_i(d, d) += sval;
            auto l = chol_posdef(sym(s_i), 1e-300);
            if (!l) return false;
            ls.push_back(std::move(*l));
        }
        return true;
    };

    auto barrier_value = [&](std::span<const double> vv, double t, double& phi) {
        std::vector<Matrix> ls;
        if (!factor_all(vv, ls)) return false;
        double logdet = 0.0;
        for (const auto& l : ls)
            for (int d = 0; d < l.rows(); ++d) logdet += std::log(l(d, d));
        phi = t * vv[nvars] - 2.0 * logdet;
        return true;
    };

    const int nv = nvars + 1;
    std::vector<Matrix> ls;

    // Pick the initial barrier parameter so the starting point is already
    // near-central in s: t = d phi_barrier / d s there, which keeps the
    // first centering short instead of dragging s toward the t-small
    // center far away.
    double t = opts.t_init;
    {
        if (factor_all(v, ls)) {
            double dual = 0.0;
            for (int i = 0; i < ncon; ++i) {
                const Matrix& l = ls[i];
                const int dim = l.rows();
                // tr(S^-1) from the Cholesky factor.
                Matrix inv_cols = Matrix::identity(dim);
                for (int col = 0; col < dim; ++col)
                    for (int r = 0; r < dim; ++r) {
                        double sum = inv_cols(r, col);
                        for (int k = 0; k < r; ++k) sum -= l(r, k) * inv_cols(k, col);
                        inv_cols(r, col) = sum / l(r, r);
                    }
                double tr = 0.0;
                for (int r = 0; r < dim; ++r)
                    for (int c = 0; c < dim; ++c) tr += inv_cols(r, c) * inv_cols(r, c);
                dual += scale[i] * tr; // tr(S^-1) = ||L^-1||_F^2
            }
            t = std::max(opts.t_init, dual);
        }
    }

    bool centered = false;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
#ifdef CISLUNAV_LMI_TRACE
        std::fprintf(stderr, "[lmi] outer %d t=%g s=%g\n", outer, t, v[nvars]);
#endif
        // Newton centering at this t.
        centered = false;
        for (int it = 0; it < opts.max_newton; ++it) {
            if (!factor_all(v, ls)) {
                res.numerical_failure = true;
                break;
            }

            std::vector<double> grad(nv, 0.0);
            Matrix hess(nv, nv);
            grad[nvars] = t;

            for (int i = 0; i < ncon; ++i) {
                const auto& con = constraints[i];
                const int dim = con.constant.rows();
                const Matrix& l = ls[i];
                // W_a = L^{-1} dS/dv_a L^{-T}; grad and Hessian from traces.
                std::vector<Matrix> w;
                w.reserve(nv);
                Matrix eye = Matrix::identity(dim);
                // Solve L X = A then L X' = X^T per symmetric A.
                auto whiten = [&](const Matrix& a) {
                    // forward substitution twice: W = L^{-1} A L^{-T}
                    Matrix x = a;
                    // L X = A
                    for (int col = 0; col < dim; ++col) {
                        for (int r = 0; r < dim; ++r) {
                            double sum = x(r, col);
                            for (int k = 0; k < r; ++k) sum -= l(r, k) * x(k, col);
                            x(r, col) = sum / l(r, r);
                        }
                    }
                    // W L^T = X  =>  L W^T = X^T; operate on rows.
                    Matrix wt = x.transposed();
                    for (int col = 0; col < dim; ++col) {
                        for (int r = 0; r < dim; ++r) {
                            double sum = wt(r, col);
                            for (int k = 0; k < r; ++k) sum -= l(r, k) * wt(k, col);
                            wt(r, col) = sum / l(r, r);
                        }
                    }
                    return wt.transposed();
                };

                for (int a = 0; a < nvars; ++a) {
                    if (detail::coeff_empty(con.coeff[a])) {
                        w.push_back(Matrix());
                        continue;
                    }
                    // dS/dtheta_a = -coeff[a]
                    w.push_back(whiten(con.coeff[a]) * -1.0);
                }
                w.push_back(whiten(eye * scale[i])); // dS/ds = scale * I

                for (int a = 0; a < nv; ++a) {
                    if (w[a].empty()) continue;
                    grad[a] -= trace(w[a]); // d(-log det S)/dv = -tr(S^-1 dS/dv)
                    for (int b = a; b < nv; ++b) {
                        if (w[b].empty()) continue;
                        double dot = 0.0;
                        for (int r = 0; r < dim; ++r)
                            for (int ccol = 0; ccol < dim; ++ccol)
                                dot += w[a](r, ccol) * w[b](r, ccol);
                        hess(a, b) += dot;
                        if (b != a) hess(b, a) += dot;
                    }
                }
            }
            if (res.numerical_failure) break;

            // Regularize lightly and solve the Newton system.
            const double reg = 1e-12 * std::max(1.0, trace(hess) / nv);
            for (int a = 0; a < nv; ++a) hess(a, a) += reg;
            Matrix rhs(nv, 1);
            for (int a = 0; a < nv; ++a) rhs(a, 0) = -grad[a];
            Matrix step;
            try {
                step = solve_lu(hess, rhs);
            } catch (const SingularMatrixError&) {
                res.numerical_failure = true;
                break;
            }

            double decrement = 0.0;
            for (int a = 0; a < nv; ++a) decrement += -grad[a] * step(a, 0);
            if (!(decrement > 0.0)) {
                centered = true; // stationary (or numerically flat)
                break;
            }

            double phi0 = 0.0;
            if (!barrier_value(v, t, phi0)) {
                res.numerical_failure = true;
                break;
            }
            double alpha = 1.0;
            std::vector<double> trial(nv);
            bool moved = false;
            for (int bt = 0; bt < 60; ++bt) {
                for (int a = 0; a < nv; ++a) trial[a] = v[a] + alpha * step(a, 0);
                double phi1;
                if (barrier_value(trial, t, phi1) && phi1 <= phi0 - 1e-4 * alpha * decrement) {
                    v = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
#ifdef CISLUNAV_LMI_TRACE
            {
                double ph = 0.0, sn = 0.0, gn = 0.0;
                barrier_value(v, t, ph);
                for (int a = 0; a < nv; ++a) {
                    sn += step(a, 0) * step(a, 0);
                    gn += grad[a] * grad[a];
                }
                std::fprintf(stderr,
                             "[lmi]   it %d s=%.9g dec=%.3g a=%.3g phi=%.9g |d|=%.3g |g|=%.3g\n",
                             it, v[nvars], decrement, alpha, ph, std::sqrt(sn), std::sqrt(gn));
            }
#endif
            if (!moved) break;
            if (decrement * 0.5 < 1e-10) {
                centered = true;
                break;
            }

            if (opts.early_exit > 0.0 && v[nvars] < -opts.early_exit) {
                const auto [margin, worst] = eval_margin(std::span(v).subspan(0, nvars));
                if (margin < 0.0) {
                    res.feasible = true;
                    res.theta.assign(v.begin(), v.begin() + nvars);
                    res.margin = margin;
                    res.worst_constraint = worst;
                    return res;
                }
            }
        }
        if (res.numerical_failure) break;

        const double gap = total_dim / t;
        if (gap < opts.margin_tol * std::max(1.0, std::abs(v[nvars]))) break;
        t *= opts.t_factor;
    }

    const auto [margin, worst] = eval_margin(std::span(v).subspan(0, nvars));
    res.theta.assign(v.begin(), v.begin() + nvars);
    res.margin = margin;
    res.worst_constraint = worst;
    res.feasible = margin < 0.0;
    // Lower bound on min s, valid only near the central path; the factor 2
    // absorbs incomplete centering at small Newton decrement.
    double min_scale = scale[0];
    for (double c : scale) min_scale = std::min(min_scale, c);
    res.s_lower_bound = (v[nvars] - 2.0 * total_dim / t) * min_scale;
    double theta_peak = 0.0;
    for (int k = 0; k < nvars; ++k) theta_peak = std::max(theta_peak, std::abs(v[k]));
    const bool bound_limited = theta_peak > 0.3 * bound;
    if (!res.feasible && centered && !bound_limited && res.s_lower_bound > 0.0)
        res.certified_infeasible = true;
    if (!res.feasible && bound_limited) res.numerical_failure = true;
    return res;
}

} // namespace cislunav
