#pragma once

// Observer-gain synthesis for the parameter-dependent error dynamics
//   de/dt = (A(rho) + L C_y(rho)) e + (B_w + L D_w(rho)) w,   z = C_z e.
//
// A single gain L and Lyapunov matrix P are certified jointly over a grid
// of the parameter box through the bounded-real-lemma LMI, linear in
// (P, Y = P L, gamma^2); gamma is minimized by bisection. A constant
// D-scale iteration refines the gain against the structured form of the
// parameter dependence (repeated-scalar blocks from the LFT realization),
// alternating gain synthesis on the scaled interconnection with per-block
// scale optimization. Certificates are re-checked a posteriori on dense
// random parameter samples; shortfalls are reported, never hidden.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cislunav/cr3bp.hpp"
#include "cislunav/lft.hpp"
#include "cislunav/linalg.hpp"
#include "cislunav/lmi.hpp"
#include "cislunav/plant_lft.hpp"
#include "cislunav/rng.hpp"
#include "cislunav/sensing.hpp"

namespace cislunav {

class SynthesisError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Closed-loop error-dynamics matrices at a frozen parameter point.
struct ErrorSystem {
    Matrix acl; // 4x4  A(rho) + L C_y(rho)
    Matrix bcl; // 4x6  B_w + L D_w(rho)
    Matrix cz;  // 2x4
};

namespace detail {

// Channel weights for synthesis. A degenerate box coordinate pins the
// weight at eta_min, the continuous limit of the linear interpolation.
inline std::array<double, 4> synthesis_weights(const Rho& rho, const ParameterBox& box,
                                               const NoiseSpec& spec) {
    if (!box.degenerate()) return noise_weights(rho, box, spec);
    auto one = [&](double v, double lo, double hi, double alpha) {
        if (spec.weight_model == WeightModel::quadratic) return std::sqrt(alpha) * v;
        if (hi <= lo) return spec.eta_min;
        return lerp_weight(v, lo, hi, spec.eta_min, spec.eta_max);
    };
    std::array<double, 4> w{};
    w[0] = w[1] = one(rho.sigma, box.sigma_min, box.sigma_max, spec.alpha_sigma);
    w[2] = w[3] = one(rho.psi, box.psi_min, box.psi_max, spec.alpha_psi);
    return w;
}

struct FrozenPlant {
    Matrix a;   // 4x4
    Matrix c_y; // 4x4
    Matrix d_w; // 4x6
};

inline FrozenPlant frozen_plant(const Rho& rho, double pi2, const ParameterBox& box,
                                const NoiseSpec& spec) {
    return {lpv_matrices(rho, pi2).a, measurement_matrices(rho, pi2).c_y,
            dw_matrix(synthesis_weights(rho, box, spec))};
}

} // namespace detail

inline ErrorSystem error_dynamics(const Rho& rho, const Matrix& l, double pi2,
                                  const ParameterBox& box, const NoiseSpec& spec) {
    if (!box.contains(rho))
        throw NumericError("error_dynamics: rho outside the parameter box");
    const auto fp = detail::frozen_plant(rho, pi2, box, spec);
    return {fp.a + l * fp.c_y, bw_matrix() + l * fp.d_w, cz_matrix()};
}

/// Stability via the Lyapunov test: A is Hurwitz with margin 1e-9 iff
/// A' = A + 1e-9 I admits P > 0 with A'^T P + P A' = -I. Solving the
/// Kronecker system keeps the kernel free of nonsymmetric eigensolvers;
/// a singular system (eigenvalue pair summing to zero) is not Hurwitz.
inline bool hurwitz(const Matrix& a) {
    detail::require_square(a, "hurwitz");
    const int n = a.rows();
    Matrix as = a;
    for (int i = 0; i < n; ++i) as(i, i) += 1e-9;

    Matrix kron(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                // vec(A^T P): (I kron A^T); vec(P A): (A^T kron I)
                kron(i * n + j, k * n + j) += as(k, i);
                kron(i * n + j, i * n + k) += as(k, j);
            }
    Matrix rhs(n * n, 1);
    for (int i = 0; i < n; ++i) rhs(i * n + i, 0) = -1.0;

    Matrix pvec;
    try {
        pvec = solve_lu(kron, rhs);
    } catch (const SingularMatrixError&) {
        return false;
    }
    Matrix p(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p(i, j) = pvec(i * n + j, 0);
    p = sym(p);
    const Matrix residual = as.transposed() * p + p * as + Matrix::identity(n);
    if (max_abs(residual) > 1e-6 * (1.0 + max_abs(p) * max_abs(as))) return false;
    return chol_posdef(p, 1e-12).has_value();
}

/// Bounded-real-lemma block for a given (P, gamma) at fixed closed-loop
/// matrices; negative definiteness certifies the norm bound.
inline Matrix brl_matrix(const ErrorSystem& es, const Matrix& p, double gamma) {
    const int n = es.acl.rows(), m = es.bcl.cols();
    Matrix g(n + m, n + m);
    g.set_block(0, 0, sym(es.acl.transposed() * p + p * es.acl) + es.cz.transposed() * es.cz);
    const Matrix pb = p * es.bcl;
    g.set_block(0, n, pb);
    g.set_block(n, 0, pb.transposed());
    for (int i = 0; i < m; ++i) g(n + i, n + i) = -gamma * gamma;
    return g;
}

struct BrlResult {
    bool feasible = false;
    bool certified_infeasible = false;
    bool numerical_failure = false;
    Matrix p;           // SPD certificate when feasible
    double margin = 0.0; // lambda_max of the LMI block at the returned P
};

namespace detail {

inline std::vector<Matrix> sym_basis(int n) {
    std::vector<Matrix> basis;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            Matrix e(n, n);
            e(i, j) = 1.0;
            e(j, i) = 1.0;
            basis.push_back(e);
        }
    return basis;
}

inline Matrix unpack_sym(std::span<const double> theta, int n) {
    Matrix p(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            p(i, j) = theta[k];
            p(j, i) = theta[k];
            ++k;
        }
    return p;
}

inline Matrix unpack_full(std::span<const double> theta, int offset, int r, int c) {
    Matrix y(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) y(i, j) = theta[offset + i * c + j];
    return y;
}

inline constexpr double kPFloor = 1e-10;
inline constexpr int kPVars = 10;  // vech of 4x4
inline constexpr int kYVars = 16;  // full 4x4
inline constexpr int kSynthVars = kPVars + kYVars;

// P-positivity as an LMI constraint: eps I - P <= 0.
inline LmiConstraint p_floor_constraint(int nvars) {
    LmiConstraint con;
    con.name = "P-floor";
    con.constant = kPFloor * Matrix::identity(4);
    con.coeff.resize(nvars);
    int k = 0;
    for (const auto& e : sym_basis(4)) con.coeff[k++] = -e;
    return con;
}

// Synthesis BRL at one frozen plant, linear in (vech P, vec Y):
// [[A^T P + P A + Y C + C^T Y^T + Cz^T Cz,  P Bw + Y Dw],
//  [*,                                      -gamma^2 I]] < 0.
inline LmiConstraint synth_constraint(const FrozenPlant& fp, double gamma,
                                      const std::string& name) {
    const Matrix bw = bw_matrix();
    const Matrix cz = cz_matrix();
    LmiConstraint con;
    con.name = name;
    con.coeff.resize(kSynthVars);
    con.constant = Matrix(10, 10);
    con.constant.set_block(0, 0, cz.transposed() * cz);
    for (int i = 4; i < 10; ++i) con.constant(i, i) = -gamma * gamma;

    int k = 0;
    for (const auto& e : sym_basis(4)) {
        Matrix g(10, 10);
        g.set_block(0, 0, fp.a.transposed() * e + e * fp.a);
        const Matrix eb = e * bw;
        g.set_block(0, 4, eb);
        g.set_block(4, 0, eb.transposed());
        con.coeff[k++] = g;
    }
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            Matrix f(4, 4);
            f(r, c) = 1.0;
            Matrix g(10, 10);
            const Matrix fc = f * fp.c_y;
            g.set_block(0, 0, fc + fc.transposed());
            const Matrix fd = f * fp.d_w;
            g.set_block(0, 4, fd);
            g.set_block(4, 0, fd.transposed());
            con.coeff[k++] = g;
        }
    return con;
}

// Analysis BRL at fixed closed loop, linear in vech P only.
inline LmiConstraint analysis_constraint(const ErrorSystem& es, double gamma,
                                         const std::string& name) {
    const int n = es.acl.rows(), m = es.bcl.cols();
    LmiConstraint con;
    con.name = name;
    con.coeff.resize(n * (n + 1) / 2);
    con.constant = Matrix(n + m, n + m);
    con.constant.set_block(0, 0, es.cz.transposed() * es.cz);
    for (int i = 0; i < m; ++i) con.constant(n + i, n + i) = -gamma * gamma;
    int k = 0;
    for (const auto& e : sym_basis(n)) {
        Matrix g(n + m, n + m);
        g.set_block(0, 0, es.acl.transposed() * e + e * es.acl);
        const Matrix eb = e * es.bcl;
        g.set_block(0, n, eb);
        g.set_block(n, 0, eb.transposed());
        con.coeff[k++] = g;
    }
    return con;
}

inline LmiConstraint analysis_p_floor(int n = 4) {
    LmiConstraint con;
    con.name = "P-floor";
    con.constant = kPFloor * Matrix::identity(n);
    con.coeff.resize(n * (n + 1) / 2);
    int k = 0;
    for (const auto& e : sym_basis(n)) con.coeff[k++] = -e;
    return con;
}

struct GammaBisect {
    bool ok = false;
    double gamma = 0.0;          // certified-feasible upper end
    double gamma_infeasible = 0.0; // last level that failed (0 if none tested)
    std::vector<double> theta;
    double margin = 0.0;
    int worst_constraint = -1;
    bool lo_certified = false;
};

// Geometric bisection of gamma between certified-infeasible and
// certified-feasible levels, relative gap rel_tol. make(gamma) builds the
// constraint set; the final solve runs to the barrier optimum so the
// returned point carries the maximum uniform margin at that gamma.
template <class MakeCons>
GammaBisect bisect_gamma(MakeCons&& make, int nvars, double lo, double hi, double rel_tol) {
    LmiOptions fast;
    fast.early_exit = 1e-9;

    GammaBisect out;
    auto cons_hi = make(hi);
    LmiResult rhi = solve_lmi_feasibility(cons_hi, nvars, fast);
    if (!rhi.feasible) {
        out.worst_constraint = rhi.worst_constraint;
        out.gamma_infeasible = hi;
        return out;
    }
    std::vector<double> warm = rhi.theta; // feasible point at the hi end

    fast.warm_start = warm;
    auto rl = solve_lmi_feasibility(make(lo), nvars, fast);
    if (rl.feasible) {
        hi = lo; // optimum below the requested floor; keep the floor
        warm = rl.theta;
    } else {
        out.gamma_infeasible = lo;
        out.lo_certified = rl.certified_infeasible;
        while (hi - lo > rel_tol * lo) {
            const double mid = std::sqrt(lo * hi);
            if (mid <= lo || mid >= hi) break;
            fast.warm_start = warm;
            auto rm = solve_lmi_feasibility(make(mid), nvars, fast);
            if (rm.feasible) {
                hi = mid;
                warm = rm.theta;
            } else {
                lo = mid;
                out.gamma_infeasible = mid;
                out.lo_certified = rm.certified_infeasible;
            }
        }
    }

    // Max-margin certificate at the accepted level; inflate slightly if the
    // full solve lands on the boundary.
    LmiOptions full;
    full.warm_start = warm;
    for (int attempt = 0; attempt < 4; ++attempt) {
        LmiResult rf = solve_lmi_feasibility(make(hi), nvars, full);
        if (rf.feasible) {
            out.ok = true;
            out.gamma = hi;
            out.theta = rf.theta;
            out.margin = rf.margin;
            out.worst_constraint = rf.worst_constraint;
            return out;
        }
        hi *= 1.0 + rel_tol;
    }
    return out;
}

} // namespace detail

/// Feasibility of the norm certificate at fixed closed-loop matrices:
/// returns an SPD P satisfying the BRL block, a certified infeasibility,
/// or a numerical-failure flag when the solver could not decide.
inline BrlResult brl_certify(const Matrix& acl, const Matrix& bcl, const Matrix& cz,
                             double gamma) {
    if (!(gamma > 0)) throw NumericError("brl_certify: gamma must be positive");
    const int n = acl.rows();
    ErrorSystem es{acl, bcl, cz};
    std::vector<LmiConstraint> cons;
    cons.push_back(detail::analysis_constraint(es, gamma, "brl"));
    cons.push_back(detail::analysis_p_floor(n));
    LmiOptions opts;
    opts.early_exit = 1e-9;
    const LmiResult r = solve_lmi_feasibility(cons, n * (n + 1) / 2, opts);
    BrlResult out;
    out.numerical_failure = r.numerical_failure;
    out.certified_infeasible = r.certified_infeasible;
    out.feasible = r.feasible;
    if (r.feasible) {
        out.p = detail::unpack_sym(r.theta, n);
        out.margin = sym_lambda_max(brl_matrix(es, out.p, gamma));
    }
    return out;
}

struct NormOptions {
    double w_min = 1e-3;
    double w_max = 1e3;
    int points = 400;
    int refine_rounds = 3;
    int refine_points = 40;
    bool check_hurwitz = true;
};

/// Peak gain over a logarithmic frequency grid with local refinement
/// around the peak; DC and the direct feedthrough are always included.
inline double hinf_norm_grid(const Matrix& a, const Matrix& b, const Matrix& c,
                             const Matrix& d, const NormOptions& opts = {}) {
    if (opts.check_hurwitz && !hurwitz(a))
        throw SynthesisError("hinf_norm_grid: system is not Hurwitz");

    double best_w = 0.0;
    double best = max_sv_freq(a, b, c, d, 0.0);
    {
        ComplexMatrix dd(d, Matrix(d.rows(), d.cols()));
        best = std::max(best, max_singular_value(dd)); // w -> infinity limit
    }
    const double logmin = std::log10(opts.w_min), logmax = std::log10(opts.w_max);
    auto eval_grid = [&](double lo, double hi, int n) {
        for (int i = 0; i <= n; ++i) {
            const double w = std::pow(10.0, lo + (hi - lo) * i / n);
            const double sv = max_sv_freq(a, b, c, d, w);
            if (sv > best) {
                best = sv;
                best_w = w;
            }
        }
    };
    eval_grid(logmin, logmax, opts.points);
    double half = (logmax - logmin) / opts.points;
    for (int round = 0; round < opts.refine_rounds; ++round) {
        if (best_w == 0.0) break; // peak at DC
        const double lw = std::log10(best_w);
        eval_grid(lw - half, lw + half, opts.refine_points);
        half = 2.0 * half / opts.refine_points;
    }
    return best;
}

inline double hinf_norm_grid(const Matrix& a, const Matrix& b, const Matrix& c,
                             const NormOptions& opts = {}) {
    return hinf_norm_grid(a, b, c, Matrix(c.rows(), b.cols()), opts);
}

struct SynthesisOptions {
    int grid_density = 3;          // N x N tensor grid (corners, edges, center at 3)
    double gamma_lo = 1e-3;
    double gamma_hi = 1e4;
    double gamma_rel_tol = 1e-3;
    int certify_samples = 10000;
    std::uint64_t certify_seed = 0xC157AC;
    int dk_max_rounds = 20;
    double dk_budget_factor = 1.1; // grid-certificate budget during scaled synthesis
    double dk_improve_tol = 1e-4;  // relative improvement needed to continue
    NormOptions norm;
};

struct CertificationReport {
    int samples = 0;
    int brl_pass = 0;
    int hurwitz_pass = 0;
    int norm_pass = 0;
    double worst_norm_ratio = 0.0; // max over samples of norm / gamma
    double worst_brl_margin = -std::numeric_limits<double>::infinity();
    std::vector<Rho> violations;   // up to 20 offending samples

    double pass_rate() const {
        if (samples == 0) return 1.0;
        return static_cast<double>(std::min({brl_pass, hurwitz_pass, norm_pass})) / samples;
    }
};

/// Synthesized gain with its certificate and provenance.
struct ObserverGain {
    Matrix l;    // 4x4
    Matrix p;    // 4x4 SPD, common over the grid
    double gamma = 0.0;
    std::vector<Rho> grid;
    std::string method; // "hinf" | "dk-scaled"

    // Scaled-iteration record (dk only).
    std::vector<double> gamma_sequence;
    double gamma_scaled = std::numeric_limits<double>::quiet_NaN();
    double d_sigma = 1.0, d_psi = 1.0;

    std::vector<DeltaBlock> delta_structure;
    CertificationReport certification;
};

inline std::vector<Rho> make_rho_grid(const ParameterBox& box, int density) {
    if (density < 1) throw NumericError("make_rho_grid: density must be >= 1");
    auto axis = [&](double lo, double hi) {
        std::vector<double> v;
        if (hi <= lo || density == 1) {
            v.push_back(lo);
            return v;
        }
        for (int i = 0; i < density; ++i) v.push_back(lo + (hi - lo) * i / (density - 1));
        return v;
    };
    std::vector<Rho> grid;
    for (double s : axis(box.sigma_min, box.sigma_max))
        for (double p : axis(box.psi_min, box.psi_max)) grid.push_back({s, p});
    return grid;
}

/// A-posteriori certification of a gain over dense random interior
/// samples: BRL negativity with the stored (P, gamma), Hurwitz stability,
/// and frequency-grid norm against gamma (1 + 1e-6).
inline CertificationReport certify_gain(const ObserverGain& gain, const ParameterBox& box,
                                        double pi2, const NoiseSpec& spec, int samples,
                                        std::uint64_t seed, const NormOptions& norm_opts = {}) {
    CertificationReport rep;
    rep.samples = samples;
    Rng rng(seed);
    NormOptions nopt = norm_opts;
    nopt.check_hurwitz = false;
    const double tol = gain.gamma * (1.0 + 1e-6);
    for (int k = 0; k < samples; ++k) {
        const Rho rho{rng.uniform(box.sigma_min, box.sigma_max),
                      rng.uniform(box.psi_min, box.psi_max)};
        const ErrorSystem es = error_dynamics(rho, gain.l, pi2, box, spec);
        bool ok = true;

        const double margin = sym_lambda_max(brl_matrix(es, gain.p, gain.gamma));
        rep.worst_brl_margin = std::max(rep.worst_brl_margin, margin);
        if (margin < 0.0) ++rep.brl_pass;
        else ok = false;

        if (hurwitz(es.acl)) {
            ++rep.hurwitz_pass;
            const double nrm = hinf_norm_grid(es.acl, es.bcl, es.cz, nopt);
            rep.worst_norm_ratio = std::max(rep.worst_norm_ratio, nrm / gain.gamma);
            if (nrm <= tol) ++rep.norm_pass;
            else ok = false;
        } else {
            ok = false;
        }

        if (!ok && rep.violations.size() < 20) rep.violations.push_back(rho);
    }
    return rep;
}

/// Gain synthesis by gamma-bisection over the gridded box with a common
/// (P, L); the returned certificate is the feasible end of the bracket and
/// P is re-centered at that level for maximum uniform margin.
inline ObserverGain synthesize_hinf(const ParameterBox& box, double pi2, const NoiseSpec& spec,
                                    const SynthesisOptions& opts = {}) {
    box.validate();
    spec.validate();
    if (opts.grid_density < 2 && !box.degenerate())
        throw NumericError("synthesize_hinf: grid density must be >= 2");

    const auto grid = make_rho_grid(box, box.degenerate() ? 1 : opts.grid_density);
    std::vector<detail::FrozenPlant> plants;
    for (const auto& rho : grid) plants.push_back(detail::frozen_plant(rho, pi2, box, spec));

    auto make = [&](double gamma) {
        std::vector<LmiConstraint> cons;
        for (size_t i = 0; i < plants.size(); ++i)
            cons.push_back(detail::synth_constraint(plants[i], gamma, "grid-" + std::to_string(i)));
        cons.push_back(detail::p_floor_constraint(detail::kSynthVars));
        return cons;
    };

    const auto bis = detail::bisect_gamma(make, detail::kSynthVars, opts.gamma_lo,
                                          opts.gamma_hi, opts.gamma_rel_tol);
    if (!bis.ok) {
        std::string msg = "synthesize_hinf: infeasible at gamma_hi";
        if (bis.worst_constraint >= 0 && bis.worst_constraint < static_cast<int>(grid.size())) {
            const Rho& r = grid[bis.worst_constraint];
            msg += " (worst grid point sigma=" + std::to_string(r.sigma) +
                   " psi=" + std::to_string(r.psi) + ")";
        }
        throw SynthesisError(msg);
    }

    ObserverGain gain;
    gain.method = "hinf";
    gain.gamma = bis.gamma;
    gain.grid = grid;
    gain.p = detail::unpack_sym(bis.theta, 4);
    const Matrix y = detail::unpack_full(bis.theta, detail::kPVars, 4, 4);
    gain.l = solve_lu(gain.p, y); // L = P^{-1} Y

    if (!box.degenerate())
        gain.delta_structure = build_error_lft(box, pi2, spec).stacked.counts();

    // The synthesis LMI margin certifies every grid point; record it.
    for (size_t i = 0; i < grid.size(); ++i) {
        const ErrorSystem es = error_dynamics(grid[i], gain.l, pi2, box, spec);
        if (sym_lambda_max(brl_matrix(es, gain.p, gain.gamma)) >= 0.0)
            throw SynthesisError("synthesize_hinf: certificate lost at a grid point");
    }

    gain.certification = certify_gain(gain, box, pi2, spec, opts.certify_samples,
                                      opts.certify_seed, opts.norm);
    return gain;
}

// ---------------------------------------------------------------------------
// Constant-D-scale iteration.
// ---------------------------------------------------------------------------

namespace detail {

// Static interconnection of the error-dynamics LFT around the box center:
// channels (q, w) -> (p, z) with the structured blocks open. Slices of the
// stacked realization [[A, Bw], [Cy, Dw]] (8 x 10) with delta channels.
struct DkInterconnect {
    Matrix m11;    // p x p
    Matrix m12_e;  // p x 4
    Matrix m12_w;  // p x 6
    Matrix b_q;    // 4 x p
    Matrix d_yq;   // 4 x p
    Matrix a0;     // 4 x 4 nominal
    Matrix b_w0;   // 4 x 6
    Matrix c_y0;   // 4 x 4
    Matrix d_w0;   // 4 x 6
    std::vector<DeltaBlock> structure;
    std::vector<double> dvec_template; // per-channel label index (0 = sigma, 1 = psi)

    int delta_dim() const { return m11.rows(); }

    std::vector<double> dvec(double d_sigma, double d_psi) const {
        std::vector<double> v(dvec_template.size());
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = dvec_template[i] == 0.0 ? d_sigma : d_psi;
        return v;
    }
};

inline DkInterconnect dk_interconnect(const ErrorLft& err) {
    const LftModel& m = err.stacked;
    const int p = m.delta_dim();
    DkInterconnect ic;
    ic.m11 = m.m11();
    ic.m12_e = m.m12().block(0, 0, p, 4);
    ic.m12_w = m.m12().block(0, 4, p, 6);
    ic.b_q = m.m21().block(0, 0, 4, p);
    ic.d_yq = m.m21().block(4, 0, 4, p);
    ic.a0 = m.m22().block(0, 0, 4, 4);
    ic.b_w0 = m.m22().block(0, 4, 4, 6);
    ic.c_y0 = m.m22().block(4, 0, 4, 4);
    ic.d_w0 = m.m22().block(4, 4, 4, 6);
    ic.structure = m.structure();
    for (const auto& blk : m.structure())
        for (int k = 0; k < blk.count; ++k)
            ic.dvec_template.push_back(blk.label == err.sigma.label ? 0.0 : 1.0);
    return ic;
}

// Scaled augmented generalized plant for given per-channel scales:
// inputs (w, q^), outputs (z, p^) with D p-side, D^{-1} q-side, identity on
// the performance channels.
struct DkScaledPlant {
    Matrix b_aug;  // 4 x (6+p): [B_w0 | B_q D^-1]
    Matrix d_aug;  // 4 x (6+p): [D_w0 | D_yq D^-1]  (measurement side)
    Matrix c_aug;  // (2+p) x 4: [Cz; D M12_e]
    Matrix dd_aug; // (2+p) x (6+p): [[0, 0], [D M12_w, D M11 D^-1]]
};

inline DkScaledPlant dk_scaled_plant(const DkInterconnect& ic, const std::vector<double>& d) {
    const int p = ic.delta_dim();
    auto col_scaled = [&](const Matrix& m, bool invert) {
        Matrix out = m;
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < p; ++j) out(i, j) = invert ? out(i, j) / d[j] : out(i, j) * d[j];
        return out;
    };
    auto row_scaled = [&](const Matrix& m) {
        Matrix out = m;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < out.cols(); ++j) out(i, j) *= d[i];
        return out;
    };
    DkScaledPlant sp;
    sp.b_aug = hstack({ic.b_w0, col_scaled(ic.b_q, true)});
    sp.d_aug = hstack({ic.d_w0, col_scaled(ic.d_yq, true)});
    sp.c_aug = vstack({cz_matrix(), row_scaled(ic.m12_e)});
    Matrix lower = hstack({row_scaled(ic.m12_w), col_scaled(row_scaled(ic.m11), true)});
    sp.dd_aug = vstack({Matrix(2, 6 + p), lower});
    return sp;
}

// BRL with feedthrough for the scaled augmented plant, linear in
// (vech P, vec Y):
// [[A0^T P + P A0 + Y Cy0 + Cy0^T Y^T + C^T C,  P B + Y D + C^T Dd],
//  [*,                                          Dd^T Dd - gamma^2 I]] < 0.
inline LmiConstraint dk_constraint(const DkInterconnect& ic, const DkScaledPlant& sp,
                                   double gamma) {
    const int p = ic.delta_dim();
    const int nin = 6 + p;
    const int dim = 4 + nin;
    LmiConstraint con;
    con.name = "dk-scaled";
    con.coeff.resize(kSynthVars);
    con.constant = Matrix(dim, dim);
    con.constant.set_block(0, 0, sp.c_aug.transposed() * sp.c_aug);
    con.constant.set_block(0, 4, sp.c_aug.transposed() * sp.dd_aug);
    con.constant.set_block(4, 0, sp.dd_aug.transposed() * sp.c_aug);
    Matrix tail = sp.dd_aug.transposed() * sp.dd_aug;
    for (int i = 0; i < nin; ++i) tail(i, i) -= gamma * gamma;
    con.constant.set_block(4, 4, tail);

    int k = 0;
    for (const auto& e : sym_basis(4)) {
        Matrix g(dim, dim);
        g.set_block(0, 0, ic.a0.transposed() * e + e * ic.a0);
        const Matrix eb = e * sp.b_aug;
        g.set_block(0, 4, eb);
        g.set_block(4, 0, eb.transposed());
        con.coeff[k++] = g;
    }
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            Matrix f(4, 4);
            f(r, c) = 1.0;
            Matrix g(dim, dim);
            const Matrix fc = f * ic.c_y0;
            g.set_block(0, 0, fc + fc.transposed());
            const Matrix fd = f * sp.d_aug;
            g.set_block(0, 4, fd);
            g.set_block(4, 0, fd.transposed());
            con.coeff[k++] = g;
        }
    return con;
}

// Frequency-domain scaled norm of the closed loop under a fixed gain.
inline double dk_scaled_norm(const DkInterconnect& ic, const Matrix& l,
                             const std::vector<double>& d, const NormOptions& opts) {
    const DkScaledPlant sp = dk_scaled_plant(ic, d);
    const Matrix acl = ic.a0 + l * ic.c_y0;
    const Matrix bcl = sp.b_aug + l * sp.d_aug;
    return hinf_norm_grid(acl, bcl, sp.c_aug, sp.dd_aug, opts);
}

} // namespace detail

/// Constant-D-scale iteration on the structured interconnection around the
/// box center: alternates (i) gain synthesis on the D-scaled augmented
/// plant (subject to the grid certificate staying within a budget of the
/// plain synthesis), and (ii) per-block scale optimization for the current
/// gain. The scaled-gamma sequence is kept non-increasing by accepting
/// only improving iterates; the final gain is re-certified on the plain
/// grid BRL, which is the certificate stored in the artifact.
inline ObserverGain dk_iterate(const ParameterBox& box, double pi2, const NoiseSpec& spec,
                               const SynthesisOptions& opts = {}) {
    box.validate();
    if (box.degenerate())
        throw NumericError("dk_iterate: degenerate box carries no uncertainty structure");
    spec.validate();

    // Plain synthesis fixes the grid-certificate budget and the fallback.
    SynthesisOptions base = opts;
    base.certify_samples = 0; // certification deferred to the final gain
    const ObserverGain plain = synthesize_hinf(box, pi2, spec, base);
    const double gamma_budget = plain.gamma * opts.dk_budget_factor;

    const ErrorLft err = build_error_lft(box, pi2, spec);
    const auto ic = detail::dk_interconnect(err);
    const auto grid = plain.grid;
    std::vector<detail::FrozenPlant> plants;
    for (const auto& rho : grid) plants.push_back(detail::frozen_plant(rho, pi2, box, spec));

    NormOptions coarse = opts.norm;
    coarse.points = 150;
    coarse.refine_rounds = 2;
    coarse.check_hurwitz = false;

    // K-step: bisect the scaled level over (P, Y) subject to the grid
    // budget; returns the gain recovered from the optimal-margin point.
    auto k_step = [&](const std::vector<double>& d, Matrix& l_out, double& gamma_out) {
        const auto sp = detail::dk_scaled_plant(ic, d);
        auto make = [&](double gamma) {
            std::vector<LmiConstraint> cons;
            cons.push_back(detail::dk_constraint(ic, sp, gamma));
            for (size_t i = 0; i < plants.size(); ++i)
                cons.push_back(detail::synth_constraint(plants[i], gamma_budget,
                                                        "budget-" + std::to_string(i)));
            cons.push_back(detail::p_floor_constraint(detail::kSynthVars));
            return cons;
        };
        const auto bis = detail::bisect_gamma(make, detail::kSynthVars, opts.gamma_lo,
                                              opts.gamma_hi, opts.gamma_rel_tol);
        if (!bis.ok) return false;
        const Matrix p = detail::unpack_sym(bis.theta, 4);
        const Matrix y = detail::unpack_full(bis.theta, detail::kPVars, 4, 4);
        l_out = solve_lu(p, y);
        gamma_out = bis.gamma;
        return true;
    };

    // D-step: coordinate golden-section on the log-scales for a fixed gain.
    auto d_step = [&](const Matrix& l, double& d_sigma, double& d_psi) {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        auto objective = [&](double ds, double dp) {
            return detail::dk_scaled_norm(ic, l, ic.dvec(ds, dp), coarse);
        };
        double best = objective(d_sigma, d_psi);
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (int coord = 0; coord < 2; ++coord) {
                double lo = -3.0, hi = 3.0;
                double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
                auto at = [&](double lg) {
                    return coord == 0 ? objective(std::pow(10.0, lg), d_psi)
                                      : objective(d_sigma, std::pow(10.0, lg));
                };
                double f1 = at(x1), f2 = at(x2);
                for (int it = 0; it < 24; ++it) {
                    if (f1 <= f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - phi * (hi - lo);
                        f1 = at(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + phi * (hi - lo);
                        f2 = at(x2);
                    }
                }
                const double cand = std::pow(10.0, 0.5 * (lo + hi));
                const double fc = coord == 0 ? objective(cand, d_psi) : objective(d_sigma, cand);
                if (fc < best) {
                    best = fc;
                    (coord == 0 ? d_sigma : d_psi) = cand;
                }
            }
        }
    };

    std::vector<double> gamma_seq;
    Matrix l_best;
    double d_sigma = 1.0, d_psi = 1.0;

    // Iterate 0: identity scales.
    {
        Matrix l0;
        double g0;
        if (!k_step(ic.dvec(1.0, 1.0), l0, g0))
            throw SynthesisError("dk_iterate: scaled synthesis infeasible at identity scales");
        l_best = l0;
        gamma_seq.push_back(g0);
    }

    int stale_rounds = 0;
    for (int round = 0; round < opts.dk_max_rounds && stale_rounds < 2; ++round) {
        double ds = d_sigma, dp = d_psi;
        d_step(l_best, ds, dp);
        Matrix l_new;
        double g_new;
        if (!k_step(ic.dvec(ds, dp), l_new, g_new)) {
            ++stale_rounds;
            continue;
        }
        const double g_prev = gamma_seq.back();
        if (g_new <= g_prev * (1.0 + 1e-12)) {
            // Accept; record the non-increasing envelope.
            gamma_seq.push_back(std::min(g_new, g_prev));
            l_best = l_new;
            d_sigma = ds;
            d_psi = dp;
            if (g_prev - g_new < opts.dk_improve_tol * g_prev) ++stale_rounds;
            else stale_rounds = 0;
        } else {
            ++stale_rounds;
        }
    }

    // Plain grid re-certification of the final gain (P free, L fixed).
    auto make_fixed = [&](double gamma) {
        std::vector<LmiConstraint> cons;
        for (size_t i = 0; i < grid.size(); ++i) {
            const ErrorSystem es = error_dynamics(grid[i], l_best, pi2, box, spec);
            cons.push_back(detail::analysis_constraint(es, gamma, "grid-" + std::to_string(i)));
        }
        cons.push_back(detail::analysis_p_floor());
        return cons;
    };
    const auto recert = detail::bisect_gamma(make_fixed, detail::kPVars, opts.gamma_lo,
                                             opts.gamma_hi, opts.gamma_rel_tol);
    if (!recert.ok)
        throw SynthesisError("dk_iterate: final gain failed plain grid certification");

    ObserverGain gain;
    gain.method = "dk-scaled";
    gain.l = l_best;
    gain.p = detail::unpack_sym(recert.theta, 4);
    gain.gamma = recert.gamma;
    gain.grid = grid;
    gain.gamma_sequence = gamma_seq;
    gain.gamma_scaled = gamma_seq.back();
    gain.d_sigma = d_sigma;
    gain.d_psi = d_psi;
    gain.delta_structure = err.stacked.counts();
    gain.certification = certify_gain(gain, box, pi2, spec, opts.certify_samples,
                                      opts.certify_seed, opts.norm);
    return gain;
}

} // namespace cislunav
