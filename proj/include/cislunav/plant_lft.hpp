#pragma once

// Exact LFT realization of the parameter-dependent plant over the
// normalized distances (sigma, psi). The stacked map
//   [[A(rho), b(rho), B_w], [C_y(rho), d(rho), D_w(rho)]]   (8 x 11)
// is rational in the two parameters: 1/sigma^3 and 1/psi^3 in the
// dynamics, 1/sigma and 1/psi in the bearing channels, affine weights in
// the noise channels. Each cubed inverse is realized as lft_inverse
// composed with two lft_mul, which keeps three repeated blocks per
// parameter per occurrence; entry-wise assembly then concatenates block
// structures, and the resulting repetition counts are reported by the
// model rather than assumed anywhere.

#include "cislunav/cr3bp.hpp"
#include "cislunav/lft.hpp"
#include "cislunav/sensing.hpp"

namespace cislunav {

struct PlantLft {
    LftModel stacked; // 8 x 11: [[A, b, Bw], [Cy, d, Dw]]
    UncertainReal sigma, psi;

    DeltaAssignment assignment(const Rho& rho) const {
        return {{sigma.label, normalize(sigma, rho.sigma)},
                {psi.label, normalize(psi, rho.psi)}};
    }

    Matrix eval(const Rho& rho) const { return stacked.eval(assignment(rho)); }
};

/// Same stacked matrix assembled from the rational formulas directly; the
/// independent route the LFT evaluation is checked against.
inline Matrix plant_stacked_direct(const Rho& rho, double pi2, const ParameterBox& box,
                                   const NoiseSpec& spec) {
    const LpvMatrices lpv = lpv_matrices(rho, pi2);
    const MeasurementMatrices mm = measurement_matrices(rho, pi2);
    const Matrix dw = dw_matrix(noise_weights(rho, box, spec));
    Matrix out(8, 11);
    out.set_block(0, 0, lpv.a);
    out.set_block(0, 4, lpv.b);
    out.set_block(0, 5, bw_matrix());
    out.set_block(4, 0, mm.c_y);
    out.set_block(4, 4, mm.d);
    out.set_block(4, 5, dw);
    return out;
}

namespace detail {

struct ScalarLfts {
    LftModel sigma, psi;           // the parameters themselves
    LftModel inv_sigma, inv_psi;   // 1/sigma, 1/psi
    LftModel inv_sigma3, inv_psi3; // 1/sigma^3, 1/psi^3
};

inline ScalarLfts scalar_lfts(const UncertainReal& us, const UncertainReal& up) {
    ScalarLfts s{LftModel::uncertain(us), LftModel::uncertain(up),
                 LftModel::constant(0.0), LftModel::constant(0.0),
                 LftModel::constant(0.0), LftModel::constant(0.0)};
    s.inv_sigma = lft_inverse(s.sigma);
    s.inv_psi = lft_inverse(s.psi);
    s.inv_sigma3 = lft_mul(lft_mul(s.inv_sigma, s.inv_sigma), s.inv_sigma);
    s.inv_psi3 = lft_mul(lft_mul(s.inv_psi, s.inv_psi), s.inv_psi);
    return s;
}

// a31 = a42 = (pi2 - 1)/sigma^3 - pi2/psi^3 + 1
inline LftModel a31_lft(const ScalarLfts& s, double pi2) {
    return lft_add(lft_add(lft_scale(s.inv_sigma3, pi2 - 1.0), lft_scale(s.inv_psi3, -pi2)),
                   LftModel::constant(1.0));
}

// b3 = pi2 (1 - pi2) (1/psi^3 - 1/sigma^3)
inline LftModel b3_lft(const ScalarLfts& s, double pi2) {
    return lft_scale(lft_add(s.inv_psi3, lft_scale(s.inv_sigma3, -1.0)),
                     pi2 * (1.0 - pi2));
}

// Channel weight as an affine LFT in the range parameter.
inline LftModel weight_lft(const LftModel& param, const UncertainReal& u, double lo,
                           double hi, const NoiseSpec& spec, bool is_sigma) {
    if (spec.weight_model == WeightModel::linear) {
        const double slope = (spec.eta_max - spec.eta_min) / (hi - lo);
        return lft_add(lft_scale(param, slope), LftModel::constant(spec.eta_min - slope * lo));
    }
    (void)u;
    const double alpha = is_sigma ? spec.alpha_sigma : spec.alpha_psi;
    return lft_scale(param, std::sqrt(alpha));
}

} // namespace detail

/// Build the full plant LFT over the given box. Throws if the realization
/// is not well-posed over the closed unit Delta box (the parameter bounds
/// must exclude zero, which Table-style boxes do).
inline PlantLft build_plant_lft(const ParameterBox& box, double pi2, const NoiseSpec& spec) {
    box.validate();
    if (box.degenerate())
        throw NumericError("build_plant_lft: degenerate parameter box");
    spec.validate();

    PlantLft plant{LftModel::constant(0.0), make_uncertain(box.sigma_min, box.sigma_max, "sigma"),
                   make_uncertain(box.psi_min, box.psi_max, "psi")};
    const auto s = detail::scalar_lfts(plant.sigma, plant.psi);

    auto c = [](double v) { return LftModel::constant(v); };
    const LftModel a31 = detail::a31_lft(s, pi2);
    const LftModel a42 = detail::a31_lft(s, pi2); // same expression, own blocks
    const LftModel b3 = detail::b3_lft(s, pi2);
    const LftModel w_sigma_1 =
        detail::weight_lft(s.sigma, plant.sigma, box.sigma_min, box.sigma_max, spec, true);
    const LftModel w_sigma_2 =
        detail::weight_lft(s.sigma, plant.sigma, box.sigma_min, box.sigma_max, spec, true);
    const LftModel w_psi_1 =
        detail::weight_lft(s.psi, plant.psi, box.psi_min, box.psi_max, spec, false);
    const LftModel w_psi_2 =
        detail::weight_lft(s.psi, plant.psi, box.psi_min, box.psi_max, spec, false);

    // Bearing channel entries; each occurrence keeps its own blocks.
    const LftModel inv_s_a = lft_inverse(s.sigma);
    const LftModel inv_s_b = lft_inverse(s.sigma);
    const LftModel inv_p_a = lft_inverse(s.psi);
    const LftModel inv_p_b = lft_inverse(s.psi);
    const LftModel d2 = lft_scale(lft_inverse(s.sigma), pi2);
    const LftModel d4 = lft_scale(lft_inverse(s.psi), pi2 - 1.0);

    // Rows: [A | b | Bw] over columns (x, y, vx, vy | 1 | w1..w6).
    std::vector<std::vector<LftModel>> grid = {
        {c(0), c(0), c(1), c(0), c(0), c(0), c(0), c(0), c(0), c(0), c(0)},
        {c(0), c(0), c(0), c(1), c(0), c(0), c(0), c(0), c(0), c(0), c(0)},
        {a31, c(0), c(0), c(2), b3, c(1), c(0), c(0), c(0), c(0), c(0)},
        {c(0), a42, c(-2), c(0), c(0), c(0), c(1), c(0), c(0), c(0), c(0)},
        // Rows: [Cy | d | Dw].
        {c(0), inv_s_a, c(0), c(0), c(0), c(0), c(0), w_sigma_1, c(0), c(0), c(0)},
        {inv_s_b, c(0), c(0), c(0), d2, c(0), c(0), c(0), w_sigma_2, c(0), c(0)},
        {c(0), inv_p_a, c(0), c(0), c(0), c(0), c(0), c(0), c(0), w_psi_1, c(0)},
        {inv_p_b, c(0), c(0), c(0), d4, c(0), c(0), c(0), c(0), c(0), w_psi_2},
    };
    plant.stacked = lft_assemble(grid);

    const auto wp = well_posed(plant.stacked);
    if (!wp.well_posed)
        throw IllPosedError("build_plant_lft: realization ill-posed over the unit box");
    return plant;
}

/// Error-dynamics LFT: the stacked map [[A, Bw], [Cy, Dw]] (8 x 10). The
/// affine offsets b and d cancel in the error dynamics and are omitted.
struct ErrorLft {
    LftModel stacked;
    UncertainReal sigma, psi;

    DeltaAssignment assignment(const Rho& rho) const {
        return {{sigma.label, normalize(sigma, rho.sigma)},
                {psi.label, normalize(psi, rho.psi)}};
    }
};

inline ErrorLft build_error_lft(const ParameterBox& box, double pi2, const NoiseSpec& spec) {
    box.validate();
    if (box.degenerate())
        throw NumericError("build_error_lft: degenerate parameter box");

    ErrorLft err{LftModel::constant(0.0), make_uncertain(box.sigma_min, box.sigma_max, "sigma"),
                 make_uncertain(box.psi_min, box.psi_max, "psi")};
    const auto s = detail::scalar_lfts(err.sigma, err.psi);

    auto c = [](double v) { return LftModel::constant(v); };
    const LftModel a31 = detail::a31_lft(s, pi2);
    const LftModel a42 = detail::a31_lft(s, pi2);
    const LftModel w_s1 =
        detail::weight_lft(s.sigma, err.sigma, box.sigma_min, box.sigma_max, spec, true);
    const LftModel w_s2 =
        detail::weight_lft(s.sigma, err.sigma, box.sigma_min, box.sigma_max, spec, true);
    const LftModel w_p1 =
        detail::weight_lft(s.psi, err.psi, box.psi_min, box.psi_max, spec, false);
    const LftModel w_p2 =
        detail::weight_lft(s.psi, err.psi, box.psi_min, box.psi_max, spec, false);
    const LftModel inv_s_a = lft_inverse(s.sigma);
    const LftModel inv_s_b = lft_inverse(s.sigma);
    const LftModel inv_p_a = lft_inverse(s.psi);
    const LftModel inv_p_b = lft_inverse(s.psi);

    std::vector<std::vector<LftModel>> grid = {
        {c(0), c(0), c(1), c(0), c(0), c(0), c(0), c(0), c(0), c(0)},
        {c(0), c(0), c(0), c(1), c(0), c(0), c(0), c(0), c(0), c(0)},
        {a31, c(0), c(0), c(2), c(1), c(0), c(0), c(0), c(0), c(0)},
        {c(0), a42, c(-2), c(0), c(0), c(1), c(0), c(0), c(0), c(0)},
        {c(0), inv_s_a, c(0), c(0), c(0), c(0), w_s1, c(0), c(0), c(0)},
        {inv_s_b, c(0), c(0), c(0), c(0), c(0), c(0), w_s2, c(0), c(0)},
        {c(0), inv_p_a, c(0), c(0), c(0), c(0), c(0), c(0), w_p1, c(0)},
        {inv_p_b, c(0), c(0), c(0), c(0), c(0), c(0), c(0), c(0), w_p2},
    };
    err.stacked = lft_assemble(grid);

    const auto wp = well_posed(err.stacked);
    if (!wp.well_posed)
        throw IllPosedError("build_error_lft: realization ill-posed over the unit box");
    return err;
}

} // namespace cislunav
