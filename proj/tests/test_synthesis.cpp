#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cislunav/synthesis.hpp"

using namespace cislunav;

namespace {

const ParameterBox kBox{0.1289, 0.9005, 0.1218, 1.9005};
constexpr double kPi2 = 0.01215;

NoiseSpec paper_spec() {
    NoiseSpec s;
    s.eta_min = 50.0 * kArcsecToRad;
    s.eta_max = 500.0 * kArcsecToRad;
    return s;
}

SynthesisOptions fast_opts() {
    SynthesisOptions o;
    o.certify_samples = 300;
    o.norm.points = 150;
    o.norm.refine_rounds = 2;
    return o;
}

const ObserverGain& table_gain() {
    static const ObserverGain gain = synthesize_hinf(kBox, kPi2, paper_spec(), fast_opts());
    return gain;
}

} // namespace

TEST_CASE("hurwitz: canonical cases") {
    CHECK(hurwitz(-Matrix::identity(3)));
    CHECK_FALSE(hurwitz(Matrix{{0, 1}, {0, 0}}));   // double integrator
    CHECK_FALSE(hurwitz(Matrix{{0, 1}, {-1, 0}}));  // undamped oscillator
    CHECK(hurwitz(Matrix{{-0.1, 1}, {-1, -0.1}}));  // damped spiral
    CHECK_FALSE(hurwitz(Matrix{{1e-6}}));
    CHECK(hurwitz(Matrix{{-1e-6}}));
}

TEST_CASE("hurwitz: open-loop dynamics at the reference point are unstable") {
    const Rho rho = sigma_psi({0.87, 0, 0, -1.48270}, kPi2);
    const auto lpv = lpv_matrices(kBox.clamp(rho), kPi2);
    CHECK_FALSE(hurwitz(lpv.a));
}

TEST_CASE("brl_certify: scalar lag with hand-checked levels") {
    const Matrix a{{-1}}, b{{1}}, c{{1}};
    // True norm is 1: gamma = 2 feasible (Schur: -2P + 1 + P^2/4 < 0 at P = 1).
    const auto ok = brl_certify(a, b, c, 2.0);
    CHECK(ok.feasible);
    CHECK(ok.margin < 0.0);
    REQUIRE(ok.p.rows() == 1);
    CHECK(ok.p(0, 0) > 0.0);

    const auto bad = brl_certify(a, b, c, 0.5);
    CHECK_FALSE(bad.feasible);
    CHECK(bad.certified_infeasible);
    CHECK_FALSE(bad.numerical_failure);
}

TEST_CASE("brl_certify: zero performance output is feasible for any gamma") {
    const Matrix a{{-1, 0.3}, {0, -2}};
    const Matrix b{{1, 0}, {0, 1}};
    const Matrix cz(1, 2); // zero row
    for (double gamma : {1e-3, 1.0, 10.0}) {
        const auto r = brl_certify(a, b, cz, gamma);
        CHECK(r.feasible);
    }
}

TEST_CASE("LMI assembly is affine: homogeneity and additivity of the variable part") {
    const auto fp = detail::frozen_plant({0.5, 0.9}, kPi2, kBox, paper_spec());
    const auto con = detail::synth_constraint(fp, 2.5, "probe");
    Rng rng(13);
    std::vector<double> th1(detail::kSynthVars), th2(detail::kSynthVars),
        sum(detail::kSynthVars), scaled(detail::kSynthVars);
    for (int i = 0; i < detail::kSynthVars; ++i) {
        th1[i] = rng.uniform(-1, 1);
        th2[i] = rng.uniform(-1, 1);
        sum[i] = th1[i] + th2[i];
        scaled[i] = 3.7 * th1[i];
    }
    const Matrix g0 = con.value(std::vector<double>(detail::kSynthVars, 0.0));
    const Matrix g1 = con.value(th1);
    const Matrix g2 = con.value(th2);
    CHECK(max_abs_diff(con.value(scaled) - g0, 3.7 * (g1 - g0)) < 1e-10);
    CHECK(max_abs_diff(con.value(sum) - g0, (g1 - g0) + (g2 - g0)) < 1e-10);
}

TEST_CASE("hinf_norm_grid: first-order and resonant closed forms") {
    CHECK_THAT(hinf_norm_grid(Matrix{{-1}}, Matrix{{1}}, Matrix{{1}}),
               Catch::Matchers::WithinRel(1.0, 1e-9));

    // 1/(s^2 + 2 zeta s + 1): peak 1/(2 zeta sqrt(1 - zeta^2)).
    const double zeta = 0.05;
    const Matrix a{{0, 1}, {-1, -2 * zeta}};
    const Matrix b{{0}, {1}};
    const Matrix c{{1, 0}};
    const double peak = 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta));
    CHECK_THAT(hinf_norm_grid(a, b, c), Catch::Matchers::WithinRel(peak, 1e-3));

    CHECK_THROWS_AS(hinf_norm_grid(Matrix{{1}}, Matrix{{1}}, Matrix{{1}}), SynthesisError);
}

TEST_CASE("hinf_norm_grid includes the feedthrough limit") {
    // Strictly proper part rolls off; D dominates at high frequency.
    const Matrix d{{3.0}};
    CHECK(hinf_norm_grid(Matrix{{-100}}, Matrix{{1}}, Matrix{{1}}, d) >= 3.0);
}

TEST_CASE("error_dynamics: open loop and channel structure") {
    const NoiseSpec spec = paper_spec();
    const Rho rho{0.5, 0.9};
    const auto open = error_dynamics(rho, Matrix(4, 4), kPi2, kBox, spec);
    CHECK(max_abs_diff(open.acl, lpv_matrices(rho, kPi2).a) == 0.0);
    CHECK(max_abs_diff(open.bcl, bw_matrix()) == 0.0);

    // Disturbance channels touch only dynamics, sensor channels only the
    // measurement path.
    const Matrix dw = dw_matrix(noise_weights(rho, kBox, spec));
    for (int i = 0; i < 4; ++i) {
        CHECK(dw(i, 0) == 0.0);
        CHECK(dw(i, 1) == 0.0);
    }
    const Matrix bw = bw_matrix();
    for (int i = 0; i < 4; ++i)
        for (int j = 2; j < 6; ++j) CHECK(bw(i, j) == 0.0);

    // Hand-assembled column norms at the box midpoint.
    const Rho mid{0.5 * (kBox.sigma_min + kBox.sigma_max), 0.5 * (kBox.psi_min + kBox.psi_max)};
    Matrix l(4, 4);
    for (int i = 0; i < 4; ++i) l(i, i) = -1.0;
    const auto es = error_dynamics(mid, l, kPi2, kBox, spec);
    const auto w = noise_weights(mid, kBox, spec);
    // Column 0 of Bcl is B_w column 0 (unit entry at row 2).
    CHECK(es.bcl(2, 0) == 1.0);
    // Column 2 is L * W1 e1: entry (0, 2) = -W1.
    CHECK_THAT(es.bcl(0, 2), Catch::Matchers::WithinRel(-w[0], 1e-14));

    CHECK_THROWS_AS(error_dynamics({5.0, 5.0}, l, kPi2, kBox, spec), NumericError);
}

TEST_CASE("synthesize_hinf: certified gain over the reference box") {
    const auto& gain = table_gain();
    CHECK(gain.method == "hinf");
    CHECK(std::isfinite(gain.gamma));
    CHECK(gain.gamma > 0.0);
    CHECK(gain.grid.size() == 9);

    // Certificate holds at every grid point and the closed loop is stable.
    for (const auto& rho : gain.grid) {
        const auto es = error_dynamics(rho, gain.l, kPi2, kBox, paper_spec());
        CHECK(sym_lambda_max(brl_matrix(es, gain.p, gain.gamma)) < 0.0);
        CHECK(hurwitz(es.acl));
    }
    // P is SPD.
    CHECK(chol_posdef(gain.p).has_value());
    // Delta structure was recorded from the realization, not assumed.
    REQUIRE(gain.delta_structure.size() == 2);
    CHECK(gain.delta_structure[0].count + gain.delta_structure[1].count > 0);

    // Dense random certification: mostly clean over the interior.
    CHECK(gain.certification.samples == 300);
    CHECK(gain.certification.pass_rate() >= 0.99);
}

TEST_CASE("synthesize_hinf: single-model level matches the frequency norm") {
    ParameterBox point = kBox;
    point.sigma_max = point.sigma_min = 0.5147;
    point.psi_max = point.psi_min = 1.01115;
    SynthesisOptions o = fast_opts();
    o.certify_samples = 0;
    const auto gain = synthesize_hinf(point, kPi2, paper_spec(), o);
    REQUIRE(gain.grid.size() == 1);
    const auto es = error_dynamics(gain.grid[0], gain.l, kPi2, point, paper_spec());
    const double norm = hinf_norm_grid(es.acl, es.bcl, es.cz);
    CHECK(norm <= gain.gamma * 1.000002);
    CHECK_THAT(norm, Catch::Matchers::WithinRel(gain.gamma, 0.05));
}

TEST_CASE("synthesize_hinf: more grid constraints never shrink the level") {
    SynthesisOptions sparse = fast_opts();
    sparse.certify_samples = 0;
    sparse.grid_density = 2;
    SynthesisOptions dense = sparse;
    dense.grid_density = 3;
    const double g2 = synthesize_hinf(kBox, kPi2, paper_spec(), sparse).gamma;
    const double g3 = synthesize_hinf(kBox, kPi2, paper_spec(), dense).gamma;
    // 2x2 vertex set is a subset of the 3x3 tensor grid.
    CHECK(g2 <= g3 * 1.005);

    ParameterBox center = kBox;
    center.sigma_min = center.sigma_max = 0.5147;
    center.psi_min = center.psi_max = 1.01115;
    const double gc = synthesize_hinf(center, kPi2, paper_spec(), sparse).gamma;
    CHECK(gc <= g3 * 1.005);
}

TEST_CASE("bisection bracket: feasible top, infeasible bottom") {
    // Analysis-side bisection for the scalar lag: true norm is exactly 1.
    ErrorSystem es{Matrix{{-1}}, Matrix{{1}}, Matrix{{1}}};
    auto make = [&](double gamma) {
        std::vector<LmiConstraint> cons;
        cons.push_back(detail::analysis_constraint(es, gamma, "brl"));
        LmiConstraint floor;
        floor.name = "P-floor";
        floor.constant = detail::kPFloor * Matrix::identity(1);
        floor.coeff.assign(1, -Matrix::identity(1));
        cons.push_back(floor);
        return cons;
    };
    const auto bis = detail::bisect_gamma(make, 1, 1e-3, 1e4, 1e-3);
    REQUIRE(bis.ok);
    CHECK_THAT(bis.gamma, Catch::Matchers::WithinRel(1.0, 5e-3));
    CHECK(bis.gamma_infeasible < bis.gamma);
    CHECK((bis.gamma - bis.gamma_infeasible) <= 1.1e-3 * bis.gamma_infeasible + 1e-12);
}

TEST_CASE("certify_gain flags a corrupted gain") {
    ObserverGain broken = table_gain();
    broken.l = -broken.l; // sign flip destabilizes the injection
    const auto rep = certify_gain(broken, kBox, kPi2, paper_spec(), 50, 99);
    CHECK(rep.hurwitz_pass < 50);
    CHECK(rep.pass_rate() < 0.9);
    CHECK(!rep.violations.empty());
}

TEST_CASE("dk_iterate: non-increasing scaled sequence, certified final gain") {
    SynthesisOptions o = fast_opts();
    o.certify_samples = 200;
    o.dk_max_rounds = 3;
    const auto gain = dk_iterate(kBox, kPi2, paper_spec(), o);
    CHECK(gain.method == "dk-scaled");
    REQUIRE(!gain.gamma_sequence.empty());
    for (size_t i = 1; i < gain.gamma_sequence.size(); ++i)
        CHECK(gain.gamma_sequence[i] <= gain.gamma_sequence[i - 1] * (1.0 + 1e-12));
    CHECK(gain.gamma_scaled <= gain.gamma_sequence.front() + 1e-6);
    CHECK(gain.d_sigma > 0.0);
    CHECK(gain.d_psi > 0.0);

    // Stored certificate is the plain grid BRL with the recovered P.
    for (const auto& rho : gain.grid) {
        const auto es = error_dynamics(rho, gain.l, kPi2, kBox, paper_spec());
        CHECK(sym_lambda_max(brl_matrix(es, gain.p, gain.gamma)) < 0.0);
    }

    // The plain closed-loop norm never exceeds the scaled certificate at
    // the center (identity scaling is a submatrix of the scaled plant).
    const Rho center{0.5 * (kBox.sigma_min + kBox.sigma_max),
                     0.5 * (kBox.psi_min + kBox.psi_max)};
    const auto es = error_dynamics(center, gain.l, kPi2, kBox, paper_spec());
    const double plain_norm = hinf_norm_grid(es.acl, es.bcl, es.cz);
    CHECK(plain_norm <= gain.gamma_scaled * (1.0 + 1e-6));
}

TEST_CASE("identity scaling reproduces the unscaled norm metric") {
    // blkdiag(I, I)-scaled objective is numerically identical to the
    // unscaled augmented norm, the D = I reduction the iteration starts at.
    const auto err = build_error_lft(kBox, kPi2, paper_spec());
    const auto ic = detail::dk_interconnect(err);
    Matrix l(4, 4);
    for (int i = 0; i < 4; ++i) l(i, i) = -3.0;
    l(2, 0) = -5.0;
    NormOptions coarse;
    coarse.points = 100;
    coarse.refine_rounds = 1;
    coarse.check_hurwitz = true;
    const auto ones = ic.dvec(1.0, 1.0);
    const double n1 = detail::dk_scaled_norm(ic, l, ones, coarse);
    // Manual unscaled assembly.
    const auto sp = detail::dk_scaled_plant(ic, ones);
    const Matrix acl = ic.a0 + l * ic.c_y0;
    const double n2 = hinf_norm_grid(acl, sp.b_aug + l * sp.d_aug, sp.c_aug, sp.dd_aug, coarse);
    CHECK(n1 == n2);
}
