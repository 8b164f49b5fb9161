#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numbers>

#include "vpgrav/dynamic.hpp"

using namespace vpgrav;

namespace {
constexpr double kPi = std::numbers::pi;

struct Scenario {
    Params p;
    SpatialGrid sg;
    VelocityGrid vg;
    BoundaryDatum G;
    SteadySolution sol;
};

Scenario make_scenario(int n3 = 48, int mpar = 8, int m3 = 24) {
    Params p;
    p.g = 4.0;
    p.beta = 2.0;
    p.beta_tilde = 1.0;
    Scenario s{p,
               SpatialGrid::uniform(1, 1, n3, 6.0),
               VelocityGrid::cube(mpar, mpar, m3, 4.0),
               BoundaryDatum::maxwellian(0.01, p.beta),
               {}};
    SteadyOptions opt;
    opt.tol_fix = 1e-9;
    opt.max_iter = 20;
    opt.h_scale = 5e-3;
    s.sol = solve_steady(s.G, s.p, s.sg, s.vg, opt);
    return s;
}

Distribution bump_perturbation(const Scenario& s, double a) {
    Distribution f0 = Distribution::zeros(s.sg, s.vg, Role::perturbation_f, s.p.beta);
    for (int j = 0; j <= s.sg.n3; ++j) {
        double shape = 1.0 - std::exp(-s.sg.x3[j]);
        for (int k1 = 0; k1 < s.vg.m1; ++k1)
            for (int k2 = 0; k2 < s.vg.m2; ++k2)
                for (int k3 = 0; k3 < s.vg.m3; ++k3) {
                    double v1 = s.vg.node(0, k1), v2 = s.vg.node(1, k2),
                           v3 = s.vg.node(2, k3);
                    f0.at(0, 0, j, k1, k2, k3) =
                        a * shape *
                        std::exp(-s.p.beta *
                                 (v1 * v1 + v2 * v2 + v3 * v3 + 2 * s.p.g * s.sg.x3[j]));
                }
    }
    return f0;
}
}  // namespace

TEST_CASE("explicit decay-rate formula") {
    Params p;
    p.g = 1.0;
    p.beta = 1.0;
    SUBCASE("huge steady gradient saturates at (g^2 beta/64) ln 2") {
        double lim = std::numbers::ln2 / 64.0;
        CHECK(lambda_infinity(p, 1e12) == doctest::Approx(lim).epsilon(1e-10));
        CHECK(lim == doctest::Approx(0.010830).epsilon(1e-4));
    }
    SUBCASE("zero norm returns the unbounded sentinel") {
        CHECK(std::isinf(lambda_infinity(p, 0.0)));
    }
    SUBCASE("inverting the closed form") {
        // choose the norm so the log argument equals e + 2
        double norm = p.g * p.beta * p.beta /
                      (std::exp2(8.5 + 2.0 / p.g) * std::pow(kPi, 1.5) * std::numbers::e);
        CHECK(lambda_infinity(p, norm) ==
              doctest::Approx(std::log(std::numbers::e + 2.0) / 64.0).epsilon(1e-12));
    }
    SUBCASE("strictly decreasing in the norm") {
        double prev = lambda_infinity(p, 1e-6);
        for (double n : {1e-4, 1e-2, 1.0, 100.0}) {
            double lam = lambda_infinity(p, n);
            CHECK(lam < prev);
            prev = lam;
        }
    }
}

TEST_CASE("zero perturbation is an exact fixed point") {
    Scenario s = make_scenario(24, 6, 12);
    Distribution f0 = Distribution::zeros(s.sg, s.vg, Role::perturbation_f, s.p.beta);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});
    DynamicState next = duhamel_step(st, s.sol, s.p, 0.05, {});
    CHECK(next.norm_rho_inf == 0.0);
    CHECK(next.f.max_abs() == 0.0);
    CHECK(next.t == doctest::Approx(0.05));
}

TEST_CASE("pure transport is absorbing: sup principle and mass decay") {
    Scenario s = make_scenario(48, 6, 24);
    // zero the source tables: the step reduces to absorbing transport
    for (auto& c : s.sol.dvh) std::fill(c.begin(), c.end(), 0.0);
    Distribution f0 = bump_perturbation(s, 1e-3);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});

    auto mass_of = [&](const Distribution& f) {
        // phase-space quadrature of |f| (trapezoid in every direction)
        double m = 0.0;
        for (int j = 0; j <= s.sg.n3; ++j) {
            double wj = j == 0 ? 0.5 * (s.sg.x3[1] - s.sg.x3[0])
                       : j == s.sg.n3
                           ? 0.5 * (s.sg.x3[j] - s.sg.x3[j - 1])
                           : 0.5 * (s.sg.x3[j + 1] - s.sg.x3[j - 1]);
            for (int k1 = 0; k1 < s.vg.m1; ++k1)
                for (int k2 = 0; k2 < s.vg.m2; ++k2)
                    for (int k3 = 0; k3 < s.vg.m3; ++k3)
                        m += wj * s.vg.quad_weight(0, k1) * s.vg.quad_weight(1, k2) *
                             s.vg.quad_weight(2, k3) * std::abs(f.at(0, 0, j, k1, k2, k3));
        }
        return m;
    };

    double sup_prev = st.f.max_abs();
    double mass0 = mass_of(st.f), mass_prev = mass0;
    for (int n = 0; n < 8; ++n) {
        st = duhamel_step(st, s.sol, s.p, 0.05, {});
        // interpolation is a convex combination: the sup cannot grow
        CHECK(st.f.max_abs() <= sup_prev * (1.0 + 1e-12));
        sup_prev = st.f.max_abs();
        double mass = mass_of(st.f);
        CHECK(mass <= mass_prev * 1.005);  // absorbing, modulo quadrature wiggle
        mass_prev = mass;
    }
    CHECK(mass_prev < 0.9 * mass0);  // the boundary genuinely drains the mass
}

TEST_CASE("manufactured constant source gains c dt at first order") {
    Scenario s = make_scenario(32, 4, 16);
    // constant vertical-gradient table and a field with a uniform slope is not
    // reachable through the solver, so drive the quadrature directly: replace
    // the tables by ones and check the one-step gain against c dt
    for (auto& c : s.sol.dvh) std::fill(c.begin(), c.end(), 0.0);
    std::fill(s.sol.dvh[2].begin(), s.sol.dvh[2].end(), 1.0);

    Distribution f0 = bump_perturbation(s, 1e-4);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});
    double dpsi_mid = st.psi.grad_at({0, 0}, 3.0)[2];

    DynamicOptions opt;
    opt.min_substeps = 8;
    double dt = 0.04;
    DynamicState next = duhamel_step(st, s.sol, s.p, dt, opt);
    // probe a node far from the wall whose arc does not exit
    int j = s.sg.n3 / 2, k = s.vg.m3 / 2;
    double before = interpolate(st.f, PhasePoint({0, 0}, s.sg.x3[j],
                                                 {0, 0, s.vg.node(2, k)})).value;
    double after = next.f.at(0, 0, j, 0, 0, k);
    // the transported value moves by O(dt) as well, so compare the NET gain
    // against the source integral with a dt^2-sized allowance
    PhasePoint zj({0, 0}, s.sg.x3[j], {s.vg.node(0, 0), s.vg.node(1, 0), s.vg.node(2, k)});
    ForceField field = ForceField::from_fields(s.sol.phi, st.psi, s.p.g);
    Trajectory traj = integrate_flow(zj, field, dt, Direction::backward);
    double foot = interpolate(st.f, traj.z.back().to_phase_point()).value;
    double gain = after - foot;
    CHECK(gain == doctest::Approx(dpsi_mid * dt).epsilon(0.15));
    (void)before;
}

TEST_CASE("inflow row is exactly zero after every step") {
    Scenario s = make_scenario(32, 4, 17);  // odd m3 puts a node at v3 = 0
    Distribution f0 = bump_perturbation(s, 1e-3);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});
    for (int n = 0; n < 3; ++n) {
        st = duhamel_step(st, s.sol, s.p, 0.05, {});
        for (int k1 = 0; k1 < s.vg.m1; ++k1)
            for (int k2 = 0; k2 < s.vg.m2; ++k2)
                for (int k3 = 0; k3 < s.vg.m3; ++k3)
                    if (s.vg.node(2, k3) > 0.0) CHECK(st.f.at(0, 0, 0, k1, k2, k3) == 0.0);
    }
}

TEST_CASE("short certified run: bounds, flux potential, weight ratios") {
    Scenario s = make_scenario(48, 8, 32);
    Distribution f0 = bump_perturbation(s, 1e-3);
    DynamicOptions opt;
    opt.output_stride = 2;
    EvolveResult ev = evolve(std::move(f0), s.sol, s.p, 0.08, 4.0, opt);
    const DecayReport& d = ev.decay;

    CHECK(d.bootstrap_held);
    CHECK(d.density_bound_held);
    CHECK(d.f_bound_held);
    CHECK(d.flux_bound_held);
    CHECK(d.eb_bound_held);
    CHECK(d.eb_value >= 1.0);
    CHECK(std::isfinite(d.lambda_inf));

    // flux-potential bound, explicitly re-checked on the recorded rows
    double flux_const = 8 * kPi * (1 + 1 / (s.p.beta * s.p.g)) / (s.p.beta * s.p.beta);
    double run_sup_f = 0.0;
    for (const auto& row : ev.series) {
        run_sup_f = std::max(run_sup_f, row.norm_f_weighted);
        CHECK(row.ddb_sup <= flux_const * run_sup_f * (1 + 1e-9) + 1e-300);
    }

    WeightRatioReport w = weight_ratio_check(ev.final_state, s.sol, s.p, 40, 99);
    CHECK(w.pass);
}

TEST_CASE("vanishing flux reduces the ratio bound to exact invariance") {
    Scenario s = make_scenario(24, 4, 12);
    Distribution f0 = Distribution::zeros(s.sg, s.vg, Role::perturbation_f, s.p.beta);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});
    CHECK(st.ddb.sup_norm == 0.0);
    WeightRatioReport w = weight_ratio_check(st, s.sol, s.p, 25, 7);
    CHECK(w.pass);
}

TEST_CASE("evolve with zero data produces the zero series") {
    Scenario s = make_scenario(24, 4, 12);
    Distribution f0 = Distribution::zeros(s.sg, s.vg, Role::perturbation_f, s.p.beta);
    EvolveResult ev = evolve(std::move(f0), s.sol, s.p, 0.05, 1.0, {});
    for (const auto& row : ev.series) {
        CHECK(row.norm_rho_inf == 0.0);
        CHECK(row.decay_lhs == 0.0);
        CHECK(row.bootstrap_ok);
    }
}

TEST_CASE("field freezing is a first-order splitting in dt") {
    // the two-stage corrected step removes the O(dt) freezing error along the
    // same interpolation path, so the frozen-vs-corrected gap isolates the
    // splitting order: halving dt should halve the gap
    Params p;
    p.g = 4.0;
    p.beta = 2.0;
    Scenario s{p, SpatialGrid::uniform(1, 1, 64, 6.0), VelocityGrid::cube(8, 8, 32, 4.0),
               BoundaryDatum::maxwellian(0.2, p.beta), {}};
    SteadyOptions sopt;
    sopt.tol_fix = 1e-9;
    sopt.max_iter = 25;
    sopt.h_scale = 5e-3;
    s.sol = solve_steady(s.G, s.p, s.sg, s.vg, sopt);

    auto gap_at = [&](double dt) {
        DynamicOptions frozen;
        frozen.min_substeps = 4;
        DynamicOptions corrected = frozen;
        corrected.predictor_corrector = true;
        Distribution a0 = bump_perturbation(s, 0.02);
        Distribution b0 = a0;
        EvolveResult a = evolve(std::move(a0), s.sol, s.p, dt, 0.96, frozen);
        EvolveResult b = evolve(std::move(b0), s.sol, s.p, dt, 0.96, corrected);
        double d = 0.0;
        for (std::size_t i = 0; i < a.final_state.rho.values.size(); ++i)
            d = std::max(d, std::abs(a.final_state.rho.values[i] -
                                     b.final_state.rho.values[i]));
        return d;
    };
    double g1 = gap_at(0.16), g2 = gap_at(0.08), g3 = gap_at(0.04);
    CHECK(g1 / g2 >= 1.5);
    CHECK(g1 / g2 <= 3.0);
    CHECK(g2 / g3 >= 1.5);
    CHECK(g2 / g3 <= 3.0);
}

TEST_CASE("dt beyond the free-fall resolution is rejected") {
    Scenario s = make_scenario(24, 4, 12);
    Distribution f0 = bump_perturbation(s, 1e-3);
    double cap = max_splitting_dt(s.sg, s.vg, s.p.g);
    CHECK_THROWS_AS(evolve(std::move(f0), s.sol, s.p, cap * 1.5, 1.0, {}),
                    std::invalid_argument);
}

TEST_CASE("predictor-corrector stays close to the frozen-field step") {
    Scenario s = make_scenario(32, 4, 16);
    Distribution f0 = bump_perturbation(s, 1e-3);
    DynamicState st = initial_state(std::move(f0), s.sol, s.p, {});
    DynamicOptions pc;
    pc.predictor_corrector = true;
    DynamicState a = duhamel_step(st, s.sol, s.p, 0.05, {});
    DynamicState b = duhamel_step(st, s.sol, s.p, 0.05, pc);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.f.values.size(); ++i)
        diff = std::max(diff, std::abs(a.f.values[i] - b.f.values[i]));
    CHECK(diff <= 1e-6);  // the field correction is second order in dt
    CHECK(diff >= 0.0);
}

TEST_CASE("construction bound: the weighted perturbation stays below 4M") {
    Scenario s = make_scenario(48, 8, 32);
    Distribution f0 = bump_perturbation(s, 1e-3);
    EvolveResult ev = evolve(std::move(f0), s.sol, s.p, 0.08, 3.0, {});
    CHECK(ev.decay.m_constant > 0.0);
    CHECK(ev.decay.sup_f_weighted > 0.0);
    CHECK(ev.decay.wf_bound_held);
    CHECK(ev.decay.sup_f_weighted <= 4.0 * ev.decay.m_constant);
}
