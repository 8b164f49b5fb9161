// Acceptance suite: every criterion runs at its pinned tolerance and prints
// one pass/fail line; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "vpgrav/dynamic.hpp"
#include "vpgrav/parallel.hpp"
#include "vpgrav/snapshot.hpp"
#include "vpgrav/verify.hpp"

using namespace vpgrav;
using vpgrav::testing::ShootingOracle;
using vpgrav::testing::SplitMix;

namespace {

constexpr double kPi = std::numbers::pi;
int g_failures = 0;

struct Criterion {
    int id;
    const char* name;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void report(bool pass, const std::string& detail) const {
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name,
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++g_failures;
    }
};

std::string fmt(const char* pat, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pat, a, b);
    return buf;
}

// --- 1, 2: kernel-solve oracles ---------------------------------------------

void criterion_poisson_mode0() {
    Criterion c{1, "poisson-mode0-oracle"};
    auto sg = SpatialGrid::uniform(1, 1, 512, 18.0);
    DensityField rho;
    rho.sg = sg;
    rho.values.resize(sg.num_nodes());
    for (int j = 0; j <= sg.n3; ++j) rho.values[j] = std::exp(-sg.x3[j]);
    Field f = solve_dirichlet(rho, +1);
    double err = 0.0;
    for (int j = 0; j <= sg.n3; ++j)
        err = std::max(err, std::abs(f.phi[j] - (std::exp(-sg.x3[j]) - 1.0)));
    c.report(err <= 1e-6, fmt("sup_err=%.3g (tol 1e-6)", err));
}

void criterion_poisson_mode1() {
    Criterion c{2, "poisson-mode1-oracle"};
    auto sg = SpatialGrid::uniform(8, 1, 512, 18.0);
    DensityField rho;
    rho.sg = sg;
    rho.values.assign(sg.num_nodes(), 0.0);
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int j = 0; j <= sg.n3; ++j)
            rho.values[sg.node_index(i1, 0, j)] =
                std::exp(-sg.x3[j]) * std::cos(2 * kPi * sg.x1_node(i1));
    Field f = solve_dirichlet(rho, +1);
    double err = 0.0;
    const ModeProfile* mp = f.spectral.find(1, 0);
    if (mp == nullptr) {
        c.report(false, "mode (1,0) missing");
        return;
    }
    for (int j = 0; j <= sg.n3; ++j) {
        double exact =
            (std::exp(-sg.x3[j]) - std::exp(-2 * kPi * sg.x3[j])) / (1.0 - 4 * kPi * kPi);
        err = std::max(err, std::abs(mp->phi[j].real() - 0.5 * exact));
        err = std::max(err, std::abs(mp->phi[j].imag()));
    }
    c.report(err <= 1e-6, fmt("sup_err=%.3g (tol 1e-6)", err));
}

// --- 3: free-fall exit closed form ------------------------------------------

void criterion_freefall() {
    Criterion c{3, "freefall-exit-times"};
    SplitMix rng(42);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double g = rng.uniform(0.5, 4.0);
        double x3 = rng.uniform(0.1, 5.0);
        double v3 = rng.uniform(-3.0, 3.0);
        ForceField field = ForceField::gravity_only(g);
        PhasePoint z({rng.uniform() - 0.5, rng.uniform() - 0.5}, x3,
                     {rng.uniform(-1, 1), rng.uniform(-1, 1), v3});
        ExitRecord er = backward_exit(z, field);
        double expected = (std::sqrt(v3 * v3 + 2 * g * x3) - v3) / g;
        worst = std::max(worst, std::abs(er.t_b - expected));
    }
    c.report(worst <= 1e-8, fmt("sup_err=%.3g over 1000 samples (tol 1e-8)", worst));
}

// --- shared scenario solves --------------------------------------------------

RunConfig default_scenario() {
    RunConfig cfg;  // defaults are the desk-scale small-data scenario
    return cfg;
}

SteadySolution solve_default(const RunConfig& cfg, bool gradients) {
    SteadyOptions opt;
    opt.tol_fix = cfg.tol_fix;
    opt.max_iter = cfg.max_iter;
    opt.h_scale = cfg.h_scale;
    opt.compute_gradients = gradients;
    return solve_steady(cfg.boundary(), cfg.params(), cfg.spatial_grid(),
                        cfg.velocity_grid(), opt);
}

// --- 4: exit-time bound battery ----------------------------------------------

void criterion_exit_bounds(const SteadySolution& sol, const Params& p) {
    Criterion c{4, "exit-time-bounds"};
    if (sol.phi.sup_grad() > p.g / 2.0) {
        c.report(false, "field gradient exceeds g/2; hypothesis fails");
        return;
    }
    ForceField field = ForceField::from_field(sol.phi, p.g);
    SplitMix rng(42 ^ 0x04);
    const int n = 10000;
    std::vector<double> margins(n);
    std::vector<PhasePoint> pts;
    pts.reserve(n);
    const auto& sg = sol.h.sg;
    const auto& vg = sol.h.vg;
    for (int i = 0; i < n; ++i)
        pts.emplace_back(Vec2{rng.uniform() - 0.5, rng.uniform() - 0.5},
                         rng.uniform(0.0, 0.8 * sg.L3),
                         Vec3{rng.uniform(-0.8, 0.8) * vg.vmax, rng.uniform(-0.8, 0.8) * vg.vmax,
                              rng.uniform(-0.8, 0.8) * vg.vmax});
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const PhasePoint& z = pts[i];
        ExitRecord er = backward_exit(z, field, {}, true);
        double v3 = z.v[2];
        double b1 = (2.0 / p.g) * (std::sqrt(v3 * v3 + p.g * z.x3) - v3) - er.t_b;
        double rad = std::max(er.v_b[2] * er.v_b[2] - p.g * z.x3, 0.0);
        double b2 = (2.0 / p.g) * (std::sqrt(rad) + er.v_b[2]) - er.t_b;
        double b3 = (4.0 / p.g) * std::sqrt(v3 * v3 + p.g * z.x3) - (er.t_b + er.t_f);
        margins[i] = std::min({b1, b2, b3});
    });
    double worst = margins[0];
    int violations = 0;
    for (double m : margins) {
        worst = std::min(worst, m);
        if (m < -1e-9) ++violations;
    }
    c.report(violations == 0,
             fmt("violations=%g worst_margin=%.3g over 10000 samples", violations, worst));
}

// --- 5: steady two-point-BVP oracle ------------------------------------------

void criterion_steady_oracle() {
    Criterion c{5, "steady-1d3v-oracle"};
    Params p;
    p.g = 1.0;
    p.beta = 2.0;
    double A = 0.5;
    auto G = BoundaryDatum::maxwellian(A, p.beta);
    auto sg = SpatialGrid::uniform(1, 1, 256, 18.0);
    auto vg = VelocityGrid::cube(16, 16, 48, 4.0);
    SteadyOptions opt;
    opt.tol_fix = 1e-9;
    opt.max_iter = 60;
    opt.h_scale = 1e-3;
    opt.compute_gradients = false;

    double worst = 0.0;
    bool converged = true;
    for (int eta : {+1, -1}) {
        Params pe = p;
        pe.eta = eta;
        SteadySolution sol = solve_steady(G, pe, sg, vg, opt);
        converged = converged && sol.status == SolveStatus::converged;
        ShootingOracle oracle{double(eta), A, p.beta, p.g};
        std::vector<double> prof = oracle.solve(sg, 64);
        for (int j = 0; j <= sg.n3; ++j)
            worst = std::max(worst, std::abs(sol.phi.phi[j] - prof[j]));
    }
    c.report(converged && worst <= 1e-4,
             fmt("sup_err=%.3g both couplings (tol 1e-4)", worst));
}

// --- 6: uniform-bound monitor and contraction ---------------------------------

void criterion_uniform_bounds(const SteadySolution& sol) {
    Criterion c{6, "uniform-bound-monitor"};
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& m : sol.history.margins) {
        auto rel = [](double lhs, double rhs) {
            return rhs > 0.0 ? (rhs * (1.0 + 1e-3) - lhs) / rhs : (lhs == 0.0 ? 0.0 : -1.0);
        };
        worst = std::min({worst, rel(m.h_lhs, m.h_rhs), rel(m.wh_lhs, m.wh_rhs),
                          rel(m.rho_lhs, m.rho_rhs), rel(m.dphi_lhs, m.dphi_rhs)});
    }
    auto ratios = sol.history.ratios();
    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < ratios.size(); ++i)
        worst_ratio = std::max(worst_ratio, ratios[i]);
    bool pass = worst >= 0.0 && worst_ratio <= 0.5;
    c.report(pass, fmt("bound_margin=%.3g contraction_ratio=%.3g", worst, worst_ratio));
}

// --- 7: uniqueness probe -------------------------------------------------------

void criterion_uniqueness(const RunConfig& cfg) {
    Criterion c{7, "uniqueness-probe"};
    SteadyOptions opt;
    opt.tol_fix = 1e-10;
    opt.max_iter = cfg.max_iter;
    opt.h_scale = cfg.h_scale;
    opt.compute_gradients = false;
    UniquenessReport u = uniqueness_probe(cfg.boundary(), cfg.params(), cfg.spatial_grid(),
                                          cfg.velocity_grid(), opt);
    c.report(u.agree(1e-6), fmt("weighted_distance=%.3g (tol 1e-6)", u.weighted_distance));
}

// --- 8, 9: flow oracles --------------------------------------------------------

ForceField acceptance_field(double g) {
    double q = 0.05, B = 2.0, eps = 0.05;
    return ForceField::analytic(
        g,
        [q, B, eps](const Vec2& xp, double x3) {
            return q * (std::exp(-B * x3) - 1.0) +
                   eps * std::cos(2 * kPi * xp.x1) * x3 * std::exp(-x3);
        },
        [q, B, eps](const Vec2& xp, double x3) {
            double cs = std::cos(2 * kPi * xp.x1), sn = std::sin(2 * kPi * xp.x1);
            double e = std::exp(-x3);
            return Vec3{-2 * kPi * eps * sn * x3 * e, 0.0,
                        -q * B * std::exp(-B * x3) + eps * cs * (1 - x3) * e};
        },
        [q, B, eps](const Vec2& xp, double x3) {
            double cs = std::cos(2 * kPi * xp.x1), sn = std::sin(2 * kPi * xp.x1);
            double e = std::exp(-x3);
            Mat3 H;
            H[0][0] = -4 * kPi * kPi * eps * cs * x3 * e;
            H[0][2] = H[2][0] = -2 * kPi * eps * sn * (1 - x3) * e;
            H[2][2] = q * B * B * std::exp(-B * x3) + eps * cs * (x3 - 2) * e;
            return H;
        });
}

void criterion_jacobian() {
    Criterion c{8, "jacobian-vs-differences"};
    ForceField field = acceptance_field(2.0);
    SplitMix rng(42 ^ 0x03);
    IntegrateOptions opt;
    opt.h_ode = 1e-3;
    double h_fd = 1e-4;
    double worst_fd = 0.0, worst_det = 0.0;
    int used = 0;
    while (used < 100) {
        PhasePoint z({rng.uniform() - 0.5, rng.uniform() - 0.5}, rng.uniform(0.5, 4.0),
                     {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1.5, 1.5)});
        ExitRecord er = backward_exit(z, field, opt);
        if (er.t_b < 0.3 || er.grazing) continue;
        ++used;
        double dur = 0.5 * er.t_b;
        FlowWithJacobian fj = flow_with_jacobian(z, field, dur, Direction::backward, opt);
        auto end_state = [&](const PhasePoint& q) {
            return integrate_flow(q, field, dur, Direction::backward, opt).z.back();
        };
        for (int comp = 0; comp < 6; ++comp) {
            PhasePoint zp = z, zm = z;
            double* pp;
            double* pm;
            if (comp == 0) { pp = &zp.x_par.x1; pm = &zm.x_par.x1; }
            else if (comp == 1) { pp = &zp.x_par.x2; pm = &zm.x_par.x2; }
            else if (comp == 2) { pp = &zp.x3; pm = &zm.x3; }
            else { pp = &zp.v[comp - 3]; pm = &zm.v[comp - 3]; }
            *pp += h_fd;
            *pm -= h_fd;
            FlowState sp = end_state(zp), sm = end_state(zm);
            for (int k = 0; k < 3; ++k) {
                double fdx = (sp.x[k] - sm.x[k]) / (2 * h_fd);
                double fdv = (sp.v[k] - sm.v[k]) / (2 * h_fd);
                double jx = comp < 3 ? fj.jac.dX_dx[comp][k] : fj.jac.dX_dv[comp - 3][k];
                double jv = comp < 3 ? fj.jac.dV_dx[comp][k] : fj.jac.dV_dv[comp - 3][k];
                worst_fd = std::max({worst_fd, std::abs(fdx - jx), std::abs(fdv - jv)});
            }
        }
        worst_det = std::max(worst_det, std::abs(fj.jac.det6() - 1.0));
    }
    c.report(worst_fd <= 1e-5 && worst_det <= 1e-6,
             fmt("fd_err=%.3g det_err=%.3g over 100 samples", worst_fd, worst_det));
}

void criterion_weight_invariance() {
    Criterion c{9, "weight-invariance"};
    Params p;
    p.g = 2.0;
    p.beta = 1.5;
    ForceField field = acceptance_field(p.g);
    SplitMix rng(42 ^ 0x02);
    IntegrateOptions opt;
    opt.h_ode = 1e-3;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        PhasePoint z({rng.uniform() - 0.5, rng.uniform() - 0.5}, rng.uniform(0.2, 4.0),
                     {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        ExitRecord er = backward_exit(z, field, opt);
        Trajectory traj = integrate_flow(z, field, er.t_b, Direction::backward, opt);
        double w0 = std::exp(p.beta * (norm2(z.v) + 2 * field.potential(z.x_par, z.x3) +
                                       2 * p.g * z.x3));
        for (const auto& st : traj.z) {
            double x3 = std::max(st.x[2], 0.0);
            double w = std::exp(p.beta * (norm2(st.v) +
                                          2 * field.potential({st.x[0], st.x[1]}, x3) +
                                          2 * p.g * x3));
            worst = std::max(worst, std::abs(w - w0) / w0);
        }
    }
    c.report(worst <= 1e-7, fmt("max_rel_drift=%.3g (tol 1e-7, h_ode=1e-3)", worst));
}

// --- 10: weighted velocity-gradient envelope ----------------------------------

void criterion_dvh_envelope(const SteadySolution& sol, const Params& p) {
    Criterion c{10, "dvh-gaussian-envelope"};
    const auto& sg = sol.h.sg;
    const auto& vg = sol.h.vg;
    SplitMix rng(42 ^ 0x07);
    constexpr int kBins = 12;
    double vmax3 = std::sqrt(3.0) * vg.vmax;
    std::array<double, kBins> env{};
    double sup = 0.0;
    for (int i = 0; i < 10000; ++i) {
        int j = static_cast<int>(rng.next() % (sg.n3 + 1));
        int k1 = static_cast<int>(rng.next() % vg.m1);
        int k2 = static_cast<int>(rng.next() % vg.m2);
        int k3 = static_cast<int>(rng.next() % vg.m3);
        std::size_t ni = sol.h.index(0, 0, j, k1, k2, k3);
        double v1 = vg.node(0, k1), v2 = vg.node(1, k2), v3 = vg.node(2, k3);
        double vv = v1 * v1 + v2 * v2 + v3 * v3;
        double mag =
            std::sqrt(sol.dvh[0][ni] * sol.dvh[0][ni] + sol.dvh[1][ni] * sol.dvh[1][ni] +
                      sol.dvh[2][ni] * sol.dvh[2][ni]);
        double w = std::exp(0.5 * p.beta_tilde * (vv + p.g * sg.x3[j])) * mag;
        sup = std::max(sup, w);
        int bin = std::min(kBins - 1, static_cast<int>(std::sqrt(vv) / vmax3 * kBins));
        env[bin] = std::max(env[bin], w);
    }
    bool ok = std::isfinite(sup);
    int peak = 0;
    for (int b = 1; b < kBins; ++b)
        if (env[b] > env[peak]) peak = b;
    for (int b = peak; b + 1 < kBins && ok; ++b)
        if (env[b + 1] > env[b] * 1.05) ok = false;
    c.report(ok, fmt("sup=%.3g, envelope peak bin %g then non-increasing", sup, peak));
}

// --- 11, 12: dynamic decay certification --------------------------------------

void criteria_dynamic(const RunConfig& defaults) {
    Params p = defaults.params();
    auto sg = SpatialGrid::uniform(1, 1, 128, defaults.L3);
    auto vg = VelocityGrid::cube(16, 16, 64, defaults.vmax);
    SteadyOptions sopt;
    sopt.tol_fix = defaults.tol_fix;
    sopt.max_iter = defaults.max_iter;
    sopt.h_scale = defaults.h_scale;
    SteadySolution sol = solve_steady(defaults.boundary(), p, sg, vg, sopt);

    Criterion c11{11, "dynamic-decay-certified"};
    Distribution f0 = Distribution::zeros(sg, vg, Role::perturbation_f, p.beta);
    for (int j = 0; j <= sg.n3; ++j) {
        double shape = 1.0 - std::exp(-sg.x3[j]);
        for (int k1 = 0; k1 < vg.m1; ++k1)
            for (int k2 = 0; k2 < vg.m2; ++k2)
                for (int k3 = 0; k3 < vg.m3; ++k3) {
                    double v1 = vg.node(0, k1), v2 = vg.node(1, k2), v3 = vg.node(2, k3);
                    f0.at(0, 0, j, k1, k2, k3) =
                        defaults.f0_amplitude * shape *
                        std::exp(-p.beta * (v1 * v1 + v2 * v2 + v3 * v3 + 2 * p.g * sg.x3[j]));
                }
    }
    double lam = lambda_infinity(p, sol.norm_wdvh);
    double T = 20.0 / lam;
    DynamicOptions dopt;
    dopt.output_stride = defaults.output_stride;
    dopt.min_substeps = defaults.substeps;
    EvolveResult ev = evolve(std::move(f0), sol, p, defaults.dt, T, dopt);
    const DecayReport& d = ev.decay;

    bool pass11 = d.bootstrap_held && d.lambda_fit > 0.0 && d.density_bound_held &&
                  d.f_bound_held && d.eb_bound_held;
    {
        char buf[240];
        std::snprintf(buf, sizeof(buf),
                      "T=%.1f bootstrap=%d lambda_fit=%.4g>0 density_bound=%d f_bound=%d "
                      "e^b=%.6f<=2",
                      T, d.bootstrap_held ? 1 : 0, d.lambda_fit, d.density_bound_held ? 1 : 0,
                      d.f_bound_held ? 1 : 0, d.eb_value);
        c11.report(pass11, buf);
    }

    Criterion c12{12, "flux-potential-bound"};
    double worst = std::numeric_limits<double>::infinity();
    double run_sup = 0.0;
    for (const auto& row : ev.series) {
        run_sup = std::max(run_sup, row.norm_f_weighted);
        worst = std::min(worst, row.flux_bound_rhs - row.ddb_sup);
    }
    c12.report(d.flux_bound_held && worst >= -1e-15,
               fmt("worst_margin=%.3g at every step", worst));
}

// --- 13: Green-function self-test ----------------------------------------------

void criterion_green() {
    Criterion c{13, "green-selftest"};
    GreenSelfTest st = green_selftest();
    bool c2_ok = std::abs(st.c2 - 1.0 / (2 * kPi)) <= 1e-14;
    bool pass = c2_ok && st.pass && st.decay_ratio >= std::exp(2.0) / 2.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "c2=%.12g decay_ratio=%.3g>=e^2/2 envC=%.3g c_emp=%.3g",
                  st.c2, st.decay_ratio, st.envelope_C, st.empirical_constant);
    c.report(pass, buf);
}

// --- 14: I/O and determinism ----------------------------------------------------

void criterion_io() {
    Criterion c{14, "io-and-determinism"};
    namespace fs = std::filesystem;
    bool ok = true;
    std::string detail;

    // snapshot bitwise round trip
    auto sg = SpatialGrid::uniform(2, 2, 8, 3.0);
    auto vg = VelocityGrid::cube(3, 3, 4, 2.0);
    Distribution f = Distribution::zeros(sg, vg, Role::steady_h, 1.25);
    SplitMix rng(42 ^ 0x0e);
    for (auto& v : f.values) v = rng.uniform() - 0.5;
    std::string path = (fs::temp_directory_path() / "vpgrav_acceptance.vps").string();
    write_distribution_snapshot(path, f, 1.0);
    Distribution g = read_distribution_snapshot(path);
    for (std::size_t i = 0; i < f.values.size() && ok; ++i)
        ok = std::memcmp(&f.values[i], &g.values[i], 8) == 0;
    fs::remove(path);
    if (!ok) detail += "snapshot-roundtrip ";

    // config echo stability
    RunConfig cfg;
    cfg.g = 1.0 / 3.0;
    cfg.dt = 0.07;
    bool echo_ok = echo_config(parse_config_text(echo_config(cfg))) == echo_config(cfg);
    ok = ok && echo_ok;
    if (!echo_ok) detail += "config-echo ";

    // reduced battery determinism under the fixed seed
    RunConfig small;
    small.n3 = 32;
    small.m1 = small.m2 = 6;
    small.m3 = 16;
    small.samples = 100;
    small.max_iter = 12;
    small.tol_fix = 1e-7;
    small.h_scale = 1e-2;
    small.dt = 0.1;
    small.T = 2.0;
    VerifyReport a = run_battery(small);
    small.threads = 3;
    VerifyReport b = run_battery(small);
    bool det_ok = a.to_text() == b.to_text();
    ok = ok && det_ok;
    if (!det_ok) detail += "battery-determinism ";

    c.report(ok, detail.empty() ? "snapshot, config echo, battery determinism" : detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");

    criterion_poisson_mode0();
    criterion_poisson_mode1();
    criterion_freefall();

    RunConfig cfg = default_scenario();
    Params p = cfg.params();
    SteadySolution sol = solve_default(cfg, true);

    criterion_exit_bounds(sol, p);
    criterion_steady_oracle();
    criterion_uniform_bounds(sol);
    criterion_uniqueness(cfg);
    criterion_jacobian();
    criterion_weight_invariance();
    criterion_dvh_envelope(sol, p);
    criteria_dynamic(cfg);
    criterion_green();
    criterion_io();

    std::printf("%d failure(s)\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
