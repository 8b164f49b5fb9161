#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vpgrav/dynamic.hpp"
#include "vpgrav/parallel.hpp"
#include "vpgrav/snapshot.hpp"
#include "vpgrav/verify.hpp"

namespace fs = std::filesystem;
using namespace vpgrav;

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig load_config(const std::string& path, std::uint64_t seed_override,
                      unsigned threads_override) {
    RunConfig cfg = path.empty() ? RunConfig{} : parse_config(path);
    if (seed_override != 0) cfg.seed = seed_override;
    if (threads_override != 0) cfg.threads = threads_override;
    cfg.validate();
    set_default_threads(cfg.threads);
    std::cout << "# resolved configuration\n" << echo_config(cfg) << std::flush;
    if (!cfg.spatial_grid().tail_tolerance_ok(cfg.beta, cfg.g, 1e-8))
        std::cout << "# warning: vertical truncation tail exceeds 1e-8 (raise grid.L3)\n";
    if (!cfg.velocity_grid().tail_tolerance_ok(cfg.beta, 1e-8))
        std::cout << "# warning: velocity truncation tail exceeds 1e-8 (raise grid.vmax)\n";
    return cfg;
}

Distribution default_perturbation(const RunConfig& cfg) {
    Params p = cfg.params();
    SpatialGrid sg = cfg.spatial_grid();
    VelocityGrid vg = cfg.velocity_grid();
    Distribution f0 = Distribution::zeros(sg, vg, Role::perturbation_f, p.beta);
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j) {
                double s = 1.0 - std::exp(-sg.x3[j]);
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double v1 = vg.node(0, k1), v2 = vg.node(1, k2),
                                   v3 = vg.node(2, k3);
                            f0.at(i1, i2, j, k1, k2, k3) =
                                cfg.f0_amplitude * s *
                                std::exp(-p.beta * (v1 * v1 + v2 * v2 + v3 * v3 +
                                                    2 * p.g * sg.x3[j]));
                        }
            }
    return f0;
}

SteadySolution run_steady(const RunConfig& cfg, bool gradients) {
    SteadyOptions opt;
    opt.tol_fix = cfg.tol_fix;
    opt.max_iter = cfg.max_iter;
    opt.h_scale = cfg.h_scale;
    opt.threads = cfg.threads;
    opt.compute_gradients = gradients;
    Params p = cfg.params();
    if (cfg.seed_from_closed_form)
        opt.seed_rho = first_iterate_density(cfg.boundary(), p, cfg.spatial_grid());
    return solve_steady(cfg.boundary(), p, cfg.spatial_grid(), cfg.velocity_grid(), opt);
}

int cmd_steady(const RunConfig& cfg, const std::string& outdir) {
    fs::create_directories(outdir);
    SteadySolution sol = run_steady(cfg, true);
    Params p = cfg.params();

    write_distribution_snapshot(outdir + "/steady_h.vps", sol.h, p.g);
    write_density_snapshot(outdir + "/steady_rho.vps", sol.rho, p.beta, p.g, "density");
    {
        DensityField phi;
        phi.sg = sol.phi.sg;
        phi.values = sol.phi.phi;
        write_density_snapshot(outdir + "/steady_phi.vps", phi, p.beta, p.g, "potential");
    }

    std::ofstream csv(outdir + "/steady_convergence.csv");
    csv << "iter,diff_weighted,margin_h,margin_wh,margin_rho,margin_dphi\n";
    for (std::size_t i = 0; i < sol.history.diffs.size(); ++i) {
        const auto& m = sol.history.margins[i];
        csv << (i + 1) << "," << g17(sol.history.diffs[i]) << "," << g17(m.h_rhs - m.h_lhs)
            << "," << g17(m.wh_rhs - m.wh_lhs) << "," << g17(m.rho_rhs - m.rho_lhs) << ","
            << g17(m.dphi_rhs - m.dphi_lhs) << "\n";
    }
    std::cout << "steady: " << (sol.status == SolveStatus::converged ? "converged" : "max-iter")
              << " after " << sol.history.diffs.size() << " iterates, |grad phi|="
              << g17(sol.phi.sup_grad()) << "\n";
    return sol.status == SolveStatus::converged ? 0 : 1;
}

int cmd_evolve(const RunConfig& cfg, const std::string& outdir) {
    fs::create_directories(outdir);
    SteadySolution sol = run_steady(cfg, true);
    Params p = cfg.params();
    double lam = lambda_infinity(p, sol.norm_wdvh);
    double T = cfg.T > 0.0 ? cfg.T : (std::isfinite(lam) ? 20.0 / lam : 20.0);

    DynamicOptions dopt;
    dopt.threads = cfg.threads;
    dopt.min_substeps = cfg.substeps;
    dopt.output_stride = cfg.output_stride;
    dopt.predictor_corrector = cfg.predictor_corrector;
    int rows_seen = 0;
    dopt.observer = [&](int step, const DynamicState& st) {
        if (rows_seen++ % cfg.snapshot_stride != 0) return;
        char name[64];
        std::snprintf(name, sizeof(name), "/f_step%06d.vps", step);
        write_distribution_snapshot(outdir + name, st.f, p.g);
    };

    EvolveResult ev = evolve(default_perturbation(cfg), sol, p, cfg.dt, T, dopt);

    std::ofstream csv(outdir + "/evolve_series.csv");
    csv << "t,norm_rho_inf,norm_f_weighted,decay_lhs,decay_rhs,bootstrap_ok\n";
    for (const auto& r : ev.series)
        csv << g17(r.t) << "," << g17(r.norm_rho_inf) << "," << g17(r.norm_f_weighted) << ","
            << g17(r.decay_lhs) << "," << g17(r.decay_rhs) << ","
            << (r.bootstrap_ok ? 1 : 0) << "\n";

    write_distribution_snapshot(outdir + "/evolve_final_f.vps", ev.final_state.f, p.g);

    const DecayReport& d = ev.decay;
    std::cout << "evolve: T=" << g17(T) << " lambda_inf=" << g17(d.lambda_inf)
              << " lambda_fit=" << g17(d.lambda_fit)
              << " certified=" << (d.certified ? "yes" : "no") << "\n";
    return d.bootstrap_held ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg, const std::string& outdir) {
    VerifyReport rep = run_battery(cfg);
    std::cout << rep.to_text(true);
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        std::ofstream out(outdir + "/verify_report.txt");
        out << rep.to_text(false);
    }
    return rep.hard_failures() ? 1 : 0;
}

int cmd_green(const RunConfig&) {
    GreenSelfTest st = green_selftest();
    std::cout << st.to_text();
    return st.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinetic half-space solver: steady states, perturbation evolution, "
                 "verification battery"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_path, outdir = "out";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    app.add_option("--config", config_path, "configuration file");
    app.add_option("--out", outdir, "output directory");
    app.add_option("--seed", seed, "override verify.seed");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* steady = app.add_subcommand("steady", "solve the steady state");
    auto* evolve_cmd = app.add_subcommand("evolve", "evolve the perturbation");
    auto* verify = app.add_subcommand("verify", "run the verification battery");
    auto* green = app.add_subcommand("green-selftest", "Green-function self-test");
    for (auto* sc : {steady, evolve_cmd, verify, green}) sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_config(config_path, seed, threads);
        if (steady->parsed()) return cmd_steady(cfg, outdir);
        if (evolve_cmd->parsed()) return cmd_evolve(cfg, outdir);
        if (verify->parsed()) return cmd_verify(cfg, outdir);
        if (green->parsed()) return cmd_green(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
