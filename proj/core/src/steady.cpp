#include "vpgrav/steady.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "vpgrav/parallel.hpp"

namespace vpgrav {

static GradH grad_h_impl(const PhasePoint& z, const ForceField& field, const BoundaryDatum& G,
                         const IntegrateOptions& iopt);

namespace {

constexpr double kPi = std::numbers::pi;

double half_weight(const Params& p, double v2, double x3) {
    return std::exp(0.5 * p.beta * (v2 + p.g * x3));
}

// || e^{beta/2 (|v|^2 + g x3)} (a - b) ||_inf over the phase grid
double weighted_sup_diff(const Distribution& a, const Distribution& b, const Params& p) {
    double m = 0.0;
    const auto& sg = a.sg;
    const auto& vg = a.vg;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j)
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double v1 = vg.node(0, k1), v2n = vg.node(1, k2);
                        std::size_t base = a.index(i1, i2, j, k1, k2, 0);
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double v3 = vg.node(2, k3);
                            double vv = v1 * v1 + v2n * v2n + v3 * v3;
                            double d = std::abs(a.values[base + k3] - b.values[base + k3]);
                            if (d > 0.0) m = std::max(m, d * half_weight(p, vv, sg.x3[j]));
                        }
                    }
    return m;
}

bool fast_path_ok(const SpatialGrid& sg, const BoundaryDatum& G) {
    return sg.n1 == 1 && sg.n2 == 1 && G.horizontally_homogeneous();
}

struct PairTrace {
    double vb3 = 0.0;
    bool grazing = false;
};

// backtrace of the (x3, v3) plane; horizontal velocity is conserved when the
// field carries no horizontal dependence, so one trace serves every v_par
std::vector<PairTrace> trace_pairs(const SpatialGrid& sg, const VelocityGrid& vg,
                                   const ForceField& field, const IntegrateOptions& iopt,
                                   unsigned threads) {
    std::vector<PairTrace> pairs(static_cast<std::size_t>(sg.n3 + 1) * vg.m3);
    parallel_for(
        pairs.size(),
        [&](std::size_t idx) {
            int j = static_cast<int>(idx / vg.m3);
            int k3 = static_cast<int>(idx % vg.m3);
            PhasePoint z({0.0, 0.0}, sg.x3[j], {0.0, 0.0, vg.node(2, k3)});
            ExitRecord er = backward_exit(z, field, iopt);
            pairs[idx] = {er.v_b[2], er.grazing};
        },
        threads);
    return pairs;
}

UestMargins compute_margins(const Distribution& h, const DensityField& rho,
                            const Field& generating_phi, const Field& new_phi,
                            const BoundaryDatum& G, const Params& p) {
    UestMargins m;
    m.h_rhs = G.sup_norm();
    m.wh_rhs = G.weighted_sup(p.beta);
    m.rho_rhs = std::pow(kPi, 1.5) * std::pow(p.beta, -1.5) * m.wh_rhs;
    m.dphi_rhs = p.g / 2.0;

    const auto& sg = h.sg;
    const auto& vg = h.vg;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j) {
                double phi_val = generating_phi.phi[sg.node_index(i1, i2, j)];
                double xterm = 2.0 * phi_val + 2.0 * p.g * sg.x3[j];
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double v1 = vg.node(0, k1), v2n = vg.node(1, k2);
                        std::size_t base = h.index(i1, i2, j, k1, k2, 0);
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double v3 = vg.node(2, k3);
                            double val = h.values[base + k3];
                            if (val == 0.0) continue;
                            m.h_lhs = std::max(m.h_lhs, val);
                            double vv = v1 * v1 + v2n * v2n + v3 * v3;
                            m.wh_lhs = std::max(m.wh_lhs,
                                                std::exp(p.beta * (vv + xterm)) * val);
                        }
                    }
            }
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j) {
                double r = std::abs(rho.values[sg.node_index(i1, i2, j)]);
                m.rho_lhs = std::max(m.rho_lhs, std::exp(p.beta * p.g * sg.x3[j]) * r);
            }
    m.dphi_lhs = new_phi.sup_grad();
    return m;
}

}  // namespace

SteadyIterate SteadyIterate::initial(const SpatialGrid& sg, const VelocityGrid& vg,
                                     const Params& p) {
    SteadyIterate it;
    it.ell = 0;
    it.h = Distribution::zeros(sg, vg, Role::steady_h, p.beta);
    it.rho.sg = sg;
    it.rho.values.assign(sg.num_nodes(), 0.0);
    it.phi = solve_dirichlet(it.rho, p.eta);
    field_derivatives(it.phi, it.rho);
    return it;
}

double evaluate_h_backtrace(const PhasePoint& z, const ForceField& field,
                            const BoundaryDatum& G, const IntegrateOptions& opt) {
    ExitRecord er = backward_exit(z, field, opt);
    return G.value(er.xb_par, er.v_b);
}

SteadyIterate picard_iterate(const SteadyIterate& prev, const BoundaryDatum& G,
                             const Params& p, const SteadyOptions& opt) {
    const SpatialGrid& sg = prev.h.sg;
    const VelocityGrid& vg = prev.h.vg;
    ForceField field = ForceField::from_field(prev.phi, p.g);
    IntegrateOptions iopt;
    iopt.h_scale = opt.h_scale;

    SteadyIterate next;
    next.ell = prev.ell + 1;
    next.h = Distribution::zeros(sg, vg, Role::steady_h, p.beta);

    if (fast_path_ok(sg, G)) {
        auto pairs = trace_pairs(sg, vg, field, iopt, opt.threads);
        parallel_for(
            static_cast<std::size_t>(sg.n3 + 1),
            [&](std::size_t j) {
                Vec2 xp{sg.x1_node(0), sg.x2_node(0)};
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double v1 = vg.node(0, k1), v2 = vg.node(1, k2);
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double vb3 = pairs[j * vg.m3 + k3].vb3;
                            next.h.at(0, 0, static_cast<int>(j), k1, k2, k3) =
                                G.value(xp, {v1, v2, vb3});
                        }
                    }
            },
            opt.threads);
    } else {
        std::size_t nsp = sg.num_nodes();
        parallel_for(
            nsp,
            [&](std::size_t sidx) {
                int j = static_cast<int>(sidx % (sg.n3 + 1));
                int i2 = static_cast<int>((sidx / (sg.n3 + 1)) % sg.n2);
                int i1 = static_cast<int>(sidx / ((sg.n3 + 1) * static_cast<std::size_t>(sg.n2)));
                Vec2 xp{sg.x1_node(i1), sg.x2_node(i2)};
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            PhasePoint z(xp, sg.x3[j],
                                         {vg.node(0, k1), vg.node(1, k2), vg.node(2, k3)});
                            ExitRecord er = backward_exit(z, field, iopt);
                            next.h.at(i1, i2, j, k1, k2, k3) = G.value(er.xb_par, er.v_b);
                        }
            },
            opt.threads);
    }

    next.rho = moment_density(next.h);
    next.phi = solve_dirichlet(next.rho, p.eta);
    field_derivatives(next.phi, next.rho);
    next.margins = compute_margins(next.h, next.rho, prev.phi, next.phi, G, p);
    next.flagged = !next.margins.all_ok(opt.bound_tol);
    return next;
}

std::vector<double> SteadyConvergence::ratios() const {
    std::vector<double> r;
    for (std::size_t i = 1; i < diffs.size(); ++i)
        r.push_back(diffs[i - 1] > 0.0 ? diffs[i] / diffs[i - 1] : 0.0);
    return r;
}

namespace {

void fill_gradient_tables(SteadySolution& sol, const BoundaryDatum& G,
                          const SteadyOptions& opt) {
    const SpatialGrid& sg = sol.h.sg;
    const VelocityGrid& vg = sol.h.vg;
    const Params& p = sol.params;
    ForceField field = ForceField::from_field(sol.phi, p.g);
    IntegrateOptions iopt;
    iopt.h_scale = opt.h_scale;

    for (auto& c : sol.dvh) c.assign(sol.h.values.size(), 0.0);
    sol.dvh_fallback.assign(sol.h.values.size(), 0);

    if (fast_path_ok(sg, G)) {
        // one exit-derivative solve per (x3, v3) pair, shared across v_par
        std::size_t npairs = static_cast<std::size_t>(sg.n3 + 1) * vg.m3;
        std::vector<double> vb3(npairs), dvb3_dv3(npairs);
        std::vector<std::uint8_t> fb(npairs, 0);
        parallel_for(
            npairs,
            [&](std::size_t idx) {
                int j = static_cast<int>(idx / vg.m3);
                int k3 = static_cast<int>(idx % vg.m3);
                PhasePoint z({0, 0}, sg.x3[j], {0, 0, vg.node(2, k3)});
                ExitDerivatives ed = exit_derivatives(z, field, iopt);
                if (!ed.grazing) {
                    vb3[idx] = ed.exit.v_b[2];
                    dvb3_dv3[idx] = ed.dvb_dv[2][2];
                } else {
                    fb[idx] = 1;
                    double dv = std::max(1e-5, 1e-3 * vg.spacing(2));
                    PhasePoint zp = z, zm = z;
                    zp.v[2] += dv;
                    zm.v[2] -= dv;
                    double fp = backward_exit(zp, field, iopt).v_b[2];
                    double fm = backward_exit(zm, field, iopt).v_b[2];
                    vb3[idx] = backward_exit(z, field, iopt).v_b[2];
                    dvb3_dv3[idx] = (fp - fm) / (2 * dv);
                }
            },
            opt.threads);

        parallel_for(
            static_cast<std::size_t>(sg.n3 + 1),
            [&](std::size_t j) {
                Vec2 xp{sg.x1_node(0), sg.x2_node(0)};
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            std::size_t pi = j * vg.m3 + k3;
                            Vec3 vb{vg.node(0, k1), vg.node(1, k2), vb3[pi]};
                            Vec3 gv = G.grad_v(xp, vb);
                            std::size_t ni = sol.h.index(0, 0, static_cast<int>(j), k1, k2, k3);
                            sol.dvh[0][ni] = gv[0];
                            sol.dvh[1][ni] = gv[1];
                            sol.dvh[2][ni] = dvb3_dv3[pi] * gv[2];
                            sol.dvh_fallback[ni] = fb[pi];
                        }
            },
            opt.threads);
    } else {
        std::size_t nsp = sg.num_nodes();
        parallel_for(
            nsp,
            [&](std::size_t sidx) {
                int j = static_cast<int>(sidx % (sg.n3 + 1));
                int i2 = static_cast<int>((sidx / (sg.n3 + 1)) % sg.n2);
                int i1 =
                    static_cast<int>(sidx / ((sg.n3 + 1) * static_cast<std::size_t>(sg.n2)));
                Vec2 xp{sg.x1_node(i1), sg.x2_node(i2)};
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            PhasePoint z(xp, sg.x3[j],
                                         {vg.node(0, k1), vg.node(1, k2), vg.node(2, k3)});
                            GradH gh = grad_h_impl(z, field, G, iopt);
                            std::size_t ni = sol.h.index(i1, i2, j, k1, k2, k3);
                            for (int c = 0; c < 3; ++c) sol.dvh[c][ni] = gh.grad_v[c];
                            sol.dvh_fallback[ni] = gh.fallback ? 1 : 0;
                        }
            },
            opt.threads);
    }

    // weighted gradient norms on the grid
    double nw = 0.0, nwt = 0.0;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j) {
                double phi_val = sol.phi.phi[sg.node_index(i1, i2, j)];
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            std::size_t ni = sol.h.index(i1, i2, j, k1, k2, k3);
                            double mag = std::sqrt(sol.dvh[0][ni] * sol.dvh[0][ni] +
                                                   sol.dvh[1][ni] * sol.dvh[1][ni] +
                                                   sol.dvh[2][ni] * sol.dvh[2][ni]);
                            if (mag == 0.0) continue;
                            double v1 = vg.node(0, k1), v2 = vg.node(1, k2),
                                   v3 = vg.node(2, k3);
                            double vv = v1 * v1 + v2 * v2 + v3 * v3;
                            nw = std::max(nw, std::exp(p.beta * (vv + 2 * phi_val +
                                                                 2 * p.g * sg.x3[j])) * mag);
                            nwt = std::max(nwt, std::exp(0.5 * p.beta_tilde *
                                                         (vv + p.g * sg.x3[j])) * mag);
                        }
            }
    sol.norm_wdvh = nw;
    sol.norm_wdvh_tilde = nwt;
}

}  // namespace

// chain rule through the exit map; declared here so the table fill above can use it
static GradH grad_h_impl(const PhasePoint& z, const ForceField& field, const BoundaryDatum& G,
                         const IntegrateOptions& iopt) {
    GradH out;
    ExitDerivatives ed = exit_derivatives(z, field, iopt);
    if (!ed.grazing) {
        Vec2 gx = G.grad_xpar(ed.exit.xb_par, ed.exit.v_b);
        Vec3 gv = G.grad_v(ed.exit.xb_par, ed.exit.v_b);
        for (int i = 0; i < 3; ++i) {
            out.grad_x[i] = ed.dxb_dx[i][0] * gx.x1 + ed.dxb_dx[i][1] * gx.x2 +
                            ed.dvb_dx[i][0] * gv[0] + ed.dvb_dx[i][1] * gv[1] +
                            ed.dvb_dx[i][2] * gv[2];
            out.grad_v[i] = ed.dxb_dv[i][0] * gx.x1 + ed.dxb_dv[i][1] * gx.x2 +
                            ed.dvb_dv[i][0] * gv[0] + ed.dvb_dv[i][1] * gv[1] +
                            ed.dvb_dv[i][2] * gv[2];
        }
        return out;
    }
    // grazing: one-sided finite differences on the transported value
    out.fallback = true;
    auto value = [&](const PhasePoint& q) { return evaluate_h_backtrace(q, field, G, iopt); };
    double dx = 1e-5;
    for (int i = 0; i < 3; ++i) {
        PhasePoint zp = z, zm = z;
        if (i < 2) {
            (i == 0 ? zp.x_par.x1 : zp.x_par.x2) += dx;
            (i == 0 ? zm.x_par.x1 : zm.x_par.x2) -= dx;
            out.grad_x[i] = (value(zp) - value(zm)) / (2 * dx);
        } else {
            zp.x3 += dx;
            double lo = std::max(z.x3 - dx, 0.0);
            zm.x3 = lo;
            out.grad_x[2] = (value(zp) - value(zm)) / (zp.x3 - lo);
        }
    }
    for (int i = 0; i < 3; ++i) {
        PhasePoint zp = z, zm = z;
        zp.v[i] += dx;
        zm.v[i] -= dx;
        out.grad_v[i] = (value(zp) - value(zm)) / (2 * dx);
    }
    return out;
}

GradH grad_h(const SteadySolution& sol, const BoundaryDatum& G, const PhasePoint& z,
             const IntegrateOptions& opt) {
    ForceField field = ForceField::from_field(sol.phi, sol.params.g);
    return grad_h_impl(z, field, G, opt);
}

SteadySolution solve_steady(const BoundaryDatum& G, const Params& p, const SpatialGrid& sg,
                            const VelocityGrid& vg, const SteadyOptions& opt) {
    p.validate();
    SteadyIterate it = SteadyIterate::initial(sg, vg, p);
    if (opt.seed_rho) {
        it.rho = *opt.seed_rho;
        it.phi = solve_dirichlet(it.rho, p.eta);
        field_derivatives(it.phi, it.rho);
    }

    SteadySolution sol;
    sol.params = p;
    sol.status = SolveStatus::max_iter_reached;
    for (int ell = 0; ell < opt.max_iter; ++ell) {
        // a field past the g/2 gradient bound can trap backward arcs; keep
        // the partial result in that case instead of losing the run
        try {
            SteadyIterate next = picard_iterate(it, G, p, opt);
            next.diff_weighted = weighted_sup_diff(next.h, it.h, p);
            sol.history.diffs.push_back(next.diff_weighted);
            sol.history.margins.push_back(next.margins);
            it = std::move(next);
        } catch (const ExitFailure&) {
            sol.status = SolveStatus::exit_failure;
            break;
        }
        if (it.diff_weighted < opt.tol_fix) {
            sol.status = SolveStatus::converged;
            break;
        }
    }
    sol.h = std::move(it.h);
    sol.rho = std::move(it.rho);
    sol.phi = std::move(it.phi);

    // || w_beta h ||_inf with the converged potential
    double nwh = 0.0;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j) {
                double phi_val = sol.phi.phi[sg.node_index(i1, i2, j)];
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double val = sol.h.at(i1, i2, j, k1, k2, k3);
                            if (val == 0.0) continue;
                            double v1 = vg.node(0, k1), v2 = vg.node(1, k2),
                                   v3 = vg.node(2, k3);
                            double vv = v1 * v1 + v2 * v2 + v3 * v3;
                            nwh = std::max(nwh, std::exp(p.beta * (vv + 2 * phi_val +
                                                                   2 * p.g * sg.x3[j])) * val);
                        }
            }
    sol.norm_wh = nwh;
    sol.norm_wG = G.weighted_sup(p.beta);

    if (opt.compute_gradients && sol.status != SolveStatus::exit_failure) {
        try {
            fill_gradient_tables(sol, G, opt);
        } catch (const ExitFailure&) {
            sol.status = SolveStatus::exit_failure;
        }
    }
    if (sol.dvh[0].empty()) {
        for (auto& c : sol.dvh) c.assign(sol.h.values.size(), 0.0);
        sol.dvh_fallback.assign(sol.h.values.size(), 0);
    }
    return sol;
}

double SteadySolution::dvh_at(int comp, const PhasePoint& z) const {
    return interpolate_raw(h.sg, h.vg, dvh[comp], z).value;
}

DensityField first_iterate_density(const BoundaryDatum& G, const Params& p,
                                   const SpatialGrid& sg) {
    if (G.kind() != BoundaryDatum::Kind::analytic_maxwellian)
        throw std::invalid_argument("first_iterate_density needs the analytic inflow kind");
    DensityField rho;
    rho.sg = sg;
    rho.values.assign(sg.num_nodes(), 0.0);
    double amp = G.amplitude() * std::pow(kPi / G.decay(), 1.5);
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j)
                rho.values[sg.node_index(i1, i2, j)] =
                    amp * std::exp(-2.0 * G.decay() * p.g * sg.x3[j]);
    return rho;
}

UniquenessReport uniqueness_probe(const BoundaryDatum& G, const Params& p,
                                  const SpatialGrid& sg, const VelocityGrid& vg,
                                  const SteadyOptions& opt) {
    SteadyOptions opt_a = opt;
    opt_a.compute_gradients = false;
    opt_a.seed_rho.reset();
    SteadySolution a = solve_steady(G, p, sg, vg, opt_a);
    SteadyOptions opt_b = opt_a;
    opt_b.seed_rho = first_iterate_density(G, p, sg);
    SteadySolution b = solve_steady(G, p, sg, vg, opt_b);

    UniquenessReport rep;
    rep.status_a = a.status;
    rep.status_b = b.status;
    rep.weighted_distance = weighted_sup_diff(a.h, b.h, p);
    return rep;
}

std::string RegularityReport::to_text() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "log_fit: c1=%.6g c2=%.6g r2=%.4f\nfar_envelope=%.6g\n"
                  "hk_x_constant=%.6g hk_v_constant=%.6g\n",
                  log_fit_c1, log_fit_c2, log_fit_r2, far_envelope, hk_x_constant,
                  hk_v_constant);
    os << buf;
    return os.str();
}

RegularityReport regularity_diagnostics(const SteadySolution& sol, const BoundaryDatum& G) {
    RegularityReport rep;
    const SpatialGrid& sg = sol.h.sg;
    const VelocityGrid& vg = sol.h.vg;
    const Params& p = sol.params;

    // vertical density gradient by centered differences on the node column
    auto drho = [&](int i1, int i2, int j) {
        int jm = std::max(j - 1, 0), jp = std::min(j + 1, sg.n3);
        double num = sol.rho.values[sg.node_index(i1, i2, jp)] -
                     sol.rho.values[sg.node_index(i1, i2, jm)];
        return num / (sg.x3[jp] - sg.x3[jm]);
    };

    // near-boundary fit  y = c1 + c2 |ln(x3^2 + g x3)|
    std::vector<double> xs, ys;
    for (int j = 1; j <= sg.n3 && sg.x3[j] <= 0.5; ++j) {
        double x3 = sg.x3[j];
        double y = std::abs(drho(0, 0, j)) * std::exp(0.5 * p.beta_tilde * p.g * x3);
        xs.push_back(std::abs(std::log(x3 * x3 + p.g * x3)));
        ys.push_back(y);
    }
    if (xs.size() >= 3) {
        double n = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        double det = n * sxx - sx * sx;
        if (det != 0.0) {
            rep.log_fit_c2 = (n * sxy - sx * sy) / det;
            rep.log_fit_c1 = (sy - rep.log_fit_c2 * sx) / n;
            double ssr = 0, sst = 0, ybar = sy / n;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                double fit = rep.log_fit_c1 + rep.log_fit_c2 * xs[i];
                ssr += (ys[i] - fit) * (ys[i] - fit);
                sst += (ys[i] - ybar) * (ys[i] - ybar);
            }
            rep.log_fit_r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
        }
    }

    for (int j = 0; j <= sg.n3; ++j)
        if (sg.x3[j] >= 1.0)
            rep.far_envelope =
                std::max(rep.far_envelope, std::abs(drho(0, 0, j)) *
                                               std::exp(0.5 * p.beta_tilde * p.g * sg.x3[j]));

    // weighted |d3 h| against C (1 + 1/alpha), sampled on a node subset
    ForceField field = ForceField::from_field(sol.phi, p.g);
    IntegrateOptions iopt;
    auto alpha_fn = [&](const PhasePoint& z) {
        return kinetic_distance(z, p, field.dphi3_boundary);
    };
    int jstride = std::max(1, sg.n3 / 8);
    int kstride = std::max(1, vg.m3 / 8);
    for (int j = 1; j <= sg.n3 && sg.x3[j] <= 1.0; j += jstride)
        for (int k3 = 0; k3 < vg.m3; k3 += kstride) {
            PhasePoint z({0, 0}, sg.x3[j], {0, 0, vg.node(2, k3)});
            GradH gh = grad_h_impl(z, field, G, iopt);
            double a = alpha_fn(z);
            if (a <= 0.0) continue;
            double w = std::exp(0.5 * p.beta_tilde * (norm2(z.v) + p.g * z.x3));
            rep.hk_x_constant =
                std::max(rep.hk_x_constant, w * std::abs(gh.grad_x[2]) / (1.0 + 1.0 / a));
        }

    double denom = (1.0 + sol.phi.sup_grad()) * G.weighted_grad_sup(p.beta_tilde);
    if (denom > 0.0) rep.hk_v_constant = sol.norm_wdvh_tilde / denom;
    return rep;
}

}  // namespace vpgrav
