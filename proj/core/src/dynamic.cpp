#include "vpgrav/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vpgrav/parallel.hpp"

namespace vpgrav {

namespace {

constexpr double kPi = std::numbers::pi;

double bootstrap_f_rhs(const Params& p) {
    return std::sqrt(std::numbers::ln2) * std::sqrt(p.g) * std::pow(p.beta, 1.5) /
           (64.0 * kPi * (1.0 + 1.0 / (p.beta * p.g)));
}

double flux_bound_constant(const Params& p) {
    return 8.0 * kPi * (1.0 + 1.0 / (p.beta * p.g)) / (p.beta * p.beta);
}

void enforce_inflow_zero(Distribution& f) {
    const auto& sg = f.sg;
    const auto& vg = f.vg;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int k1 = 0; k1 < vg.m1; ++k1)
                for (int k2 = 0; k2 < vg.m2; ++k2)
                    for (int k3 = 0; k3 < vg.m3; ++k3)
                        if (vg.node(2, k3) > 0.0) f.at(i1, i2, 0, k1, k2, k3) = 0.0;
}

void fill_norms(DynamicState& st, const SteadySolution& steady, const Params& p) {
    const auto& sg = st.f.sg;
    const auto& vg = st.f.vg;
    double nf = 0.0, nf8 = 0.0;
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j)
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2) {
                        double v1 = vg.node(0, k1), v2 = vg.node(1, k2);
                        std::size_t base = st.f.index(i1, i2, j, k1, k2, 0);
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            double a = std::abs(st.f.values[base + k3]);
                            if (a == 0.0) continue;
                            double v3 = vg.node(2, k3);
                            double e = v1 * v1 + v2 * v2 + v3 * v3 + p.g * sg.x3[j];
                            nf = std::max(nf, a * std::exp(0.5 * p.beta * e));
                            nf8 = std::max(nf8, a * std::exp(0.125 * p.beta * e));
                        }
                    }
    st.norm_f_weighted = nf;
    st.norm_f_eighth = nf8;
    st.norm_rho_inf = st.rho.max_abs();
    st.sup_grad_psi = st.psi.sup_grad();
    st.bootstrap_ok = steady.phi.sup_grad() + st.sup_grad_psi <= p.g / 2.0;
    st.bootstrap_f_ok = st.norm_f_weighted <= bootstrap_f_rhs(p);
}

void refresh_fields(DynamicState& st, const SteadySolution& steady, const Params& p) {
    st.rho = moment_density(st.f);
    st.psi = solve_dirichlet(st.rho, p.eta);
    field_derivatives(st.psi, st.rho);
    st.b = moment_flux(st.f);
    st.ddb = flux_potential(st.b);
    fill_norms(st, steady, p);
}

Field average_fields(const Field& a, const Field& b) {
    Field out = a;
    auto avg = [](std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * (x[i] + y[i]);
    };
    avg(out.phi, b.phi);
    for (int c = 0; c < 3; ++c) avg(out.grad[c], b.grad[c]);
    for (int c = 0; c < 6; ++c) avg(out.hess[c], b.hess[c]);
    avg(out.dphi3_boundary, b.dphi3_boundary);
    return out;
}

// one splitting step under an explicitly-frozen field
Distribution transport_step(const DynamicState& state, const SteadySolution& steady,
                            const Field& psi_frozen, const Params& p, double dt,
                            const DynamicOptions& opt) {
    const SpatialGrid& sg = state.f.sg;
    const VelocityGrid& vg = state.f.vg;
    ForceField field = ForceField::from_fields(steady.phi, psi_frozen, p.g);

    Distribution fnew = Distribution::zeros(sg, vg, Role::perturbation_f, p.beta);
    IntegrateOptions iopt;
    iopt.h_ode = dt / std::max(opt.min_substeps, 1);

    bool homogeneous = sg.n1 == 1 && sg.n2 == 1;
    if (homogeneous) {
        Vec2 xc{sg.x1_node(0), sg.x2_node(0)};
        parallel_for(
            static_cast<std::size_t>(sg.n3 + 1),
            [&](std::size_t jj) {
                int j = static_cast<int>(jj);
                for (int k3 = 0; k3 < vg.m3; ++k3) {
                    PhasePoint z(xc, sg.x3[j], {0.0, 0.0, vg.node(2, k3)});
                    Trajectory traj =
                        integrate_flow(z, field, dt, Direction::backward, iopt);
                    const FlowState& foot = traj.z.back();
                    bool exited = traj.crossed;

                    // source samples: d3 Psi at the arc heights, plus the
                    // interpolation stencil of d(v3) h in the (x3, v3) plane
                    struct Src {
                        double w;    // trapezoid weight x d3 Psi
                        int j0, k0;
                        double tj, tk;
                        bool usable;
                    };
                    std::vector<Src> srcs;
                    srcs.reserve(traj.z.size());
                    for (std::size_t q = 0; q < traj.z.size(); ++q) {
                        double ds = 0.0;
                        if (q > 0) ds += 0.5 * std::abs(traj.s[q] - traj.s[q - 1]);
                        if (q + 1 < traj.z.size())
                            ds += 0.5 * std::abs(traj.s[q + 1] - traj.s[q]);
                        Src s{};
                        double X3 = traj.z[q].x[2], V3 = traj.z[q].v[2];
                        s.usable = X3 <= sg.L3 && std::abs(V3) <= vg.vmax;
                        if (s.usable) {
                            double dpsi3 = psi_frozen.grad_at(xc, X3)[2];
                            s.w = ds * dpsi3;
                            s.j0 = sg.locate_x3(X3, s.tj);
                            double fk = (V3 + vg.vmax) / vg.spacing(2);
                            s.k0 = std::clamp(static_cast<int>(fk), 0, vg.m3 - 2);
                            s.tk = std::clamp(fk - s.k0, 0.0, 1.0);
                            if (s.w == 0.0) s.usable = false;
                        }
                        srcs.push_back(s);
                    }

                    bool foot_usable = !exited && foot.x[2] <= sg.L3 &&
                                       std::abs(foot.v[2]) <= vg.vmax;
                    int fj0 = 0, fk0 = 0;
                    double ftj = 0, ftk = 0;
                    if (foot_usable) {
                        fj0 = sg.locate_x3(foot.x[2], ftj);
                        double fk = (foot.v[2] + vg.vmax) / vg.spacing(2);
                        fk0 = std::clamp(static_cast<int>(fk), 0, vg.m3 - 2);
                        ftk = std::clamp(fk - fk0, 0.0, 1.0);
                    }

                    auto corner = [&](const std::vector<double>& arr, int jn, int k1,
                                      int k2, int kn) {
                        return arr[state.f.index(0, 0, jn, k1, k2, kn)];
                    };
                    for (int k1 = 0; k1 < vg.m1; ++k1)
                        for (int k2 = 0; k2 < vg.m2; ++k2) {
                            double val = 0.0;
                            if (foot_usable) {
                                val = (1 - ftj) * ((1 - ftk) * corner(state.f.values, fj0, k1, k2, fk0) +
                                                   ftk * corner(state.f.values, fj0, k1, k2, fk0 + 1)) +
                                      ftj * ((1 - ftk) * corner(state.f.values, fj0 + 1, k1, k2, fk0) +
                                             ftk * corner(state.f.values, fj0 + 1, k1, k2, fk0 + 1));
                            }
                            for (const auto& s : srcs) {
                                if (!s.usable) continue;
                                double hv =
                                    (1 - s.tj) * ((1 - s.tk) * corner(steady.dvh[2], s.j0, k1, k2, s.k0) +
                                                  s.tk * corner(steady.dvh[2], s.j0, k1, k2, s.k0 + 1)) +
                                    s.tj * ((1 - s.tk) * corner(steady.dvh[2], s.j0 + 1, k1, k2, s.k0) +
                                            s.tk * corner(steady.dvh[2], s.j0 + 1, k1, k2, s.k0 + 1));
                                val += s.w * hv;
                            }
                            fnew.at(0, 0, j, k1, k2, k3) = val;
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
                int i1 =
                    static_cast<int>(sidx / ((sg.n3 + 1) * static_cast<std::size_t>(sg.n2)));
                Vec2 xp{sg.x1_node(i1), sg.x2_node(i2)};
                for (int k1 = 0; k1 < vg.m1; ++k1)
                    for (int k2 = 0; k2 < vg.m2; ++k2)
                        for (int k3 = 0; k3 < vg.m3; ++k3) {
                            PhasePoint z(xp, sg.x3[j],
                                         {vg.node(0, k1), vg.node(1, k2), vg.node(2, k3)});
                            Trajectory traj =
                                integrate_flow(z, field, dt, Direction::backward, iopt);
                            double val = 0.0;
                            if (!traj.crossed) {
                                PhasePoint foot = traj.z.back().to_phase_point();
                                val = interpolate(state.f, foot).value;
                            }
                            for (std::size_t q = 0; q < traj.z.size(); ++q) {
                                double ds = 0.0;
                                if (q > 0) ds += 0.5 * std::abs(traj.s[q] - traj.s[q - 1]);
                                if (q + 1 < traj.z.size())
                                    ds += 0.5 * std::abs(traj.s[q + 1] - traj.s[q]);
                                PhasePoint zq = traj.z[q].to_phase_point();
                                if (zq.x3 > sg.L3) continue;
                                Vec3 gpsi = psi_frozen.grad_at(zq.x_par, zq.x3);
                                double dot = 0.0;
                                for (int c = 0; c < 3; ++c)
                                    dot += gpsi[c] *
                                           interpolate_raw(sg, vg, steady.dvh[c], zq).value;
                                val += ds * dot;
                            }
                            fnew.at(i1, i2, j, k1, k2, k3) = val;
                        }
            },
            opt.threads);
    }
    enforce_inflow_zero(fnew);
    return fnew;
}

}  // namespace

double lambda_infinity(const Params& p, double norm_wdvh) {
    if (norm_wdvh < 0.0) throw std::invalid_argument("norm must be >= 0");
    if (norm_wdvh == 0.0) return std::numeric_limits<double>::infinity();
    double denom = std::exp2(8.5 + 2.0 / p.g) * std::pow(kPi, 1.5) * norm_wdvh;
    return p.g * p.g * p.beta / 64.0 * std::log(2.0 + p.g * p.beta * p.beta / denom);
}

DynamicState initial_state(Distribution f0, const SteadySolution& steady, const Params& p,
                           const DynamicOptions&) {
    f0.assert_finite();
    DynamicState st;
    st.t = 0.0;
    st.f = std::move(f0);
    st.f.role = Role::perturbation_f;
    enforce_inflow_zero(st.f);
    refresh_fields(st, steady, p);
    return st;
}

DynamicState duhamel_step(const DynamicState& state, const SteadySolution& steady,
                          const Params& p, double dt, const DynamicOptions& opt) {
    if (!(dt > 0.0)) throw std::invalid_argument("duhamel_step: dt must be positive");

    DynamicState next;
    next.t = state.t + dt;

    // zero is an exact fixed point of the perturbation equation
    if (state.norm_f_weighted == 0.0 && state.norm_rho_inf == 0.0 &&
        state.sup_grad_psi == 0.0) {
        next.f = state.f;
        next.rho = state.rho;
        next.psi = state.psi;
        next.b = state.b;
        next.ddb = state.ddb;
        fill_norms(next, steady, p);
        return next;
    }

    next.f = transport_step(state, steady, state.psi, p, dt, opt);
    if (opt.predictor_corrector) {
        DynamicState probe;
        probe.t = next.t;
        probe.f = std::move(next.f);
        refresh_fields(probe, steady, p);
        Field mid = average_fields(state.psi, probe.psi);
        next.f = transport_step(state, steady, mid, p, dt, opt);
    }
    refresh_fields(next, steady, p);
    return next;
}

double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(y[i] > 0.0)) continue;
        double ly = std::log(y[i]);
        n += 1;
        sx += t[i];
        sy += ly;
        sxx += t[i] * t[i];
        sxy += t[i] * ly;
    }
    if (n < 2) return 0.0;
    double det = n * sxx - sx * sx;
    if (det == 0.0) return 0.0;
    return -(n * sxy - sx * sy) / det;
}

double max_splitting_dt(const SpatialGrid& sg, const VelocityGrid& vg, double g) {
    std::vector<double> scales;
    scales.reserve(static_cast<std::size_t>(sg.n3 + 1) * vg.m3);
    for (int j = 0; j <= sg.n3; ++j)
        for (int k3 = 0; k3 < vg.m3; ++k3) {
            double v3 = vg.node(2, k3);
            scales.push_back(std::sqrt(v3 * v3 + g * sg.x3[j]));
        }
    auto mid = scales.begin() + scales.size() / 2;
    std::nth_element(scales.begin(), mid, scales.end());
    return 0.1 * (2.0 / g) * (*mid);
}

EvolveResult evolve(Distribution f0, const SteadySolution& steady, const Params& p, double dt,
                    double T, const DynamicOptions& opt) {
    double dt_max = max_splitting_dt(f0.sg, f0.vg, p.g);
    if (dt > dt_max)
        throw std::invalid_argument("evolve: dt exceeds a tenth of the median free-fall scale");

    EvolveResult out;
    DecayReport& rep = out.decay;
    rep.norm_wdvh = steady.norm_wdvh;
    rep.lambda_inf = lambda_infinity(p, steady.norm_wdvh);
    double lam = std::isfinite(rep.lambda_inf) ? rep.lambda_inf : 0.0;

    DynamicState st = initial_state(std::move(f0), steady, p, opt);

    // || w_{beta,0} f_0 ||_inf with the initial self-consistent potential
    {
        const auto& sg = st.f.sg;
        const auto& vg = st.f.vg;
        double m = 0.0;
        for (int i1 = 0; i1 < sg.n1; ++i1)
            for (int i2 = 0; i2 < sg.n2; ++i2)
                for (int j = 0; j <= sg.n3; ++j) {
                    std::size_t nidx = sg.node_index(i1, i2, j);
                    double pot = steady.phi.phi[nidx] + st.psi.phi[nidx];
                    for (int k1 = 0; k1 < vg.m1; ++k1)
                        for (int k2 = 0; k2 < vg.m2; ++k2)
                            for (int k3 = 0; k3 < vg.m3; ++k3) {
                                double a = std::abs(st.f.at(i1, i2, j, k1, k2, k3));
                                if (a == 0.0) continue;
                                double v1 = vg.node(0, k1), v2 = vg.node(1, k2),
                                       v3 = vg.node(2, k3);
                                double e = v1 * v1 + v2 * v2 + v3 * v3 + 2.0 * pot +
                                           2.0 * p.g * sg.x3[j];
                                m = std::max(m, a * std::exp(p.beta * e));
                            }
                }
        rep.norm_w0_f0 = m;

        // data constant of the construction theorem: the weighted steady
        // norm against || w_{beta,0} F_0 || + || e^{beta |v|^2} G ||
        double mF0 = 0.0;
        for (int i1 = 0; i1 < sg.n1; ++i1)
            for (int i2 = 0; i2 < sg.n2; ++i2)
                for (int j = 0; j <= sg.n3; ++j) {
                    std::size_t nidx = sg.node_index(i1, i2, j);
                    double pot = steady.phi.phi[nidx] + st.psi.phi[nidx];
                    for (int k1 = 0; k1 < vg.m1; ++k1)
                        for (int k2 = 0; k2 < vg.m2; ++k2)
                            for (int k3 = 0; k3 < vg.m3; ++k3) {
                                double a = std::abs(st.f.at(i1, i2, j, k1, k2, k3) +
                                                    steady.h.at(i1, i2, j, k1, k2, k3));
                                if (a == 0.0) continue;
                                double v1 = vg.node(0, k1), v2 = vg.node(1, k2),
                                       v3 = vg.node(2, k3);
                                double e = v1 * v1 + v2 * v2 + v3 * v3 + 2.0 * pot +
                                           2.0 * p.g * sg.x3[j];
                                mF0 = std::max(mF0, a * std::exp(p.beta * e));
                            }
                }
        rep.m_constant = std::max(steady.norm_wh, mF0 + steady.norm_wG);
    }

    double exp16 = std::exp(16.0 * lam * lam / (p.beta * p.g * p.g));
    double rhs_rho = 16.0 * std::pow(kPi, 1.5) / std::pow(p.beta, 1.5) * exp16 * rep.norm_w0_f0;
    double rhs_f = 2.0 * exp16 *
                   (1.0 + std::pow(4.0, 3.0 + 1.0 / p.g) * std::pow(kPi, 1.5) /
                              (p.g * p.beta * p.beta) *
                              std::exp(64.0 * lam * lam / (p.g * p.g * p.beta)) *
                              steady.norm_wdvh) *
                   rep.norm_w0_f0;
    double flux_const = flux_bound_constant(p);

    bool bootstrap_held = true, density_held = true, f_held = true, flux_held = true;
    double sup_f_weighted = 0.0, sup_ddb = 0.0;

    int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
    auto record = [&](const DynamicState& s) {
        sup_f_weighted = std::max(sup_f_weighted, s.norm_f_weighted);
        sup_ddb = std::max(sup_ddb, s.ddb.sup_norm);
        bootstrap_held = bootstrap_held && s.bootstrap_ok && s.bootstrap_f_ok;

        SeriesRow row;
        row.t = s.t;
        row.norm_rho_inf = s.norm_rho_inf;
        row.norm_f_weighted = s.norm_f_weighted;
        row.decay_lhs = s.norm_rho_inf > 0.0 ? std::exp(lam * s.t) * s.norm_rho_inf : 0.0;
        row.decay_rhs = rhs_rho;
        row.bootstrap_ok = s.bootstrap_ok && s.bootstrap_f_ok;
        row.ddb_sup = s.ddb.sup_norm;
        row.flux_bound_rhs = flux_const * sup_f_weighted;
        row.decay_f_lhs = s.norm_f_eighth > 0.0 ? std::exp(lam * s.t) * s.norm_f_eighth : 0.0;
        row.decay_f_rhs = rhs_f;
        density_held = density_held && row.decay_lhs <= rhs_rho * (1.0 + 1e-12);
        f_held = f_held && row.decay_f_lhs <= rhs_f * (1.0 + 1e-12);
        flux_held = flux_held && s.ddb.sup_norm <= row.flux_bound_rhs * (1.0 + 1e-12) + 1e-300;
        return row;
    };

    out.series.push_back(record(st));
    if (opt.observer) opt.observer(0, st);
    for (int n = 1; n <= steps; ++n) {
        st = duhamel_step(st, steady, p, dt, opt);
        if (n % std::max(opt.output_stride, 1) == 0 || n == steps) {
            out.series.push_back(record(st));
            if (opt.observer) opt.observer(n, st);
        } else {
            record(st);  // flags and running sups still track every step
        }
    }

    // decay fit on [T/2, T]; if the signal went identically to zero there,
    // shift to the last window that still carries at least 10 positive rows
    std::vector<double> ft, fy;
    for (const auto& r : out.series)
        if (r.t >= T / 2.0 && r.norm_rho_inf > 0.0) {
            ft.push_back(r.t);
            fy.push_back(r.norm_rho_inf);
        }
    if (ft.size() < 10) {
        rep.fit_window_shifted = true;
        ft.clear();
        fy.clear();
        for (auto it = out.series.rbegin(); it != out.series.rend(); ++it)
            if (it->norm_rho_inf > 0.0) {
                ft.push_back(it->t);
                fy.push_back(it->norm_rho_inf);
                if (ft.size() >= 12) break;
            }
        std::reverse(ft.begin(), ft.end());
        std::reverse(fy.begin(), fy.end());
    }
    if (!ft.empty()) {
        rep.fit_t_begin = ft.front();
        rep.fit_t_end = ft.back();
        rep.fit_samples = static_cast<int>(ft.size());
        rep.lambda_fit = fit_decay_rate(ft, fy);
    }

    rep.bootstrap_held = bootstrap_held;
    rep.density_bound_held = density_held;
    rep.f_bound_held = f_held;
    rep.flux_bound_held = flux_held;
    rep.eb_value = std::exp(64.0 * p.beta / p.g * sup_ddb * sup_ddb);
    rep.eb_bound_held = rep.eb_value <= 2.0;
    rep.sup_f_weighted = sup_f_weighted;
    rep.wf_bound_held = sup_f_weighted <= 4.0 * rep.m_constant;
    rep.certified = bootstrap_held && density_held && f_held;

    out.final_state = std::move(st);
    return out;
}

WeightRatioReport weight_ratio_check(const DynamicState& state, const SteadySolution& steady,
                                     const Params& p, int samples, std::uint64_t seed) {
    WeightRatioReport rep;
    const SpatialGrid& sg = state.f.sg;
    const VelocityGrid& vg = state.f.vg;
    ForceField field = ForceField::from_fields(steady.phi, state.psi, p.g);
    double ddb = state.ddb.sup_norm;

    std::mt19937_64 rng(seed);
    auto uni = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };

    double worst_ratio = std::numeric_limits<double>::infinity();
    double worst_steady = std::numeric_limits<double>::infinity();
    auto dyn_weight_exp = [&](const FlowState& s) {
        Vec2 xp{s.x[0], s.x[1]};
        double pot = steady.phi.value_at(xp, s.x[2]) + state.psi.value_at(xp, s.x[2]);
        return p.beta * (norm2(s.v) + 2.0 * pot + 2.0 * p.g * s.x[2]);
    };
    auto steady_weight_exp = [&](const FlowState& s) {
        Vec2 xp{s.x[0], s.x[1]};
        return p.beta * (norm2(s.v) + 2.0 * steady.phi.value_at(xp, s.x[2]) +
                         2.0 * p.g * s.x[2]);
    };

    for (int i = 0; i < samples; ++i) {
        PhasePoint z({uni() - 0.5, uni() - 0.5}, uni() * 0.6 * sg.L3,
                     {(2 * uni() - 1) * 0.7 * vg.vmax, (2 * uni() - 1) * 0.7 * vg.vmax,
                      (2 * uni() - 1) * 0.7 * vg.vmax});
        IntegrateOptions iopt;
        ExitRecord er = backward_exit(z, field, iopt, true);
        double span = er.t_b + (std::isfinite(er.t_f) ? er.t_f : 0.0);
        if (span <= 0.0) continue;

        Trajectory back = integrate_flow(z, field, er.t_b, Direction::backward, iopt);
        Trajectory fwd = integrate_flow(z, field, er.t_f, Direction::forward, iopt);
        std::vector<FlowState> arc = back.z;
        arc.insert(arc.end(), fwd.z.begin(), fwd.z.end());

        double emax = -std::numeric_limits<double>::infinity();
        double emin = std::numeric_limits<double>::infinity();
        double es_min = std::numeric_limits<double>::infinity();
        for (const auto& s : arc) {
            double e = dyn_weight_exp(s);
            emax = std::max(emax, e);
            emin = std::min(emin, e);
            es_min = std::min(es_min, steady_weight_exp(s));
        }
        double v3 = z.v[2];
        double sq = std::sqrt(v3 * v3 + p.g * z.x3);
        double rhs_ratio = (8.0 * p.beta / p.g) * ddb * sq;
        worst_ratio = std::min(worst_ratio, rhs_ratio - (emax - emin));

        // 1/w bounds, compared in log space
        double rhs1 = 64.0 * p.beta / p.g * ddb * ddb;
        double need1 = 0.5 * p.beta * (norm2(z.v) + p.g * z.x3) - rhs1;
        worst_ratio = std::min(worst_ratio, emin - need1);
        double rhs2 = 256.0 * p.beta / (2.0 * p.g * p.g) * ddb * ddb;
        double need2 = 0.25 * p.beta * norm2(z.v) + 0.25 * p.beta * p.g * z.x3 - rhs2;
        worst_steady = std::min(worst_steady, es_min - need2);
    }
    rep.worst_ratio_margin = worst_ratio;
    rep.worst_steady_margin = worst_steady;
    // the ratio bound saturates as the flux vanishes, so the discrete energy
    // drift of the integrated arc needs a small additive allowance
    rep.pass = worst_ratio >= -1e-3 && worst_steady >= -1e-6;
    return rep;
}

}  // namespace vpgrav
