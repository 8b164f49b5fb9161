#include "vpgrav/characteristics.hpp"

#include <algorithm>
#include <cmath>

namespace vpgrav {

namespace {

Vec3 force_at(const ForceField& f, const FlowState& s) {
    return f.accel({s.x[0], s.x[1]}, std::max(s.x[2], 0.0));
}

// one RK4 step of signed length h
FlowState rk4_step(const ForceField& f, const FlowState& s, double h) {
    auto rhs = [&f](const FlowState& y) {
        FlowState d;
        d.x = y.v;
        d.v = force_at(f, y);
        return d;
    };
    auto advance = [](const FlowState& y, const FlowState& d, double c) {
        FlowState out;
        out.x = y.x + c * d.x;
        out.v = y.v + c * d.v;
        return out;
    };
    FlowState k1 = rhs(s);
    FlowState k2 = rhs(advance(s, k1, h / 2));
    FlowState k3 = rhs(advance(s, k2, h / 2));
    FlowState k4 = rhs(advance(s, k3, h));
    FlowState out;
    out.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.v = s.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    return out;
}

double default_step(const ForceField& f, const PhasePoint& z, const IntegrateOptions& opt) {
    if (opt.h_ode > 0.0) return opt.h_ode;
    double scale = (2.0 / f.g) * std::sqrt(z.v[2] * z.v[2] + f.g * z.x3);
    double h = opt.h_scale * scale;
    return std::clamp(h, 1e-6, 0.05);
}

// refine the crossing inside one step by bisection on the partial step length
double refine_crossing(const ForceField& f, const FlowState& from, double h_signed,
                       double tol) {
    double lo = 0.0, hi = std::abs(h_signed);
    double sgn = h_signed >= 0 ? 1.0 : -1.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        FlowState s = rk4_step(f, from, sgn * mid);
        if (std::abs(s.x[2]) < tol) return sgn * mid;
        (s.x[2] > 0.0 ? lo : hi) = mid;
        if (hi - lo < 1e-17) break;
    }
    return sgn * 0.5 * (lo + hi);
}

}  // namespace

// ---------------------------------------------------------------------------
// ForceField factories

ForceField ForceField::gravity_only(double g) {
    ForceField f;
    f.g = g;
    f.accel = [g](const Vec2&, double) { return Vec3{0.0, 0.0, -g}; };
    f.hessian = [](const Vec2&, double) { return Mat3{}; };
    f.potential = [](const Vec2&, double) { return 0.0; };
    f.dphi3_boundary = [](const Vec2&) { return 0.0; };
    return f;
}

ForceField ForceField::from_field(const Field& phi, double g) {
    ForceField f;
    f.g = g;
    f.accel = [&phi, g](const Vec2& xp, double x3) {
        Vec3 gr = phi.grad_at(xp, x3);
        return Vec3{-gr[0], -gr[1], -gr[2] - g};
    };
    f.hessian = [&phi](const Vec2& xp, double x3) { return phi.hess_at(xp, x3); };
    f.potential = [&phi](const Vec2& xp, double x3) { return phi.value_at(xp, x3); };
    f.dphi3_boundary = [&phi](const Vec2& xp) { return phi.boundary_dphi3_at(xp); };
    return f;
}

ForceField ForceField::from_fields(const Field& phi, const Field& psi, double g) {
    ForceField f;
    f.g = g;
    f.time_dependent = true;  // frozen within the step, flagged for reporting
    f.accel = [&phi, &psi, g](const Vec2& xp, double x3) {
        Vec3 a = phi.grad_at(xp, x3);
        Vec3 b = psi.grad_at(xp, x3);
        return Vec3{-a[0] - b[0], -a[1] - b[1], -a[2] - b[2] - g};
    };
    f.hessian = [&phi, &psi](const Vec2& xp, double x3) {
        return phi.hess_at(xp, x3) + psi.hess_at(xp, x3);
    };
    f.potential = [&phi, &psi](const Vec2& xp, double x3) {
        return phi.value_at(xp, x3) + psi.value_at(xp, x3);
    };
    f.dphi3_boundary = [&phi, &psi](const Vec2& xp) {
        return phi.boundary_dphi3_at(xp) + psi.boundary_dphi3_at(xp);
    };
    return f;
}

ForceField ForceField::analytic(double g, std::function<double(const Vec2&, double)> pot,
                                std::function<Vec3(const Vec2&, double)> grad,
                                std::function<Mat3(const Vec2&, double)> hess) {
    ForceField f;
    f.g = g;
    f.potential = std::move(pot);
    auto gr = std::move(grad);
    f.accel = [gr, g](const Vec2& xp, double x3) {
        Vec3 d = gr(xp, x3);
        return Vec3{-d[0], -d[1], -d[2] - g};
    };
    f.hessian = std::move(hess);
    f.dphi3_boundary = [gr](const Vec2& xp) { return gr(xp, 0.0)[2]; };
    return f;
}

// ---------------------------------------------------------------------------
// flow integration

double exit_time_upper_bound(double g, double x3, double v3) {
    return (2.0 / g) * (std::sqrt(v3 * v3 + g * x3) - v3);
}

double roundtrip_time_upper_bound(double g, double x3, double v3) {
    return (4.0 / g) * std::sqrt(v3 * v3 + g * x3);
}

Trajectory integrate_flow(const PhasePoint& z, const ForceField& field, double duration,
                          Direction dir, const IntegrateOptions& opt) {
    if (duration < 0.0) throw std::invalid_argument("integrate_flow: duration must be >= 0");
    double h = default_step(field, z, opt);
    double sgn = dir == Direction::backward ? -1.0 : 1.0;

    auto run = [&](double step, Trajectory& out) {
        out.s.clear();
        out.z.clear();
        FlowState s{{z.x_par.x1, z.x_par.x2, z.x3}, z.v};
        double t = 0.0;
        out.s.push_back(0.0);
        out.z.push_back(s);
        while (t < duration - 1e-15) {
            double hh = std::min(step, duration - t);
            FlowState next = rk4_step(field, s, sgn * hh);
            if (next.x[2] < 0.0) {
                double part = refine_crossing(field, s, sgn * hh, opt.refine_tol);
                s = rk4_step(field, s, part);
                s.x[2] = std::max(s.x[2], 0.0);
                t += std::abs(part);
                out.s.push_back(sgn * t);
                out.z.push_back(s);
                out.crossed = true;
                return;
            }
            s = next;
            t += hh;
            out.s.push_back(sgn * t);
            out.z.push_back(s);
        }
    };

    Trajectory traj;
    run(h, traj);
    if (opt.richardson) {
        Trajectory fine;
        run(h / 2.0, fine);
        double end_err = norm(traj.z.back().x - fine.z.back().x) +
                         norm(traj.z.back().v - fine.z.back().v);
        traj.richardson_error = end_err / 15.0;  // one-shot 4th-order estimate
    }
    return traj;
}

namespace {

struct TraceResult {
    double t_exit = 0.0;
    FlowState state;
    bool grazing = false;
};

TraceResult trace_to_boundary(const PhasePoint& z, const ForceField& field, Direction dir,
                              const IntegrateOptions& opt, double t_max) {
    double sgn = dir == Direction::backward ? -1.0 : 1.0;
    FlowState s{{z.x_par.x1, z.x_par.x2, z.x3}, z.v};

    // instant-exit tie-breaks on the boundary
    if (z.x3 <= 0.0) {
        double v3 = z.v[2];
        if (v3 == 0.0) return {0.0, s, true};
        if (dir == Direction::backward && v3 > 0.0) return {0.0, s, false};
        if (dir == Direction::forward && v3 < 0.0) return {0.0, s, false};
    }

    double h = default_step(field, z, opt);
    double t = 0.0;
    while (t <= t_max) {
        FlowState next = rk4_step(field, s, sgn * h);
        if (next.x[2] <= 0.0) {
            double part = refine_crossing(field, s, sgn * h, opt.refine_tol);
            s = rk4_step(field, s, part);
            t += std::abs(part);
            s.x[2] = 0.0;
            return {t, s, false};
        }
        s = next;
        t += h;
    }
    throw ExitFailure(
        "no boundary crossing within the analytic exit-time bound (field-gradient bound "
        "violated or integrator failure)");
}

}  // namespace

ExitRecord backward_exit(const PhasePoint& z, const ForceField& field,
                         const IntegrateOptions& opt, bool want_forward) {
    double tb_max = exit_time_upper_bound(field.g, z.x3, z.v[2]) * (1.0 + opt.safety) + 10.0 * default_step(field, z, opt);
    TraceResult back = trace_to_boundary(z, field, Direction::backward, opt, tb_max);

    ExitRecord rec;
    rec.t_b = back.t_exit;
    rec.xb_par = wrap_cell({back.state.x[0], back.state.x[1]});
    rec.v_b = back.state.v;
    rec.grazing = back.grazing || std::abs(rec.v_b[2]) < kGrazingThreshold;
    rec.t_f = std::numeric_limits<double>::quiet_NaN();

    if (want_forward) {
        double tf_max = roundtrip_time_upper_bound(field.g, z.x3, z.v[2]) * (1.0 + opt.safety) +
                        10.0 * default_step(field, z, opt);
        TraceResult fwd = trace_to_boundary(z, field, Direction::forward, opt, tf_max);
        rec.t_f = fwd.t_exit;
    }

    if (opt.richardson && rec.t_b > 0.0) {
        IntegrateOptions fine = opt;
        fine.richardson = false;
        fine.h_ode = default_step(field, z, opt) / 2.0;
        TraceResult b2 = trace_to_boundary(z, field, Direction::backward, fine, tb_max);
        rec.err_estimate = (std::abs(b2.t_exit - rec.t_b) + norm(b2.state.v - rec.v_b)) / 15.0;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// variational flow

namespace {

struct AugState {
    FlowState z;
    JacobianState j;
};

AugState aug_rhs(const ForceField& f, const AugState& y) {
    AugState d;
    d.z.x = y.z.v;
    d.z.v = force_at(f, y.z);
    Mat3 H = f.hessian({y.z.x[0], y.z.x[1]}, std::max(y.z.x[2], 0.0));
    d.j.dX_dx = y.j.dV_dx;
    d.j.dX_dv = y.j.dV_dv;
    // d(dV_i.)/ds = -(dX_i. . grad) grad Phi
    for (int i = 0; i < 3; ++i) {
        Vec3 rx{y.j.dX_dx[i][0], y.j.dX_dx[i][1], y.j.dX_dx[i][2]};
        Vec3 rv{y.j.dX_dv[i][0], y.j.dX_dv[i][1], y.j.dX_dv[i][2]};
        Vec3 ax = row_times(rx, H);
        Vec3 av = row_times(rv, H);
        for (int c = 0; c < 3; ++c) {
            d.j.dV_dx[i][c] = -ax[c];
            d.j.dV_dv[i][c] = -av[c];
        }
    }
    return d;
}

AugState aug_advance(const AugState& y, const AugState& d, double c) {
    AugState out;
    out.z.x = y.z.x + c * d.z.x;
    out.z.v = y.z.v + c * d.z.v;
    out.j.dX_dx = y.j.dX_dx + c * d.j.dX_dx;
    out.j.dX_dv = y.j.dX_dv + c * d.j.dX_dv;
    out.j.dV_dx = y.j.dV_dx + c * d.j.dV_dx;
    out.j.dV_dv = y.j.dV_dv + c * d.j.dV_dv;
    return out;
}

AugState aug_rk4_step(const ForceField& f, const AugState& s, double h) {
    AugState k1 = aug_rhs(f, s);
    AugState k2 = aug_rhs(f, aug_advance(s, k1, h / 2));
    AugState k3 = aug_rhs(f, aug_advance(s, k2, h / 2));
    AugState k4 = aug_rhs(f, aug_advance(s, k3, h));
    AugState out = s;
    auto mix = [h](double a, double b, double c, double d) {
        return (h / 6.0) * (a + 2 * b + 2 * c + d);
    };
    for (int i = 0; i < 3; ++i) {
        out.z.x[i] += mix(k1.z.x[i], k2.z.x[i], k3.z.x[i], k4.z.x[i]);
        out.z.v[i] += mix(k1.z.v[i], k2.z.v[i], k3.z.v[i], k4.z.v[i]);
        for (int j = 0; j < 3; ++j) {
            out.j.dX_dx[i][j] += mix(k1.j.dX_dx[i][j], k2.j.dX_dx[i][j], k3.j.dX_dx[i][j], k4.j.dX_dx[i][j]);
            out.j.dX_dv[i][j] += mix(k1.j.dX_dv[i][j], k2.j.dX_dv[i][j], k3.j.dX_dv[i][j], k4.j.dX_dv[i][j]);
            out.j.dV_dx[i][j] += mix(k1.j.dV_dx[i][j], k2.j.dV_dx[i][j], k3.j.dV_dx[i][j], k4.j.dV_dx[i][j]);
            out.j.dV_dv[i][j] += mix(k1.j.dV_dv[i][j], k2.j.dV_dv[i][j], k3.j.dV_dv[i][j], k4.j.dV_dv[i][j]);
        }
    }
    return out;
}

}  // namespace

double JacobianState::det6() const {
    // blocks are stored [derivative var][component]; row i of the transposed
    // flow Jacobian is the derivative of every component w.r.t. variable i
    double a[6][6];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            a[i][j] = dX_dx[i][j];
            a[i][j + 3] = dV_dx[i][j];
            a[i + 3][j] = dX_dv[i][j];
            a[i + 3][j + 3] = dV_dv[i][j];
        }
    // LU with partial pivoting
    double det = 1.0;
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r = c + 1; r < 6; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (piv != c) {
            std::swap_ranges(a[piv], a[piv] + 6, a[c]);
            det = -det;
        }
        if (a[c][c] == 0.0) return 0.0;
        det *= a[c][c];
        for (int r = c + 1; r < 6; ++r) {
            double f = a[r][c] / a[c][c];
            for (int k = c; k < 6; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return det;
}

FlowWithJacobian flow_with_jacobian(const PhasePoint& z, const ForceField& field,
                                    double duration, Direction dir,
                                    const IntegrateOptions& opt) {
    if (duration < 0.0) throw std::invalid_argument("flow_with_jacobian: duration >= 0");
    double h = default_step(field, z, opt);
    double sgn = dir == Direction::backward ? -1.0 : 1.0;

    AugState s;
    s.z = FlowState{{z.x_par.x1, z.x_par.x2, z.x3}, z.v};
    double t = 0.0;
    bool crossed = false;
    while (t < duration - 1e-15) {
        double hh = std::min(h, duration - t);
        AugState next = aug_rk4_step(field, s, sgn * hh);
        if (next.z.x[2] < 0.0 && t + hh < duration - 1e-12) {
            // partial step up to the crossing, jacobian advanced consistently
            FlowState plain = s.z;
            double part = refine_crossing(field, plain, sgn * hh, opt.refine_tol);
            s = aug_rk4_step(field, s, part);
            t += std::abs(part);
            crossed = true;
            break;
        }
        s = next;
        t += hh;
    }
    FlowWithJacobian out;
    out.s_end = sgn * t;
    out.state = s.z;
    out.jac = s.j;
    out.crossed = crossed;
    return out;
}

ExitDerivatives exit_derivatives(const PhasePoint& z, const ForceField& field,
                                 const IntegrateOptions& opt) {
    ExitDerivatives out;
    out.exit = backward_exit(z, field, opt, false);
    if (out.exit.grazing) {
        out.grazing = true;
        return out;
    }

    // variational flow to the exit instant (exact duration, no event cut)
    IntegrateOptions jopt = opt;
    FlowWithJacobian fj = flow_with_jacobian(z, field, out.exit.t_b, Direction::backward, jopt);
    const JacobianState& J = fj.jac;
    double vb3 = out.exit.v_b[2];

    Vec3 grad_phi_xb = -1.0 * force_at(field, FlowState{{out.exit.xb_par.x1,
                                                          out.exit.xb_par.x2, 0.0},
                                                         out.exit.v_b});
    // grad_phi_xb now equals grad(Phi)(x_b) + g e3, the full vertical force sign-flipped

    for (int i = 0; i < 3; ++i) {
        out.dtb_dx[i] = J.dX_dx[i][2] / vb3;
        out.dtb_dv[i] = J.dX_dv[i][2] / vb3;
        for (int c = 0; c < 3; ++c) {
            out.dxb_dx[i][c] = -out.dtb_dx[i] * out.exit.v_b[c] + J.dX_dx[i][c];
            out.dxb_dv[i][c] = -out.dtb_dv[i] * out.exit.v_b[c] + J.dX_dv[i][c];
            out.dvb_dx[i][c] = out.dtb_dx[i] * grad_phi_xb[c] + J.dV_dx[i][c];
            out.dvb_dv[i][c] = out.dtb_dv[i] * grad_phi_xb[c] + J.dV_dv[i][c];
        }
        out.dxb_dx[i][2] = 0.0;  // the exit height is identically zero
        out.dxb_dv[i][2] = 0.0;
    }
    return out;
}

VelocityLemmaReport velocity_lemma_check(const PhasePoint& z, const ForceField& field,
                                         double hess33_sup, double mixed_boundary_sup,
                                         const IntegrateOptions& opt) {
    VelocityLemmaReport rep;
    ExitRecord rec = backward_exit(z, field, opt, false);
    if (rec.t_b <= 0.0) {
        rep.pass = true;  // equality at s = 0, vacuous arc
        return rep;
    }
    Trajectory traj = integrate_flow(z, field, rec.t_b, Direction::backward, opt);

    Params p;
    p.g = field.g;
    auto alpha_of = [&](const FlowState& s) {
        PhasePoint q = s.to_phase_point();
        return kinetic_distance(q, p, field.dphi3_boundary);
    };
    double alpha0 = alpha_of(traj.z.front());

    double up = std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    double vpar_int = 0.0;
    for (std::size_t k = 1; k < traj.z.size(); ++k) {
        double ds = std::abs(traj.s[k] - traj.s[k - 1]);
        double vpar_prev = std::hypot(traj.z[k - 1].v[0], traj.z[k - 1].v[1]);
        double vpar_here = std::hypot(traj.z[k].v[0], traj.z[k].v[1]);
        vpar_int += 0.5 * (vpar_prev + vpar_here) * ds;
        double t_abs = std::abs(traj.s[k]);
        double envelope = std::exp((1.0 + hess33_sup) * t_abs) *
                          std::exp(mixed_boundary_sup / field.g * vpar_int);
        double a = alpha_of(traj.z[k]);
        up = std::min(up, alpha0 * envelope - a);
        lo = std::min(lo, a - alpha0 / envelope);
    }
    rep.worst_upper_margin = up;
    rep.worst_lower_margin = lo;
    rep.pass = up >= -1e-9 && lo >= -1e-9;
    return rep;
}

}  // namespace vpgrav
