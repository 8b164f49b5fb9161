#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "vpgrav/model.hpp"
#include "vpgrav/poisson.hpp"

namespace vpgrav {

/// Total acceleration a(x) = -grad Phi(x) [- grad Psi(x)] - g e3, with the
/// field Hessian for the variational equations and the potential value for
/// weight diagnostics. Time-dependent potentials are frozen by the caller
/// before they reach the integrator, so the field is always autonomous here.
struct ForceField {
    std::function<Vec3(const Vec2&, double)> accel;
    std::function<Mat3(const Vec2&, double)> hessian;       // of Phi (+ Psi)
    std::function<double(const Vec2&, double)> potential;   // Phi (+ Psi)
    std::function<double(const Vec2&)> dphi3_boundary;      // d3 potential at x3 = 0
    double g = 1.0;
    bool time_dependent = false;

    static ForceField gravity_only(double g);
    static ForceField from_field(const Field& phi, double g);
    static ForceField from_fields(const Field& phi, const Field& psi, double g);
    /// analytic closures (exact gradients, for oracle-grade tests)
    static ForceField analytic(double g, std::function<double(const Vec2&, double)> pot,
                               std::function<Vec3(const Vec2&, double)> grad,
                               std::function<Mat3(const Vec2&, double)> hess);
};

enum class Direction { backward, forward };

struct IntegrateOptions {
    double h_ode = 0.0;        // 0: scale-based default 1e-3 (2/g) sqrt(v3^2 + g x3)
    double h_scale = 1e-3;
    double refine_tol = 1e-12; // bisection tolerance on |X3| at the crossing
    double safety = 0.5;       // slack on the analytic exit-time bound
    bool richardson = false;   // estimate the integrator error with one h/2 re-run
};

/// trajectory state with unwrapped horizontal position
struct FlowState {
    Vec3 x;  // x[0], x[1] unwrapped horizontal, x[2] = x3
    Vec3 v;

    PhasePoint to_phase_point() const { return PhasePoint({x[0], x[1]}, x[2], v); }
};

struct Trajectory {
    std::vector<double> s;       // signed times, s[0] = 0
    std::vector<FlowState> z;
    bool crossed = false;        // stopped at an x3 = 0 crossing
    double richardson_error = -1.0;
};

struct ExitFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed-step RK4 along the characteristic ODE, stopping early at a boundary
/// crossing (refined by bisection).
Trajectory integrate_flow(const PhasePoint& z, const ForceField& field, double duration,
                          Direction dir, const IntegrateOptions& opt = {});

struct ExitRecord {
    double t_b = 0.0;   // backward exit time
    Vec2 xb_par;        // exit position on the boundary (x3 component is 0)
    Vec3 v_b;           // exit velocity, v_b[2] > 0 away from the grazing set
    double t_f = 0.0;   // forward exit time (NaN when not requested)
    double err_estimate = -1.0;
    bool grazing = false;
};

/// Trace the characteristic backward (and optionally forward) to x3 = 0.
/// Throws ExitFailure past the analytic exit-time bound, which indicates a
/// field-gradient bound violation or an integrator failure.
ExitRecord backward_exit(const PhasePoint& z, const ForceField& field,
                         const IntegrateOptions& opt = {}, bool want_forward = false);

/// Variational state along the flow; blocks indexed [derivative var][component].
struct JacobianState {
    Mat3 dX_dx = Mat3::identity();
    Mat3 dX_dv;
    Mat3 dV_dx;
    Mat3 dV_dv = Mat3::identity();

    double det6() const;  // determinant of the full 6x6 block matrix
};

struct FlowWithJacobian {
    double s_end = 0.0;  // signed end time
    FlowState state;
    JacobianState jac;
    bool crossed = false;
};

/// Augmented RK4 of the flow plus the variational equations
///   d(dX)/ds = dV,  d(dV)/ds = -(dX . grad) grad(Phi)(X).
FlowWithJacobian flow_with_jacobian(const PhasePoint& z, const ForceField& field,
                                    double duration, Direction dir,
                                    const IntegrateOptions& opt = {});

struct ExitDerivatives {
    ExitRecord exit;
    Vec3 dtb_dx, dtb_dv;
    Mat3 dxb_dx, dxb_dv;  // [deriv var][component], third component identically 0
    Mat3 dvb_dx, dvb_dv;
    bool grazing = false;
};

constexpr double kGrazingThreshold = 1e-6;

/// Derivatives of (t_b, x_b, v_b) with respect to the starting phase point,
/// through the variational flow evaluated at the exit instant. Near the
/// grazing set (|v_b3| below the threshold) the formulas blow up like the
/// reciprocal kinetic distance and the record is flagged instead.
ExitDerivatives exit_derivatives(const PhasePoint& z, const ForceField& field,
                                 const IntegrateOptions& opt = {});

struct VelocityLemmaReport {
    double worst_upper_margin = 0.0;  // min over samples of bound - alpha  (>= 0 to pass)
    double worst_lower_margin = 0.0;
    bool pass = false;
};

/// Check the two-sided exponential envelope of the kinetic distance along the
/// backward arc, with the explicit exponents built from the field norms.
VelocityLemmaReport velocity_lemma_check(const PhasePoint& z, const ForceField& field,
                                         double hess33_sup, double mixed_boundary_sup,
                                         const IntegrateOptions& opt = {});

/// Analytic exit-time bounds used both as contracts and as test assertions:
/// backward  t_b <= (2/g)(sqrt(v3^2 + g x3) - v3)  and the two-sided bound
/// t_b + t_f <= (4/g) sqrt(v3^2 + g x3), valid under the g/2 gradient bound.
double exit_time_upper_bound(double g, double x3, double v3);
double roundtrip_time_upper_bound(double g, double x3, double v3);

}  // namespace vpgrav
