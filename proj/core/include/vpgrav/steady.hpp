#pragma once

#include <optional>
#include <string>

#include "vpgrav/characteristics.hpp"
#include "vpgrav/grid.hpp"
#include "vpgrav/model.hpp"
#include "vpgrav/poisson.hpp"

namespace vpgrav {

/// Left/right sides of the four uniform bounds monitored on every iterate:
/// sup h against the data sup, the weighted sup, the weighted density, and
/// the field-gradient bound.
struct UestMargins {
    double h_lhs = 0, h_rhs = 0;
    double wh_lhs = 0, wh_rhs = 0;
    double rho_lhs = 0, rho_rhs = 0;
    double dphi_lhs = 0, dphi_rhs = 0;

    bool all_ok(double rel_tol) const {
        auto ok = [rel_tol](double l, double r) { return l <= r * (1.0 + rel_tol) + 1e-300; };
        return ok(h_lhs, h_rhs) && ok(wh_lhs, wh_rhs) && ok(rho_lhs, rho_rhs) &&
               ok(dphi_lhs, dphi_rhs);
    }
};

struct SteadyIterate {
    int ell = 0;
    Distribution h;
    DensityField rho;
    Field phi;
    UestMargins margins;
    double diff_weighted = 0.0;  // weighted sup distance from the previous iterate
    bool flagged = false;        // some bound breached beyond tolerance

    static SteadyIterate initial(const SpatialGrid& sg, const VelocityGrid& vg,
                                 const Params& p);
};

struct SteadyOptions {
    double tol_fix = 1e-9;
    int max_iter = 50;
    double h_scale = 1e-3;       // ODE step scale for the backtraces
    double bound_tol = 1e-3;     // relative tolerance of the uniform-bound monitor
    unsigned threads = 0;
    bool compute_gradients = true;
    std::optional<DensityField> seed_rho;  // solve this density for the initial field
};

struct SteadyConvergence {
    std::vector<double> diffs;          // weighted sup differences per iterate
    std::vector<UestMargins> margins;
    std::vector<double> ratios() const; // successive-difference ratios
};

enum class SolveStatus { converged, max_iter_reached, exit_failure };

struct SteadySolution {
    Params params;
    Distribution h;
    DensityField rho;
    Field phi;
    // velocity-gradient tables (one Distribution-shaped array per component)
    std::array<std::vector<double>, 3> dvh;
    std::vector<std::uint8_t> dvh_fallback;  // 1 where the grazing FD fallback fired
    double norm_wh = 0.0;        // || w_beta h ||_inf on the grid
    double norm_wG = 0.0;        // || e^{beta |v|^2} G ||_inf of the inflow data
    double norm_wdvh = 0.0;      // || w_beta grad_v h ||_inf on the grid
    double norm_wdvh_tilde = 0.0;  // half-weighted beta_tilde version
    SteadyConvergence history;
    SolveStatus status = SolveStatus::converged;

    double dvh_at(int comp, const PhasePoint& z) const;  // multilinear lookup
};

/// Transport value: h(z) = G(x_b(z), v_b(z)) through the backward exit.
double evaluate_h_backtrace(const PhasePoint& z, const ForceField& field,
                            const BoundaryDatum& G, const IntegrateOptions& opt = {});

/// One step of the self-consistent iteration: re-backtrace the distribution
/// under the previous field, take the velocity moment, and re-solve the
/// potential; the uniform-bound margins are recorded on the way.
SteadyIterate picard_iterate(const SteadyIterate& prev, const BoundaryDatum& G,
                             const Params& p, const SteadyOptions& opt = {});

/// Iterate to a fixed point in the half-weighted sup metric
/// || exp(beta/2 (|v|^2 + g x3)) (h' - h) ||_inf.
SteadySolution solve_steady(const BoundaryDatum& G, const Params& p, const SpatialGrid& sg,
                            const VelocityGrid& vg, const SteadyOptions& opt = {});

struct GradH {
    Vec3 grad_x;
    Vec3 grad_v;
    bool fallback = false;
};

/// Gradients of the transported data by the exit-derivative chain rule;
/// near-grazing points fall back to one-sided finite differences and are
/// flagged.
GradH grad_h(const SteadySolution& sol, const BoundaryDatum& G, const PhasePoint& z,
             const IntegrateOptions& opt = {});

struct RegularityReport {
    double log_fit_c1 = 0.0, log_fit_c2 = 0.0, log_fit_r2 = 0.0;
    double far_envelope = 0.0;       // sup over x3 >= 1 of weighted |d3 rho|
    double hk_x_constant = 0.0;      // fitted C with weighted |d3 h| <= C (1 + 1/alpha)
    double hk_v_constant = 0.0;      // fitted C of the weighted grad_v bound
    std::string to_text() const;
};

/// Near-boundary log-singularity fit of the density gradient plus the
/// weighted derivative envelopes.
RegularityReport regularity_diagnostics(const SteadySolution& sol, const BoundaryDatum& G);

struct UniquenessReport {
    double weighted_distance = 0.0;
    SolveStatus status_a = SolveStatus::converged;
    SolveStatus status_b = SolveStatus::converged;
    bool agree(double tol) const {
        return status_a == SolveStatus::converged && status_b == SolveStatus::converged &&
               weighted_distance <= tol;
    }
};

/// Solve from the zero field and from the closed-form first-iterate field;
/// in the smallness regime both runs must land on the same fixed point.
UniquenessReport uniqueness_probe(const BoundaryDatum& G, const Params& p,
                                  const SpatialGrid& sg, const VelocityGrid& vg,
                                  const SteadyOptions& opt = {});

/// Closed-form first-iterate density of a Maxwellian inflow,
/// rho(x3) = A (pi/beta)^{3/2} exp(-2 beta g x3), used for seeding and tests.
DensityField first_iterate_density(const BoundaryDatum& G, const Params& p,
                                   const SpatialGrid& sg);

}  // namespace vpgrav
