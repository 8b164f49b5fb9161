#pragma once

#include <vector>

#include "vpgrav/steady.hpp"

namespace vpgrav {

/// Explicit exponential decay rate of the perturbation density,
///   lambda = (g^2 beta / 2^6) ln(2 + g beta^2 / (2^{17/2 + 2/g} pi^{3/2} N))
/// with N = || w_beta grad_v h ||_inf. N = 0 returns +inf (unbounded rate).
double lambda_infinity(const Params& p, double norm_wdvh);

/// State of the perturbation run after one splitting step.
struct DynamicState {
    double t = 0.0;
    Distribution f;
    DensityField rho;
    Field psi;
    FluxField b;
    FluxPotential ddb;  // Delta_0^{-1}(div b)
    bool bootstrap_ok = true;
    bool bootstrap_f_ok = true;
    double norm_f_weighted = 0.0;  // || e^{beta/2 (|v|^2 + g x3)} f ||_inf
    double norm_f_eighth = 0.0;    // || e^{beta/8 (|v|^2 + g x3)} f ||_inf
    double norm_rho_inf = 0.0;
    double sup_grad_psi = 0.0;
};

struct DynamicOptions {
    double h_scale = 1e-3;   // backtrace substep scale within one step
    int min_substeps = 4;
    unsigned threads = 0;
    bool predictor_corrector = false;  // two-stage field average, for dt studies
    int output_stride = 1;
    // called on every recorded output row (step index, state); snapshot
    // persistence hooks in here so the march never buffers full states
    std::function<void(int, const DynamicState&)> observer;
};

struct SeriesRow {
    double t = 0.0;
    double norm_rho_inf = 0.0;
    double norm_f_weighted = 0.0;
    double decay_lhs = 0.0;  // e^{lambda t} ||rho(t)||_inf
    double decay_rhs = 0.0;
    bool bootstrap_ok = true;
    double ddb_sup = 0.0;          // || Delta_0^{-1}(div b) ||_inf at this step
    double flux_bound_rhs = 0.0;   // 8 pi (1 + 1/(beta g)) / beta^2 * sup_s norm_f
    double decay_f_lhs = 0.0;      // e^{lambda t} || e^{beta/8(.)} f ||_inf
    double decay_f_rhs = 0.0;
};

struct DecayReport {
    double lambda_fit = 0.0;
    double lambda_inf = 0.0;
    double norm_wdvh = 0.0;
    double norm_w0_f0 = 0.0;      // || w_{beta,0} f_0 ||_inf
    double fit_t_begin = 0.0, fit_t_end = 0.0;
    int fit_samples = 0;
    bool fit_window_shifted = false;  // signal extinguished inside [T/2, T]
    bool bootstrap_held = false;
    bool density_bound_held = false;  // decay_lhs <= decay_rhs at every output
    bool f_bound_held = false;
    bool flux_bound_held = false;
    bool eb_bound_held = false;       // exp((64 beta/g) sup ||ddb||^2) <= 2
    double eb_value = 0.0;
    double m_constant = 0.0;          // max of the weighted steady/data norms
    double sup_f_weighted = 0.0;      // run sup of the half-weighted f norm
    bool wf_bound_held = false;       // sup_f_weighted <= 4 m_constant
    bool certified = false;           // bootstrap held and both decay bounds held
};

struct EvolveResult {
    std::vector<SeriesRow> series;
    DecayReport decay;
    DynamicState final_state;
};

/// Build the t = 0 state from an initial perturbation.
DynamicState initial_state(Distribution f0, const SteadySolution& steady, const Params& p,
                           const DynamicOptions& opt = {});

/// One splitting step: backtrace each phase node over [t, t+dt] under the
/// field frozen at the step start, transport the interior value (zero when
/// the arc left through the boundary), add the time-quadrature of the
/// field-times-steady-gradient source, then refresh the moments and the
/// potential.
DynamicState duhamel_step(const DynamicState& state, const SteadySolution& steady,
                          const Params& p, double dt, const DynamicOptions& opt = {});

/// March to time T, recording the certified-decay diagnostics per output row.
EvolveResult evolve(Distribution f0, const SteadySolution& steady, const Params& p, double dt,
                    double T, const DynamicOptions& opt = {});

struct WeightRatioReport {
    double worst_ratio_margin = 0.0;     // min over samples of RHS - ratio
    double worst_steady_margin = 0.0;    // min over samples of RHS - 1/w bound ratio
    bool pass = false;
};

/// Sample dynamic trajectories and assert the weight-ratio inequalities with
/// the explicit exponential constants in the flux-potential sup norm.
WeightRatioReport weight_ratio_check(const DynamicState& state, const SteadySolution& steady,
                                     const Params& p, int samples, std::uint64_t seed);

/// Least-squares slope of -log(y) over the fitted window (helper shared with
/// the verification battery).
double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y);

/// Largest dt the splitting accepts: a tenth of the median free-fall scale.
double max_splitting_dt(const SpatialGrid& sg, const VelocityGrid& vg, double g);

}  // namespace vpgrav
