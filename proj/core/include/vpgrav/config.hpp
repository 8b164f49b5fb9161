#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "vpgrav/grid.hpp"
#include "vpgrav/model.hpp"

namespace vpgrav {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Line-oriented [section] key = value run configuration. Unknown keys are
/// rejected with their location; every numeric field is range-checked at
/// parse time; the echo is itself parseable.
struct RunConfig {
    // [physics]
    double g = 4.0;
    int eta = +1;
    double beta = 2.0;
    double beta_tilde = 1.0;
    double green_constant = 4.0;

    // [grid]
    int n1 = 1, n2 = 1, n3 = 128;
    double L3 = 6.0;
    int m1 = 16, m2 = 16, m3 = 64;
    double vmax = 4.0;
    double vertical_refinement = 0.0;  // <= 1 selects the uniform grid

    // [boundary]
    std::string boundary_kind = "maxwellian";
    double amplitude = 0.01;
    double decay = 0.0;        // 0 defaults to beta
    std::string table;         // sample file for the tabulated kind

    // [steady]
    double tol_fix = 1e-9;
    int max_iter = 50;
    double h_scale = 1e-3;
    bool seed_from_closed_form = false;

    // [dynamic]
    double dt = 0.1;
    double T = 0.0;  // 0 selects 20 / lambda
    double f0_amplitude = 1e-3;
    int output_stride = 5;
    int substeps = 4;
    int snapshot_stride = 10;  // snapshot every this-many output rows
    bool predictor_corrector = false;

    // [verify]
    std::uint64_t seed = 42;
    int samples = 10000;
    double tol_exit = 1e-8;
    double tol_jacobian = 1e-5;
    double tol_weight_drift = 1e-7;
    unsigned threads = 0;

    Params params() const;
    SpatialGrid spatial_grid() const;
    VelocityGrid velocity_grid() const;
    BoundaryDatum boundary() const;
    double boundary_decay() const { return decay > 0.0 ? decay : beta; }

    void validate() const;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Round-trip-stable textual form of the resolved configuration.
std::string echo_config(const RunConfig& cfg);

}  // namespace vpgrav
