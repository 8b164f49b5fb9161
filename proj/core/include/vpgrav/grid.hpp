#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vpgrav/geometry.hpp"
#include "vpgrav/model.hpp"

namespace vpgrav {

/// Truncated spatial grid over T^2 x [0, L3]. Horizontal nodes are uniform
/// (n1 = n2 = 1 selects the horizontally-homogeneous 1D3V reduction);
/// vertical nodes are x3[0..n3] with x3[0] = 0 and x3[n3] = L3, either
/// uniform or geometrically refined toward the boundary to resolve the
/// near-wall density-gradient singularity.
struct SpatialGrid {
    int n1 = 1, n2 = 1;   // horizontal node counts
    int n3 = 0;           // vertical cell count (n3 + 1 nodes)
    double L3 = 0.0;
    std::vector<double> x3;

    static SpatialGrid uniform(int n1, int n2, int n3, double L3);
    /// ratio > 1 grows cell sizes geometrically away from x3 = 0.
    static SpatialGrid refined(int n1, int n2, int n3, double L3, double ratio);

    double x1_node(int i) const { return -0.5 + static_cast<double>(i) / n1; }
    double x2_node(int i) const { return -0.5 + static_cast<double>(i) / n2; }
    int num_vertical_nodes() const { return n3 + 1; }
    std::size_t num_nodes() const {
        return static_cast<std::size_t>(n1) * n2 * (n3 + 1);
    }
    std::size_t node_index(int i1, int i2, int j) const {
        return (static_cast<std::size_t>(i1) * n2 + i2) * (n3 + 1) + j;
    }
    /// largest j with x3[j] <= h (clamped to n3 - 1); t in [0,1] within the cell
    int locate_x3(double h, double& t) const;
    bool tail_tolerance_ok(double beta, double g, double tol) const;
};

/// Uniform velocity grid [-vmax, vmax]^3 with m1 x m2 x m3 nodes.
struct VelocityGrid {
    int m1 = 0, m2 = 0, m3 = 0;
    double vmax = 0.0;

    static VelocityGrid cube(int m1, int m2, int m3, double vmax);

    double node(int axis, int k) const {
        int m = axis == 0 ? m1 : (axis == 1 ? m2 : m3);
        return m == 1 ? 0.0 : -vmax + 2.0 * vmax * k / (m - 1);
    }
    double spacing(int axis) const {
        int m = axis == 0 ? m1 : (axis == 1 ? m2 : m3);
        return m == 1 ? 2.0 * vmax : 2.0 * vmax / (m - 1);
    }
    /// composite-trapezoid weight of node k on one axis
    double quad_weight(int axis, int k) const {
        int m = axis == 0 ? m1 : (axis == 1 ? m2 : m3);
        if (m == 1) return 2.0 * vmax;
        return (k == 0 || k == m - 1) ? 0.5 * spacing(axis) : spacing(axis);
    }
    std::size_t num_nodes() const {
        return static_cast<std::size_t>(m1) * m2 * m3;
    }
    bool tail_tolerance_ok(double beta, double tol) const;
};

enum class Role : std::uint8_t { steady_h, perturbation_f, total_F };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

/// Phase-space samples on SpatialGrid x VelocityGrid, row-major in
/// (x1, x2, x3, v1, v2, v3).
struct Distribution {
    SpatialGrid sg;
    VelocityGrid vg;
    Role role = Role::steady_h;
    double beta = 1.0;  // Gaussian-tail metadata of the stored data
    std::vector<double> values;

    static Distribution zeros(const SpatialGrid& sg, const VelocityGrid& vg, Role role,
                              double beta);

    std::size_t index(int i1, int i2, int j, int k1, int k2, int k3) const {
        return ((((static_cast<std::size_t>(i1) * sg.n2 + i2) * (sg.n3 + 1) + j) * vg.m1 + k1) *
                    vg.m2 + k2) * vg.m3 + k3;
    }
    double& at(int i1, int i2, int j, int k1, int k2, int k3) {
        return values[index(i1, i2, j, k1, k2, k3)];
    }
    double at(int i1, int i2, int j, int k1, int k2, int k3) const {
        return values[index(i1, i2, j, k1, k2, k3)];
    }

    void assert_finite() const;  // NaN rejection at ingest
    double max_abs() const;
};

struct DensityField {
    SpatialGrid sg;
    std::vector<double> values;  // node-indexed like SpatialGrid::node_index
    double tail_bound = 0.0;     // analytic bound on the neglected velocity tail

    double max_abs() const;
};

struct FluxField {
    SpatialGrid sg;
    std::array<std::vector<double>, 3> comp;
    double tail_bound = 0.0;
};

/// Velocity moment  rho(x) = int f dv  by composite trapezoid, with an
/// analytic Gaussian bound on the truncated tail.
DensityField moment_density(const Distribution& f);

/// First moment  b(x) = int v f dv.
FluxField moment_flux(const Distribution& f);

struct InterpValue {
    double value = 0.0;
    bool tail = false;  // query was beyond the vertical truncation
};

/// Multilinear interpolation of a Distribution at a phase point. Horizontal
/// coordinates wrap; x3 > L3 returns the analytic tail value 0 with a flag;
/// velocities outside the box return 0 (below the Gaussian tail tolerance).
InterpValue interpolate(const Distribution& f, const PhasePoint& z);

/// Same contract on a raw phase-space array laid out like Distribution::values.
InterpValue interpolate_raw(const SpatialGrid& sg, const VelocityGrid& vg,
                            const std::vector<double>& values, const PhasePoint& z);

/// Multilinear interpolation of a node field; same boundary contract.
InterpValue interpolate(const DensityField& field, const Vec2& x_par, double x3);

}  // namespace vpgrav
