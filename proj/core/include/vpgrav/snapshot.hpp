#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vpgrav/grid.hpp"

namespace vpgrav {

struct SnapshotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// On-disk form: a textual header (magic "VPGRAV1", role, dims, grid extents,
/// beta, g, creation stamp, payload count, then "end") followed by the
/// row-major payload as 64-bit little-endian reals regardless of host order.
/// The payload round-trips bit for bit; the vertical node coordinates are
/// carried in the header in shortest-round-trip decimal form.
struct SnapshotMeta {
    std::string role = "field";
    std::vector<std::size_t> dims;
    std::vector<double> x3_nodes;
    double vmax = 0.0;
    double beta = 0.0;
    double g = 0.0;
    std::string created;  // informational only
};

void write_snapshot(const std::string& path, const SnapshotMeta& meta,
                    const std::vector<double>& payload);

struct Snapshot {
    SnapshotMeta meta;
    std::vector<double> payload;
};

Snapshot read_snapshot(const std::string& path);

void write_distribution_snapshot(const std::string& path, const Distribution& f, double g);
Distribution read_distribution_snapshot(const std::string& path);

void write_density_snapshot(const std::string& path, const DensityField& rho, double beta,
                            double g, const std::string& role);

}  // namespace vpgrav
