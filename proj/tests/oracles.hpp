#pragma once

// Test-only oracles, independent of the library's solver paths.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "vpgrav/grid.hpp"

namespace vpgrav::testing {

// Two-point BVP oracle for the horizontally-homogeneous steady potential:
//   u'' = eta A (pi/beta)^{3/2} e^{-2 beta (u + g x)},  u(0) = 0,  u'(inf) = 0,
// by high-accuracy RK4 shooting with the far field imposed at 2 L3.
struct ShootingOracle {
    double eta, A, beta, g;

    double rhs(double u, double x) const {
        return eta * A * std::pow(std::numbers::pi / beta, 1.5) *
               std::exp(-2 * beta * (u + g * x));
    }

    double shoot(double s0, const SpatialGrid& sg, int sub, std::vector<double>& out) const {
        out.assign(sg.n3 + 1, 0.0);
        double h = sg.L3 / (static_cast<double>(sg.n3) * sub);
        double u = 0.0, du = s0, x = 0.0;
        int total = 2 * sg.n3 * sub;
        for (int i = 1; i <= total; ++i) {
            double k1u = du, k1v = rhs(u, x);
            double k2u = du + 0.5 * h * k1v, k2v = rhs(u + 0.5 * h * k1u, x + 0.5 * h);
            double k3u = du + 0.5 * h * k2v, k3v = rhs(u + 0.5 * h * k2u, x + 0.5 * h);
            double k4u = du + h * k3v, k4v = rhs(u + h * k3u, x + h);
            u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
            du += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
            x += h;
            if (i % sub == 0 && i / sub <= sg.n3) out[i / sub] = u;
        }
        return du;
    }

    std::vector<double> solve(const SpatialGrid& sg, int sub = 32) const {
        double mass = std::abs(A) * std::pow(std::numbers::pi / beta, 1.5) / (2 * beta * g);
        double lo = -2.0 * mass - 1e-3, hi = 2.0 * mass + 1e-3;
        std::vector<double> prof;
        for (int it = 0; it < 120; ++it) {
            double mid = 0.5 * (lo + hi);
            double slope_end = shoot(mid, sg, sub, prof);
            if (hi - lo < 1e-16) break;
            (slope_end > 0.0 ? hi : lo) = mid;
        }
        shoot(0.5 * (lo + hi), sg, sub, prof);
        return prof;
    }
};

// deterministic portable sampler
struct SplitMix {
    std::uint64_t s;
    explicit SplitMix(std::uint64_t seed) : s(seed ? seed : 1) {}
    std::uint64_t next() {
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

}  // namespace vpgrav::testing
