#include <benchmark/benchmark.h>

#include <cmath>

#include "vpgrav/grid.hpp"

using namespace vpgrav;

static Distribution make_dist(int n3, int m) {
    auto sg = SpatialGrid::uniform(1, 1, n3, 6.0);
    auto vg = VelocityGrid::cube(m, m, m, 4.0);
    Distribution f = Distribution::zeros(sg, vg, Role::steady_h, 2.0);
    for (int j = 0; j <= sg.n3; ++j)
        for (int k1 = 0; k1 < vg.m1; ++k1)
            for (int k2 = 0; k2 < vg.m2; ++k2)
                for (int k3 = 0; k3 < vg.m3; ++k3) {
                    double v1 = vg.node(0, k1), v2 = vg.node(1, k2), v3 = vg.node(2, k3);
                    f.at(0, 0, j, k1, k2, k3) =
                        std::exp(-2.0 * (v1 * v1 + v2 * v2 + v3 * v3) - sg.x3[j]);
                }
    return f;
}

static void MomentDensity(benchmark::State& state) {
    Distribution f = make_dist(128, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        DensityField rho = moment_density(f);
        benchmark::DoNotOptimize(rho.values.data());
    }
}
BENCHMARK(MomentDensity)->Arg(16)->Arg(32);

static void MomentFlux(benchmark::State& state) {
    Distribution f = make_dist(128, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        FluxField b = moment_flux(f);
        benchmark::DoNotOptimize(b.comp[2].data());
    }
}
BENCHMARK(MomentFlux)->Arg(16)->Arg(32);

BENCHMARK_MAIN();
