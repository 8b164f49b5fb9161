#include <benchmark/benchmark.h>

#include <cmath>

#include "vpgrav/poisson.hpp"

using namespace vpgrav;

static DensityField make_density(int n1, int n3) {
    auto sg = SpatialGrid::uniform(n1, n1, n3, 12.0);
    DensityField rho;
    rho.sg = sg;
    rho.values.resize(sg.num_nodes());
    for (int i1 = 0; i1 < sg.n1; ++i1)
        for (int i2 = 0; i2 < sg.n2; ++i2)
            for (int j = 0; j <= sg.n3; ++j)
                rho.values[sg.node_index(i1, i2, j)] =
                    std::exp(-sg.x3[j]) * (1.0 + 0.3 * std::cos(6.2831853 * sg.x1_node(i1)));
    return rho;
}

static void SolveDirichlet(benchmark::State& state) {
    DensityField rho = make_density(static_cast<int>(state.range(0)), 256);
    for (auto _ : state) {
        Field f = solve_dirichlet(rho, +1);
        benchmark::DoNotOptimize(f.phi.data());
    }
}
BENCHMARK(SolveDirichlet)->Arg(1)->Arg(4)->Arg(8);

static void FieldDerivatives(benchmark::State& state) {
    DensityField rho = make_density(static_cast<int>(state.range(0)), 256);
    Field f = solve_dirichlet(rho, +1);
    for (auto _ : state) {
        Field g = f;
        field_derivatives(g, rho);
        benchmark::DoNotOptimize(g.grad[2].data());
    }
}
BENCHMARK(FieldDerivatives)->Arg(1)->Arg(8);

BENCHMARK_MAIN();
