#include <benchmark/benchmark.h>

#include <cmath>

#include "vpgrav/characteristics.hpp"

using namespace vpgrav;

static void BackwardExit(benchmark::State& state) {
    double g = 2.0;
    ForceField field = ForceField::analytic(
        g, [](const Vec2&, double x3) { return 0.05 * (std::exp(-2 * x3) - 1.0); },
        [](const Vec2&, double x3) { return Vec3{0.0, 0.0, -0.1 * std::exp(-2 * x3)}; },
        [](const Vec2&, double x3) {
            Mat3 H;
            H[2][2] = 0.2 * std::exp(-2 * x3);
            return H;
        });
    IntegrateOptions opt;
    opt.h_scale = state.range(0) == 0 ? 1e-3 : 1e-2;
    std::uint64_t s = 1;
    for (auto _ : state) {
        s = s * 6364136223846793005ull + 1442695040888963407ull;
        double x3 = 0.1 + 4.0 * ((s >> 11) * 0x1.0p-53);
        PhasePoint z({0.1, -0.2}, x3, {0.3, 0.1, -0.5});
        ExitRecord er = backward_exit(z, field, opt);
        benchmark::DoNotOptimize(er.t_b);
    }
}
BENCHMARK(BackwardExit)->Arg(0)->Arg(1);

static void FlowWithJacobianBench(benchmark::State& state) {
    ForceField field = ForceField::gravity_only(2.0);
    for (auto _ : state) {
        FlowWithJacobian fj = flow_with_jacobian(PhasePoint({0, 0}, 2.0, {0.2, 0.1, -0.4}),
                                                 field, 1.0, Direction::backward);
        benchmark::DoNotOptimize(fj.jac.det6());
    }
}
BENCHMARK(FlowWithJacobianBench);

BENCHMARK_MAIN();
