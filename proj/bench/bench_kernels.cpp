// Serial reference kernels against their OpenMP counterparts.
// Thread count follows OMP_NUM_THREADS / HETMEG_THREADS as usual.
#include "hetmeg/forward.hpp"
#include "hetmeg/geometry.hpp"
#include "hetmeg/optimizer.hpp"
#include "hetmeg/solver.hpp"
#include "hetmeg/source_model.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace hetmeg;

struct Fixture {
    geometry::CorticalMesh mesh;
    forward::SensorArray sensors;
    Eigen::MatrixXd L;
    Eigen::VectorXd d;

    explicit Fixture(int subdiv)
    {
        mesh = geometry::make_wrinkled_cortex(subdiv, 0.08, 0.008, 6, 7);
        sensors = forward::make_helmet_array(128, 0.12, 1.6);
        L = forward::build_leadfield_ref(mesh, sensors).matrix;
        const source::PatchParams p{0.4, -0.58, 0.1, 0.6e-3};
        d = L * source::make_patch_source(mesh, p, mesh.sphere.mean_edge_arc);
    }
};

const Fixture& fixture(int subdiv)
{
    static const Fixture f3(3), f4(4);
    return subdiv == 3 ? f3 : f4;
}

void BM_Leadfield(benchmark::State& state)
{
    const auto& f = fixture(static_cast<int>(state.range(0)));
    const bool parallel = state.range(1) != 0;
    for (auto _ : state) {
        auto lf = parallel ? forward::build_leadfield(f.mesh, f.sensors) : forward::build_leadfield_ref(f.mesh, f.sensors);
        benchmark::DoNotOptimize(lf.matrix.data());
    }
}

void BM_PatchIndicator(benchmark::State& state)
{
    const auto& f = fixture(static_cast<int>(state.range(0)));
    const bool parallel = state.range(1) != 0;
    const Eigen::Vector3d s0 = geometry::sphere_point(0.4, -0.58);
    const double eps = f.mesh.sphere.mean_edge_arc;
    for (auto _ : state) {
        auto h = parallel ? source::patch_indicator(f.mesh, s0, 0.1, eps)
                          : source::patch_indicator_ref(f.mesh, s0, 0.1, eps);
        benchmark::DoNotOptimize(h.data());
    }
}

void BM_ObjectiveBatch(benchmark::State& state)
{
    const auto& f = fixture(static_cast<int>(state.range(0)));
    const bool parallel = state.range(1) != 0;
    const solver::CovarianceContext ctx(f.L, 1e-9, 1e-13);
    const solver::PatchCost cost(ctx, f.mesh, f.d, f.mesh.sphere.mean_edge_arc);
    const optim::Objective obj = [&cost](const Eigen::Vector3d& x) { return cost(x); };
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 64; ++i) pts.emplace_back(0.05 * i, 0.1 * i, 0.3 * (i % 8) / 8.0);
    std::vector<double> vals(pts.size());
    for (auto _ : state) {
        if (parallel)
            optim::evaluate_batch(obj, pts, vals);
        else
            optim::evaluate_batch_ref(obj, pts, vals);
        benchmark::DoNotOptimize(vals.data());
    }
}

} // namespace

BENCHMARK(BM_Leadfield)->ArgsProduct({{3, 4}, {0, 1}})->ArgNames({"subdiv", "omp"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PatchIndicator)->ArgsProduct({{3, 4}, {0, 1}})->ArgNames({"subdiv", "omp"})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ObjectiveBatch)->ArgsProduct({{3, 4}, {0, 1}})->ArgNames({"subdiv", "omp"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
