// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.
#include "baseline_oracle.hpp"
#include "hetmeg/baselines.hpp"
#include "hetmeg/forward.hpp"
#include "hetmeg/harness.hpp"
#include "hetmeg/io.hpp"
#include "hetmeg/optimizer.hpp"
#include "hetmeg/solver.hpp"
#include "test_functions.hpp"

#include <Eigen/Dense>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

using namespace hetmeg;
namespace fs = std::filesystem;
using Vec3 = Eigen::Vector3d;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Vec3 random_patch(std::mt19937_64& rng, double r_max)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {std::acos(1.0 - 2.0 * u(rng)), 2.0 * std::numbers::pi * u(rng), r_max * u(rng)};
}

Outcome optimality_identity()
{
    const Stopwatch clock;
    const harness::ExperimentConfig cfg;
    const harness::Dataset ds = harness::simulate(cfg);
    const auto& L = ds.geometry.leadfield.matrix;
    const solver::CovarianceContext ctx(L, ds.sigma_b, ds.sigma_n);
    const solver::PatchCost cost(ctx, ds.geometry.mesh, ds.data, ds.eps);

    std::mt19937_64 rng(2024);
    double worst = 0.0;
    const int draws = 1000;
    for (int k = 0; k < draws; ++k) {
        const Vec3 x = random_patch(rng, cfg.r_max);
        const double j0 = cost.amplitude(x);
        const Eigen::VectorXd jp = source::make_patch_source(ds.geometry.mesh, {x[0], x[1], x[2], j0}, ds.eps);
        const double psi = solver::cost_psi(ctx, jp, solver::solve_background(ctx, ds.data, jp), ds.data);
        const double phi = cost(x);
        worst = std::max(worst, std::abs(psi - phi) / phi);
    }
    const double t = clock.seconds();
    return {worst < 1e-8 && t < 120.0,
            fmt("max |Psi-Phi|/Phi = %.2e over %d draws at M=%td N=%td (%.1f s)", worst, draws, L.cols(), L.rows(), t)};
}

Outcome dual_form()
{
    const Stopwatch clock;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    Eigen::Index max_m = 0, max_n = 0;
    for (int k = 0; k < 50; ++k) {
        const auto mesh = geometry::make_wrinkled_cortex(2, 0.08, 0.008, 6, 100 + k);
        const int n = 8 + static_cast<int>(u(rng) * 25);
        const auto sensors = forward::make_helmet_array(n, 0.12, 0.6 + u(rng));
        const Eigen::MatrixXd L = forward::build_leadfield(mesh, sensors).matrix;
        max_m = std::max(max_m, L.cols());
        max_n = std::max(max_n, L.rows());
        const double sigma_b = 1e-10 * (0.1 + u(rng));
        const Eigen::VectorXd jp = source::make_patch_source(
            mesh, {u(rng) * std::numbers::pi, u(rng) * 6.28, 0.3 * u(rng), 1e-3}, mesh.sphere.mean_edge_arc);
        const Eigen::VectorXd jb = source::sample_background(L.cols(), sigma_b, k);
        Eigen::VectorXd d = L * (jp + jb);
        const double sigma_n = (0.01 + 0.5 * u(rng)) * d.norm() / std::sqrt(static_cast<double>(n));
        for (Eigen::Index i = 0; i < d.size(); ++i) d[i] += sigma_n * (u(rng) - 0.5);
        const solver::CovarianceContext ctx(L, sigma_b, sigma_n);
        const Eigen::VectorXd dual = solver::solve_background(ctx, d, 0.7 * jp);

        Eigen::MatrixXd normal = L.transpose() * L;
        normal.diagonal().array() += std::pow(sigma_n / sigma_b, 2);
        const Eigen::VectorXd direct = normal.ldlt().solve(L.transpose() * (d - L * (0.7 * jp)));
        worst = std::max(worst, (dual - direct).norm() / direct.norm());
    }
    return {worst < 1e-9 && max_m <= 200 && max_n <= 32,
            fmt("max relative difference %.2e over 50 instances, M=%td, N<=%td (%.1f s)", worst, max_m, max_n, clock.seconds())};
}

Outcome exact_recovery()
{
    const Stopwatch clock;
    harness::ExperimentConfig cfg;
    cfg.background_ratio = 0.0;
    cfg.noise_ratio = 0.0;
    const harness::Dataset ds = harness::simulate(cfg);
    harness::ExperimentConfig settings = ds.config;
    settings.sigma_b = source::background_sigma_from_ratio(ds.geometry.mesh, ds.truth.j0, 0.17);
    settings.noise_ratio_normalized = 1e-3;
    const harness::MethodResult res = harness::solve(ds, harness::Method::hetero, settings);
    const auto& p = *res.patch;
    const double center = geometry::geodesic_dist_on_sphere(p.center(), ds.truth.center());
    const double radius = std::abs(p.r0 - ds.truth.r0);
    const double amp = std::abs(p.j0 - ds.truth.j0) / ds.truth.j0;
    const double t = clock.seconds();
    return {center < 0.01 && radius < 0.01 && amp < 0.02 && res.search->evals <= 2000 && t < 300.0,
            fmt("center %.2e rad, radius %.2e rad, amplitude %.2e rel, %d evals + polish (%.1f s)", center, radius,
                amp, res.search->evals, t)};
}

struct SeedRuns {
    std::vector<harness::Metrics> hetero, patch, imaging;
    double seconds = 0.0;
};

SeedRuns reference_setting_runs()
{
    const Stopwatch clock;
    const harness::ExperimentConfig cfg;
    const auto sweep = harness::run_sweep(cfg, "noise.noise_ratio", {"0.1"}, 20);
    SeedRuns runs;
    runs.hetero.resize(20);
    runs.patch.resize(20);
    runs.imaging.resize(20);
    for (const auto& c : sweep.cells) {
        auto& slot = c.method == harness::Method::hetero ? runs.hetero
                   : c.method == harness::Method::patch  ? runs.patch
                                                         : runs.imaging;
        slot[c.seed_index] = c.metrics;
    }
    runs.seconds = clock.seconds();
    return runs;
}

double median_of(const std::vector<harness::Metrics>& ms, double harness::Metrics::*field)
{
    std::vector<double> v;
    for (const auto& m : ms) v.push_back(m.*field);
    return harness::median(v);
}

Outcome reference_setting(const SeedRuns& r)
{
    const double dice = median_of(r.hetero, &harness::Metrics::dice);
    const double center = median_of(r.hetero, &harness::Metrics::center_error);
    return {dice >= 0.7 && center < 0.05,
            fmt("hetero median Dice %.3f (need >= 0.7), median center error %.4f rad (need < 0.05) over 20 seeds (%.1f s)",
                dice, center, r.seconds)};
}

Outcome ranking(const SeedRuns& r)
{
    int wins = 0;
    for (int s = 0; s < 20; ++s) wins += r.hetero[s].center_error < r.patch[s].center_error;
    const double dice_h = median_of(r.hetero, &harness::Metrics::dice);
    const double dice_i = median_of(r.imaging, &harness::Metrics::dice);
    return {wins >= 15 && dice_h > dice_i,
            fmt("hetero beats patch-only on center error in %d/20 seeds (need >= 15); median Dice hetero %.3f vs imaging %.3f",
                wins, dice_h, dice_i)};
}

Outcome optimizer()
{
    double opt_seconds = 0.0;
    bool all = true;
    std::string detail;
    optim::OptimizerConfig cfg;
    cfg.max_evals = 3000;
    cfg.min_diag = std::numeric_limits<double>::min();  // budget-limited
    for (const auto& p : testfn::problems()) {
        const double grid = testfn::grid_minimum(p, 200);
        const Stopwatch clock;
        const auto r = optim::minimize_global(p.f, p.box, cfg);
        opt_seconds += clock.seconds();
        const bool ok = r.f_best <= grid + 1e-2;
        all = all && ok;
        detail += fmt("%s %.4g/%.4g%s; ", p.name.c_str(), r.f_best, grid, ok ? "" : " MISS");
    }
    for (const auto& p : testfn::probes()) {
        const double grid = testfn::grid_minimum(p, 200);
        const auto r = optim::minimize_global(p.f, p.box, cfg);
        std::cout << fmt("   note: harder problem %s reaches %.6g against grid minimum %.6g (%s)\n", p.name.c_str(),
                         r.f_best, grid, r.f_best <= grid + 1e-2 ? "within 1e-2" : "outside 1e-2");
    }
    return {all && opt_seconds < 60.0, detail + fmt("optimizer time %.1f s", opt_seconds)};
}

Outcome forward_sanity()
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vec3 center(0.001, -0.002, 0.04);
    const auto sensors = forward::make_helmet_array(128, 0.12, 1.6, center);
    double worst_silence = 0.0, worst_linear = 0.0;
    int points = 0;
    while (points < 100) {
        const Vec3 offset(0.09 * u(rng), 0.09 * u(rng), 0.09 * u(rng));
        if (offset.norm() >= 0.09 || offset.norm() < 1e-3) continue;
        ++points;
        const Vec3 pos = center + offset;
        const Vec3 radial = offset.normalized();
        const Vec3 q1(u(rng), u(rng), u(rng)), q2(u(rng), u(rng), u(rng));
        const double a = u(rng) * 3.0, b = u(rng) * 3.0;
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const Vec3 r = sensors.positions[s];
            worst_silence = std::max(worst_silence, forward::dipole_field_sarvas(pos, radial, r, center).cwiseAbs().maxCoeff());
            const Vec3 lhs = forward::dipole_field_sarvas(pos, a * q1 + b * q2, r, center);
            const Vec3 rhs = a * forward::dipole_field_sarvas(pos, q1, r, center) +
                             b * forward::dipole_field_sarvas(pos, q2, r, center);
            const double scale = std::abs(a) * forward::dipole_field_sarvas(pos, q1, r, center).norm() +
                                 std::abs(b) * forward::dipole_field_sarvas(pos, q2, r, center).norm();
            worst_linear = std::max(worst_linear, (lhs - rhs).norm() / scale);
        }
    }
    return {worst_silence < 1e-18 && worst_linear < 1e-13,
            fmt("max radial field %.2e T over %d points x 128 sensors; max linearity defect %.2e relative", worst_silence,
                points, worst_linear)};
}

Outcome l1tv()
{
    double worst = 0.0, worst_kkt = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto p = oracle::tiny_problem(1000 + k);
        const auto ref = oracle::admm_l1tv(p.L, p.d, p.V, p.lambda, p.alpha);
        const auto r = baselines::solve_imaging_l1tv(p.L, p.d, p.V, p.lambda, p.alpha, 1e-10, 200000);
        worst = std::max(worst, std::abs(r.objective - ref.objective) / ref.objective);
        worst_kkt = std::max(worst_kkt, ref.kkt_residual);
    }

    const auto mesh = geometry::make_wrinkled_cortex(4, 0.08, 0.008, 6, 7);
    const auto V = baselines::make_tv_operator(mesh);
    double tv_defect = 0.0;
    for (double cut : {-0.7, -0.1, 0.25, 0.9}) {
        Eigen::VectorXd x(mesh.size());
        for (std::size_t i = 0; i < mesh.size(); ++i) x[i] = mesh.sphere.vertices[i].x() > cut ? 1.75 : -0.5;
        int boundary = 0;
        for (const auto& [i, j] : V.edges) boundary += x[i] != x[j];
        tv_defect = std::max(tv_defect, std::abs((V.matrix * x).lpNorm<1>() - boundary * 2.25));
    }
    return {worst < 1e-6 && worst_kkt < 1e-8 && tv_defect == 0.0,
            fmt("max objective gap %.2e vs oracle (oracle KKT residual <= %.1e) on 20 instances, M=20; TV defect %.1e",
                worst, worst_kkt, tv_defect)};
}

int shell(const std::string& cmd)
{
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / "hetmeg_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream out(root / "config.ini");
        harness::write_config(out, harness::ExperimentConfig{});
    }
    const std::string cli = HETMEG_CLI;
    for (const char* run : {"a", "b"}) {
        const fs::path dir = root / run;
        const std::string env = std::string("HETMEG_THREADS=") + (run[0] == 'a' ? "1" : "3") + " ";
        if (shell(env + cli + " simulate --config " + (root / "config.ini").string() + " --out " + (dir / "data").string()) != 0)
            return {false, "simulate failed"};
        for (const char* m : {"imaging", "patch", "hetero"})
            if (shell(env + cli + " solve --method " + m + " --data " + (dir / "data").string() + " --out " +
                      (dir / m).string()) != 0)
                return {false, std::string("solve failed for ") + m};
    }
    int compared = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file() || entry.path().filename() == "timing.ini") continue;
        const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
        ++compared;
        if (!fs::exists(other) || io::read_text(entry.path()) != io::read_text(other)) ++differing;
    }
    fs::remove_all(root);
    return {compared > 0 && differing == 0,
            fmt("%d artifacts compared across two runs (1 and 3 threads), %d differ", compared, differing)};
}

} // namespace

int main()
{
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail << std::endl;
        failures += !o.pass;
    };
    auto guarded = [](auto fn) -> Outcome {
        try {
            return fn();
        } catch (const std::exception& e) {
            return {false, std::string("error: ") + e.what()};
        }
    };

    report(1, "optimality identity", guarded(optimality_identity));
    report(2, "dual-form background", guarded(dual_form));
    report(3, "noiseless recovery", guarded(exact_recovery));
    SeedRuns runs;
    std::string sweep_error;
    try {
        runs = reference_setting_runs();
    } catch (const std::exception& e) {
        sweep_error = e.what();
    }
    if (sweep_error.empty()) {
        report(4, "reference-setting accuracy", reference_setting(runs));
        report(5, "method ranking", ranking(runs));
    } else {
        report(4, "reference-setting accuracy", {false, "error: " + sweep_error});
        report(5, "method ranking", {false, "error: " + sweep_error});
    }
    report(6, "optimizer on test functions", guarded(optimizer));
    report(7, "forward model", guarded(forward_sanity));
    report(8, "L1+TV solver", guarded(l1tv));
    report(9, "determinism", guarded(determinism));
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
