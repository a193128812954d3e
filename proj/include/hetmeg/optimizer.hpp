#pragma once

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace hetmeg::optim {

using Vec3 = Eigen::Vector3d;

struct Box {
    Vec3 lower = Vec3::Zero();
    Vec3 upper = Vec3::Ones();

    Vec3 width() const { return upper - lower; }
    bool contains(const Vec3& x) const;
};

struct OptimizerConfig {
    int max_evals = 2000;
    double min_diag = 1e-3;     // main diagonal of the best interval, unit-cube units
    double balance_eps = 1e-4;  // slack in the nondominance test
    bool parallel = true;       // batch objective evaluations with OpenMP
};

enum class StopReason { max_evals, min_diag };

struct TracePoint {
    int eval_index = 0;  // 1-based
    double f_best = 0.0;
    Vec3 x_best = Vec3::Zero();
};

struct OptResult {
    Vec3 x_best = Vec3::Zero();
    double f_best = 0.0;
    int evals = 0;
    StopReason stop = StopReason::max_evals;
    std::vector<TracePoint> trace;
    std::vector<Vec3> samples;  // every evaluated point, in evaluation order
};

/// Must be safe to call concurrently when batches run in parallel.
using Objective = std::function<double(const Vec3&)>;

/// values[k] = f(points[k]); OpenMP over k.
void evaluate_batch(const Objective& f, std::span<const Vec3> points, std::span<double> values);
/// Serial reference of evaluate_batch.
void evaluate_batch_ref(const Objective& f, std::span<const Vec3> points, std::span<double> values);

/// Adaptive diagonal partition search for Lipschitz objectives on a box.
///
/// Every hyperinterval is represented by the two endpoints of its main diagonal.
/// Each round picks the intervals whose lower bound
///     0.5 (f(p) + f(q)) - K |q - p| / 2
/// is smallest for some K > 0 (with the usual relative slack against the best
/// value), together with the interval of smallest mean endpoint value, and
/// trisects them along their longest side. Diagonal orientations alternate
/// between children so a trisection costs two new samples; vertices live on an
/// exact base-3 lattice and are shared between neighbouring intervals.
OptResult minimize_global(const Objective& f, const Box& box, const OptimizerConfig& cfg);

/// Complete-poll compass search clipped to the box. Returns x with f(x) <= f(x0).
/// Steps are fractions of the box width; the search ends once every coordinate
/// step is below tol.
Vec3 minimize_local_refine(const Objective& f, const Vec3& x0, const Box& box, double tol,
                           double initial_step = 1.0 / 81.0, int max_evals = 2000,
                           bool parallel = true);

/// `eval_index,f_best,theta,phi,r`
void write_trace_csv(std::ostream& out, const OptResult& result);

} // namespace hetmeg::optim
