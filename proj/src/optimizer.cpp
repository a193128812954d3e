#include "hetmeg/optimizer.hpp"

#include "hetmeg/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace hetmeg::optim {

bool Box::contains(const Vec3& x) const
{
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

void evaluate_batch(const Objective& f, std::span<const Vec3> points, std::span<double> values)
{
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < n; ++k) values[k] = f(points[k]);
}

void evaluate_batch_ref(const Objective& f, std::span<const Vec3> points, std::span<double> values)
{
    for (std::size_t k = 0; k < points.size(); ++k) values[k] = f(points[k]);
}

namespace {

using Lattice = std::array<std::int64_t, 3>;

constexpr int kMaxDepth = 38;

constexpr std::int64_t pow3(int e)
{
    std::int64_t v = 1;
    for (int i = 0; i < e; ++i) v *= 3;
    return v;
}

constexpr std::int64_t kLatticeScale = pow3(kMaxDepth);

struct Interval {
    Lattice p{};
    Lattice q{};
    std::array<int, 3> depth{};
    double fp = 0.0;
    double fq = 0.0;
    int splits = 0;

    double value() const { return 0.5 * (fp + fq); }
};

double diagonal(const Interval& iv)
{
    double s = 0.0;
    for (int d : iv.depth) s += std::pow(3.0, -2.0 * d);
    return std::sqrt(s);
}

Vec3 to_point(const Lattice& c, const Box& box)
{
    Vec3 x;
    for (int k = 0; k < 3; ++k) {
        const double t = static_cast<double>(c[k]) / static_cast<double>(kLatticeScale);
        x[k] = c[k] == kLatticeScale ? box.upper[k] : box.lower[k] + t * (box.upper[k] - box.lower[k]);
    }
    return x;
}

[[noreturn]] void non_finite(const Vec3& x, double v)
{
    std::ostringstream msg;
    msg << std::setprecision(17) << "objective returned " << v << " at (" << x[0] << ", " << x[1]
        << ", " << x[2] << ")";
    throw NumericalError(msg.str());
}

class DiagonalSearch {
public:
    DiagonalSearch(const Objective& f, const Box& box, const OptimizerConfig& cfg)
        : f_(f), box_(box), cfg_(cfg)
    {
    }

    OptResult run()
    {
        Interval root;
        root.p = {0, 0, 0};
        root.q = {kLatticeScale, kLatticeScale, kLatticeScale};
        evaluate({root.p, root.q});
        root.fp = cache_.at(root.p);
        root.fq = cache_.at(root.q);
        intervals_.push_back(root);

        while (true) {
            if (result_.evals >= cfg_.max_evals) {
                result_.stop = StopReason::max_evals;
                break;
            }
            if (diagonal(intervals_[best_interval()]) < cfg_.min_diag) {
                result_.stop = StopReason::min_diag;
                break;
            }
            const std::vector<std::size_t> selected = selection();
            if (selected.empty()) {
                result_.stop = StopReason::min_diag;
                break;
            }
            if (!round(selected)) {
                result_.stop = StopReason::max_evals;
                break;
            }
        }
        return std::move(result_);
    }

private:
    std::size_t best_interval() const
    {
        std::size_t best = 0;
        for (std::size_t k = 1; k < intervals_.size(); ++k) {
            const Interval& a = intervals_[k];
            const Interval& b = intervals_[best];
            if (a.value() < b.value() || (a.value() == b.value() && a.splits > b.splits)) best = k;
        }
        return best;
    }

    // Nondominated intervals over K in (0, inf): one representative per size level.
    std::vector<std::size_t> potentially_optimal() const
    {
        std::map<int, std::size_t> reps;
        for (std::size_t k = 0; k < intervals_.size(); ++k) {
            if (splittable_dim(intervals_[k]) < 0) continue;
            auto [it, inserted] = reps.emplace(intervals_[k].splits, k);
            if (!inserted && intervals_[k].value() < intervals_[it->second].value()) it->second = k;
        }

        std::vector<std::size_t> group(reps.size());
        std::vector<double> size(reps.size()), value(reps.size());
        std::size_t g = 0;
        for (const auto& [splits, k] : reps) {
            group[g] = k;
            size[g] = 0.5 * diagonal(intervals_[k]);
            value[g] = intervals_[k].value();
            ++g;
        }

        const double target = result_.f_best - cfg_.balance_eps * std::abs(result_.f_best);
        std::vector<std::size_t> chosen;
        for (std::size_t j = 0; j < group.size(); ++j) {
            double k_low = 0.0;
            double k_high = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < group.size(); ++i) {
                if (size[i] < size[j])
                    k_low = std::max(k_low, (value[j] - value[i]) / (size[j] - size[i]));
                else if (size[i] > size[j])
                    k_high = std::min(k_high, (value[i] - value[j]) / (size[i] - size[j]));
            }
            if (!(k_high > 0.0) || k_low > k_high) continue;
            if (std::isfinite(k_high) && value[j] - k_high * size[j] > target) continue;
            chosen.push_back(group[j]);
        }
        return chosen;
    }

    static int splittable_dim(const Interval& iv)
    {
        int dim = -1;
        for (int k = 0; k < 3; ++k)
            if (iv.depth[k] < kMaxDepth && (dim < 0 || iv.depth[k] < iv.depth[dim])) dim = k;
        return dim;
    }

    // Potentially optimal intervals plus the current best one, in index order.
    std::vector<std::size_t> selection() const
    {
        std::vector<std::size_t> selected = potentially_optimal();
        const std::size_t best = best_interval();
        if (splittable_dim(intervals_[best]) >= 0) selected.push_back(best);
        std::sort(selected.begin(), selected.end());
        selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
        return selected;
    }

    bool round(const std::vector<std::size_t>& selected)
    {

        struct Split {
            std::size_t index;
            int dim;
            Lattice u, v;
        };
        std::vector<Split> splits;
        std::vector<Lattice> pending;
        auto is_pending = [&](const Lattice& c) {
            return std::find(pending.begin(), pending.end(), c) != pending.end();
        };
        for (std::size_t idx : selected) {
            const Interval& iv = intervals_[idx];
            const int dim = splittable_dim(iv);
            const std::int64_t third = (iv.q[dim] - iv.p[dim]) / 3;
            Split s{idx, dim, iv.p, iv.q};
            s.u[dim] = iv.p[dim] + 2 * third;
            s.v[dim] = iv.p[dim] + third;

            int fresh = 0;
            for (const Lattice* c : {&s.u, &s.v})
                if (!cache_.contains(*c) && !is_pending(*c)) ++fresh;
            if (result_.evals + static_cast<int>(pending.size()) + fresh > cfg_.max_evals) break;
            for (const Lattice* c : {&s.u, &s.v})
                if (!cache_.contains(*c) && !is_pending(*c)) pending.push_back(*c);
            splits.push_back(s);
        }
        if (splits.empty()) return false;

        evaluate(pending);

        for (const Split& s : splits) {
            Interval parent = intervals_[s.index];
            const double fu = cache_.at(s.u);
            const double fv = cache_.at(s.v);
            Interval child = parent;
            child.depth[s.dim] += 1;
            child.splits += 1;

            Interval first = child, middle = child, last = child;
            first.q = s.v;
            first.fq = fv;
            middle.p = s.u;
            middle.fp = fu;
            middle.q = s.v;
            middle.fq = fv;
            last.p = s.u;
            last.fp = fu;
            intervals_[s.index] = first;
            intervals_.push_back(middle);
            intervals_.push_back(last);
        }
        return true;
    }

    void evaluate(const std::vector<Lattice>& coords)
    {
        std::vector<Vec3> points;
        points.reserve(coords.size());
        for (const auto& c : coords) points.push_back(to_point(c, box_));
        std::vector<double> values(points.size());
        if (cfg_.parallel)
            evaluate_batch(f_, points, values);
        else
            evaluate_batch_ref(f_, points, values);

        for (std::size_t k = 0; k < coords.size(); ++k) {
            if (!std::isfinite(values[k])) non_finite(points[k], values[k]);
            cache_.emplace(coords[k], values[k]);
            ++result_.evals;
            if (result_.evals == 1 || values[k] < result_.f_best) {
                result_.f_best = values[k];
                result_.x_best = points[k];
            }
            result_.samples.push_back(points[k]);
            result_.trace.push_back({result_.evals, result_.f_best, result_.x_best});
        }
    }

    const Objective& f_;
    Box box_;
    OptimizerConfig cfg_;
    std::vector<Interval> intervals_;
    std::map<Lattice, double> cache_;
    OptResult result_;
};

} // namespace

OptResult minimize_global(const Objective& f, const Box& box, const OptimizerConfig& cfg)
{
    if (cfg.max_evals < 3) throw UsageError("optimizer max_evals must be >= 3");
    if (!(cfg.min_diag > 0.0)) throw UsageError("optimizer min_diag must be positive");
    if (!((box.upper.array() > box.lower.array()).all()))
        throw UsageError("box lower bound must be below upper bound in every coordinate");
    return DiagonalSearch(f, box, cfg).run();
}

Vec3 minimize_local_refine(const Objective& f, const Vec3& x0, const Box& box, double tol,
                           double initial_step, int max_evals, bool parallel)
{
    if (!box.contains(x0)) throw UsageError("local refinement start point lies outside the box");
    if (!(tol > 0.0)) throw UsageError("local refinement tolerance must be positive");

    const Vec3 width = box.width();
    Vec3 x = x0;
    double fx = f(x);
    if (!std::isfinite(fx)) non_finite(x, fx);
    int evals = 1;
    double step = initial_step;

    std::vector<Vec3> polls;
    std::vector<double> values;
    while (step * width.maxCoeff() >= tol && evals < max_evals) {
        polls.clear();
        for (int k = 0; k < 3; ++k) {
            for (double sign : {1.0, -1.0}) {
                Vec3 y = x;
                y[k] = std::clamp(x[k] + sign * step * width[k], box.lower[k], box.upper[k]);
                if (y[k] != x[k]) polls.push_back(y);
            }
        }
        values.assign(polls.size(), 0.0);
        if (parallel)
            evaluate_batch(f, polls, values);
        else
            evaluate_batch_ref(f, polls, values);
        evals += static_cast<int>(polls.size());

        std::ptrdiff_t best = -1;
        for (std::size_t k = 0; k < polls.size(); ++k) {
            if (!std::isfinite(values[k])) non_finite(polls[k], values[k]);
            if (values[k] < fx && (best < 0 || values[k] < values[best])) best = static_cast<std::ptrdiff_t>(k);
        }
        if (best >= 0) {
            x = polls[best];
            fx = values[best];
        } else {
            step *= 0.5;
        }
    }
    return x;
}

void write_trace_csv(std::ostream& out, const OptResult& result)
{
    out << "eval_index,f_best,theta,phi,r\n" << std::setprecision(17);
    for (const auto& t : result.trace)
        out << t.eval_index << ',' << t.f_best << ',' << t.x_best[0] << ',' << t.x_best[1] << ','
            << t.x_best[2] << '\n';
}

} // namespace hetmeg::optim
