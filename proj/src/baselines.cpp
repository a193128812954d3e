#include "hetmeg/baselines.hpp"

#include "hetmeg/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace hetmeg::baselines {

double TVOperator::norm_bound_sq() const
{
    // lambda_max(V^T V) <= 2 max_i sum_{e ~ i} w_e^2
    Eigen::VectorXd load = Eigen::VectorXd::Zero(matrix.cols());
    for (Eigen::Index e = 0; e < matrix.outerSize(); ++e)
        for (decltype(matrix)::InnerIterator it(matrix, e); it; ++it)
            load[it.col()] += it.value() * it.value();
    return load.size() > 0 ? 2.0 * load.maxCoeff() : 0.0;
}

TVOperator make_tv_operator(const geometry::CorticalMesh& mesh, EdgeWeighting weighting)
{
    TVOperator tv;
    tv.edges = geometry::unique_edges(mesh.sphere.triangles);
    const auto e_count = static_cast<Eigen::Index>(tv.edges.size());
    const auto m = static_cast<Eigen::Index>(mesh.size());

    std::vector<double> lengths(tv.edges.size());
    double mean_len = 0.0;
    for (std::size_t e = 0; e < tv.edges.size(); ++e) {
        const auto [i, j] = tv.edges[e];
        lengths[e] = (mesh.positions[i] - mesh.positions[j]).norm();
        mean_len += lengths[e];
    }
    if (!tv.edges.empty()) mean_len /= static_cast<double>(tv.edges.size());

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * tv.edges.size());
    for (std::size_t e = 0; e < tv.edges.size(); ++e) {
        const auto [i, j] = tv.edges[e];
        const double w = weighting == EdgeWeighting::uniform ? 1.0 : mean_len / lengths[e];
        triplets.emplace_back(static_cast<int>(e), i, w);
        triplets.emplace_back(static_cast<int>(e), j, -w);
    }
    tv.matrix.resize(e_count, m);
    tv.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return tv;
}

double l1tv_objective(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                      double lambda, double alpha, const Eigen::VectorXd& J)
{
    const Eigen::VectorXd vj = V.matrix * J;
    return 0.5 * (L * J - d).squaredNorm() + lambda * (vj.lpNorm<1>() + alpha * J.lpNorm<1>());
}

namespace {

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

double spectral_norm(const Eigen::MatrixXd& L)
{
    if (L.size() == 0) return 0.0;
    const Eigen::MatrixXd gram = L * L.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

} // namespace

L1TVResult solve_imaging_l1tv(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                              double lambda, double alpha, double tol, int max_iter)
{
    if (!(lambda > 0.0)) throw UsageError("lambda must be positive");
    if (!(alpha > 0.0)) throw UsageError("alpha must be positive");
    if (d.size() != L.rows() || V.matrix.cols() != L.cols()) throw DataError("L1+TV dimension mismatch");

    const Eigen::Index m = L.cols();
    L1TVResult res;
    res.J = Eigen::VectorXd::Zero(m);
    const double d_norm = d.norm();
    const double l_norm = spectral_norm(L);
    if (d_norm == 0.0 || l_norm == 0.0) {
        res.objective = l1tv_objective(L, d, V, lambda, alpha, res.J);
        res.converged = true;
        return res;
    }

    // x = J * ||L|| / ||d||, so ||Ls|| = ||ds|| = 1 and the objective scales by ||d||^2.
    const Eigen::MatrixXd Ls = L / l_norm;
    const Eigen::VectorXd ds = d / d_norm;
    const double lam = lambda / (d_norm * l_norm);
    const double l1_weight = lam * alpha;
    const auto& Vm = V.matrix;

    const double k_norm_sq = 1.0 + V.norm_bound_sq();
    double tau = 0.99 / std::sqrt(k_norm_sq);
    double sigma = 0.99 / std::sqrt(k_norm_sq);
    double adapt = 0.5;
    constexpr double kAdaptDecay = 0.95;
    constexpr double kBalance = 1.5;
    constexpr int kCheckEvery = 10;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd y1 = Eigen::VectorXd::Zero(Ls.rows());
    Eigen::VectorXd y2 = Eigen::VectorXd::Zero(Vm.rows());
    Eigen::VectorXd kty = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd x_new(m), x_bar(m), y1_new, y2_new, kty_new, lx, vx;

    auto primal = [&](const Eigen::VectorXd& v) {
        return 0.5 * (Ls * v - ds).squaredNorm() + lam * ((Vm * v).lpNorm<1>() + alpha * v.lpNorm<1>());
    };

    for (int it = 1; it <= max_iter; ++it) {
        for (Eigen::Index i = 0; i < m; ++i) x_new[i] = soft(x[i] - tau * kty[i], tau * l1_weight);
        x_bar = 2.0 * x_new - x;

        lx.noalias() = Ls * x_bar;
        vx = Vm * x_bar;
        y1_new = (y1 + sigma * (lx - ds)) / (1.0 + sigma);
        y2_new = (y2 + sigma * vx).cwiseMax(-lam).cwiseMin(lam);
        kty_new.noalias() = Ls.transpose() * y1_new;
        kty_new += Vm.transpose() * y2_new;

        // Residuals of the primal-dual fixed point, used to balance tau / sigma.
        const Eigen::VectorXd dx = x - x_new;
        const Eigen::VectorXd kdx_l = Ls * dx;
        const Eigen::VectorXd kdx_v = Vm * dx;
        const double p_res = (dx / tau - (kty - kty_new)).norm();
        const double d_res = std::sqrt(((y1 - y1_new) / sigma - kdx_l).squaredNorm() +
                                       ((y2 - y2_new) / sigma - kdx_v).squaredNorm());

        x.swap(x_new);
        y1.swap(y1_new);
        y2.swap(y2_new);
        kty.swap(kty_new);
        res.iterations = it;

        if (p_res > kBalance * d_res) {
            tau /= 1.0 - adapt;
            sigma *= 1.0 - adapt;
            adapt *= kAdaptDecay;
        } else if (d_res > kBalance * p_res) {
            tau *= 1.0 - adapt;
            sigma /= 1.0 - adapt;
            adapt *= kAdaptDecay;
        }

        if (it % kCheckEvery == 0 || it == max_iter) {
            const double p_val = primal(x);
            res.objective_trace.push_back(p_val * d_norm * d_norm);
            // Feasible dual point: shrink y until ||K^T y||_inf <= lam * alpha.
            const double kty_inf = kty.lpNorm<Eigen::Infinity>();
            const double theta = kty_inf > l1_weight ? l1_weight / kty_inf : 1.0;
            const double d_val = -0.5 * theta * theta * y1.squaredNorm() - theta * y1.dot(ds);
            res.gap = (p_val - d_val) / std::max(std::abs(p_val), 1e-300);
            if (res.gap < tol) {
                res.converged = true;
                break;
            }
        }
    }

    res.J = x * (d_norm / l_norm);
    res.objective = l1tv_objective(L, d, V, lambda, alpha, res.J);
    res.support = static_cast<int>((x.array().abs() > 1e-12).count());
    return res;
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, int count,
                                        double lo, double hi)
{
    if (count < 1) throw UsageError("lambda grid needs at least one point");
    const double scale = (L.transpose() * d).lpNorm<Eigen::Infinity>();
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = std::sqrt(lo * hi) * scale;
        return grid;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int k = 0; k < count; ++k) grid[k] = scale * std::pow(10.0, a + (b - a) * k / (count - 1));
    return grid;
}

double gcv_score(Eigen::Index n_sensors, double residual_norm, int df)
{
    if (df >= n_sensors) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(n_sensors);
    const double denom = n - df;
    return n * residual_norm * residual_norm / (denom * denom);
}

RegPath select_lambda_gcv(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                          double alpha, const std::vector<double>& lambdas, double tol, int max_iter)
{
    if (lambdas.empty()) throw UsageError("lambda grid is empty");
    for (double l : lambdas)
        if (!(l > 0.0)) throw UsageError("lambda grid values must be positive");

    const auto count = static_cast<std::ptrdiff_t>(lambdas.size());
    std::vector<L1TVResult> solves(lambdas.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < count; ++k)
        solves[k] = solve_imaging_l1tv(L, d, V, lambdas[k], alpha, tol, max_iter);

    RegPath path;
    path.lambdas = lambdas;
    path.alpha = alpha;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < solves.size(); ++k) {
        const double residual = (L * solves[k].J - d).norm();
        path.df.push_back(solves[k].support);
        path.residuals.push_back(residual);
        path.objectives.push_back(solves[k].objective);
        path.converged.push_back(solves[k].converged);
        path.gcv_scores.push_back(gcv_score(L.rows(), residual, solves[k].support));
        if (path.gcv_scores.back() < best) {
            best = path.gcv_scores.back();
            path.chosen_index = static_cast<int>(k);
        }
    }
    if (path.chosen_index < 0) path.chosen_index = static_cast<int>(solves.size()) - 1;
    path.chosen_solution = solves[path.chosen_index].J;
    return path;
}

void write_regpath_csv(std::ostream& out, const RegPath& path)
{
    out << "lambda,gcv,df,residual,objective\n" << std::setprecision(17);
    for (std::size_t k = 0; k < path.lambdas.size(); ++k)
        out << path.lambdas[k] << ',' << path.gcv_scores[k] << ',' << path.df[k] << ','
            << path.residuals[k] << ',' << path.objectives[k] << '\n';
}

solver::PatchFit solve_patch_only(const geometry::CorticalMesh& mesh, const Eigen::MatrixXd& L,
                                  const Eigen::VectorXd& d, double sigma_n, const optim::Box& box,
                                  const solver::PatchSolveOptions& opts, double eps)
{
    // With white noise only the minimizer does not depend on sigma_n, so a
    // noiseless dataset is fitted with unit weighting.
    if (sigma_n < 0.0) throw UsageError("sigma_n must be non-negative");
    const solver::CovarianceContext ctx(L, 0.0, sigma_n > 0.0 ? sigma_n : 1.0);
    return solver::solve_patch(ctx, mesh, d, box, opts, eps);
}

} // namespace hetmeg::baselines
