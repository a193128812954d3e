#pragma once

#include "hetmeg/geometry.hpp"
#include "hetmeg/solver.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <utility>
#include <vector>

namespace hetmeg::baselines {

enum class EdgeWeighting { uniform, inverse_length };

/// Discrete gradient on mesh edges: row e = w_e (x_i - x_j) for edge (i, j).
struct TVOperator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;  // E x M
    std::vector<std::pair<int, int>> edges;

    /// Gershgorin bound on ||V||_2^2.
    double norm_bound_sq() const;
};

TVOperator make_tv_operator(const geometry::CorticalMesh& mesh,
                            EdgeWeighting weighting = EdgeWeighting::uniform);

/// 0.5 ||L J - d||^2 + lambda (||V J||_1 + alpha ||J||_1)
double l1tv_objective(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                      double lambda, double alpha, const Eigen::VectorXd& J);

struct L1TVResult {
    Eigen::VectorXd J;
    double objective = 0.0;
    double gap = 0.0;  // relative primal-dual gap at exit
    int iterations = 0;
    bool converged = false;
    int support = 0;   // nodes with nonzero amplitude
    std::vector<double> objective_trace;  // objective at every gap check
};

/// Primal-dual splitting with K = [L; V]: soft-thresholding handles alpha ||J||_1
/// in the primal, the data term and ||V J||_1 sit in the dual. Step sizes are
/// balanced adaptively; the iteration stops once the relative duality gap of a
/// rescaled feasible dual point falls below tol. Primal iterates are exactly
/// sparse.
L1TVResult solve_imaging_l1tv(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                              double lambda, double alpha, double tol, int max_iter);

struct RegPath {
    std::vector<double> lambdas;
    double alpha = 0.67;
    std::vector<double> gcv_scores;
    std::vector<int> df;
    std::vector<double> residuals;
    std::vector<double> objectives;
    std::vector<bool> converged;
    int chosen_index = -1;
    Eigen::VectorXd chosen_solution;
};

/// count log-spaced values over [lo, hi] * ||L^T d||_inf.
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& L, const Eigen::VectorXd& d,
                                        int count = 25, double lo = 1e-4, double hi = 1e1);

/// GCV(lambda) = N ||L J - d||^2 / (N - df)^2, df = support size; +inf when df >= N.
double gcv_score(Eigen::Index n_sensors, double residual_norm, int df);

/// Independent solves per lambda (OpenMP over the grid).
RegPath select_lambda_gcv(const Eigen::MatrixXd& L, const Eigen::VectorXd& d, const TVOperator& V,
                          double alpha, const std::vector<double>& lambdas, double tol = 1e-4,
                          int max_iter = 3000);

/// `lambda,gcv,df,residual,objective`
void write_regpath_csv(std::ostream& out, const RegPath& path);

/// Extended-parametric baseline: the patch fit with Sigma = sigma_n^2 I.
solver::PatchFit solve_patch_only(const geometry::CorticalMesh& mesh, const Eigen::MatrixXd& L,
                                  const Eigen::VectorXd& d, double sigma_n, const optim::Box& box,
                                  const solver::PatchSolveOptions& opts, double eps);

} // namespace hetmeg::baselines
