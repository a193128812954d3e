#pragma once

#include "hetmeg/forward.hpp"
#include "hetmeg/geometry.hpp"
#include "hetmeg/optimizer.hpp"
#include "hetmeg/source_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <span>

namespace hetmeg::solver {

using geometry::Vec3;
using source::PatchParams;

/// Data covariance Sigma = sigma_b^2 L L^T + sigma_n^2 I, factorized once and
/// shared read-only by every cost evaluation.
class CovarianceContext {
public:
    CovarianceContext(const Eigen::MatrixXd& leadfield, double sigma_b, double sigma_n);

    const Eigen::MatrixXd& leadfield() const { return leadfield_; }
    double sigma_b() const { return sigma_b_; }
    double sigma_n() const { return sigma_n_; }
    /// sigma_n / sigma_b; infinite when sigma_b = 0.
    double ratio() const;

    /// C^{-1} x where Sigma = C C^T.
    Eigen::VectorXd whiten(const Eigen::VectorXd& x) const;
    /// C^{-1} L, N x M.
    const Eigen::MatrixXd& whitened_leadfield() const { return whitened_; }
    /// x^T Sigma^{-1} x.
    double mahalanobis(const Eigen::VectorXd& x) const;

    /// L^T (L L^T + (sigma_n/sigma_b)^2 I)^{-1} r; zero when sigma_b = 0.
    Eigen::VectorXd background_from_residual(const Eigen::VectorXd& r) const;

    /// ||Sigma - C C^T||_F / ||Sigma||_F.
    double factorization_residual() const;

private:
    Eigen::MatrixXd leadfield_;
    double sigma_b_;
    double sigma_n_;
    Eigen::MatrixXd sigma_;
    Eigen::LLT<Eigen::MatrixXd> sigma_llt_;
    Eigen::MatrixXd whitened_;
    Eigen::LLT<Eigen::MatrixXd> gram_llt_;  // L L^T + ratio^2 I
    bool has_background_ = false;
};

struct AmplitudeFit {
    double j0 = 0.0;        // A*m / m^2
    Eigen::VectorXd field;  // a = L (area .* indicator), per unit density
};

AmplitudeFit fit_amplitude(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                           const Vec3& s0, double r0, const Eigen::VectorXd& d, double eps);

/// Phi(s0, r0) = ||d - L Jp||^2_{Sigma^-1} with the GLS amplitude substituted.
double cost_phi(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh, const Vec3& params,
                const Eigen::VectorXd& d, double eps);

/// Phi bound to one dataset, with the whitened data cached. Safe for concurrent calls.
class PatchCost {
public:
    PatchCost(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
              const Eigen::VectorXd& d, double eps);

    double operator()(const Vec3& params) const;
    /// Amplitude and whitened model field a_w = C^{-1} a for a patch.
    double amplitude(const Vec3& params, Eigen::VectorXd* whitened_field = nullptr) const;
    double eps() const { return eps_; }

private:
    const CovarianceContext& ctx_;
    const geometry::CorticalMesh& mesh_;
    Eigen::VectorXd whitened_data_;
    double eps_;
};

/// theta0 in [0, pi], phi0 in [0, 2 pi], r0 in [0, r_max].
optim::Box patch_box(double r_max);

struct PatchFit {
    PatchParams params;
    double phi = 0.0;
    optim::OptResult search;
};

struct PatchSolveOptions {
    optim::OptimizerConfig optimizer;
    double polish_tol = 1e-6;
};

/// Global search over the box, local polish, final amplitude fit.
PatchFit solve_patch(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                     const Eigen::VectorXd& d, const optim::Box& box, const PatchSolveOptions& opts,
                     double eps);

Eigen::VectorXd solve_background(const CovarianceContext& ctx, const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& jp_hat);

/// Psi = ||d - L (Jp + Jb)||^2 / sigma_n^2 + ||Jb||^2 / sigma_b^2.
double cost_psi(const CovarianceContext& ctx, const Eigen::VectorXd& jp, const Eigen::VectorXd& jb,
                const Eigen::VectorXd& d);

struct SourceDecomposition {
    PatchParams patch;
    Eigen::VectorXd jp_hat;
    Eigen::VectorXd jb_hat;
    double phi_value = 0.0;
    double psi_value = 0.0;
    double residual_norm = 0.0;  // ||d - L (Jp + Jb)||
    optim::OptResult search;
};

/// Relative tolerance of the Psi(Jp, Jb(Jp)) = Phi(Jp) self-check.
inline constexpr double kIdentityTolerance = 1e-8;
/// Relative misfit treated as zero when sigma_n = 0 turns the data term into a constraint.
inline constexpr double kConstraintTolerance = 1e-9;

SourceDecomposition solve_heterogeneous(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                                        const Eigen::VectorXd& d, const optim::Box& box,
                                        const PatchSolveOptions& opts, double eps);

} // namespace hetmeg::solver
