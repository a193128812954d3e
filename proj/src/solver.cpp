#include "hetmeg/solver.hpp"

#include "hetmeg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hetmeg::solver {

CovarianceContext::CovarianceContext(const Eigen::MatrixXd& leadfield, double sigma_b, double sigma_n)
    : leadfield_(leadfield), sigma_b_(sigma_b), sigma_n_(sigma_n)
{
    if (sigma_b < 0.0 || sigma_n < 0.0) throw UsageError("noise standard deviations must be non-negative");
    if (sigma_b == 0.0 && sigma_n == 0.0)
        throw NumericalError("data covariance is singular: sigma_b and sigma_n are both zero");

    const Eigen::MatrixXd gram = leadfield_ * leadfield_.transpose();
    sigma_ = sigma_b * sigma_b * gram;
    sigma_.diagonal().array() += sigma_n * sigma_n;
    sigma_llt_.compute(sigma_);
    if (sigma_llt_.info() != Eigen::Success)
        throw NumericalError("data covariance is not positive definite");
    whitened_ = sigma_llt_.matrixL().solve(leadfield_);

    has_background_ = sigma_b > 0.0;
    if (has_background_) {
        const double lambda = (sigma_n / sigma_b) * (sigma_n / sigma_b);
        Eigen::MatrixXd g = gram;
        g.diagonal().array() += lambda;
        gram_llt_.compute(g);
        if (gram_llt_.info() != Eigen::Success)
            throw NumericalError("L L^T + (sigma_n/sigma_b)^2 I is not positive definite");
    }
}

double CovarianceContext::ratio() const
{
    return sigma_b_ > 0.0 ? sigma_n_ / sigma_b_ : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd CovarianceContext::whiten(const Eigen::VectorXd& x) const
{
    if (x.size() != leadfield_.rows()) throw DataError("data length does not match sensor count");
    return sigma_llt_.matrixL().solve(x);
}

double CovarianceContext::mahalanobis(const Eigen::VectorXd& x) const { return whiten(x).squaredNorm(); }

Eigen::VectorXd CovarianceContext::background_from_residual(const Eigen::VectorXd& r) const
{
    if (r.size() != leadfield_.rows()) throw DataError("residual length does not match sensor count");
    if (!has_background_) return Eigen::VectorXd::Zero(leadfield_.cols());
    return leadfield_.transpose() * gram_llt_.solve(r);
}

double CovarianceContext::factorization_residual() const
{
    const Eigen::MatrixXd lower = sigma_llt_.matrixL();
    return (sigma_ - lower * lower.transpose()).norm() / sigma_.norm();
}

AmplitudeFit fit_amplitude(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                           const Vec3& s0, double r0, const Eigen::VectorXd& d, double eps)
{
    Eigen::VectorXd weights = source::patch_indicator(mesh, s0, r0, eps);
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights[i] *= mesh.node_areas[i];

    AmplitudeFit fit;
    fit.field = ctx.leadfield() * weights;
    const Eigen::VectorXd aw = ctx.whiten(fit.field);
    const double den = aw.squaredNorm();
    fit.j0 = den < 1e-30 ? 0.0 : aw.dot(ctx.whiten(d)) / den;
    return fit;
}

double cost_phi(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh, const Vec3& params,
                const Eigen::VectorXd& d, double eps)
{
    return PatchCost(ctx, mesh, d, eps)(params);
}

PatchCost::PatchCost(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                     const Eigen::VectorXd& d, double eps)
    : ctx_(ctx), mesh_(mesh), whitened_data_(ctx.whiten(d)), eps_(eps)
{
    if (!(eps > 0.0)) throw UsageError("eps must be positive");
    if (static_cast<Eigen::Index>(mesh.size()) != ctx.leadfield().cols())
        throw DataError("mesh size does not match leadfield columns");
}

double PatchCost::amplitude(const Vec3& params, Eigen::VectorXd* whitened_field) const
{
    const Vec3 s0 = geometry::sphere_point(params[0], params[1]);
    const double r0 = params[2];
    const Eigen::MatrixXd& lw = ctx_.whitened_leadfield();
    Eigen::VectorXd aw = Eigen::VectorXd::Zero(lw.rows());
    // Only nodes inside r0 + eps contribute.
    for (Eigen::Index i = 0; i < lw.cols(); ++i) {
        const double h = source::smeared_heaviside(
            r0 - geometry::geodesic_dist_on_sphere(mesh_.sphere.vertices[i], s0), eps_);
        if (h > 0.0) aw.noalias() += (h * mesh_.node_areas[i]) * lw.col(i);
    }
    const double den = aw.squaredNorm();
    const double j0 = den < 1e-30 ? 0.0 : aw.dot(whitened_data_) / den;
    if (whitened_field) *whitened_field = std::move(aw);
    return j0;
}

double PatchCost::operator()(const Vec3& params) const
{
    Eigen::VectorXd aw;
    const double j0 = amplitude(params, &aw);
    return (whitened_data_ - j0 * aw).squaredNorm();
}

optim::Box patch_box(double r_max)
{
    if (!(r_max > 0.0)) throw UsageError("r_max must be positive");
    return {Vec3(0.0, 0.0, 0.0), Vec3(std::numbers::pi, 2.0 * std::numbers::pi, r_max)};
}

PatchFit solve_patch(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                     const Eigen::VectorXd& d, const optim::Box& box, const PatchSolveOptions& opts,
                     double eps)
{
    const PatchCost cost(ctx, mesh, d, eps);
    const optim::Objective objective = [&cost](const Vec3& x) { return cost(x); };

    PatchFit fit;
    fit.search = optim::minimize_global(objective, box, opts.optimizer);
    const Vec3 x = optim::minimize_local_refine(objective, fit.search.x_best, box, opts.polish_tol,
                                                1.0 / 81.0, 2000, opts.optimizer.parallel);
    fit.params.theta0 = x[0];
    fit.params.phi0 = x[1];
    fit.params.r0 = x[2];
    fit.params.j0 = cost.amplitude(x);
    fit.phi = cost(x);
    return fit;
}

Eigen::VectorXd solve_background(const CovarianceContext& ctx, const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& jp_hat)
{
    if (jp_hat.size() != ctx.leadfield().cols()) throw DataError("patch source length mismatch");
    return ctx.background_from_residual(d - ctx.leadfield() * jp_hat);
}

double cost_psi(const CovarianceContext& ctx, const Eigen::VectorXd& jp, const Eigen::VectorXd& jb,
                const Eigen::VectorXd& d)
{
    if (jp.size() != ctx.leadfield().cols() || jb.size() != ctx.leadfield().cols())
        throw DataError("source vector length mismatch");
    if (d.size() != ctx.leadfield().rows()) throw DataError("data length mismatch");

    const Eigen::VectorXd field = ctx.leadfield() * (jp + jb);
    const double misfit = (d - field).squaredNorm();
    const double jb_norm2 = jb.squaredNorm();
    const double sn2 = ctx.sigma_n() * ctx.sigma_n();
    const double sb2 = ctx.sigma_b() * ctx.sigma_b();
    const double inf = std::numeric_limits<double>::infinity();
    // Without sensor noise the data term is a constraint; accept roundoff-level misfit.
    const double roundoff = kConstraintTolerance * (d.norm() + field.norm());
    const double data_term = sn2 > 0.0 ? misfit / sn2 : (misfit <= roundoff * roundoff ? 0.0 : inf);
    const double prior_term = sb2 > 0.0 ? jb_norm2 / sb2 : (jb_norm2 == 0.0 ? 0.0 : inf);
    return data_term + prior_term;
}

SourceDecomposition solve_heterogeneous(const CovarianceContext& ctx, const geometry::CorticalMesh& mesh,
                                        const Eigen::VectorXd& d, const optim::Box& box,
                                        const PatchSolveOptions& opts, double eps)
{
    PatchFit fit = solve_patch(ctx, mesh, d, box, opts, eps);

    SourceDecomposition out;
    out.patch = fit.params;
    out.jp_hat = source::make_patch_source(mesh, fit.params, eps);
    out.jb_hat = solve_background(ctx, d, out.jp_hat);
    out.phi_value = ctx.mahalanobis(d - ctx.leadfield() * out.jp_hat);
    out.psi_value = cost_psi(ctx, out.jp_hat, out.jb_hat, d);
    out.residual_norm = (d - ctx.leadfield() * (out.jp_hat + out.jb_hat)).norm();
    out.search = std::move(fit.search);

    const double gap = std::abs(out.psi_value - out.phi_value) / std::max(out.phi_value, 1.0);
    if (!(gap < kIdentityTolerance)) {
        std::ostringstream msg;
        msg << "optimality self-check failed: |Psi - Phi| / max(Phi, 1) = " << gap;
        throw NumericalError(msg.str());
    }
    return out;
}

} // namespace hetmeg::solver
