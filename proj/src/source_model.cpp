#include "hetmeg/source_model.hpp"

#include "hetmeg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace hetmeg::source {

namespace {

std::mt19937_64 make_stream(std::uint64_t seed, Stream purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

} // namespace

double smeared_heaviside(double psi, double eps)
{
    if (!(eps > 0.0)) throw UsageError("smeared Heaviside needs eps > 0");
    if (psi < -eps) return 0.0;
    if (psi > eps) return 1.0;
    const double h = 0.5 + psi / (2.0 * eps) + std::sin(std::numbers::pi * psi / eps) / (2.0 * std::numbers::pi);
    return std::clamp(h, 0.0, 1.0);  // roundoff near the ends
}

Eigen::VectorXd patch_indicator(const geometry::CorticalMesh& mesh, const Vec3& s0, double r0,
                                double eps)
{
    if (!(eps > 0.0)) throw UsageError("smeared Heaviside needs eps > 0");
    const auto m = static_cast<Eigen::Index>(mesh.size());
    Eigen::VectorXd h(m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < m; ++i)
        h[i] = smeared_heaviside(r0 - geometry::geodesic_dist_on_sphere(mesh.sphere.vertices[i], s0), eps);
    return h;
}

Eigen::VectorXd patch_indicator_ref(const geometry::CorticalMesh& mesh, const Vec3& s0, double r0,
                                    double eps)
{
    const auto m = static_cast<Eigen::Index>(mesh.size());
    Eigen::VectorXd h(m);
    for (Eigen::Index i = 0; i < m; ++i)
        h[i] = smeared_heaviside(r0 - geometry::geodesic_dist_on_sphere(mesh.sphere.vertices[i], s0), eps);
    return h;
}

Eigen::VectorXd make_patch_source(const geometry::CorticalMesh& mesh, const PatchParams& p, double eps)
{
    Eigen::VectorXd j = patch_indicator(mesh, p.center(), p.r0, eps);
    for (Eigen::Index i = 0; i < j.size(); ++i) j[i] *= p.j0 * mesh.node_areas[i];
    return j;
}

Eigen::VectorXd sample_background(Eigen::Index m, double sigma_b, std::uint64_t seed)
{
    if (m <= 0) throw UsageError("background size must be positive");
    if (sigma_b < 0.0) throw UsageError("sigma_b must be non-negative");
    Eigen::VectorXd jb = Eigen::VectorXd::Zero(m);
    if (sigma_b == 0.0) return jb;
    auto rng = make_stream(seed, Stream::background);
    std::normal_distribution<double> normal(0.0, sigma_b);
    for (Eigen::Index i = 0; i < m; ++i) jb[i] = normal(rng);
    return jb;
}

SyntheticData synthesize_data(const forward::LeadField& lf, const Eigen::VectorXd& jp,
                              const Eigen::VectorXd& jb, double sigma_n, std::uint64_t seed)
{
    if (jp.size() != lf.sources() || jb.size() != lf.sources())
        throw DataError("source vectors do not match leadfield columns");
    if (sigma_n < 0.0) throw UsageError("sigma_n must be non-negative");

    SyntheticData out;
    out.noiseless = lf.matrix * (jp + jb);
    out.data = out.noiseless;
    if (sigma_n > 0.0) {
        auto rng = make_stream(seed, Stream::sensor_noise);
        std::normal_distribution<double> normal(0.0, sigma_n);
        for (Eigen::Index i = 0; i < out.data.size(); ++i) out.data[i] += normal(rng);
    }
    return out;
}

double calibrate_sigma_n(const Eigen::VectorXd& field, double ratio)
{
    if (ratio < 0.0) throw UsageError("noise ratio must be non-negative");
    return ratio * field.norm();
}

double background_sigma_from_ratio(const geometry::CorticalMesh& mesh, double j0_density, double ratio)
{
    if (ratio < 0.0) throw UsageError("background ratio must be non-negative");
    return ratio * j0_density * mesh.mean_node_area();
}

} // namespace hetmeg::source
