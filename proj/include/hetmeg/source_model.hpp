#pragma once

#include "hetmeg/forward.hpp"
#include "hetmeg/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace hetmeg::source {

using geometry::Vec3;

/// 1 nAm/mm^2 expressed in SI (A*m per m^2).
inline constexpr double kNanoAmMeterPerMm2 = 1e-3;

/// Parametric focal patch: spherical cap (theta0, phi0, r0) on S mapped to the
/// cortex, with uniform surface dipole-moment density j0 (A*m / m^2).
struct PatchParams {
    double theta0 = 0.0;
    double phi0 = 0.0;
    double r0 = 0.0;
    double j0 = 0.0;

    Vec3 center() const { return geometry::sphere_point(theta0, phi0); }
};

struct NoiseModel {
    double sigma_b = 0.0;  // A*m per node
    double sigma_n = 0.0;  // T per sensor
    std::uint64_t seed = 0;
};

/// Independent RNG streams derived from one user seed.
enum class Stream : std::uint32_t { background = 1, sensor_noise = 2 };

/// C^1 ramp of half-width eps replacing the Heaviside step.
double smeared_heaviside(double psi, double eps);

/// Component i = smeared_heaviside(r0 - d(g(r_i), s0), eps).
Eigen::VectorXd patch_indicator(const geometry::CorticalMesh& mesh, const Vec3& s0, double r0,
                                double eps);

/// Serial reference of patch_indicator.
Eigen::VectorXd patch_indicator_ref(const geometry::CorticalMesh& mesh, const Vec3& s0, double r0,
                                    double eps);

/// Per-node moments (A*m): j0 * area_i * indicator_i.
Eigen::VectorXd make_patch_source(const geometry::CorticalMesh& mesh, const PatchParams& p, double eps);

/// i.i.d. N(0, sigma_b^2) moments.
Eigen::VectorXd sample_background(Eigen::Index m, double sigma_b, std::uint64_t seed);

struct SyntheticData {
    Eigen::VectorXd data;       // L (Jp + Jb) + n
    Eigen::VectorXd noiseless;  // L (Jp + Jb)
};

SyntheticData synthesize_data(const forward::LeadField& lf, const Eigen::VectorXd& jp,
                              const Eigen::VectorXd& jb, double sigma_n, std::uint64_t seed);

/// sigma_n = ratio * ||field||_2.
double calibrate_sigma_n(const Eigen::VectorXd& field, double ratio);

/// sigma_b = ratio * j0 * mean node area, i.e. a per-node moment std.
double background_sigma_from_ratio(const geometry::CorticalMesh& mesh, double j0_density,
                                   double ratio);

} // namespace hetmeg::source
