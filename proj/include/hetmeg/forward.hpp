#pragma once

#include "hetmeg/geometry.hpp"

#include <Eigen/Core>

namespace hetmeg::forward {

using geometry::Vec3;

/// mu0 / (4 pi), T m / A.
inline constexpr double kMu0Over4Pi = 1e-7;

struct SensorArray {
    std::vector<Vec3> positions;     // m
    std::vector<Vec3> orientations;  // unit measurement directions

    std::size_t size() const { return positions.size(); }
};

/// Dense N x M matrix, tesla per A*m. Column j is the response to a unit dipole
/// along normals[j] at positions[j].
struct LeadField {
    Eigen::MatrixXd matrix;

    Eigen::Index sensors() const { return matrix.rows(); }
    Eigen::Index sources() const { return matrix.cols(); }
};

/// Fibonacci-spiral magnetometers on a spherical cap of half-angle `cap_angle`
/// about +z, oriented radially outward.
SensorArray make_helmet_array(int n_sensors, double helmet_radius, double cap_angle,
                              const Vec3& center = Vec3::Zero());

/// Field outside a spherically symmetric conductor for a current dipole inside it
/// (Sarvas closed form). Throws NumericalError on degenerate geometry.
Vec3 dipole_field_sarvas(const Vec3& dipole_pos, const Vec3& dipole_moment, const Vec3& sensor_pos,
                         const Vec3& conductor_center);

/// OpenMP kernel, parallel over source nodes.
LeadField build_leadfield(const geometry::CorticalMesh& mesh, const SensorArray& sensors);

/// Serial reference; bit-identical to build_leadfield.
LeadField build_leadfield_ref(const geometry::CorticalMesh& mesh, const SensorArray& sensors);

} // namespace hetmeg::forward
