#include "hetmeg/forward.hpp"

#include "hetmeg/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hetmeg::forward {

SensorArray make_helmet_array(int n_sensors, double helmet_radius, double cap_angle, const Vec3& center)
{
    if (n_sensors < 1) throw UsageError("n_sensors must be >= 1");
    if (!(helmet_radius > 0.0)) throw UsageError("helmet_radius must be positive");
    if (!(cap_angle > 0.0) || cap_angle > std::numbers::pi)
        throw UsageError("cap_angle must lie in (0, pi]");

    SensorArray array;
    array.positions.reserve(n_sensors);
    array.orientations.reserve(n_sensors);
    if (n_sensors == 1) {
        array.orientations.push_back(Vec3::UnitZ());
        array.positions.push_back(center + helmet_radius * Vec3::UnitZ());
        return array;
    }

    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double span = 1.0 - std::cos(cap_angle);
    for (int i = 0; i < n_sensors; ++i) {
        // Equal-area bands on the cap, mid-band heights.
        const double z = 1.0 - span * (i + 0.5) / n_sensors;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden_angle * i;
        const Vec3 dir(rho * std::cos(az), rho * std::sin(az), z);
        array.orientations.push_back(dir);
        array.positions.push_back(center + helmet_radius * dir);
    }
    return array;
}

Vec3 dipole_field_sarvas(const Vec3& dipole_pos, const Vec3& dipole_moment, const Vec3& sensor_pos,
                         const Vec3& conductor_center)
{
    const Vec3 r0 = dipole_pos - conductor_center;
    const Vec3 r = sensor_pos - conductor_center;
    const double rn = r.norm();
    if (!(r0.norm() < rn)) {
        std::ostringstream msg;
        msg << "dipole at radius " << r0.norm() << " m is not inside sensor radius " << rn << " m";
        throw NumericalError(msg.str());
    }

    const Vec3 a_vec = r - r0;
    const double a = a_vec.norm();
    const double ar = a_vec.dot(r);
    const double F = a * (rn * a + rn * rn - r0.dot(r));
    if (std::abs(F) < 1e-30) throw NumericalError("degenerate dipole/sensor geometry (F ~ 0)");

    const Vec3 grad_F = (a * a / rn + ar / a + 2.0 * a + 2.0 * rn) * r - (a + 2.0 * rn + ar / a) * r0;
    const Vec3 q_x_r0 = dipole_moment.cross(r0);
    return kMu0Over4Pi / (F * F) * (F * q_x_r0 - q_x_r0.dot(r) * grad_F);
}

namespace {

struct FailedPair {
    Eigen::Index node = std::numeric_limits<Eigen::Index>::max();
    Eigen::Index sensor = 0;
    std::string what;
};

void check_sizes(const geometry::CorticalMesh& mesh, const SensorArray& sensors)
{
    if (mesh.normals.size() != mesh.size())
        throw DataError("mesh positions and normals differ in length");
    if (sensors.orientations.size() != sensors.size())
        throw DataError("sensor positions and orientations differ in length");
}

[[noreturn]] void rethrow(const FailedPair& failure)
{
    std::ostringstream msg;
    msg << "leadfield entry (sensor " << failure.sensor << ", node " << failure.node
        << "): " << failure.what;
    throw NumericalError(msg.str());
}

// Fills one column. Returns the failing sensor index or -1.
Eigen::Index fill_column(const geometry::CorticalMesh& mesh, const SensorArray& sensors,
                         Eigen::Index j, Eigen::MatrixXd& out, std::string& what)
{
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        try {
            const Vec3 b = dipole_field_sarvas(mesh.positions[j], mesh.normals[j],
                                               sensors.positions[i], mesh.center);
            out(i, j) = sensors.orientations[i].dot(b);
        } catch (const Error& e) {
            what = e.what();
            return i;
        }
    }
    return -1;
}

} // namespace

LeadField build_leadfield(const geometry::CorticalMesh& mesh, const SensorArray& sensors)
{
    check_sizes(mesh, sensors);
    const auto n = static_cast<Eigen::Index>(sensors.size());
    const auto m = static_cast<Eigen::Index>(mesh.size());
    LeadField lf{Eigen::MatrixXd(n, m)};
    FailedPair failure;

#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < m; ++j) {
        std::string what;
        const Eigen::Index bad = fill_column(mesh, sensors, j, lf.matrix, what);
        if (bad >= 0) {
#pragma omp critical(hetmeg_leadfield_failure)
            if (j < failure.node) failure = {j, bad, what};
        }
    }
    if (failure.node != std::numeric_limits<Eigen::Index>::max()) rethrow(failure);
    return lf;
}

LeadField build_leadfield_ref(const geometry::CorticalMesh& mesh, const SensorArray& sensors)
{
    check_sizes(mesh, sensors);
    const auto n = static_cast<Eigen::Index>(sensors.size());
    const auto m = static_cast<Eigen::Index>(mesh.size());
    LeadField lf{Eigen::MatrixXd(n, m)};
    for (Eigen::Index j = 0; j < m; ++j) {
        std::string what;
        const Eigen::Index bad = fill_column(mesh, sensors, j, lf.matrix, what);
        if (bad >= 0) rethrow({j, bad, what});
    }
    return lf;
}

} // namespace hetmeg::forward
