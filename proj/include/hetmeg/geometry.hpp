#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace hetmeg::geometry {

using Vec3 = Eigen::Vector3d;

/// Triangulated unit sphere. Vertex i is the sphere image g(r_i) of cortex node i.
struct SphereMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    double mean_edge_arc = 0.0;  // radians

    std::size_t size() const { return vertices.size(); }
};

/// Synthetic cortex: node i sits over sphere vertex i, so the maps g and f are the
/// identity on indices.
struct CorticalMesh {
    SphereMesh sphere;
    std::vector<Vec3> positions;   // m
    std::vector<Vec3> normals;     // outward unit normals of the perturbed surface
    std::vector<double> node_areas;  // m^2, one third of each incident triangle
    Vec3 center = Vec3::Zero();    // conductor-sphere center, m

    std::size_t size() const { return positions.size(); }
    double total_area() const;
    double mean_node_area() const;
};

/// Icosahedron refined by repeated edge-midpoint subdivision; 10*4^s + 2 vertices.
SphereMesh make_icosphere(int subdivisions);

/// Unique undirected edges (i < j), sorted.
std::vector<std::pair<int, int>> unique_edges(const std::vector<std::array<int, 3>>& triangles);

double mean_edge_arc(const SphereMesh& sphere);

/// Smooth band-limited radial perturbation rho(v) on the unit sphere: a sum of
/// `lobes` cosine ridges cos(lobes * (u_k . v) + phase_k) with seeded directions,
/// phases and weights, scaled so the peak over a fixed dense reference sphere
/// equals `amplitude`.
class RadialProfile {
public:
    RadialProfile(double amplitude, int lobes, std::uint64_t seed);

    double value(const Vec3& v) const;
    /// Tangential (surface) gradient on the unit sphere at v.
    Vec3 surface_gradient(const Vec3& v) const;

private:
    double raw(const Vec3& v) const;

    double frequency_ = 1.0;
    double scale_ = 0.0;
    std::vector<Vec3> directions_;
    std::vector<double> phases_;
    std::vector<double> weights_;
};

/// Cortex node i = center + (base_radius + rho(v_i)) v_i over an icosphere.
CorticalMesh make_wrinkled_cortex(int subdivisions, double base_radius, double wrinkle_amp,
                                  int wrinkle_freq, std::uint64_t seed,
                                  const Vec3& center = Vec3::Zero());

/// Great-circle distance on the unit sphere, acos of the clamped dot product.
double geodesic_dist_on_sphere(const Vec3& a, const Vec3& b);

/// (sin t cos p, sin t sin p, cos t)
Vec3 sphere_point(double theta, double phi);

/// Spherical angles of a unit vector, theta in [0, pi], phi in [0, 2 pi).
std::pair<double, double> sphere_angles(const Vec3& v);

/// Text export: `v x y z nx ny nz area sx sy sz` per node, then `f i j k` per triangle.
void write_mesh(std::ostream& out, const CorticalMesh& mesh);
CorticalMesh read_mesh(std::istream& in, const Vec3& center);

} // namespace hetmeg::geometry
