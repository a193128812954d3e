#include "hetmeg/geometry.hpp"

#include "hetmeg/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace hetmeg::geometry {

namespace {

constexpr int kReferenceLevel = 5;

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

} // namespace

double CorticalMesh::total_area() const
{
    double area = 0.0;
    for (const auto& t : sphere.triangles) {
        const Vec3& a = positions[t[0]];
        const Vec3& b = positions[t[1]];
        const Vec3& c = positions[t[2]];
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

double CorticalMesh::mean_node_area() const
{
    double sum = 0.0;
    for (double a : node_areas) sum += a;
    return node_areas.empty() ? 0.0 : sum / static_cast<double>(node_areas.size());
}

SphereMesh make_icosphere(int subdivisions)
{
    if (subdivisions < 0) throw UsageError("icosphere subdivisions must be >= 0");

    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : v) p.normalize();

    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int b) {
            auto key = edge_key(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            const int idx = static_cast<int>(v.size());
            v.push_back((v[a] + v[b]).normalized());
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int ab = midpoint(tri[0], tri[1]);
            const int bc = midpoint(tri[1], tri[2]);
            const int ca = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }

    SphereMesh mesh;
    mesh.vertices = std::move(v);
    mesh.triangles = std::move(f);
    mesh.mean_edge_arc = mean_edge_arc(mesh);
    return mesh;
}

std::vector<std::pair<int, int>> unique_edges(const std::vector<std::array<int, 3>>& triangles)
{
    std::vector<std::pair<int, int>> edges;
    edges.reserve(triangles.size() * 3);
    for (const auto& t : triangles) {
        edges.push_back(edge_key(t[0], t[1]));
        edges.push_back(edge_key(t[1], t[2]));
        edges.push_back(edge_key(t[2], t[0]));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

double mean_edge_arc(const SphereMesh& sphere)
{
    const auto edges = unique_edges(sphere.triangles);
    if (edges.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [i, j] : edges)
        sum += geodesic_dist_on_sphere(sphere.vertices[i], sphere.vertices[j]);
    return sum / static_cast<double>(edges.size());
}

RadialProfile::RadialProfile(double amplitude, int lobes, std::uint64_t seed)
{
    if (lobes < 1) throw UsageError("wrinkle_freq must be >= 1");
    frequency_ = static_cast<double>(lobes);

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0x77726e6bU};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < lobes; ++k) {
        const double z = 2.0 * unit(rng) - 1.0;
        const double az = 2.0 * std::numbers::pi * unit(rng);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        directions_.emplace_back(s * std::cos(az), s * std::sin(az), z);
        phases_.push_back(2.0 * std::numbers::pi * unit(rng));
        weights_.push_back(0.5 + 0.5 * unit(rng));
    }

    if (amplitude == 0.0) return;
    // Peak taken over a fixed reference sphere so the surface does not depend on
    // the resolution of the mesh that samples it.
    const SphereMesh reference = make_icosphere(kReferenceLevel);
    double peak = 0.0;
    for (const auto& v : reference.vertices) peak = std::max(peak, std::abs(raw(v)));
    scale_ = peak > 0.0 ? amplitude / peak : 0.0;
}

double RadialProfile::raw(const Vec3& v) const
{
    double sum = 0.0;
    for (std::size_t k = 0; k < directions_.size(); ++k)
        sum += weights_[k] * std::cos(frequency_ * directions_[k].dot(v) + phases_[k]);
    return sum;
}

double RadialProfile::value(const Vec3& v) const { return scale_ * raw(v); }

Vec3 RadialProfile::surface_gradient(const Vec3& v) const
{
    Vec3 grad = Vec3::Zero();
    for (std::size_t k = 0; k < directions_.size(); ++k)
        grad -= weights_[k] * frequency_ * std::sin(frequency_ * directions_[k].dot(v) + phases_[k])
              * directions_[k];
    grad *= scale_;
    return grad - grad.dot(v) * v;
}

CorticalMesh make_wrinkled_cortex(int subdivisions, double base_radius, double wrinkle_amp,
                                  int wrinkle_freq, std::uint64_t seed, const Vec3& center)
{
    if (subdivisions < 2) throw UsageError("subdivisions must be >= 2");
    if (!(base_radius > 0.0)) throw UsageError("base_radius must be positive");
    if (wrinkle_amp < 0.0 || wrinkle_amp >= 0.3 * base_radius)
        throw UsageError("wrinkle_amp must lie in [0, 0.3 * base_radius)");

    CorticalMesh mesh;
    mesh.sphere = make_icosphere(subdivisions);
    mesh.center = center;
    const RadialProfile profile(wrinkle_amp, wrinkle_freq, seed);

    const std::size_t m = mesh.sphere.size();
    mesh.positions.resize(m);
    mesh.normals.resize(m);
    mesh.node_areas.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3& v = mesh.sphere.vertices[i];
        const double h = base_radius + profile.value(v);
        if (!(h > 0.0)) {
            std::ostringstream msg;
            msg << "non-positive cortex radius at node " << i;
            throw UsageError(msg.str());
        }
        mesh.positions[i] = center + h * v;
        // r(v) = h(v) v has normal h v - grad_S h.
        mesh.normals[i] = (h * v - profile.surface_gradient(v)).normalized();
    }

    for (const auto& t : mesh.sphere.triangles) {
        const Vec3& a = mesh.positions[t[0]];
        const Vec3& b = mesh.positions[t[1]];
        const Vec3& c = mesh.positions[t[2]];
        const double third = (b - a).cross(c - a).norm() / 6.0;
        for (int k : t) mesh.node_areas[k] += third;
    }
    return mesh;
}

double geodesic_dist_on_sphere(const Vec3& a, const Vec3& b)
{
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

Vec3 sphere_point(double theta, double phi)
{
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::pair<double, double> sphere_angles(const Vec3& v)
{
    const double theta = std::acos(std::clamp(v.z() / v.norm(), -1.0, 1.0));
    double phi = std::atan2(v.y(), v.x());
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    return {theta, phi};
}

void write_mesh(std::ostream& out, const CorticalMesh& mesh)
{
    out << std::setprecision(17);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const Vec3& p = mesh.positions[i];
        const Vec3& n = mesh.normals[i];
        const Vec3& s = mesh.sphere.vertices[i];
        out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' '
            << n.z() << ' ' << mesh.node_areas[i] << ' ' << s.x() << ' ' << s.y() << ' ' << s.z()
            << '\n';
    }
    for (const auto& t : mesh.sphere.triangles)
        out << "f " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

CorticalMesh read_mesh(std::istream& in, const Vec3& center)
{
    CorticalMesh mesh;
    mesh.center = center;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 p, n, s;
            double area = 0.0;
            ls >> p.x() >> p.y() >> p.z() >> n.x() >> n.y() >> n.z() >> area >> s.x() >> s.y() >> s.z();
            if (!ls) throw DataError("malformed vertex line " + std::to_string(lineno));
            mesh.positions.push_back(p);
            mesh.normals.push_back(n);
            mesh.node_areas.push_back(area);
            mesh.sphere.vertices.push_back(s);
        } else if (tag == "f") {
            std::array<int, 3> t{};
            ls >> t[0] >> t[1] >> t[2];
            if (!ls) throw DataError("malformed face line " + std::to_string(lineno));
            mesh.sphere.triangles.push_back(t);
        } else {
            throw DataError("unknown mesh record '" + tag + "' on line " + std::to_string(lineno));
        }
    }
    const int m = static_cast<int>(mesh.size());
    for (const auto& t : mesh.sphere.triangles)
        for (int k : t)
            if (k < 0 || k >= m) throw DataError("triangle index out of range");
    mesh.sphere.mean_edge_arc = mean_edge_arc(mesh.sphere);
    return mesh;
}

} // namespace hetmeg::geometry
