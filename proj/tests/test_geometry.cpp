#include "hetmeg/error.hpp"
#include "hetmeg/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

using namespace hetmeg;
using namespace hetmeg::geometry;

namespace {

Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

// Normal of r(v) = (R + rho(v)) v by central differences along two tangents.
Vec3 fd_normal(const RadialProfile& rho, double radius, const Vec3& v)
{
    const Vec3 a = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 t1 = v.cross(a).normalized();
    const Vec3 t2 = v.cross(t1);
    const double h = 1e-6;
    auto r = [&](const Vec3& w) {
        const Vec3 u = w.normalized();
        return ((radius + rho.value(u)) * u).eval();
    };
    const Vec3 d1 = (r(v + h * t1) - r(v - h * t1)) / (2 * h);
    const Vec3 d2 = (r(v + h * t2) - r(v - h * t2)) / (2 * h);
    Vec3 n = d1.cross(d2).normalized();
    return n.dot(v) < 0 ? (-n).eval() : n;
}

} // namespace

TEST_CASE("icosphere combinatorics")
{
    for (int s = 0; s <= 4; ++s) {
        const SphereMesh m = make_icosphere(s);
        const auto p = static_cast<std::size_t>(std::pow(4, s));
        CHECK(m.vertices.size() == 10 * p + 2);
        CHECK(m.triangles.size() == 20 * p);
        CHECK(unique_edges(m.triangles).size() == 30 * p);
    }
    CHECK(make_icosphere(2).size() == 162);
    CHECK(make_icosphere(4).size() == 2562);
}

TEST_CASE("icosphere is a closed oriented unit mesh")
{
    const SphereMesh m = make_icosphere(3);
    for (const auto& v : m.vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-12);

    std::map<std::pair<int, int>, int> directed;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            CHECK(t[k] >= 0);
            CHECK(t[k] < static_cast<int>(m.size()));
            ++directed[{t[k], t[(k + 1) % 3]}];
        }
        // Outward winding.
        const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
        CHECK(n.dot(m.vertices[t[0]]) > 0.0);
    }
    for (const auto& [e, count] : directed) {
        CHECK(count == 1);
        CHECK(directed.count({e.second, e.first}) == 1);
    }
}

TEST_CASE("mean edge arc is the mean of edge angles")
{
    const SphereMesh m = make_icosphere(3);
    double sum = 0.0;
    const auto edges = unique_edges(m.triangles);
    for (auto [i, j] : edges) sum += std::acos(m.vertices[i].dot(m.vertices[j]));
    CHECK(m.mean_edge_arc == doctest::Approx(sum / edges.size()).epsilon(1e-14));
    CHECK(mean_edge_arc(m) == doctest::Approx(m.mean_edge_arc).epsilon(1e-14));
}

TEST_CASE("flat cortex is a perfect sphere with radial normals")
{
    const Vec3 c(0.01, -0.02, 0.03);
    const CorticalMesh m = make_wrinkled_cortex(3, 0.08, 0.0, 6, 7, c);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(std::abs((m.positions[i] - c).norm() - 0.08) < 1e-12);
        CHECK((m.normals[i] - m.sphere.vertices[i]).norm() < 1e-9);
    }
}

TEST_CASE("wrinkled cortex invariants")
{
    const CorticalMesh m = make_wrinkled_cortex(4, 0.08, 0.008, 6, 7);
    REQUIRE(m.size() == 2562);
    CHECK(m.normals.size() == m.size());
    CHECK(m.node_areas.size() == m.size());

    double sum = 0.0, lo = 1.0, hi = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(m.node_areas[i] > 0.0);
        sum += m.node_areas[i];
        CHECK(std::abs(m.normals[i].norm() - 1.0) < 1e-12);
        const double c = m.normals[i].dot(m.sphere.vertices[i]);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        peak = std::max(peak, std::abs(m.positions[i].norm() - 0.08));
    }
    CHECK(sum == doctest::Approx(m.total_area()).epsilon(1e-9));
    // Normals are not radial, but never far from it.
    CHECK(hi < 1.0);
    CHECK(lo > 0.8);
    // Level-4 vertices are a subset of the level-5 reference used for the peak.
    CHECK(peak <= 0.008 * (1 + 1e-12));
    CHECK(peak > 0.5 * 0.008);
}

TEST_CASE("mesh normals match finite-difference normals of the surface")
{
    const RadialProfile rho(0.008, 6, 7);
    const CorticalMesh m = make_wrinkled_cortex(3, 0.08, 0.008, 6, 7);
    for (std::size_t i = 0; i < m.size(); i += 7)
        CHECK((m.normals[i] - fd_normal(rho, 0.08, m.sphere.vertices[i])).norm() < 1e-6);
}

TEST_CASE("surface area converges under refinement")
{
    const double a4 = make_wrinkled_cortex(4, 0.08, 0.004, 4, 3).total_area();
    const double a5 = make_wrinkled_cortex(5, 0.08, 0.004, 4, 3).total_area();
    CHECK(std::abs(a5 - a4) / a5 < 0.01);
}

TEST_CASE("same seed gives the same cortex, another seed a different one")
{
    const auto a = make_wrinkled_cortex(2, 0.08, 0.008, 6, 7);
    const auto b = make_wrinkled_cortex(2, 0.08, 0.008, 6, 7);
    const auto c = make_wrinkled_cortex(2, 0.08, 0.008, 6, 8);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.positions[i] == b.positions[i]);
        differs |= a.positions[i] != c.positions[i];
    }
    CHECK(differs);
}

TEST_CASE("cortex parameter validation")
{
    CHECK_THROWS_AS(make_wrinkled_cortex(1, 0.08, 0.0, 6, 7), UsageError);
    CHECK_THROWS_AS(make_wrinkled_cortex(2, 0.08, 0.024, 6, 7), UsageError);
    CHECK_THROWS_AS(make_wrinkled_cortex(2, 0.08, -0.001, 6, 7), UsageError);
    CHECK_THROWS_AS(make_wrinkled_cortex(2, 0.0, 0.0, 6, 7), UsageError);
    CHECK_THROWS_AS(make_wrinkled_cortex(2, 0.08, 0.001, 0, 7), UsageError);
}

TEST_CASE("geodesic distance")
{
    const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY();
    CHECK(geodesic_dist_on_sphere(x, x) == 0.0);
    CHECK(geodesic_dist_on_sphere(x, -x) == doctest::Approx(std::numbers::pi));
    CHECK(geodesic_dist_on_sphere(x, y) == doctest::Approx(std::numbers::pi / 2));

    std::mt19937_64 rng(11);
    for (int k = 0; k < 1000; ++k) {
        const Vec3 a = random_unit(rng), b = random_unit(rng), c = random_unit(rng);
        const double ab = geodesic_dist_on_sphere(a, b);
        CHECK(ab == geodesic_dist_on_sphere(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= std::numbers::pi);
        CHECK(ab <= geodesic_dist_on_sphere(a, c) + geodesic_dist_on_sphere(c, b) + 1e-9);
    }
}

TEST_CASE("sphere point")
{
    CHECK((sphere_point(0.0, 1.234) - Vec3::UnitZ()).norm() < 1e-15);
    CHECK((sphere_point(std::numbers::pi / 2, 0.0) - Vec3::UnitX()).norm() < 1e-15);
    // Direct trig evaluation at the reference patch center.
    const Vec3 s0 = sphere_point(0.4, -0.58);
    CHECK(s0.x() == doctest::Approx(0.32573389853307316).epsilon(1e-14));
    CHECK(s0.y() == doctest::Approx(-0.21341057301095206).epsilon(1e-14));
    CHECK(s0.z() == doctest::Approx(0.9210609940028851).epsilon(1e-14));

    const auto [t, p] = sphere_angles(s0);
    CHECK(t == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(p == doctest::Approx(2 * std::numbers::pi - 0.58).epsilon(1e-14));
}

TEST_CASE("mesh text round trip")
{
    const CorticalMesh m = make_wrinkled_cortex(2, 0.08, 0.008, 6, 7);
    std::stringstream ss;
    write_mesh(ss, m);
    const std::string text = ss.str();
    const CorticalMesh r = read_mesh(ss, m.center);
    REQUIRE(r.size() == m.size());
    CHECK(r.sphere.triangles == m.sphere.triangles);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(r.positions[i] == m.positions[i]);
        CHECK(r.normals[i] == m.normals[i]);
        CHECK(r.node_areas[i] == m.node_areas[i]);
        CHECK(r.sphere.vertices[i] == m.sphere.vertices[i]);
    }
    CHECK(r.sphere.mean_edge_arc == doctest::Approx(m.sphere.mean_edge_arc).epsilon(1e-15));
    std::stringstream again;
    write_mesh(again, r);
    CHECK(again.str() == text);
}

TEST_CASE("malformed mesh text is a data error")
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return read_mesh(in, Vec3::Zero());
    };
    CHECK_THROWS_AS(parse("v 1 2 3\n"), DataError);
    CHECK_THROWS_AS(parse("v 0 0 1 0 0 1 1 0 0 1\nf 0 0 5\n"), DataError);
    CHECK_THROWS_AS(parse("x 1\n"), DataError);
}
