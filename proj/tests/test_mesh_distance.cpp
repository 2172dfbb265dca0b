#include <doctest.h>

#include "sdf4d/common.hpp"
#include "sdf4d/geometry.hpp"

using namespace sdf4d;

namespace {

BatchScalarField sphere_field(double radius) {
    return batch_from_pointwise(
        [radius](const Eigen::Vector3d& x) { return x.norm() - radius; });
}

}  // namespace

TEST_CASE("point-to-triangle distance analytic cases") {
    const Eigen::Vector3d a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    CHECK(point_to_triangle_distance({0, 0, 1}, a, b, c) == doctest::Approx(1.0));
    CHECK(point_to_triangle_distance({0.25, 0.25, 0}, a, b, c) == 0.0);      // interior
    CHECK(point_to_triangle_distance({-1, -1, 0}, a, b, c) ==
          doctest::Approx(std::sqrt(2.0)));                                  // vertex region
    CHECK(point_to_triangle_distance({0.5, -2, 0}, a, b, c) == doctest::Approx(2.0));  // edge
    CHECK(point_to_triangle_distance({1, 1, 0}, a, b, c) ==
          doctest::Approx(std::sqrt(0.5)));  // hypotenuse edge region
}

TEST_CASE("point-to-triangle matches a dense barycentric scan") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector3d a(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Eigen::Vector3d b(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Eigen::Vector3d c(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Eigen::Vector3d p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const double exact = point_to_triangle_distance(p, a, b, c);

        double scanned = std::numeric_limits<double>::infinity();
        const int n = 120;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n - i; ++j) {
                const double u = static_cast<double>(i) / n;
                const double v = static_cast<double>(j) / n;
                scanned = std::min(scanned, (p - (a + u * (b - a) + v * (c - a))).norm());
            }
        CHECK(exact <= scanned + 1e-12);            // scan can never beat the exact minimum
        const double diameter = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
        CHECK(scanned - exact <= 2.0 * diameter / n);  // and must approach it
    }
}

TEST_CASE("mesh distance: vertex hit is zero, BVH equals brute force") {
    const auto mesh = extract_mesh(sphere_field(0.5), 32);
    REQUIRE_FALSE(mesh.empty());

    CHECK(point_to_mesh_distance(mesh.vertices[17], mesh) == 0.0);

    const MeshDistanceQuery query(mesh);
    Rng rng(14);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector3d p(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                                rng.uniform(-1.2, 1.2));
        const double brute = point_to_mesh_distance(p, mesh);
        const double fast = query.distance(p);
        CHECK(std::abs(brute - fast) <= 1e-12);
    }

    TriangleMesh empty;
    CHECK_THROWS_AS(point_to_mesh_distance({0, 0, 0}, empty), std::invalid_argument);
    CHECK_THROWS_AS(MeshDistanceQuery{empty}, std::invalid_argument);
}

TEST_CASE("ASD of a mesh with itself vanishes") {
    const auto mesh = extract_mesh(sphere_field(0.4), 24);
    const auto result = average_surface_distance(mesh, mesh, 2000, 99);
    CHECK(result.asd <= 1e-9);
}

TEST_CASE("ASD of concentric spheres equals the radius gap") {
    const auto inner = extract_mesh(sphere_field(0.5), 64);
    const auto outer = extract_mesh(sphere_field(0.6), 64);
    const auto result = average_surface_distance(inner, outer, 20000, 7);
    CHECK(result.asd == doctest::Approx(0.1).epsilon(0.02));

    // exact argument-order symmetry with a shared seed
    const auto swapped = average_surface_distance(outer, inner, 20000, 7);
    CHECK(swapped.asd == result.asd);
    CHECK(swapped.mean_a_to_b == result.mean_b_to_a);

    // doubling the sample count moves the estimate by less than 1%
    const auto doubled = average_surface_distance(inner, outer, 40000, 7);
    CHECK(std::abs(doubled.asd - result.asd) / result.asd < 0.01);
}

TEST_CASE("cloud-mesh ASD vanishes for a cloud sampled on the mesh itself") {
    const auto mesh = extract_mesh(sphere_field(0.5), 48);
    std::vector<Eigen::Vector3d> cloud(mesh.vertices.begin(), mesh.vertices.end());
    const auto result = cloud_mesh_asd(cloud, mesh, 2000, 3);
    CHECK(result.mean_a_to_b <= 1e-12);     // every cloud point lies on the mesh
    CHECK(result.asd <= 0.05);              // mesh samples sit near some cloud point
    CHECK(result.samples_a_to_b.size() == cloud.size());
    CHECK(result.samples_b_to_a.size() == 2000);
}
