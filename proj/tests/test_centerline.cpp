#include <doctest.h>

#include "sdf4d/geometry.hpp"
#include "sdf4d/synthetic.hpp"

using namespace sdf4d;

TEST_CASE("capsule centerline hugs the axis") {
    const AnalyticShape shape = Capsule{0.5, 0.3};
    const auto field = analytic_batch_field(shape, 0.0);
    const auto line = centerline(field, Eigen::Vector3d::UnitZ(), 16);
    REQUIRE(line.centers.size() >= 12);
    for (const auto& c : line.centers) {
        CHECK(Eigen::Vector2d(c.x(), c.y()).norm() <= 1e-2);
    }
    CHECK(line.skipped_stations.empty());
}

TEST_CASE("sphere centerline collapses onto the axis through the center") {
    const AnalyticShape shape = GrowingSphere{0.5, 0.0};
    const auto field = analytic_batch_field(shape, 0.0);
    const auto line = centerline(field, Eigen::Vector3d::UnitZ(), 9);
    REQUIRE_FALSE(line.centers.empty());
    for (const auto& c : line.centers) CHECK(Eigen::Vector2d(c.x(), c.y()).norm() <= 1e-2);
}

TEST_CASE("centerline is equivariant under grid-commensurate translations") {
    const CenterlineOptions options;  // grid resolution 64
    const double h = 2.0 * options.interior_bound / (options.grid_resolution - 1);
    const Eigen::Vector3d shift(4 * h, -3 * h, 2 * h);

    auto base = [](const Eigen::Vector3d& x) {
        const double z = std::clamp(x.z(), -0.4, 0.4);
        return (x - Eigen::Vector3d(0.0, 0.0, z)).norm() - 0.25;
    };
    const auto line = centerline(batch_from_pointwise(base), Eigen::Vector3d::UnitZ(), 10,
                                 options);
    const auto shifted = centerline(
        batch_from_pointwise([&](const Eigen::Vector3d& x) { return base(x - shift); }),
        Eigen::Vector3d::UnitZ(), 10, options);

    REQUIRE(line.centers.size() == shifted.centers.size());
    for (std::size_t i = 0; i < line.centers.size(); ++i)
        CHECK((shifted.centers[i] - line.centers[i] - shift).norm() <= 1e-6);
}

TEST_CASE("centerline input validation") {
    const auto field = analytic_batch_field(Capsule{0.5, 0.3}, 0.0);
    CHECK_THROWS_AS(centerline(field, Eigen::Vector3d::Zero(), 8), std::invalid_argument);
    CHECK_THROWS_AS(centerline(field, Eigen::Vector3d::UnitZ(), 0), std::invalid_argument);
    // a field with no interior anywhere
    const auto outside = batch_from_pointwise([](const Eigen::Vector3d&) { return 1.0; });
    CHECK_THROWS_AS(centerline(outside, Eigen::Vector3d::UnitZ(), 8), std::runtime_error);
}

TEST_CASE("capsule diameter profile reads the tube width") {
    const AnalyticShape shape = Capsule{0.5, 0.3};
    const auto field = analytic_batch_field(shape, 0.0);
    NormalizationTransform identity;  // scale 1, so "mm" equals normalized units
    const auto profile = diameter_profile(field, Eigen::Vector3d::UnitZ(), 24, identity);
    REQUIRE_FALSE(profile.stations.empty());

    int interior = 0;
    for (const auto& s : profile.stations) {
        CHECK(s.diameter_mm >= 0.0);
        if (std::abs(s.center_mm.z()) <= 0.5 - 0.05) {
            CHECK(s.diameter_mm == doctest::Approx(0.6).epsilon(0.02));
            ++interior;
        }
    }
    CHECK(interior >= 8);

    // arclength is nondecreasing
    for (std::size_t i = 1; i < profile.stations.size(); ++i)
        CHECK(profile.stations[i].arclength_mm >= profile.stations[i - 1].arclength_mm);
}

TEST_CASE("sphere diameter profile peaks at the true diameter in millimeters") {
    const AnalyticShape shape = GrowingSphere{0.5, 0.0};
    const auto field = analytic_batch_field(shape, 0.0);
    NormalizationTransform tr;
    tr.scale_mm = 50.0;
    const auto profile = diameter_profile(field, Eigen::Vector3d::UnitZ(), 21, tr);
    REQUIRE_FALSE(profile.stations.empty());
    double max_diameter = 0.0;
    for (const auto& s : profile.stations) max_diameter = std::max(max_diameter, s.diameter_mm);
    CHECK(max_diameter == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("cloud inscribed diameter estimates the true diameter from samples") {
    // the estimate undershoots the truth slightly: clearance to the nearest
    // sample is at most the distance to the continuous surface
    Rng rng(71);
    const AnalyticShape sphere = GrowingSphere{0.5, 0.0};
    const auto cloud = sample_surface(sphere, 0.0, 8000, rng);
    const double d = cloud_max_inscribed_diameter(cloud, Eigen::Vector3d::UnitZ(), 41);
    CHECK(d <= 1.0 + 1e-9);
    CHECK(d == doctest::Approx(1.0).epsilon(0.05));

    const AnalyticShape capsule = Capsule{0.5, 0.3};
    const auto tube_cloud = sample_surface(capsule, 0.0, 8000, rng);
    const double dt = cloud_max_inscribed_diameter(tube_cloud, Eigen::Vector3d::UnitZ(), 41);
    CHECK(dt <= 0.6 + 1e-9);
    CHECK(dt == doctest::Approx(0.6).epsilon(0.05));
}
