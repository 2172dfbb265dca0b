#include <doctest.h>

#include "sdf4d/geometry.hpp"
#include "sdf4d/synthetic.hpp"

using namespace sdf4d;

TEST_CASE("analytic SDF closed-form values") {
    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    CHECK(analytic_sdf(sphere, {{0, 0, 0}, 0.0}) == doctest::Approx(-0.5));
    CHECK(analytic_sdf(sphere, {{0.6, 0, 0}, 1.0}) == doctest::Approx(0.0));
    CHECK(analytic_sdf(sphere, {{0.8, 0, 0}, -1.0}) == doctest::Approx(0.4));

    const AnalyticShape capsule = Capsule{0.5, 0.3};
    CHECK(analytic_sdf(capsule, {{0, 0, 0}, 0.3}) == doctest::Approx(-0.3));
    CHECK(analytic_sdf(capsule, {{0, 0, 0.9}, -0.8}) == doctest::Approx(0.1));
    CHECK(analytic_sdf(capsule, {{0.3, 0, 0.2}, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("bulging capsule is the union of its two parts") {
    BulgingCapsule b;
    b.half_length = 0.6;
    b.base_radius = 0.2;
    b.amp0 = 0.15;
    b.amp_rate = 0.05;
    b.bulge_half_length = 0.1;
    const AnalyticShape shape = b;
    // on the bulge equator at t=1: radius 0.2 + 0.2 = 0.4
    CHECK(analytic_sdf(shape, {{0.4, 0, 0}, 1.0}) == doctest::Approx(0.0));
    // far along the axis only the base capsule matters
    CHECK(analytic_sdf(shape, {{0, 0, 0.8}, 1.0}) == doctest::Approx(0.0));
    // interior takes the deeper of the two distances
    CHECK(analytic_sdf(shape, {{0, 0, 0}, 1.0}) == doctest::Approx(-0.4));
}

TEST_CASE("shape validation enforces the domain bound") {
    CHECK_NOTHROW(validate_shape(GrowingSphere{0.5, 0.1}));
    CHECK_THROWS_AS(validate_shape(GrowingSphere{0.9, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(validate_shape(GrowingSphere{0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(validate_shape(Capsule{0.8, 0.3}), std::invalid_argument);
    BulgingCapsule big;
    big.amp0 = 0.9;
    CHECK_THROWS_AS(validate_shape(big), std::invalid_argument);
}

TEST_CASE("surface samples sit on the zero level set") {
    Rng rng(3);
    const std::vector<AnalyticShape> shapes = {
        GrowingSphere{0.5, 0.1}, Capsule{0.5, 0.3},
        BulgingCapsule{0.6, 0.2, 0.1, 0.05, 0.02, 0.1}};
    for (const auto& shape : shapes) {
        for (double t : {-1.0, 0.0, 0.7}) {
            const auto points = sample_surface(shape, t, 500, rng);
            CHECK(points.size() == 500);
            for (const auto& p : points) CHECK(std::abs(analytic_sdf(shape, {p, t})) <= 1e-9);
        }
    }
}

TEST_CASE("sphere samples are centered (area-uniform sanity)") {
    Rng rng(11);
    const AnalyticShape sphere = GrowingSphere{0.5, 0.0};
    const int n = 20000;
    const auto points = sample_surface(sphere, 0.0, n, rng);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(n);
    // each coordinate of a uniform point on a radius-r sphere has variance
    // r^2/3; the mean of n draws stays within 3 sigma
    const double sigma = 0.5 / std::sqrt(3.0 * n);
    CHECK(mean.cwiseAbs().maxCoeff() <= 3.0 * sigma);
}

TEST_CASE("two seeds give different clouds") {
    Rng a(1), b(2);
    const AnalyticShape sphere = GrowingSphere{0.5, 0.0};
    const auto pa = sample_surface(sphere, 0.0, 10, a);
    const auto pb = sample_surface(sphere, 0.0, 10, b);
    bool any_different = false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i] != pb[i]) any_different = true;
    CHECK(any_different);
}

TEST_CASE("Eikonal property holds exactly along closed-form gradient rays") {
    // for spheres and capsules the SDF grows by exactly h along its own
    // gradient direction; no finite-difference limit involved
    Rng rng(7);
    const double h = 0.05;

    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    for (int i = 0; i < 50; ++i) {
        const auto p = sample_surface(sphere, 0.3, 1, rng)[0];
        const Eigen::Vector3d g = p.normalized();  // closed-form gradient
        const double d0 = analytic_sdf(sphere, {p, 0.3});
        const double d1 = analytic_sdf(sphere, {p + h * g, 0.3});
        CHECK(std::abs((d1 - d0) - h) <= 1e-9);
    }

    const AnalyticShape capsule = Capsule{0.5, 0.3};
    for (int i = 0; i < 50; ++i) {
        const auto p = sample_surface(capsule, 0.0, 1, rng)[0];
        const double z = std::clamp(p.z(), -0.5, 0.5);
        const Eigen::Vector3d g = (p - Eigen::Vector3d(0, 0, z)).normalized();
        const double d0 = analytic_sdf(capsule, {p, 0.0});
        const double d1 = analytic_sdf(capsule, {p + h * g, 0.0});
        CHECK(std::abs((d1 - d0) - h) <= 1e-9);
    }
}

TEST_CASE("growing sphere temporal derivative equals minus the rate") {
    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d x(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9),
                                rng.uniform(-0.9, 0.9));
        if (x.norm() < 1e-6) continue;
        const double dt = 0.25;
        const double slope =
            (analytic_sdf(sphere, {x, 0.5 + dt}) - analytic_sdf(sphere, {x, 0.5})) / dt;
        CHECK(slope == doctest::Approx(-0.1).epsilon(1e-12));
    }
}

TEST_CASE("make_sequence round trip lands inside the padded domain") {
    const AnalyticShape sphere = GrowingSphere{0.5, 0.1};
    const std::vector<double> days = {0.0, 103.0, 1022.0};
    const auto seq = make_sequence(sphere, days, 600, 21);
    CHECK(seq.scans.size() == 3);
    CHECK(seq.scans[1].time_days == 103.0);
    seq.validate();

    const auto normalized = normalize_sequence(seq);
    for (const auto& scan : normalized.sequence.scans)
        for (const auto& p : scan.points) CHECK(p.cwiseAbs().maxCoeff() <= 0.9 + 1e-9);

    // determinism per seed
    const auto again = make_sequence(sphere, days, 600, 21);
    for (std::size_t j = 0; j < seq.scans.size(); ++j)
        for (std::size_t i = 0; i < seq.scans[j].points.size(); ++i)
            CHECK(seq.scans[j].points[i] == again.scans[j].points[i]);
}

TEST_CASE("oracle consistency: extracted mesh matches a fresh surface cloud") {
    const AnalyticShape shape = BulgingCapsule{0.6, 0.2, 0.1, 0.05, 0.0, 0.15};
    const double t = 0.4;
    const int resolution = 48;
    const double spacing = 2.0 / (resolution - 1);
    const auto mesh = extract_mesh(analytic_batch_field(shape, t), resolution);
    REQUIRE_FALSE(mesh.empty());

    Rng rng(13);
    const auto cloud = sample_surface(shape, t, 4000, rng);
    const auto asd = cloud_mesh_asd(cloud, mesh, 4000, 5);
    CHECK(asd.asd <= 2.0 * spacing);
}
