#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "sdf4d/common.hpp"
#include "sdf4d/geometry.hpp"
#include "sdf4d/mlp.hpp"

namespace sdf4d {

/// Physical scale used when synthetic shapes are exported as point clouds:
/// one normalized unit corresponds to 50 mm, so reported millimeter metrics
/// land in an anatomically plausible range.
inline constexpr double kSyntheticScaleMm = 50.0;

/// Sphere centered at the origin with radius r(t) = r0 + rate * t.
struct GrowingSphere {
    double r0 = 0.5;
    double rate = 0.1;
};

/// Capsule along the z-axis centered at the origin (segment half-length plus
/// tube radius), constant in time.
struct Capsule {
    double half_length = 0.5;
    double radius = 0.3;
};

/// Capsule with a coaxial dilatation: the union with a second capsule of
/// axial half-length bulge_half_length and radius base_radius + amplitude(t),
/// amplitude(t) = amp0 + amp_rate * t + amp_accel * t^2 (clamped at 0).
/// bulge_half_length == 0 degenerates the dilatation to a sphere.
struct BulgingCapsule {
    double half_length = 0.6;
    double base_radius = 0.2;
    double amp0 = 0.1;
    double amp_rate = 0.05;
    double amp_accel = 0.0;
    double bulge_half_length = 0.0;
};

using AnalyticShape = std::variant<GrowingSphere, Capsule, BulgingCapsule>;

/// Checks radii stay positive and the surface stays inside [-0.95, 0.95]^3
/// for every t in [-1, 1].
void validate_shape(const AnalyticShape& shape);

/// Exact signed distance of the shape at a space-time point (negative inside,
/// zero on the surface; exact almost everywhere for the union shape).
double analytic_sdf(const AnalyticShape& shape, const SpaceTimePoint& p);

ScalarField analytic_field(const AnalyticShape& shape, double t);
BatchScalarField analytic_batch_field(const AnalyticShape& shape, double t);

/// n area-uniform points on the shape's surface at time t; every returned
/// point satisfies |analytic_sdf| <= 1e-9.
std::vector<Eigen::Vector3d> sample_surface(const AnalyticShape& shape, double t, int n,
                                            Rng& rng);

/// Physical-unit point cloud sequence of the shape sampled at the given scan
/// days (first day maps to t = -1, last to t = +1), at kSyntheticScaleMm and
/// a fixed off-origin placement so normalization is exercised for real.
PointCloudSequence make_sequence(const AnalyticShape& shape, std::span<const double> times_days,
                                 int n_per_scan, std::uint64_t seed,
                                 const std::string& patient_id = "synthetic");

}  // namespace sdf4d
