#include "sdf4d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sdf4d {

namespace {

constexpr double kDomainBound = 0.95;

double capsule_sdf(const Eigen::Vector3d& x, double half_length, double radius) {
    const double z = std::clamp(x.z(), -half_length, half_length);
    return (x - Eigen::Vector3d(0.0, 0.0, z)).norm() - radius;
}

double bulge_amplitude(const BulgingCapsule& shape, double t) {
    return std::max(0.0, shape.amp0 + shape.amp_rate * t + shape.amp_accel * t * t);
}

double max_bulge_amplitude(const BulgingCapsule& shape) {
    double amp = std::max(bulge_amplitude(shape, -1.0), bulge_amplitude(shape, 1.0));
    if (shape.amp_accel != 0.0) {
        const double t_vertex = -shape.amp_rate / (2.0 * shape.amp_accel);
        if (t_vertex >= -1.0 && t_vertex <= 1.0)
            amp = std::max(amp, bulge_amplitude(shape, t_vertex));
    }
    return amp;
}

double capsule_area(double half_length, double radius) {
    return 4.0 * std::numbers::pi * radius * radius +
           2.0 * std::numbers::pi * radius * 2.0 * half_length;
}

Eigen::Vector3d uniform_direction(Rng& rng) {
    while (true) {
        const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

/// Area-uniform point on a capsule surface (cylindrical side plus the two
/// hemispherical caps).
Eigen::Vector3d sample_capsule_surface(double half_length, double radius, Rng& rng) {
    const double side_area = 2.0 * std::numbers::pi * radius * 2.0 * half_length;
    const double total = side_area + 4.0 * std::numbers::pi * radius * radius;
    if (half_length > 0.0 && rng.uniform(0.0, total) < side_area) {
        const double z = rng.uniform(-half_length, half_length);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        return {radius * std::cos(phi), radius * std::sin(phi), z};
    }
    const Eigen::Vector3d dir = uniform_direction(rng);
    const double cap_z = dir.z() >= 0.0 ? half_length : -half_length;
    return Eigen::Vector3d(0.0, 0.0, cap_z) + radius * dir;
}

}  // namespace

void validate_shape(const AnalyticShape& shape) {
    const auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("AnalyticShape: ") + what);
    };
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GrowingSphere>) {
                require(std::min(s.r0 - s.rate, s.r0 + s.rate) > 0.0,
                        "sphere radius must stay positive over t in [-1,1]");
                require(std::max(s.r0 - s.rate, s.r0 + s.rate) <= kDomainBound,
                        "sphere leaves [-0.95,0.95]^3");
            } else if constexpr (std::is_same_v<T, Capsule>) {
                require(s.radius > 0.0, "capsule radius must be positive");
                require(s.half_length >= 0.0, "capsule half_length must be >= 0");
                require(s.half_length + s.radius <= kDomainBound && s.radius <= kDomainBound,
                        "capsule leaves [-0.95,0.95]^3");
            } else {
                require(s.base_radius > 0.0, "base radius must be positive");
                require(s.half_length >= 0.0 && s.bulge_half_length >= 0.0,
                        "half lengths must be >= 0");
                const double r_max = s.base_radius + max_bulge_amplitude(s);
                require(s.half_length + s.base_radius <= kDomainBound &&
                            s.bulge_half_length + r_max <= kDomainBound &&
                            r_max <= kDomainBound,
                        "bulging capsule leaves [-0.95,0.95]^3");
            }
        },
        shape);
}

double analytic_sdf(const AnalyticShape& shape, const SpaceTimePoint& p) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GrowingSphere>) {
                return p.x.norm() - (s.r0 + s.rate * p.t);
            } else if constexpr (std::is_same_v<T, Capsule>) {
                return capsule_sdf(p.x, s.half_length, s.radius);
            } else {
                const double base = capsule_sdf(p.x, s.half_length, s.base_radius);
                const double bulge = capsule_sdf(p.x, s.bulge_half_length,
                                                 s.base_radius + bulge_amplitude(s, p.t));
                return std::min(base, bulge);
            }
        },
        shape);
}

ScalarField analytic_field(const AnalyticShape& shape, double t) {
    return [shape, t](const Eigen::Vector3d& x) { return analytic_sdf(shape, {x, t}); };
}

BatchScalarField analytic_batch_field(const AnalyticShape& shape, double t) {
    return batch_from_pointwise(analytic_field(shape, t));
}

std::vector<Eigen::Vector3d> sample_surface(const AnalyticShape& shape, double t, int n,
                                            Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_surface: n must be >= 1");
    validate_shape(shape);

    std::vector<Eigen::Vector3d> points;
    points.reserve(static_cast<std::size_t>(n));

    if (const auto* sphere = std::get_if<GrowingSphere>(&shape)) {
        const double r = sphere->r0 + sphere->rate * t;
        for (int i = 0; i < n; ++i) points.push_back(r * uniform_direction(rng));
        return points;
    }
    if (const auto* capsule = std::get_if<Capsule>(&shape)) {
        for (int i = 0; i < n; ++i)
            points.push_back(sample_capsule_surface(capsule->half_length, capsule->radius, rng));
        return points;
    }

    // union of two coaxial capsules: pick a part by total area, sample it,
    // keep points strictly outside the other part; the accepted density is
    // then uniform on the visible union surface
    const auto& bulge = std::get<BulgingCapsule>(shape);
    const double r_bulge = bulge.base_radius + bulge_amplitude(bulge, t);
    struct Part {
        double half_length, radius, area;
        double other_half_length, other_radius;
    };
    Part parts[2] = {{bulge.half_length, bulge.base_radius,
                      capsule_area(bulge.half_length, bulge.base_radius),
                      bulge.bulge_half_length, r_bulge},
                     {bulge.bulge_half_length, r_bulge,
                      capsule_area(bulge.bulge_half_length, r_bulge), bulge.half_length,
                      bulge.base_radius}};

    // a part completely inside the other never yields an accepted sample;
    // detect it with a probe so its weight drops to zero instead of looping
    double weights[2];
    for (int part = 0; part < 2; ++part) {
        bool visible = false;
        for (int probe = 0; probe < 64 && !visible; ++probe) {
            const Eigen::Vector3d candidate =
                sample_capsule_surface(parts[part].half_length, parts[part].radius, rng);
            visible = capsule_sdf(candidate, parts[part].other_half_length,
                                  parts[part].other_radius) > 0.0;
        }
        weights[part] = visible ? parts[part].area : 0.0;
    }
    const double total_weight = weights[0] + weights[1];
    if (!(total_weight > 0.0))
        throw std::runtime_error("sample_surface: degenerate union surface");

    for (int i = 0; i < n; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000)
                throw std::runtime_error("sample_surface: rejection sampling stalled");
            const int part = rng.uniform(0.0, total_weight) < weights[0] ? 0 : 1;
            const Eigen::Vector3d candidate =
                sample_capsule_surface(parts[part].half_length, parts[part].radius, rng);
            if (capsule_sdf(candidate, parts[part].other_half_length,
                            parts[part].other_radius) > 0.0) {
                points.push_back(candidate);
                break;
            }
        }
    }
    return points;
}

PointCloudSequence make_sequence(const AnalyticShape& shape, std::span<const double> times_days,
                                 int n_per_scan, std::uint64_t seed,
                                 const std::string& patient_id) {
    validate_shape(shape);
    if (times_days.size() < 2) throw std::invalid_argument("make_sequence: need >= 2 scan times");
    for (std::size_t i = 1; i < times_days.size(); ++i)
        if (!(times_days[i] > times_days[i - 1]))
            throw std::invalid_argument("make_sequence: scan days must strictly increase");
    if (n_per_scan < 4) throw std::invalid_argument("make_sequence: n_per_scan must be >= 4");

    const double t_first = times_days.front();
    const double t_last = times_days.back();
    // fixed off-origin placement so downstream normalization does real work
    const Eigen::Vector3d offset_mm(104.0, 62.0, -38.0);

    PointCloudSequence seq;
    seq.patient_id = patient_id;
    Rng rng(seed);
    for (const double day : times_days) {
        const double t_norm = -1.0 + 2.0 * (day - t_first) / (t_last - t_first);
        Scan scan;
        scan.time_days = day;
        for (const auto& p : sample_surface(shape, t_norm, n_per_scan, rng))
            scan.points.push_back(kSyntheticScaleMm * p + offset_mm);
        seq.scans.push_back(std::move(scan));
    }
    return seq;
}

}  // namespace sdf4d
