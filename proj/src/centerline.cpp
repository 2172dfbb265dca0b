#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdf4d/geometry.hpp"

namespace sdf4d {

namespace {

/// Orthonormal in-plane basis for a unit axis.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& axis) {
    Eigen::Vector3d helper = std::abs(axis.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                                      : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d u = axis.cross(helper).normalized();
    const Eigen::Vector3d w = axis.cross(u).normalized();
    return {u, w};
}

/// Compass search in the station plane: move c toward smaller objective,
/// halving the step when no in-plane neighbor improves, until the step drops
/// below tolerance or the iteration budget runs out. Candidates farther than
/// trust_radius from the start are rejected (pass infinity to disable).
Eigen::Vector3d refine_in_plane(const std::function<double(const Eigen::Vector3d&)>& objective,
                                Eigen::Vector3d c, const Eigen::Vector3d& u,
                                const Eigen::Vector3d& w, double initial_step,
                                const CenterlineOptions& options,
                                double trust_radius = std::numeric_limits<double>::infinity()) {
    const Eigen::Vector3d start = c;
    double h = initial_step;
    double fc = objective(c);
    const Eigen::Vector3d directions[4] = {u, -u, w, -w};
    for (int it = 0; it < options.max_iterations && h >= options.step_tolerance; ++it) {
        bool moved = false;
        for (const Eigen::Vector3d& dir : directions) {
            const Eigen::Vector3d candidate = c + h * dir;
            if ((candidate - start).norm() > trust_radius) continue;
            const double fcand = objective(candidate);
            if (fcand < fc) {
                c = candidate;
                fc = fcand;
                moved = true;
                break;
            }
        }
        if (!moved) h /= 2.0;
    }
    return c;
}

}  // namespace

Centerline centerline(const BatchScalarField& sdf, const Eigen::Vector3d& axis, int n_stations,
                      const CenterlineOptions& options) {
    if (n_stations < 1) throw std::invalid_argument("centerline: n_stations must be >= 1");
    if (!(axis.norm() > 0.0)) throw std::invalid_argument("centerline: zero axis");
    if (options.grid_resolution < 4)
        throw std::invalid_argument("centerline: grid_resolution must be >= 4");
    const Eigen::Vector3d n_axis = axis.normalized();

    // interior scan over a regular grid of the (padded) domain
    const int res = options.grid_resolution;
    const double bound = options.interior_bound;
    const double grid_h = 2.0 * bound / (res - 1);
    std::vector<Eigen::Vector3d> grid;
    grid.reserve(static_cast<std::size_t>(res) * res * res);
    for (int k = 0; k < res; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i)
                grid.emplace_back(-bound + grid_h * i, -bound + grid_h * j,
                                  -bound + grid_h * k);
    std::vector<double> values(grid.size());
    sdf(grid, values);

    // keep the largest 6-connected negative component: the represented shape
    // is one closed surface, and learned fields can carry spurious negative
    // pockets elsewhere
    const auto cell = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(k) * res + j) * res + i;
    };
    std::vector<int> component(grid.size(), -1);
    std::vector<std::size_t> component_size;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < grid.size(); ++seed) {
        if (values[seed] >= 0.0 || component[seed] >= 0) continue;
        const int id = static_cast<int>(component_size.size());
        std::size_t size = 0;
        stack.assign(1, seed);
        component[seed] = id;
        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            ++size;
            const int i = static_cast<int>(at % res);
            const int j = static_cast<int>(at / res % res);
            const int k = static_cast<int>(at / res / res);
            const int neighbors[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                         {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
            for (const auto& n : neighbors) {
                if (n[0] < 0 || n[0] >= res || n[1] < 0 || n[1] >= res || n[2] < 0 ||
                    n[2] >= res)
                    continue;
                const std::size_t index = cell(n[0], n[1], n[2]);
                if (values[index] < 0.0 && component[index] < 0) {
                    component[index] = id;
                    stack.push_back(index);
                }
            }
        }
        component_size.push_back(size);
    }
    if (component_size.empty())
        throw std::runtime_error("centerline: level set has no interior in the domain");
    const int keep = static_cast<int>(
        std::max_element(component_size.begin(), component_size.end()) -
        component_size.begin());

    std::vector<Eigen::Vector3d> interior;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (component[i] == keep) interior.push_back(grid[i]);

    double s_min = interior[0].dot(n_axis);
    double s_max = s_min;
    for (const auto& p : interior) {
        const double s = p.dot(n_axis);
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
    }

    const double span = s_max - s_min;
    const double station_spacing = n_stations > 1 ? span / (n_stations - 1) : span;
    const double slab_half = std::max(station_spacing, grid_h) / 2.0;
    const auto [u, w] = plane_basis(n_axis);

    auto pointwise = [&sdf](const Eigen::Vector3d& p) {
        double value = 0.0;
        sdf(std::span<const Eigen::Vector3d>(&p, 1), std::span<double>(&value, 1));
        return value;
    };

    Centerline line;
    for (int station = 0; station < n_stations; ++station) {
        const double s = n_stations > 1 ? s_min + station_spacing * station
                                        : (s_min + s_max) / 2.0;
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        std::size_t count = 0;
        for (const auto& p : interior) {
            if (std::abs(p.dot(n_axis) - s) <= slab_half) {
                centroid += p;
                ++count;
            }
        }
        if (count == 0) {
            line.skipped_stations.push_back(station);
            continue;
        }
        centroid /= static_cast<double>(count);
        // pin the start to the exact station plane
        centroid += (s - centroid.dot(n_axis)) * n_axis;

        // the inscribed center stays within the slab's interior footprint
        double trust_radius = grid_h;
        for (const auto& p : interior)
            if (std::abs(p.dot(n_axis) - s) <= slab_half)
                trust_radius = std::max(trust_radius, (p - centroid).norm() + grid_h);

        const Eigen::Vector3d refined =
            refine_in_plane(pointwise, centroid, u, w,
                            std::max(grid_h, 4.0 * options.step_tolerance), options,
                            trust_radius);
        line.centers.push_back(refined);
        line.offsets.push_back(s);
    }
    return line;
}

DiameterProfile diameter_profile(const BatchScalarField& sdf, const Eigen::Vector3d& axis,
                                 int n_stations, const NormalizationTransform& tr,
                                 const CenterlineOptions& options) {
    tr.validate();
    const Centerline line = centerline(sdf, axis, n_stations, options);

    auto pointwise = [&sdf](const Eigen::Vector3d& p) {
        double value = 0.0;
        sdf(std::span<const Eigen::Vector3d>(&p, 1), std::span<double>(&value, 1));
        return value;
    };

    DiameterProfile profile;
    profile.skipped_stations = line.skipped_stations;
    double arclength_mm = 0.0;
    for (std::size_t i = 0; i < line.centers.size(); ++i) {
        if (i > 0)
            arclength_mm +=
                physical_distance((line.centers[i] - line.centers[i - 1]).norm(), tr);
        DiameterStation station;
        station.arclength_mm = arclength_mm;
        station.center_mm = tr.to_mm(line.centers[i]);
        station.diameter_mm = physical_distance(2.0 * std::abs(pointwise(line.centers[i])), tr);
        profile.stations.push_back(station);
    }
    return profile;
}

DiameterProfile cloud_diameter_profile(std::span<const Eigen::Vector3d> cloud,
                                       const Eigen::Vector3d& axis, int n_stations) {
    if (cloud.size() < 4)
        throw std::invalid_argument("cloud_diameter_profile: need at least 4 points");
    if (n_stations < 1)
        throw std::invalid_argument("cloud_diameter_profile: n_stations must be >= 1");
    const Eigen::Vector3d n_axis = axis.normalized();
    const auto [u, w] = plane_basis(n_axis);

    double s_min = cloud[0].dot(n_axis);
    double s_max = s_min;
    for (const auto& p : cloud) {
        const double s = p.dot(n_axis);
        s_min = std::min(s_min, s);
        s_max = std::max(s_max, s);
    }
    const double span = s_max - s_min;
    if (!(span > 0.0))
        throw std::invalid_argument("cloud_diameter_profile: cloud has no axial extent");
    const double station_spacing = n_stations > 1 ? span / (n_stations - 1) : span;
    const double slab_half = std::max(station_spacing, span / 16.0) / 2.0;

    auto clearance = [&](const Eigen::Vector3d& c) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : cloud) best = std::min(best, (p - c).squaredNorm());
        return std::sqrt(best);
    };

    CenterlineOptions options;
    options.step_tolerance = 1e-4 * std::max(1.0, span);

    DiameterProfile profile;
    double arclength = 0.0;
    const Eigen::Vector3d* previous = nullptr;
    for (int station = 0; station < n_stations; ++station) {
        const double s = n_stations > 1 ? s_min + station_spacing * station
                                        : (s_min + s_max) / 2.0;
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        std::size_t count = 0;
        for (const auto& p : cloud) {
            if (std::abs(p.dot(n_axis) - s) <= slab_half) {
                centroid += p;
                ++count;
            }
        }
        if (count < 3) {
            profile.skipped_stations.push_back(station);
            continue;
        }
        centroid /= static_cast<double>(count);
        centroid += (s - centroid.dot(n_axis)) * n_axis;

        // the inscribed center of a closed shape stays within the slab's own
        // footprint; bounding the search there keeps clearance maximization
        // from escaping through slabs that barely graze the surface
        double trust_radius = 0.0;
        for (const auto& p : cloud)
            if (std::abs(p.dot(n_axis) - s) <= slab_half)
                trust_radius = std::max(trust_radius, (p - centroid).norm());

        const Eigen::Vector3d refined = refine_in_plane(
            [&](const Eigen::Vector3d& c) { return -clearance(c); }, centroid, u, w,
            slab_half, options, trust_radius);

        DiameterStation entry;
        if (previous) arclength += (refined - *previous).norm();
        entry.arclength_mm = arclength;
        entry.center_mm = refined;
        entry.diameter_mm = 2.0 * clearance(refined);
        profile.stations.push_back(entry);
        previous = &profile.stations.back().center_mm;
    }
    return profile;
}

double cloud_max_inscribed_diameter(std::span<const Eigen::Vector3d> cloud,
                                    const Eigen::Vector3d& axis, int n_stations) {
    const DiameterProfile profile = cloud_diameter_profile(cloud, axis, n_stations);
    double best = 0.0;
    for (const auto& s : profile.stations) best = std::max(best, s.diameter_mm);
    return best;
}

}  // namespace sdf4d
