#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sdf4d {

struct Scan {
    double time_days = 0.0;
    std::vector<Eigen::Vector3d> points;  // mm
};

/// Time-stamped surface point clouds of one patient, in physical units.
struct PointCloudSequence {
    std::string patient_id;
    std::vector<Scan> scans;

    /// Times strictly increasing, every scan with >= 4 non-coplanar finite
    /// points; min_scans == 2 is the fitting requirement, normalization
    /// accepts 1.
    void validate(int min_scans = 2) const;
};

/// Affine map between physical (mm, days) and normalized coordinates:
///   x_norm = (x_mm - center_mm) / scale_mm,  t_norm = (t_days - t0_days) / time_scale_days
/// The spatial scale is one isotropic factor, so normalized distances convert
/// to millimeters with a single multiplication.
struct NormalizationTransform {
    Eigen::Vector3d center_mm = Eigen::Vector3d::Zero();
    double scale_mm = 1.0;
    double t0_days = 0.0;
    double time_scale_days = 1.0;

    void validate() const;

    Eigen::Vector3d to_normalized(const Eigen::Vector3d& p_mm) const {
        return (p_mm - center_mm) / scale_mm;
    }
    Eigen::Vector3d to_mm(const Eigen::Vector3d& p_norm) const {
        return p_norm * scale_mm + center_mm;
    }
    double time_to_normalized(double days) const { return (days - t0_days) / time_scale_days; }
    double time_to_days(double t_norm) const { return t_norm * time_scale_days + t0_days; }
};

struct NormalizedSequence {
    PointCloudSequence sequence;  // coordinates in normalized units, times in normalized units
    NormalizationTransform transform;
    /// Set when the sequence had a single scan: its time maps to 0 with a
    /// 1-day time scale.
    bool single_scan_time = false;
};

/// Jointly normalize all scans into [-padding, padding]^3; time maps affinely
/// so the first scan lands at -1 and the last at +1. The normalized
/// sequence's Scan::time_days fields hold normalized times.
NormalizedSequence normalize_sequence(const PointCloudSequence& seq, double padding = 0.9);

/// Convert a distance measured in normalized units to millimeters.
double physical_distance(double d_normalized, const NormalizationTransform& tr);

/// Proper rigid motion p -> rotation * p + translation (mm).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    void validate() const;
    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

/// Least-squares rigid alignment of source onto target over index-paired
/// landmarks (SVD of the cross-covariance with reflection correction).
RigidTransform kabsch_align(std::span<const Eigen::Vector3d> source,
                            std::span<const Eigen::Vector3d> target);

struct TriangleMesh {
    enum class Units { normalized, mm };

    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    Units units = Units::normalized;

    bool empty() const { return triangles.empty(); }
    double triangle_area(int index) const;
    double total_area() const;
    /// True when every edge is shared by exactly two triangles.
    bool is_watertight() const;
    /// Volume enclosed by the (closed, outward-oriented) surface.
    double signed_volume() const;
};

/// Scalar field sampled one point at a time.
using ScalarField = std::function<double(const Eigen::Vector3d&)>;
/// Scalar field evaluated over blocks of points (out[i] = field(points[i])).
using BatchScalarField =
    std::function<void(std::span<const Eigen::Vector3d>, std::span<double>)>;

BatchScalarField batch_from_pointwise(ScalarField field);

/// Marching cubes over a regular resolution^3 sample grid on [-1,1]^3.
/// resolution counts samples per axis (grid spacing 2/(resolution-1)).
/// Ambiguous cases are resolved by the fixed classic 256-case table; grid
/// values within 1e-12 of the iso level are nudged to the positive side so
/// no degenerate triangle is ever emitted. Vertices on shared edges are
/// emitted once, so closed level sets away from the domain boundary produce
/// watertight meshes.
TriangleMesh extract_mesh(const BatchScalarField& field, int resolution, double iso = 0.0);

/// Exact minimum distance from a point to a triangle (face, edge, and vertex
/// regions all handled).
double point_to_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                  const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// Exact minimum distance from p to the mesh surface by scanning every
/// triangle. Reference implementation; use MeshDistanceQuery for bulk work.
double point_to_mesh_distance(const Eigen::Vector3d& p, const TriangleMesh& mesh);

/// BVH-accelerated point-to-mesh distance; identical in value to
/// point_to_mesh_distance.
class MeshDistanceQuery {
public:
    explicit MeshDistanceQuery(const TriangleMesh& mesh);
    ~MeshDistanceQuery();
    MeshDistanceQuery(MeshDistanceQuery&&) noexcept;
    MeshDistanceQuery& operator=(MeshDistanceQuery&&) noexcept;

    double distance(const Eigen::Vector3d& p) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SurfaceSample {
    Eigen::Vector3d point;
    double distance;
};

struct AsdResult {
    double asd = 0.0;           // mean of the two directed means
    double mean_a_to_b = 0.0;
    double mean_b_to_a = 0.0;
    std::vector<SurfaceSample> samples_a_to_b;
    std::vector<SurfaceSample> samples_b_to_a;
};

/// Symmetric average surface distance: n_samples area-uniform points on each
/// mesh, averaged closest distances to the other mesh. Both directions draw
/// from the same seed, so the result is exactly argument-order independent.
AsdResult average_surface_distance(const TriangleMesh& a, const TriangleMesh& b, int n_samples,
                                   std::uint64_t seed);

/// Average surface distance against a point-cloud reference: every cloud
/// point's distance to the mesh, plus n_mesh_samples area-uniform mesh
/// samples' distances to their nearest cloud point; asd averages the two
/// directed means (a = cloud, b = mesh in the result fields).
AsdResult cloud_mesh_asd(std::span<const Eigen::Vector3d> cloud, const TriangleMesh& mesh,
                         int n_mesh_samples, std::uint64_t seed);

struct CenterlineOptions {
    int grid_resolution = 64;    // interior scan grid
    int max_iterations = 100;    // in-plane refinement budget per station
    double step_tolerance = 1e-4;
    /// Half-extent of the interior scan. Learned fields are only trustworthy
    /// where training data lived, so the scan stays inside the padded domain.
    double interior_bound = 0.95;
};

struct Centerline {
    std::vector<Eigen::Vector3d> centers;   // refined station centers
    std::vector<double> offsets;            // axial offset of each kept station
    std::vector<int> skipped_stations;      // stations whose slab had no interior
};

/// Stations at n_stations equispaced axial offsets between the level set's
/// axial extremes. Each center starts at the centroid of interior grid points
/// in the station slab, then descends the SDF restricted to the station plane
/// toward the locally deepest point (the inscribed-sphere center).
Centerline centerline(const BatchScalarField& sdf, const Eigen::Vector3d& axis, int n_stations,
                      const CenterlineOptions& options = {});

struct DiameterStation {
    double arclength_mm = 0.0;
    Eigen::Vector3d center_mm = Eigen::Vector3d::Zero();
    double diameter_mm = 0.0;
};

struct DiameterProfile {
    std::vector<DiameterStation> stations;
    std::vector<int> skipped_stations;
};

/// Inscribed-sphere diameters along the centerline: at each refined center c
/// the diameter is 2|sdf(c)| converted to millimeters, reported against
/// cumulative centerline arclength in millimeters.
DiameterProfile diameter_profile(const BatchScalarField& sdf, const Eigen::Vector3d& axis,
                                 int n_stations, const NormalizationTransform& tr,
                                 const CenterlineOptions& options = {});

/// Inscribed-sphere diameter profile of a closed surface given only a dense
/// point cloud of it: slab centroids along the axis refined in-plane to
/// maximize clearance to the cloud; diameter = 2 * clearance (a slight
/// underestimate, since the nearest sample is at most as far as the surface).
/// Units follow the cloud's units; the arclength/center fields reuse the mm
/// naming.
DiameterProfile cloud_diameter_profile(std::span<const Eigen::Vector3d> cloud,
                                       const Eigen::Vector3d& axis, int n_stations = 32);

/// Largest diameter of cloud_diameter_profile.
double cloud_max_inscribed_diameter(std::span<const Eigen::Vector3d> cloud,
                                    const Eigen::Vector3d& axis, int n_stations = 32);

// --- file formats ---

/// ASCII OBJ: `v x y z` then 1-based `f i j k` lines.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// CSV with header `arclength_mm,cx,cy,cz,diameter_mm`.
void write_diameter_csv(const std::filesystem::path& path, const DiameterProfile& profile);

/// CSV with header `direction,x,y,z,distance`; direction is a_to_b / b_to_a.
void write_asd_samples_csv(const std::filesystem::path& path, const AsdResult& result);

}  // namespace sdf4d
