#include "sdf4d/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace sdf4d {

void PointCloudSequence::validate(int min_scans) const {
    if (static_cast<int>(scans.size()) < min_scans)
        throw std::invalid_argument("PointCloudSequence: need at least " +
                                    std::to_string(min_scans) + " scans, have " +
                                    std::to_string(scans.size()));
    for (std::size_t j = 0; j < scans.size(); ++j) {
        const auto& scan = scans[j];
        if (!std::isfinite(scan.time_days))
            throw std::invalid_argument("PointCloudSequence: non-finite scan time");
        if (j > 0 && !(scan.time_days > scans[j - 1].time_days))
            throw std::invalid_argument("PointCloudSequence: scan times must strictly increase");
        if (scan.points.size() < 4)
            throw std::invalid_argument("PointCloudSequence: scan " + std::to_string(j) +
                                        " has fewer than 4 points");
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const auto& p : scan.points) {
            if (!p.allFinite())
                throw std::invalid_argument("PointCloudSequence: non-finite point in scan " +
                                            std::to_string(j));
            mean += p;
        }
        mean /= static_cast<double>(scan.points.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& p : scan.points) cov += (p - mean) * (p - mean).transpose();
        const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
        const auto& sv = svd.singularValues();
        if (!(sv(2) > 1e-12 * std::max(1.0, sv(0))))
            throw std::invalid_argument("PointCloudSequence: scan " + std::to_string(j) +
                                        " is coplanar");
    }
}

void NormalizationTransform::validate() const {
    if (!center_mm.allFinite() || !std::isfinite(scale_mm) || !std::isfinite(t0_days) ||
        !std::isfinite(time_scale_days))
        throw std::invalid_argument("NormalizationTransform: non-finite fields");
    if (!(scale_mm > 0.0)) throw std::invalid_argument("NormalizationTransform: scale_mm must be > 0");
    if (!(time_scale_days > 0.0))
        throw std::invalid_argument("NormalizationTransform: time_scale_days must be > 0");
}

NormalizedSequence normalize_sequence(const PointCloudSequence& seq, double padding) {
    seq.validate(1);
    if (!(padding > 0.0 && padding <= 1.0))
        throw std::invalid_argument("normalize_sequence: padding must lie in (0, 1]");

    Eigen::Vector3d lo = seq.scans[0].points[0];
    Eigen::Vector3d hi = lo;
    for (const auto& scan : seq.scans)
        for (const auto& p : scan.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    const double half_extent = ((hi - lo) / 2.0).maxCoeff();
    if (!(half_extent > 0.0))
        throw std::invalid_argument("normalize_sequence: degenerate spatial extent");

    NormalizedSequence out;
    out.transform.center_mm = (lo + hi) / 2.0;
    out.transform.scale_mm = half_extent / padding;
    if (seq.scans.size() >= 2) {
        const double t_first = seq.scans.front().time_days;
        const double t_last = seq.scans.back().time_days;
        out.transform.t0_days = (t_first + t_last) / 2.0;
        out.transform.time_scale_days = (t_last - t_first) / 2.0;
    } else {
        out.transform.t0_days = seq.scans.front().time_days;
        out.transform.time_scale_days = 1.0;
        out.single_scan_time = true;
    }
    out.transform.validate();

    out.sequence.patient_id = seq.patient_id;
    out.sequence.scans.reserve(seq.scans.size());
    for (const auto& scan : seq.scans) {
        Scan mapped;
        mapped.time_days = out.transform.time_to_normalized(scan.time_days);
        mapped.points.reserve(scan.points.size());
        for (const auto& p : scan.points) mapped.points.push_back(out.transform.to_normalized(p));
        out.sequence.scans.push_back(std::move(mapped));
    }
    return out;
}

double physical_distance(double d_normalized, const NormalizationTransform& tr) {
    tr.validate();
    return d_normalized * tr.scale_mm;
}

void RigidTransform::validate() const {
    if (!rotation.allFinite() || !translation.allFinite())
        throw std::invalid_argument("RigidTransform: non-finite fields");
    if (((rotation.transpose() * rotation) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
        1e-9)
        throw std::invalid_argument("RigidTransform: rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw std::invalid_argument("RigidTransform: rotation has a reflection");
}

RigidTransform kabsch_align(std::span<const Eigen::Vector3d> source,
                            std::span<const Eigen::Vector3d> target) {
    if (source.size() != target.size())
        throw std::invalid_argument("kabsch_align: source/target size mismatch");
    if (source.size() < 3)
        throw std::invalid_argument("kabsch_align: need at least 3 correspondences");

    Eigen::Vector3d source_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d target_mean = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (!source[i].allFinite() || !target[i].allFinite())
            throw std::invalid_argument("kabsch_align: non-finite landmark");
        source_mean += source[i];
        target_mean += target[i];
    }
    source_mean /= static_cast<double>(source.size());
    target_mean /= static_cast<double>(source.size());

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i)
        cross += (source[i] - source_mean) * (target[i] - target_mean).transpose();

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross,
                                                Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // collinear landmark sets leave the rotation about the common axis free
    if (!(sv(1) > 1e-12 * std::max(1.0, sv(0))))
        throw std::invalid_argument("kabsch_align: degenerate (collinear) landmark set");

    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d correction(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);

    RigidTransform tr;
    tr.rotation = v * correction.asDiagonal() * u.transpose();
    tr.translation = target_mean - tr.rotation * source_mean;
    tr.validate();
    return tr;
}

double TriangleMesh::triangle_area(int index) const {
    const auto& t = triangles.at(static_cast<std::size_t>(index));
    const Eigen::Vector3d& a = vertices[static_cast<std::size_t>(t[0])];
    const Eigen::Vector3d& b = vertices[static_cast<std::size_t>(t[1])];
    const Eigen::Vector3d& c = vertices[static_cast<std::size_t>(t[2])];
    return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::total_area() const {
    double area = 0.0;
    for (int i = 0; i < static_cast<int>(triangles.size()); ++i) area += triangle_area(i);
    return area;
}

bool TriangleMesh::is_watertight() const {
    if (triangles.empty()) return false;
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = t[static_cast<std::size_t>(e)];
            int b = t[static_cast<std::size_t>((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
    }
    for (const auto& [edge, count] : edge_count)
        if (count != 2) return false;
    return true;
}

double TriangleMesh::signed_volume() const {
    double volume = 0.0;
    for (const auto& t : triangles) {
        const Eigen::Vector3d& a = vertices[static_cast<std::size_t>(t[0])];
        const Eigen::Vector3d& b = vertices[static_cast<std::size_t>(t[1])];
        const Eigen::Vector3d& c = vertices[static_cast<std::size_t>(t[2])];
        volume += a.dot(b.cross(c));
    }
    return volume / 6.0;
}

BatchScalarField batch_from_pointwise(ScalarField field) {
    return [field = std::move(field)](std::span<const Eigen::Vector3d> points,
                                      std::span<double> out) {
        for (std::size_t i = 0; i < points.size(); ++i) out[i] = field(points[i]);
    };
}

namespace {

void append_number(std::string& line, double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    line += buffer;
}

}  // namespace

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_obj: cannot open " + path.string());
    std::string line;
    for (const auto& v : mesh.vertices) {
        line = "v";
        for (int k = 0; k < 3; ++k) {
            line += ' ';
            append_number(line, v[k]);
        }
        line += '\n';
        out << line;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw std::runtime_error("write_obj: write failed for " + path.string());
}

void write_diameter_csv(const std::filesystem::path& path, const DiameterProfile& profile) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_diameter_csv: cannot open " + path.string());
    out << "arclength_mm,cx,cy,cz,diameter_mm\n";
    std::string line;
    for (const auto& s : profile.stations) {
        line.clear();
        append_number(line, s.arclength_mm);
        for (int k = 0; k < 3; ++k) {
            line += ',';
            append_number(line, s.center_mm[k]);
        }
        line += ',';
        append_number(line, s.diameter_mm);
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write_diameter_csv: write failed for " + path.string());
}

void write_asd_samples_csv(const std::filesystem::path& path, const AsdResult& result) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_asd_samples_csv: cannot open " + path.string());
    out << "direction,x,y,z,distance\n";
    std::string line;
    auto dump = [&](const char* direction, const std::vector<SurfaceSample>& samples) {
        for (const auto& s : samples) {
            line = direction;
            for (int k = 0; k < 3; ++k) {
                line += ',';
                append_number(line, s.point[k]);
            }
            line += ',';
            append_number(line, s.distance);
            line += '\n';
            out << line;
        }
    };
    dump("a_to_b", result.samples_a_to_b);
    dump("b_to_a", result.samples_b_to_a);
    if (!out)
        throw std::runtime_error("write_asd_samples_csv: write failed for " + path.string());
}

}  // namespace sdf4d
