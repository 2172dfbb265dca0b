#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sdf4d/common.hpp"
#include "sdf4d/geometry.hpp"

namespace sdf4d {

// closest point on a triangle via the Voronoi-region case analysis
// (Ericson, "Real-Time Collision Detection", 5.1.5)
double point_to_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                  const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;
    const Eigen::Vector3d ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return (p - (a + v * ab + w * ac)).norm();
}

double point_to_mesh_distance(const Eigen::Vector3d& p, const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) throw std::invalid_argument("point_to_mesh_distance: empty mesh");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : mesh.triangles) {
        const double d = point_to_triangle_distance(
            p, mesh.vertices[static_cast<std::size_t>(t[0])],
            mesh.vertices[static_cast<std::size_t>(t[1])],
            mesh.vertices[static_cast<std::size_t>(t[2])]);
        best = std::min(best, d);
    }
    return best;
}

namespace {

struct Aabb {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Eigen::Vector3d& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double distance(const Eigen::Vector3d& p) const {
        const Eigen::Vector3d d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
        return d.norm();
    }
};

struct BvhNode {
    Aabb box;
    int left = -1;   // internal when >= 0
    int right = -1;
    int begin = 0;   // leaf triangle range in `order`
    int end = 0;
};

constexpr int kLeafSize = 8;

}  // namespace

struct MeshDistanceQuery::Impl {
    const TriangleMesh* mesh;
    std::vector<int> order;
    std::vector<BvhNode> nodes;

    Aabb triangle_box(int t) const {
        Aabb box;
        for (int v : mesh->triangles[static_cast<std::size_t>(t)])
            box.grow(mesh->vertices[static_cast<std::size_t>(v)]);
        return box;
    }

    Eigen::Vector3d centroid(int t) const {
        const auto& tri = mesh->triangles[static_cast<std::size_t>(t)];
        return (mesh->vertices[static_cast<std::size_t>(tri[0])] +
                mesh->vertices[static_cast<std::size_t>(tri[1])] +
                mesh->vertices[static_cast<std::size_t>(tri[2])]) /
               3.0;
    }

    int build(int begin, int end) {
        BvhNode node;
        for (int i = begin; i < end; ++i) {
            const Aabb box = triangle_box(order[static_cast<std::size_t>(i)]);
            node.box.grow(box.lo);
            node.box.grow(box.hi);
        }
        const int index = static_cast<int>(nodes.size());
        nodes.push_back(node);
        if (end - begin <= kLeafSize) {
            nodes[static_cast<std::size_t>(index)].begin = begin;
            nodes[static_cast<std::size_t>(index)].end = end;
            return index;
        }
        int axis = 0;
        (node.box.hi - node.box.lo).maxCoeff(&axis);
        const int mid = (begin + end) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                         [&](int lhs, int rhs) { return centroid(lhs)[axis] < centroid(rhs)[axis]; });
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    double query(const Eigen::Vector3d& p) const {
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> stack{0};
        while (!stack.empty()) {
            const int at = stack.back();
            stack.pop_back();
            const BvhNode& node = nodes[static_cast<std::size_t>(at)];
            if (node.box.distance(p) >= best) continue;
            if (node.left < 0) {
                for (int i = node.begin; i < node.end; ++i) {
                    const auto& t =
                        mesh->triangles[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                    const double d = point_to_triangle_distance(
                        p, mesh->vertices[static_cast<std::size_t>(t[0])],
                        mesh->vertices[static_cast<std::size_t>(t[1])],
                        mesh->vertices[static_cast<std::size_t>(t[2])]);
                    best = std::min(best, d);
                }
                continue;
            }
            // visit the nearer child first for tighter pruning
            const double dl = nodes[static_cast<std::size_t>(node.left)].box.distance(p);
            const double dr = nodes[static_cast<std::size_t>(node.right)].box.distance(p);
            if (dl <= dr) {
                if (dr < best) stack.push_back(node.right);
                if (dl < best) stack.push_back(node.left);
            } else {
                if (dl < best) stack.push_back(node.left);
                if (dr < best) stack.push_back(node.right);
            }
        }
        return best;
    }
};

MeshDistanceQuery::MeshDistanceQuery(const TriangleMesh& mesh) : impl_(new Impl) {
    if (mesh.triangles.empty()) throw std::invalid_argument("MeshDistanceQuery: empty mesh");
    impl_->mesh = &mesh;
    impl_->order.resize(mesh.triangles.size());
    std::iota(impl_->order.begin(), impl_->order.end(), 0);
    impl_->nodes.reserve(2 * mesh.triangles.size() / kLeafSize + 2);
    impl_->build(0, static_cast<int>(mesh.triangles.size()));
}

MeshDistanceQuery::~MeshDistanceQuery() = default;
MeshDistanceQuery::MeshDistanceQuery(MeshDistanceQuery&&) noexcept = default;
MeshDistanceQuery& MeshDistanceQuery::operator=(MeshDistanceQuery&&) noexcept = default;

double MeshDistanceQuery::distance(const Eigen::Vector3d& p) const { return impl_->query(p); }

namespace mesh_sampling {

/// n area-uniform samples on the mesh surface, deterministic per seed.
std::vector<Eigen::Vector3d> sample_surface_points(const TriangleMesh& mesh, int n,
                                                   std::uint64_t seed) {
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        total += mesh.triangle_area(static_cast<int>(t));
        cumulative[t] = total;
    }
    if (!(total > 0.0))
        throw std::invalid_argument("average_surface_distance: mesh has zero area");

    Rng rng(seed);
    std::vector<Eigen::Vector3d> points;
    points.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform(0.0, total);
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        const std::size_t t = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                       mesh.triangles.size() - 1);
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        points.push_back((1.0 - su) * a + su * (1.0 - v) * b + su * v * c);
    }
    return points;
}

}  // namespace mesh_sampling

AsdResult average_surface_distance(const TriangleMesh& a, const TriangleMesh& b, int n_samples,
                                   std::uint64_t seed) {
    if (a.triangles.empty() || b.triangles.empty())
        throw std::invalid_argument("average_surface_distance: empty mesh");
    if (n_samples < 1)
        throw std::invalid_argument("average_surface_distance: n_samples must be >= 1");

    AsdResult result;
    auto directed = [&](const TriangleMesh& from, const TriangleMesh& to,
                        std::vector<SurfaceSample>& samples) {
        const auto points = mesh_sampling::sample_surface_points(from, n_samples, seed);
        const MeshDistanceQuery query(to);
        samples.resize(points.size());
        parallel_stripes(points.size(), [&](int, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                samples[i] = {points[i], query.distance(points[i])};
        });
        double sum = 0.0;
        for (const auto& s : samples) sum += s.distance;
        return sum / static_cast<double>(points.size());
    };
    // both directions draw with the same seed, so swapping the arguments
    // swaps the directed means and leaves the symmetric mean unchanged
    result.mean_a_to_b = directed(a, b, result.samples_a_to_b);
    result.mean_b_to_a = directed(b, a, result.samples_b_to_a);
    result.asd = (result.mean_a_to_b + result.mean_b_to_a) / 2.0;
    return result;
}

AsdResult cloud_mesh_asd(std::span<const Eigen::Vector3d> cloud, const TriangleMesh& mesh,
                         int n_mesh_samples, std::uint64_t seed) {
    if (cloud.empty()) throw std::invalid_argument("cloud_mesh_asd: empty cloud");
    if (mesh.triangles.empty()) throw std::invalid_argument("cloud_mesh_asd: empty mesh");
    if (n_mesh_samples < 1)
        throw std::invalid_argument("cloud_mesh_asd: n_mesh_samples must be >= 1");

    AsdResult result;

    const MeshDistanceQuery query(mesh);
    result.samples_a_to_b.resize(cloud.size());
    parallel_stripes(cloud.size(), [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            result.samples_a_to_b[i] = {cloud[i], query.distance(cloud[i])};
    });
    double sum = 0.0;
    for (const auto& s : result.samples_a_to_b) sum += s.distance;
    result.mean_a_to_b = sum / static_cast<double>(cloud.size());

    const auto mesh_points = mesh_sampling::sample_surface_points(mesh, n_mesh_samples, seed);
    result.samples_b_to_a.resize(mesh_points.size());
    parallel_stripes(mesh_points.size(), [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : cloud) best = std::min(best, (mesh_points[i] - c).squaredNorm());
            result.samples_b_to_a[i] = {mesh_points[i], std::sqrt(best)};
        }
    });
    sum = 0.0;
    for (const auto& s : result.samples_b_to_a) sum += s.distance;
    result.mean_b_to_a = sum / static_cast<double>(mesh_points.size());

    result.asd = (result.mean_a_to_b + result.mean_b_to_a) / 2.0;
    return result;
}

}  // namespace sdf4d
