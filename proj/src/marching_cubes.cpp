#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "mc_tables.hpp"
#include "sdf4d/geometry.hpp"

namespace sdf4d {

namespace {

// corner offsets (Bourke layout): 0..3 ring the z=k face, 4..7 the z=k+1 face
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

TriangleMesh extract_mesh(const BatchScalarField& field, int resolution, double iso) {
    if (resolution < 8) throw std::invalid_argument("extract_mesh: resolution must be >= 8");
    const int res = resolution;
    const double spacing = 2.0 / (res - 1);
    auto coord = [&](int i) { return -1.0 + spacing * i; };
    auto value_index = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(k) * res + j) * res + i;
    };

    // sample the field one z-slab at a time; values within 1e-12 of the iso
    // level are nudged to the positive side so every crossing is strict
    std::vector<double> values(static_cast<std::size_t>(res) * res * res);
    {
        std::vector<Eigen::Vector3d> slab(static_cast<std::size_t>(res) * res);
        std::vector<double> slab_values(slab.size());
        for (int k = 0; k < res; ++k) {
            std::size_t at = 0;
            for (int j = 0; j < res; ++j)
                for (int i = 0; i < res; ++i) slab[at++] = {coord(i), coord(j), coord(k)};
            field(slab, slab_values);
            for (std::size_t s = 0; s < slab_values.size(); ++s) {
                double d = slab_values[s] - iso;
                if (!std::isfinite(d))
                    throw std::domain_error("extract_mesh: field is non-finite on the grid");
                if (std::abs(d) < 1e-12) d = 1e-12;
                values[value_index(0, 0, k) + s] = d;
            }
        }
    }

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    edge_vertex.reserve(static_cast<std::size_t>(res) * res);

    // canonical key of a cube edge: its lower grid corner plus the axis it
    // runs along, shared between the up-to-four incident cells
    auto edge_key = [&](int i, int j, int k, int edge) {
        const int* a = kCorner[kEdge[edge][0]];
        const int* b = kCorner[kEdge[edge][1]];
        const int gi = i + std::min(a[0], b[0]);
        const int gj = j + std::min(a[1], b[1]);
        const int gk = k + std::min(a[2], b[2]);
        const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
        return ((static_cast<std::uint64_t>(gk) * res + gj) * res + gi) * 3 +
               static_cast<std::uint64_t>(axis);
    };

    double corner_values[8];
    int edge_to_mesh_vertex[12];
    for (int k = 0; k + 1 < res; ++k) {
        for (int j = 0; j + 1 < res; ++j) {
            for (int i = 0; i + 1 < res; ++i) {
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    corner_values[c] =
                        values[value_index(i + kCorner[c][0], j + kCorner[c][1],
                                           k + kCorner[c][2])];
                    if (corner_values[c] < 0.0) cube_index |= 1 << c;
                }
                const int crossings = detail::kMcEdgeTable[cube_index];
                if (crossings == 0) continue;

                for (int e = 0; e < 12; ++e) {
                    if (!(crossings & (1 << e))) continue;
                    const std::uint64_t key = edge_key(i, j, k, e);
                    auto [it, inserted] = edge_vertex.try_emplace(
                        key, static_cast<int>(mesh.vertices.size()));
                    if (inserted) {
                        const int ca = kEdge[e][0];
                        const int cb = kEdge[e][1];
                        const double da = corner_values[ca];
                        const double db = corner_values[cb];
                        const double t = da / (da - db);
                        const Eigen::Vector3d pa(coord(i + kCorner[ca][0]),
                                                 coord(j + kCorner[ca][1]),
                                                 coord(k + kCorner[ca][2]));
                        const Eigen::Vector3d pb(coord(i + kCorner[cb][0]),
                                                 coord(j + kCorner[cb][1]),
                                                 coord(k + kCorner[cb][2]));
                        mesh.vertices.push_back(pa + t * (pb - pa));
                    }
                    edge_to_mesh_vertex[e] = it->second;
                }

                const signed char* tri = detail::kMcTriTable[cube_index];
                for (int at = 0; tri[at] != -1; at += 3) {
                    // emitted with flipped order so normals face the positive
                    // side of the field (outside, for SDFs)
                    const std::array<int, 3> triangle = {edge_to_mesh_vertex[tri[at]],
                                                         edge_to_mesh_vertex[tri[at + 2]],
                                                         edge_to_mesh_vertex[tri[at + 1]]};
                    const Eigen::Vector3d& a = mesh.vertices[static_cast<std::size_t>(triangle[0])];
                    const Eigen::Vector3d& b = mesh.vertices[static_cast<std::size_t>(triangle[1])];
                    const Eigen::Vector3d& c = mesh.vertices[static_cast<std::size_t>(triangle[2])];
                    if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) continue;
                    mesh.triangles.push_back(triangle);
                }
            }
        }
    }
    return mesh;
}

}  // namespace sdf4d
