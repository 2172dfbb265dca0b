#pragma once

namespace sdf4d::detail {

// Classic 256-case marching cubes tables. kMcEdgeTable[case] has bit e set
// when cube edge e crosses the iso level; kMcTriTable[case] lists triangles
// as edge-index triples terminated by -1.
extern const int kMcEdgeTable[256];
extern const signed char kMcTriTable[256][16];

}  // namespace sdf4d::detail
