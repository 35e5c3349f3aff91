#pragma once

#include <cstdint>

// Standard marching-cubes case tables. Corner i sits at offsets
// ((i^(i>>1))&1, (i>>1)&1, (i>>2)&1) -- see kCornerOffset in mesh.cpp -- and
// bit i of the case index is set when the corner value is below the
// iso-level. Triangle vertices are edge ids, -1 terminated.
namespace sdfmap::mc {

extern const uint16_t kEdgeTable[256];
extern const int8_t kTriTable[256][16];

inline constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

}  // namespace sdfmap::mc
