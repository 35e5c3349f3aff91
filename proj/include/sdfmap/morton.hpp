#pragma once

#include <cstdint>

#include "sdfmap/core.hpp"

namespace sdfmap {

// 63-bit Morton keys: 21 bits per axis, interleaved x0 y0 z0 x1 y1 z1 ...
// (x in the least significant position of each triple).
namespace morton {

constexpr uint32_t kMaxCoord = 1u << 21;

inline uint64_t spread3(uint64_t v) {
    v &= 0x1FFFFF;  // 21 bits
    v = (v | (v << 32)) & 0x1F00000000FFFFULL;
    v = (v | (v << 16)) & 0x1F0000FF0000FFULL;
    v = (v | (v << 8)) & 0x100F00F00F00F00FULL;
    v = (v | (v << 4)) & 0x10C30C30C30C30C3ULL;
    v = (v | (v << 2)) & 0x1249249249249249ULL;
    return v;
}

inline uint64_t compact3(uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v | (v >> 2)) & 0x10C30C30C30C30C3ULL;
    v = (v | (v >> 4)) & 0x100F00F00F00F00FULL;
    v = (v | (v >> 8)) & 0x1F0000FF0000FFULL;
    v = (v | (v >> 16)) & 0x1F00000000FFFFULL;
    v = (v | (v >> 32)) & 0x1FFFFF;
    return v;
}

inline uint64_t encode(uint32_t x, uint32_t y, uint32_t z) {
    if (x >= kMaxCoord || y >= kMaxCoord || z >= kMaxCoord)
        fail("morton: cell index (%u, %u, %u) out of range [0, 2^21)", x, y, z);
    return spread3(x) | (spread3(y) << 1) | (spread3(z) << 2);
}

inline void decode(uint64_t code, uint32_t& x, uint32_t& y, uint32_t& z) {
    x = uint32_t(compact3(code));
    y = uint32_t(compact3(code >> 1));
    z = uint32_t(compact3(code >> 2));
}

}  // namespace morton

struct MortonKey {
    int level = 0;
    uint64_t code = 0;

    bool operator==(const MortonKey& o) const { return level == o.level && code == o.code; }
};

}  // namespace sdfmap
