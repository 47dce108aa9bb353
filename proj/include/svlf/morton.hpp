#pragma once

#include <cstdint>

namespace svlf {

// Bit k of x lands on output bit 3k, y on 3k+1, z on 3k+2:
// cell (1,0,0) -> 1, (0,1,0) -> 2, (0,0,1) -> 4.
inline uint64_t morton_spread(uint64_t v) {
    v &= 0x1fffff;  // 21 bits per axis
    v = (v | v << 32) & 0x1f00000000ffffULL;
    v = (v | v << 16) & 0x1f0000ff0000ffULL;
    v = (v | v << 8) & 0x100f00f00f00f00fULL;
    v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
    v = (v | v << 2) & 0x1249249249249249ULL;
    return v;
}

inline uint64_t morton_encode(uint32_t x, uint32_t y, uint32_t z) {
    return morton_spread(x) | (morton_spread(y) << 1) | (morton_spread(z) << 2);
}

inline uint64_t morton_compact(uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
    v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
    v = (v ^ (v >> 32)) & 0x1fffff;
    return v;
}

inline void morton_decode(uint64_t code, uint32_t& x, uint32_t& y, uint32_t& z) {
    x = static_cast<uint32_t>(morton_compact(code));
    y = static_cast<uint32_t>(morton_compact(code >> 1));
    z = static_cast<uint32_t>(morton_compact(code >> 2));
}

}  // namespace svlf
