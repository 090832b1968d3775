#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace semsim {

// One cache/memory block. All data movement in the suite happens at this
// granularity.
inline constexpr size_t kBlockBytes = 64;
using Block64 = std::array<uint8_t, kBlockBytes>;

inline void put_le64(uint8_t* p, uint64_t v) {
    for (int i = 0; i < 8; i++) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

inline uint64_t get_le64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

inline Block64 zero_block() {
    Block64 b{};
    return b;
}

// Expands a simulated 64-bit store value into a full block image. The value
// occupies the first word; the rest stays zero so the block is cheap to build
// and still fully covered by the MAC.
inline Block64 block_from_value(uint64_t value) {
    Block64 b{};
    put_le64(b.data(), value);
    return b;
}

inline uint64_t value_from_block(const Block64& b) { return get_le64(b.data()); }

} // namespace semsim
