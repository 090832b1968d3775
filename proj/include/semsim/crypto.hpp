#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "semsim/bytes.hpp"

namespace semsim {

struct Key256 {
    std::array<uint64_t, 4> w{};
    bool operator==(const Key256&) const = default;
};

// Derives a fresh key from a master seed; used to give every process and
// fabric channel its own independent key material.
Key256 derive_key(uint64_t master, uint64_t domain);

// Block seed for counter-mode encryption. Seed 0 is reserved for the initial
// (never written) state, where the pad is derived from the address instead.
using Seed = uint64_t;
inline constexpr Seed kInitialSeed = 0;

// Input to one PRF invocation. The encoding keeps address-derived and
// seed-derived pads in disjoint input domains: initial pads hash the virtual
// address with flag 0, runtime pads hash the seed with flag 1, so no pad can
// collide across the two families.
struct PadInput {
    bool runtime;         // false: initial pad (payload = va), true: payload = seed
    uint64_t payload = 0;
    uint32_t block_index = 0;
};

// Keyed pseudo random function, 128-bit outputs. Test-grade: a fixed ARX
// mixer, deterministic and keyed, with measured avalanche behaviour, but not
// a vetted cipher. The simulation needs distinguishability and tamper
// sensitivity, not cryptographic strength.
class Prf {
public:
    explicit Prf(const Key256& key) : key_(key) {}

    std::array<uint8_t, 16> block(const PadInput& in) const;

    // keyed tag over an arbitrary word sequence, domain-separated from pads
    uint64_t tag(const uint64_t* words, size_t n, uint64_t domain) const;

    const Key256& key() const { return key_; }

private:
    Key256 key_;
};

// A 64-byte keystream pad: four PRF blocks over the same payload with
// block_index 0..3.
Block64 derive_pad(const Prf& prf, Seed seed, uint64_t va);

// Encryption result for one block. The MAC binds ciphertext to its address
// and seed, so moving a block or replaying a stale seed breaks the tag.
struct SealedBlock {
    uint64_t va = 0;
    Seed seed = kInitialSeed;
    Block64 cipher{};
    uint16_t mac = 0;
};

uint16_t mac_tag(const Prf& prf, const Block64& clear, uint64_t va, Seed seed);

SealedBlock seal_block(const Prf& prf, Seed seed, uint64_t va, const Block64& clear);

// Decrypts and authenticates. Returns nothing when the MAC does not match
// (tamper, wrong seed, wrong address).
std::optional<Block64> open_block(const Prf& prf, const SealedBlock& sealed, Seed expected_seed);

// 16-bit keyed hash over one block, position-bound; used by the integrity
// trees.
uint16_t hash16(const Prf& prf, const Block64& data, uint64_t position);

} // namespace semsim
