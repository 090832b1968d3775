#include "semsim/crypto.hpp"

namespace semsim {

namespace {

inline uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Two-word keyed permutation core. Three mixing rounds give full diffusion
// from any single input bit to both output words.
struct Mix128 {
    uint64_t a, b;
    void round(uint64_t k0, uint64_t k1) {
        a = mix64(a + k0);
        b = mix64(b + rotl(a, 23) + k1);
        a ^= rotl(b, 41);
    }
};

constexpr uint64_t kPadDomain = 0x70616431ull;  // pads
constexpr uint64_t kTagDomain = 0x74616731ull;  // tags

} // namespace

Key256 derive_key(uint64_t master, uint64_t domain) {
    Key256 k;
    uint64_t x = mix64(master ^ rotl(domain, 32));
    for (auto& w : k.w) {
        x = mix64(x + 0x9e3779b97f4a7c15ull);
        w = x;
    }
    return k;
}

std::array<uint8_t, 16> Prf::block(const PadInput& in) const {
    Mix128 m;
    m.a = key_.w[0] ^ in.payload;
    m.b = key_.w[1] ^ (static_cast<uint64_t>(in.runtime ? 1 : 0) << 62) ^ in.block_index ^ kPadDomain;
    m.round(key_.w[2], key_.w[3]);
    m.round(key_.w[0] + in.block_index, key_.w[1]);
    m.round(key_.w[2], key_.w[3] + in.payload);
    std::array<uint8_t, 16> out;
    put_le64(out.data(), m.a);
    put_le64(out.data() + 8, m.b);
    return out;
}

uint64_t Prf::tag(const uint64_t* words, size_t n, uint64_t domain) const {
    Mix128 m;
    m.a = key_.w[0] ^ kTagDomain;
    m.b = key_.w[1] ^ domain ^ (static_cast<uint64_t>(n) << 32);
    for (size_t i = 0; i < n; i++) {
        m.a ^= words[i];
        m.round(key_.w[2] + i, key_.w[3]);
    }
    m.round(key_.w[0], key_.w[1]);
    return m.a ^ rotl(m.b, 17);
}

Block64 derive_pad(const Prf& prf, Seed seed, uint64_t va) {
    PadInput in;
    in.runtime = (seed != kInitialSeed);
    in.payload = in.runtime ? seed : va;
    Block64 pad;
    for (uint32_t i = 0; i < 4; i++) {
        in.block_index = i;
        auto part = prf.block(in);
        for (size_t j = 0; j < 16; j++) pad[16 * i + j] = part[j];
    }
    return pad;
}

uint16_t mac_tag(const Prf& prf, const Block64& clear, uint64_t va, Seed seed) {
    uint64_t words[10];
    for (int i = 0; i < 8; i++) words[i] = get_le64(clear.data() + 8 * i);
    words[8] = va;
    words[9] = seed;
    return static_cast<uint16_t>(prf.tag(words, 10, 1));
}

SealedBlock seal_block(const Prf& prf, Seed seed, uint64_t va, const Block64& clear) {
    SealedBlock s;
    s.va = va;
    s.seed = seed;
    const Block64 pad = derive_pad(prf, seed, va);
    for (size_t i = 0; i < kBlockBytes; i++) s.cipher[i] = clear[i] ^ pad[i];
    s.mac = mac_tag(prf, clear, va, seed);
    return s;
}

std::optional<Block64> open_block(const Prf& prf, const SealedBlock& sealed, Seed expected_seed) {
    const Block64 pad = derive_pad(prf, expected_seed, sealed.va);
    Block64 clear;
    for (size_t i = 0; i < kBlockBytes; i++) clear[i] = sealed.cipher[i] ^ pad[i];
    if (mac_tag(prf, clear, sealed.va, expected_seed) != sealed.mac) return std::nullopt;
    return clear;
}

uint16_t hash16(const Prf& prf, const Block64& data, uint64_t position) {
    uint64_t words[9];
    for (int i = 0; i < 8; i++) words[i] = get_le64(data.data() + 8 * i);
    words[8] = position;
    return static_cast<uint16_t>(prf.tag(words, 9, 2));
}

} // namespace semsim
