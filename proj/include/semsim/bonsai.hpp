#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "semsim/crypto.hpp"

namespace semsim {

// Hash tree over fixed-size 64-byte leaf blocks. Each level packs 32 16-bit
// child hashes per 64-byte hash block; the top hash lives in trusted state.
// Hash blocks themselves sit in untrusted storage and carry a cached flag:
// a verified block is trusted until evicted, so verification walks up only
// to the first cached ancestor.
//
// This is the common machinery behind the single-node counter tree and the
// per-node distributed integrity trees.
class Hash16Tree {
public:
    static constexpr size_t kFanout = 32;

    Hash16Tree(const Prf& prf, std::vector<Block64>* leaves);

    // Recomputes the whole tree from current leaf contents (initial build,
    // or a test that wants a consistent state after raw edits).
    void rebuild();

    // Walks leaf -> root; false on the first mismatching level. Marks every
    // block it verified as cached.
    bool verify(size_t leaf_index);

    // Leaf changed: recompute its hash and every ancestor, replace the root.
    void update(size_t leaf_index);

    // Drops cached flags, as if the block were evicted from the trusted
    // cache back to memory.
    void evict_leaf(size_t leaf_index);
    void evict_all();

    uint16_t root() const { return root_; }
    size_t levels() const { return level_hashes_.size(); }

    // Untrusted storage, exposed so tampering can be simulated directly.
    uint16_t& raw_hash(size_t level, size_t index) { return level_hashes_[level][index]; }

private:
    Block64 level_block(size_t level, size_t block_index) const;
    uint16_t hash_leaf(size_t i) const;
    uint16_t hash_level_block(size_t level, size_t block_index) const;

    const Prf* prf_;
    std::vector<Block64>* leaves_;
    // level_hashes_[0][i] = hash of leaf i; level_hashes_[k][i] = hash of
    // hash-block i of level k-1
    std::vector<std::vector<uint16_t>> level_hashes_;
    std::vector<std::vector<bool>> block_cached_; // per level, per hash block
    std::vector<bool> leaf_cached_;
    uint16_t root_ = 0;
};

// Counter storage plus integrity tree for one node's local memory. Seeds are
// packed eight per counter block (64-bit seed, 64-byte block), and the tree
// hashes counter blocks, not data blocks; data is already bound to its seed
// through the per-block MAC.
class BonsaiTree {
public:
    static constexpr size_t kSeedsPerBlock = 8;

    BonsaiTree(const Prf& prf, size_t data_blocks);

    Seed seed_of(size_t block_index) const;
    void set_seed(size_t block_index, Seed seed); // updates tree path

    // Fetch-side check of the counter block holding this data block's seed.
    // False means the stored counters or hashes do not match the trusted
    // root.
    bool verify(size_t block_index);

    void evict_counter_block(size_t counter_block_index);
    void evict_all_cached();

    uint16_t root() const { return tree_.root(); }
    size_t counter_blocks() const { return counters_.size(); }

    // Untrusted state, mutable for tamper simulation.
    Block64& raw_counter_block(size_t i) { return counters_[i]; }
    Hash16Tree& raw_tree() { return tree_; }

private:
    std::vector<Block64> counters_;
    Hash16Tree tree_;
};

// Storage overhead of the protection metadata, as a fraction of data size:
// per-block counter and MAC, plus one hash per counter block amortized over
// the data blocks it covers.
double memory_overhead(size_t block_size, size_t counter_size, size_t mac_size, size_t hash_size);

} // namespace semsim
