#include "semsim/bonsai.hpp"

#include <algorithm>

namespace semsim {

Hash16Tree::Hash16Tree(const Prf& prf, std::vector<Block64>* leaves)
    : prf_(&prf), leaves_(leaves) {
    size_t n = leaves_->size();
    if (n == 0) throw std::invalid_argument("hash tree needs at least one leaf");
    leaf_cached_.assign(n, false);
    // level 0 hashes the leaves; higher levels hash the packed hash blocks of
    // the level below, until one block remains
    while (true) {
        level_hashes_.emplace_back(n, 0);
        size_t blocks = (n + kFanout - 1) / kFanout;
        block_cached_.emplace_back(blocks, false);
        if (blocks == 1) break;
        n = blocks;
    }
    rebuild();
}

uint16_t Hash16Tree::hash_leaf(size_t i) const {
    return hash16(*prf_, (*leaves_)[i], i);
}

Block64 Hash16Tree::level_block(size_t level, size_t block_index) const {
    Block64 b{};
    const auto& hashes = level_hashes_[level];
    size_t base = block_index * kFanout;
    for (size_t j = 0; j < kFanout && base + j < hashes.size(); j++) {
        uint16_t h = hashes[base + j];
        b[2 * j] = static_cast<uint8_t>(h);
        b[2 * j + 1] = static_cast<uint8_t>(h >> 8);
    }
    return b;
}

uint16_t Hash16Tree::hash_level_block(size_t level, size_t block_index) const {
    // positions are disambiguated across levels so an attacker cannot swap
    // a hash block between levels
    return hash16(*prf_, level_block(level, block_index), (level + 1) * 0x100000ull + block_index);
}

void Hash16Tree::rebuild() {
    for (size_t i = 0; i < leaves_->size(); i++) level_hashes_[0][i] = hash_leaf(i);
    for (size_t lv = 1; lv < level_hashes_.size(); lv++)
        for (size_t b = 0; b < level_hashes_[lv].size(); b++)
            level_hashes_[lv][b] = hash_level_block(lv - 1, b);
    root_ = hash_level_block(level_hashes_.size() - 1, 0);
    for (auto& lv : block_cached_) lv.assign(lv.size(), false);
    leaf_cached_.assign(leaf_cached_.size(), false);
}

bool Hash16Tree::verify(size_t leaf_index) {
    if (leaf_cached_[leaf_index]) return true;
    if (hash_leaf(leaf_index) != level_hashes_[0][leaf_index]) return false;
    size_t idx = leaf_index;
    for (size_t lv = 0; lv < level_hashes_.size(); lv++) {
        size_t blk = idx / kFanout;
        if (block_cached_[lv][blk]) break;
        uint16_t expect = (lv + 1 < level_hashes_.size()) ? level_hashes_[lv + 1][blk] : root_;
        if (hash_level_block(lv, blk) != expect) return false;
        block_cached_[lv][blk] = true;
        idx = blk;
    }
    leaf_cached_[leaf_index] = true;
    return true;
}

void Hash16Tree::update(size_t leaf_index) {
    level_hashes_[0][leaf_index] = hash_leaf(leaf_index);
    leaf_cached_[leaf_index] = true;
    size_t idx = leaf_index;
    for (size_t lv = 0; lv < level_hashes_.size(); lv++) {
        size_t blk = idx / kFanout;
        uint16_t h = hash_level_block(lv, blk);
        if (lv + 1 < level_hashes_.size())
            level_hashes_[lv + 1][blk] = h;
        else
            root_ = h;
        block_cached_[lv][blk] = true;
        idx = blk;
    }
}

void Hash16Tree::evict_leaf(size_t leaf_index) {
    leaf_cached_[leaf_index] = false;
    size_t idx = leaf_index;
    for (size_t lv = 0; lv < block_cached_.size(); lv++) {
        idx /= kFanout;
        block_cached_[lv][idx] = false;
    }
}

void Hash16Tree::evict_all() {
    leaf_cached_.assign(leaf_cached_.size(), false);
    for (auto& lv : block_cached_) lv.assign(lv.size(), false);
}

BonsaiTree::BonsaiTree(const Prf& prf, size_t data_blocks)
    : counters_((std::max<size_t>(data_blocks, 1) + kSeedsPerBlock - 1) / kSeedsPerBlock,
                zero_block()),
      tree_(prf, &counters_) {}

Seed BonsaiTree::seed_of(size_t block_index) const {
    const Block64& cb = counters_[block_index / kSeedsPerBlock];
    return get_le64(cb.data() + 8 * (block_index % kSeedsPerBlock));
}

void BonsaiTree::set_seed(size_t block_index, Seed seed) {
    Block64& cb = counters_[block_index / kSeedsPerBlock];
    put_le64(cb.data() + 8 * (block_index % kSeedsPerBlock), seed);
    tree_.update(block_index / kSeedsPerBlock);
}

bool BonsaiTree::verify(size_t block_index) {
    return tree_.verify(block_index / kSeedsPerBlock);
}

void BonsaiTree::evict_counter_block(size_t counter_block_index) {
    tree_.evict_leaf(counter_block_index);
}

void BonsaiTree::evict_all_cached() { tree_.evict_all(); }

double memory_overhead(size_t block_size, size_t counter_size, size_t mac_size, size_t hash_size) {
    if (block_size == 0) throw std::invalid_argument("block size must be positive");
    if (counter_size == 0 && hash_size > 0)
        throw std::invalid_argument("hash protection requires counters");
    if (counter_size > block_size)
        throw std::invalid_argument("counter larger than block");
    double per_block = static_cast<double>(counter_size + mac_size) / static_cast<double>(block_size);
    double tree = 0.0;
    if (hash_size > 0) {
        // one hash per counter block; a counter block covers block/counter
        // data blocks
        double blocks_per_counter_block = static_cast<double>(block_size) / static_cast<double>(counter_size);
        tree = static_cast<double>(hash_size) /
               (static_cast<double>(block_size) * blocks_per_counter_block);
    }
    return per_block + tree;
}

} // namespace semsim
