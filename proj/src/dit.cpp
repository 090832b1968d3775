#include "semsim/dit.hpp"

#include <algorithm>

namespace semsim {

namespace {
constexpr uint64_t kNotResident = ~0ull;
constexpr uint64_t kPermBit = 1ull << 63;
constexpr uint64_t kNrFlagBit = 1ull << 62;
constexpr size_t kLeavesPerBlock = 8;
} // namespace

const char* to_string(DitVariant v) {
    switch (v) {
        case DitVariant::dmt: return "dmt";
        case DitVariant::dbmt: return "dbmt";
        case DitVariant::dmee: return "dmee";
    }
    return "?";
}

uint64_t IvlcsTree::encode(const IvlcsLeaf& leaf, DitVariant v) {
    if (!leaf.resident) return kNotResident;
    uint64_t w = 0;
    if (leaf.write_perm) w |= kPermBit;
    if (v == DitVariant::dmt)
        w |= leaf.meta & 0xffffull; // hash leaf, flag bit stays clear
    else
        w |= leaf.meta & (kNrFlagBit - 1);
    return w;
}

IvlcsLeaf IvlcsTree::decode(uint64_t word, DitVariant v) {
    IvlcsLeaf leaf;
    if (word == kNotResident || (v == DitVariant::dmt && (word & kNrFlagBit))) {
        leaf.resident = false;
        return leaf;
    }
    leaf.resident = true;
    leaf.write_perm = (word & kPermBit) != 0;
    leaf.meta = (v == DitVariant::dmt) ? (word & 0xffffull) : (word & (kNrFlagBit - 1));
    return leaf;
}

IvlcsTree::IvlcsTree(const Prf& prf, DitVariant variant, size_t blocks)
    : variant_(variant),
      blocks_(blocks),
      leaf_blocks_((std::max<size_t>(blocks, 1) + kLeavesPerBlock - 1) / kLeavesPerBlock),
      tree_(prf, &leaf_blocks_) {
    for (auto& lb : leaf_blocks_)
        for (size_t j = 0; j < kLeavesPerBlock; j++) put_le64(lb.data() + 8 * j, kNotResident);
    tree_.rebuild();
}

std::optional<IvlcsLeaf> IvlcsTree::lookup(size_t block) {
    if (!tree_.verify(block / kLeavesPerBlock)) return std::nullopt;
    return decode(raw_leaf_word(block), variant_);
}

void IvlcsTree::set_leaf(size_t block, const IvlcsLeaf& leaf) {
    Block64& lb = leaf_blocks_[block / kLeavesPerBlock];
    put_le64(lb.data() + 8 * (block % kLeavesPerBlock), encode(leaf, variant_));
    tree_.update(block / kLeavesPerBlock);
}

void IvlcsTree::arrival(size_t block, bool write_perm) {
    set_leaf(block, IvlcsLeaf{true, write_perm, 0});
}

void IvlcsTree::invalidate(size_t block) { set_leaf(block, IvlcsLeaf{}); }

void IvlcsTree::revoke_write(size_t block) {
    IvlcsLeaf leaf = decode(raw_leaf_word(block), variant_);
    if (!leaf.resident) return;
    leaf.write_perm = false;
    set_leaf(block, leaf);
}

void IvlcsTree::evict_dirty(size_t block, uint64_t meta) {
    IvlcsLeaf leaf = decode(raw_leaf_word(block), variant_);
    if (!leaf.resident) return;
    leaf.meta = meta;
    set_leaf(block, leaf);
}

uint64_t IvlcsTree::raw_leaf_word(size_t block) const {
    const Block64& lb = leaf_blocks_[block / kLeavesPerBlock];
    return get_le64(lb.data() + 8 * (block % kLeavesPerBlock));
}

void IvlcsTree::raw_set_leaf_word(size_t block, uint64_t word) {
    Block64& lb = leaf_blocks_[block / kLeavesPerBlock];
    put_le64(lb.data() + 8 * (block % kLeavesPerBlock), word);
}

double amat_baseline(const AmatParams& p) {
    double miss = 1.0 - p.hit_rate;
    double le = p.local_presence;
    return p.t_c + miss * (p.t_coh + p.t_fetch + le * p.t_int + (1.0 - le) * p.t_rem);
}

double amat_dit(const AmatParams& p) {
    double miss = 1.0 - p.hit_rate;
    double le = p.local_presence;
    return p.t_c + miss * (p.t_int + p.t_fetch + (1.0 - le) * p.t_rem);
}

double amat_delta(const AmatParams& p) {
    double miss = 1.0 - p.hit_rate;
    return miss * (-p.t_coh + (1.0 - p.local_presence) * p.t_int);
}

std::vector<AmatCell> amat_sweep(const AmatGrid& grid) {
    std::vector<AmatCell> cells;
    for (double coh : grid.coh_miss)
        for (double im : grid.int_miss)
            for (double nm : grid.node_miss) {
                AmatParams base;
                base.hit_rate = grid.hit_rate;
                base.t_c = grid.t_c;
                base.t_fetch = grid.t_fetch;
                base.t_rem = grid.t_rem_mult * grid.t_fetch;
                base.local_presence = 1.0 - nm;
                base.t_coh = coh * grid.t_fetch;
                base.t_int = 0.0; // integrity assumed free on the baseline side

                AmatParams dit = base;
                dit.t_coh = 0.0;
                dit.t_int = im * grid.t_fetch;

                AmatCell c;
                c.variant = grid.variant;
                c.hit_rate = grid.hit_rate;
                c.t_c = grid.t_c;
                c.t_coh = base.t_coh;
                c.t_fetch = grid.t_fetch;
                c.t_int_miss = im;
                c.t_rem_mult = grid.t_rem_mult;
                c.node_miss = nm;
                c.amat_baseline = amat_baseline(base);
                c.amat_dit = amat_dit(dit);
                c.overhead_pct = (c.amat_dit / c.amat_baseline - 1.0) * 100.0;
                cells.push_back(c);
            }
    return cells;
}

namespace {
std::vector<double> steps(double lo, double hi, double step) {
    std::vector<double> v;
    for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(x);
    return v;
}
} // namespace

AmatGrid grid_free_directory() {
    AmatGrid g;
    g.node_miss = steps(0.0, 1.0, 0.05);
    g.int_miss = steps(0.0, 0.04, 0.01);
    g.coh_miss = {0.0};
    return g;
}

AmatGrid grid_costly_directory() {
    AmatGrid g;
    g.node_miss = steps(0.0, 1.0, 0.05);
    g.int_miss = {0.02};
    g.coh_miss = steps(0.0, 0.04, 0.01);
    return g;
}

} // namespace semsim
