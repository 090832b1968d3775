#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semsim/bonsai.hpp"
#include "semsim/crypto.hpp"

namespace semsim {

// Local integrity tree layout for distributed shared memory. All three
// variants keep one leaf per shareable block in each node's local tree:
//   dmt  - leaf holds a data hash
//   dbmt - leaf holds the block's encryption counter
//   dmee - leaf holds a version number for an engine that carries its own
//          MACs on data
enum class DitVariant { dmt, dbmt, dmee };

const char* to_string(DitVariant v);

// Leaf state: a block is either locally resident (with metadata and a write
// permission bit, both covered by the tree) or not resident. Non-resident is
// an explicit all-ones sentinel; for hash leaves a dedicated flag bit
// disambiguates, since a real hash may collide with the sentinel value.
struct IvlcsLeaf {
    bool resident = false;
    bool write_perm = false;
    uint64_t meta = 0;
};

class IvlcsTree {
public:
    IvlcsTree(const Prf& prf, DitVariant variant, size_t blocks);

    // Verified read of a leaf. Empty result means the untrusted leaf or hash
    // storage does not match the trusted root.
    std::optional<IvlcsLeaf> lookup(size_t block);

    // Residency transfer events, applied as coherence traffic happens.
    void arrival(size_t block, bool write_perm);
    void invalidate(size_t block);
    void revoke_write(size_t block);
    // Dirty blocks update their leaf metadata only when they leave the
    // cache, so the tree is not touched on every store.
    void evict_dirty(size_t block, uint64_t meta);

    uint16_t root() const { return tree_.root(); }
    DitVariant variant() const { return variant_; }
    size_t blocks() const { return blocks_; }

    // Untrusted storage hooks for tamper simulation.
    uint64_t raw_leaf_word(size_t block) const;
    void raw_set_leaf_word(size_t block, uint64_t word);
    void drop_caches() { tree_.evict_all(); }

private:
    void set_leaf(size_t block, const IvlcsLeaf& leaf);
    static uint64_t encode(const IvlcsLeaf& leaf, DitVariant v);
    static IvlcsLeaf decode(uint64_t word, DitVariant v);

    DitVariant variant_;
    size_t blocks_;
    std::vector<Block64> leaf_blocks_;
    Hash16Tree tree_;
};

// Average memory access time model. Baseline: a directory lookup on every
// cache miss, integrity verification on local fetches, remote penalty
// otherwise. Tree variant: the integrity-protected residency lookup replaces
// the directory lookup and doubles as the local verification.
struct AmatParams {
    double hit_rate = 0.0;       // H, cache hit fraction
    double t_c = 0.0;            // cache hit time
    double t_coh = 0.0;          // baseline coherence lookup
    double t_fetch = 0.0;        // memory fetch
    double t_int = 0.0;          // integrity verification
    double t_rem = 0.0;          // remote fetch penalty
    double local_presence = 0.0; // LE, fraction of misses served locally
};

double amat_baseline(const AmatParams& p);
double amat_dit(const AmatParams& p);
// closed form for dit - baseline at equal t_int
double amat_delta(const AmatParams& p);

struct AmatGrid {
    DitVariant variant = DitVariant::dbmt;
    double hit_rate = 0.999;
    double t_c = 1.0;
    double t_fetch = 100.0;
    double t_rem_mult = 5.0;
    std::vector<double> node_miss;  // 1 - LE
    std::vector<double> int_miss;   // tree-block miss fraction of the dit lookup
    std::vector<double> coh_miss;   // baseline directory-lookup miss fraction
};

// One sweep cell. The baseline side runs with free integrity (t_int = 0);
// the tree side pays a fetch on the given fraction of its lookups, and the
// baseline directory pays a fetch on coh_miss of its lookups.
struct AmatCell {
    DitVariant variant;
    double hit_rate, t_c, t_coh, t_fetch, t_int_miss, t_rem_mult, node_miss;
    double amat_baseline, amat_dit, overhead_pct;
};

std::vector<AmatCell> amat_sweep(const AmatGrid& grid);

// Canonical grids matching the two published parameter studies.
AmatGrid grid_free_directory();   // t_coh = 0, int miss 0..4%
AmatGrid grid_costly_directory(); // directory lookup misses 0..4%, int miss 2%

} // namespace semsim
