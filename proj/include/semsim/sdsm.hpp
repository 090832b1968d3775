#pragma once

#include <cstdint>
#include <deque>
#include <list>
#include <map>
#include <optional>
#include <vector>

#include "semsim/crypto.hpp"

namespace semsim {

struct PadEntry {
    Seed seed = 0;
    uint64_t ready_at = 0;
};

// Per-node queue of granted seeds with their pad-completion times. Seeds are
// consumed strictly in grant order, so a transfer may stall on the head pad
// even when a younger one is already computed.
class PadFifo {
public:
    void push(Seed seed, uint64_t ready_at) { q_.push_back({seed, ready_at}); }
    bool empty() const { return q_.empty(); }
    size_t size() const { return q_.size(); }
    const PadEntry& front() const { return q_.front(); }
    PadEntry consume();

private:
    std::deque<PadEntry> q_;
};

// Central seed authority. Grants are globally unique and monotone, so no two
// transfers anywhere in the machine ever share a pad.
class TcmSeedLedger {
public:
    explicit TcmSeedLedger(Seed first = 1) : next_(first) {}
    Seed next() { return next_++; }
    Seed peek() const { return next_; }

private:
    Seed next_;
};

// Single-use pads a node keeps for blocks it recently wrote, refreshed on
// every local store commit. Bounded, LRU beyond capacity.
class PadBuffer {
public:
    explicit PadBuffer(size_t capacity) : cap_(capacity) {}

    void refresh(uint64_t va, Seed seed, uint64_t ready_at);
    std::optional<PadEntry> take(uint64_t va);
    void drop(uint64_t va);
    size_t size() const { return map_.size(); }

private:
    struct Slot {
        PadEntry pad;
        std::list<uint64_t>::iterator pos;
    };
    size_t cap_;
    std::list<uint64_t> lru_; // front = most recent
    std::map<uint64_t, Slot> map_;
};

// Exponentially decayed sharing activity, used to split grant capacity
// between processes in proportion to recent demand.
struct ProcessHeat {
    double heat = 0.0;
    uint64_t last = 0;

    void touch(uint64_t now, double half_life);
    double value(uint64_t now, double half_life) const;
};

// Proportional allocation with remainders going to the largest fractional
// parts, ties to the lower index. Zero total weight leaves everything at the
// first entry.
std::vector<size_t> largest_remainder_split(const std::vector<double>& weights, size_t capacity);

} // namespace semsim
