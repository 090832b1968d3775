#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace semsim {

enum class TraceOp { Alu, Load, Store };

struct TraceInstr {
    TraceOp op = TraceOp::Alu;
    uint64_t va = 0;
};

// One instruction sequence per thread; thread i runs on node i.
struct Workload {
    std::vector<std::vector<TraceInstr>> threads;

    size_t total_instrs() const {
        size_t n = 0;
        for (auto& t : threads) n += t.size();
        return n;
    }
};

struct ParseError : std::runtime_error {
    ParseError(size_t line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
    size_t line;
};

// Text trace format:
//   #thread 0      begins thread 0's sequence (ids sequential from 0)
//   A              spacer op
//   L 0x1040       load (addresses snap to 64-byte blocks)
//   S 0x1080       store
//   # ...          comment
Workload parse_trace(const std::string& text);
std::string render_trace(const Workload& w);

inline uint64_t block_align(uint64_t va) { return va & ~static_cast<uint64_t>(63); }

struct SynthParams {
    size_t nodes = 2;
    size_t instrs_per_node = 10000;
    double target_node_miss_rate = 0.05; // fraction of memory accesses that fetch remotely
    double store_fraction = 0.3;         // of memory accesses
    size_t shared_region_blocks = 512;
    size_t private_region_blocks = 192;
    size_t hot_window = 32; // recently written blocks that attract misses
    uint64_t rng_seed = 1;
};

// Generates a multi-threaded trace whose remote-fetch rate lands on the
// target. The generator mirrors the residency rules of the memory system:
// a read spreads a copy, a write collapses ownership to the writer, so it
// can decide hit/miss per access ahead of time. Misses prefer recently
// written blocks, which concentrates requests on recent writers the way
// real sharing does.
//
// Throws std::invalid_argument when the parameters cannot meet the target
// (single node with a nonzero miss rate, or too few accesses to hit the
// rate within tolerance).
Workload gen_synthetic(const SynthParams& p);

} // namespace semsim
