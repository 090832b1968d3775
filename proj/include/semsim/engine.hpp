#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semsim/coherence.hpp"
#include "semsim/workload.hpp"

namespace semsim {

// Simulation parameters, parsed from `key = value` text. Unknown keys are
// rejected so config typos fail loudly.
struct SimConfig {
    int nodes = 1;
    std::string scheme = "none"; // none | sdsm | baseline16
    std::string dit = "off";     // off | dmt | dbmt | dmee
    bool tcm = true;             // fabric tags and timestamps on messages
    uint64_t alu_cycles = 1;
    uint64_t mem_cycles = 100;
    uint64_t hop_cycles = 100;
    uint64_t kb_cycles = 80;
    size_t cache_lines = 256;
    size_t fifo_capacity = 10;
    uint64_t rng_seed = 1;
    std::string adversary = "none";
};

SimConfig parse_config(const std::string& text);
std::string render_config(const SimConfig& c);

struct StatsReport {
    double avg_evict_kb_delay = 0;
    double avg_fetch_kb_delay = 0;
    uint64_t directory_messages = 0;
    uint64_t evict_kb_waits = 0;
    uint64_t fetch_kb_waits = 0;
    uint64_t halts_bad_attach = 0;
    uint64_t halts_illegal_entry = 0;
    uint64_t halts_integrity = 0;
    uint64_t halts_migration_tamper = 0;
    uint64_t halts_missing_tsc = 0;
    uint64_t halts_secure_access = 0;
    uint64_t load_checksum = 0;
    uint64_t node_misses = 0;
    double per_core_instr_avg = 0;
    double per_type_alu_avg = 0;
    double per_type_load_avg = 0;
    double per_type_store_avg = 0;
    uint64_t requests_redirected = 0;
    uint64_t requests_served = 0;
    uint64_t served_immediately = 0;
    uint64_t silent_corruption = 0;
    uint64_t tamper_detections = 0;
    uint64_t total_cycles = 0;
    uint64_t traffic_bytes = 0;
    uint64_t wrong_state_hits = 0;

    // alphabetical (name, value) pairs, the canonical CSV ordering
    std::vector<std::pair<std::string, double>> columns() const;
};

struct RunResult {
    StatsReport stats;
    bool halted = false;     // integrity machinery stopped the run
    uint64_t injections = 0; // adversary actions that materialized
};

// One scripted interference action. DropInvalidate and ForgeData arm at
// `at` and fire on the next matching message; ReplayMsg re-injects a logged
// delivery at `at`; RevertMemory snapshots `node`'s off-chip state at `at`
// and restores it at `until`.
struct AdversaryAction {
    AdversaryKind kind = AdversaryKind::None;
    uint64_t at = 0;
    uint64_t until = 0;
    int node = -1;
};

RunResult run_simulation(const SimConfig& cfg, const Workload& wl,
                         const std::vector<AdversaryAction>& extra = {});

// Fixed three-node scenario: a sharer's stale copy outlives a dropped
// invalidation. With fabric protection on, the forged ack is caught; with it
// off, the stale read lands and only the result oracle notices.
struct AttackOutcome {
    bool tamper_detected = false;
    uint64_t silent_corruptions = 0;
    StatsReport stats;
};

AttackOutcome run_stale_read_attack(bool tcm_on);

// Randomized injection campaign over protected runs. Every run must either
// trip a detector or finish with a clean result oracle.
struct CampaignSummary {
    int runs = 0;
    uint64_t injections = 0;
    int detected = 0;
    int clean = 0;
    uint64_t silent = 0; // corrupt results nobody flagged
};

CampaignSummary run_adversary_campaign(uint64_t base_seed, int runs);

} // namespace semsim
