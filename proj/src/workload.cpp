#include "semsim/workload.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "semsim/rng.hpp"

namespace semsim {

namespace {

// trims whitespace from both ends
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

uint64_t parse_addr(const std::string& tok, size_t line) {
    if (tok.empty()) throw ParseError(line, "missing address");
    uint64_t v = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    int base = 10;
    if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
        first += 2;
        base = 16;
    }
    auto [p, ec] = std::from_chars(first, last, v, base);
    if (ec != std::errc() || p != last) throw ParseError(line, "bad address '" + tok + "'");
    return block_align(v);
}

} // namespace

Workload parse_trace(const std::string& text) {
    Workload w;
    std::istringstream in(text);
    std::string raw;
    size_t line = 0;
    int current = -1;
    while (std::getline(in, raw)) {
        line++;
        std::string s = trim(raw);
        if (s.empty()) continue;
        if (s.rfind("#thread", 0) == 0) {
            std::string num = trim(s.substr(7));
            uint64_t id = 0;
            auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), id);
            if (ec != std::errc() || p != num.data() + num.size())
                throw ParseError(line, "bad thread id '" + num + "'");
            if (id != w.threads.size())
                throw ParseError(line, "thread ids must be sequential from 0, got " + num);
            w.threads.emplace_back();
            current = static_cast<int>(id);
            continue;
        }
        if (s[0] == '#') continue;
        if (current < 0) throw ParseError(line, "instruction before any #thread header");

        TraceInstr ins;
        if (s == "A") {
            ins.op = TraceOp::Alu;
        } else if (s[0] == 'L' || s[0] == 'S') {
            if (s.size() < 2 || (s[1] != ' ' && s[1] != '\t'))
                throw ParseError(line, "unknown instruction '" + s + "'");
            ins.op = (s[0] == 'L') ? TraceOp::Load : TraceOp::Store;
            ins.va = parse_addr(trim(s.substr(1)), line);
        } else {
            throw ParseError(line, "unknown instruction '" + s + "'");
        }
        w.threads[current].push_back(ins);
    }
    if (w.threads.empty()) throw ParseError(line ? line : 1, "empty trace: no #thread sections");
    return w;
}

std::string render_trace(const Workload& w) {
    std::ostringstream out;
    char buf[32];
    for (size_t t = 0; t < w.threads.size(); t++) {
        out << "#thread " << t << "\n";
        for (const auto& ins : w.threads[t]) {
            switch (ins.op) {
                case TraceOp::Alu: out << "A\n"; break;
                case TraceOp::Load:
                    snprintf(buf, sizeof buf, "L 0x%llx\n", static_cast<unsigned long long>(ins.va));
                    out << buf;
                    break;
                case TraceOp::Store:
                    snprintf(buf, sizeof buf, "S 0x%llx\n", static_cast<unsigned long long>(ins.va));
                    out << buf;
                    break;
            }
        }
    }
    return out.str();
}

namespace {

// residency bookkeeping for one shared block during generation
struct BlockModel {
    std::vector<uint32_t> holders; // nodes with a live copy, sorted, small
    bool held_by(uint32_t n) const {
        return std::find(holders.begin(), holders.end(), n) != holders.end();
    }
    void add(uint32_t n) {
        if (!held_by(n)) holders.push_back(n);
    }
    void collapse_to(uint32_t n) { holders.assign(1, n); }
};

} // namespace

Workload gen_synthetic(const SynthParams& p) {
    if (p.nodes == 0) throw std::invalid_argument("need at least one node");
    if (p.target_node_miss_rate < 0 || p.target_node_miss_rate > 1)
        throw std::invalid_argument("miss rate out of range");
    if (p.store_fraction < 0 || p.store_fraction > 1)
        throw std::invalid_argument("store fraction out of range");
    if (p.target_node_miss_rate > 0 && p.nodes < 2)
        throw std::invalid_argument("remote misses need at least two nodes");
    if (p.private_region_blocks == 0)
        throw std::invalid_argument("private region must not be empty");
    if (p.hot_window == 0) throw std::invalid_argument("hot window must not be empty");
    if (p.target_node_miss_rate > 0 && p.shared_region_blocks < 2 * p.nodes)
        throw std::invalid_argument("shared region too small for the node count");

    const double mem_fraction = 0.5; // remaining instructions are spacers
    double expected_misses = static_cast<double>(p.nodes) * static_cast<double>(p.instrs_per_node) *
                             mem_fraction * p.target_node_miss_rate;
    if (p.target_node_miss_rate > 0 && expected_misses < 50)
        throw std::invalid_argument("too few instructions to realize the miss rate reliably");

    Rng rng(p.rng_seed ^ 0x5717c0debull);
    const uint32_t n = static_cast<uint32_t>(p.nodes);
    // private blocks interleave (block j of node k sits at j*nodes+k), so a
    // block's owning node is its index modulo the node count everywhere
    const uint64_t shared_base = static_cast<uint64_t>(p.nodes) * p.private_region_blocks;

    // holders start empty to mirror the cold caches of a fresh run
    std::vector<BlockModel> shared(p.shared_region_blocks);

    // recently written shared blocks; misses prefer these so that request
    // streams pile onto the nodes that produced fresh data
    std::deque<uint32_t> recent;
    std::map<uint32_t, uint32_t> recent_cnt;
    auto push_recent = [&](uint32_t b) {
        recent.push_back(b);
        recent_cnt[b]++;
        if (recent.size() > p.hot_window) {
            uint32_t old = recent.front();
            recent.pop_front();
            if (--recent_cnt[old] == 0) recent_cnt.erase(old);
        }
    };

    Workload w;
    w.threads.resize(p.nodes);
    for (auto& t : w.threads) t.reserve(p.instrs_per_node);

    // holder updates commit one coherence round trip after the access is
    // emitted; picks that raced the update they depend on would replay as
    // plain hits or local fetches instead of fabric misses
    double round_cycles = 1.0 + 600.0 * mem_fraction * p.target_node_miss_rate;
    const size_t commit_lag = std::clamp<size_t>(static_cast<size_t>(600.0 / round_cycles), 8, 400);
    struct PendingUpd {
        size_t due;
        uint32_t block;
        uint32_t actor;
        bool store;
    };
    std::deque<PendingUpd> pending;
    std::vector<std::set<uint32_t>> inflight(p.nodes); // own touches not yet applied
    std::vector<uint32_t> pend_cnt(shared.size(), 0);  // in-flight updates per block
    auto apply_due = [&](size_t round) {
        while (!pending.empty() && pending.front().due <= round) {
            const PendingUpd& u = pending.front();
            if (u.store) {
                shared[u.block].collapse_to(u.actor);
                push_recent(u.block);
            } else {
                shared[u.block].add(u.actor);
            }
            inflight[u.actor].erase(u.block);
            pend_cnt[u.block]--;
            pending.pop_front();
        }
    };
    auto touch = [&](size_t round, uint32_t b, uint32_t node, bool store) {
        pending.push_back({round + commit_lag, b, node, store});
        inflight[node].insert(b);
        pend_cnt[b]++;
    };

    // a miss moves data across the fabric only when the block is homed
    // elsewhere or another node holds the sole (written) copy; blocks homed
    // here with no foreign owner would be served from local memory
    auto miss_candidate = [&](uint32_t b, uint32_t node) {
        if (shared[b].held_by(node) || inflight[node].count(b)) return false;
        if (b % n != node) return true;
        // a local home serves the data itself unless one settled foreign
        // copy exists to forward from
        return shared[b].holders.size() == 1 && pend_cnt[b] == 0;
    };
    auto pick_remote = [&](uint32_t node) -> int64_t {
        // try the hot list first, then random probes, then give up
        if (!recent.empty() && rng.bernoulli(0.5)) {
            for (int probe = 0; probe < 8; probe++) {
                uint32_t b = recent[recent.size() - 1 - rng.uniform(recent.size())];
                if (miss_candidate(b, node)) return b;
            }
        }
        for (int probe = 0; probe < 64; probe++) {
            uint32_t b = static_cast<uint32_t>(rng.uniform(shared.size()));
            if (miss_candidate(b, node)) return b;
        }
        for (size_t b = 0; b < shared.size(); b++)
            if (miss_candidate(static_cast<uint32_t>(b), node)) return static_cast<int64_t>(b);
        return -1;
    };

    // round-robin generation approximates concurrent execution, so the
    // holder model sees accesses roughly in the order the nodes will issue
    // them
    for (size_t i = 0; i < p.instrs_per_node; i++) {
        apply_due(i);
        for (uint32_t node = 0; node < n; node++) {
            auto& seq = w.threads[node];
            if (!rng.bernoulli(mem_fraction)) {
                seq.push_back({TraceOp::Alu, 0});
                continue;
            }
            bool store = rng.bernoulli(p.store_fraction);
            bool want_miss = rng.bernoulli(p.target_node_miss_rate);
            uint64_t block_index;
            if (want_miss) {
                int64_t b = pick_remote(node);
                if (b < 0) {
                    // every shared block is already here; degrade to a hit
                    block_index = rng.uniform(p.private_region_blocks) * p.nodes + node;
                } else {
                    block_index = shared_base + static_cast<uint64_t>(b);
                    touch(i, static_cast<uint32_t>(b), node, store);
                }
            } else {
                // mostly private, sometimes a shared block already held here
                // (stores to those exercise write upgrades)
                int64_t held = -1;
                if (rng.bernoulli(0.25)) {
                    for (int probe = 0; probe < 4; probe++) {
                        uint32_t b = static_cast<uint32_t>(rng.uniform(shared.size()));
                        // skip copies an in-flight update may be killing and
                        // write-hot blocks a future store is likely to claim
                        if (shared[b].held_by(node) && pend_cnt[b] == 0 && !recent_cnt.count(b)) {
                            held = b;
                            break;
                        }
                    }
                }
                if (held >= 0) {
                    block_index = shared_base + static_cast<uint64_t>(held);
                    if (store) touch(i, static_cast<uint32_t>(held), node, true);
                } else {
                    block_index = rng.uniform(p.private_region_blocks) * p.nodes + node;
                }
            }
            seq.push_back({store ? TraceOp::Store : TraceOp::Load, block_index * 64});
        }
    }
    return w;
}

} // namespace semsim
