#include "semsim/engine.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "semsim/bonsai.hpp"
#include "semsim/dit.hpp"
#include "semsim/rng.hpp"
#include "semsim/sdsm.hpp"

namespace semsim {

namespace {

enum class Scheme { none, sdsm, b16 };

Scheme parse_scheme(const std::string& s) {
    if (s == "none") return Scheme::none;
    if (s == "sdsm") return Scheme::sdsm;
    if (s == "baseline16") return Scheme::b16;
    throw std::runtime_error("unknown scheme: " + s);
}

std::optional<DitVariant> parse_dit_mode(const std::string& s) {
    if (s == "off") return std::nullopt;
    if (s == "dmt") return DitVariant::dmt;
    if (s == "dbmt") return DitVariant::dbmt;
    if (s == "dmee") return DitVariant::dmee;
    throw std::runtime_error("unknown dit variant: " + s);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::runtime_error("bad value for " + key + ": '" + v + "'");
    return out;
}

void validate_config(const SimConfig& c) {
    if (c.nodes < 1) throw std::runtime_error("nodes must be at least 1");
    if (c.cache_lines < 1) throw std::runtime_error("cache_lines must be at least 1");
    if (c.fifo_capacity < 1) throw std::runtime_error("fifo_capacity must be at least 1");
    if (c.mem_cycles < 1) throw std::runtime_error("mem_cycles must be at least 1");
    if (c.alu_cycles < 1) throw std::runtime_error("alu_cycles must be at least 1");
    parse_scheme(c.scheme);
    parse_dit_mode(c.dit);
    parse_adversary(c.adversary);
}

struct DirEntry {
    std::set<int> sharers;
    int owner = -1;
    bool home_valid = true; // home memory holds the latest committed data
    bool busy = false;      // write outstanding, requests queue until install
    std::deque<Msg> pending;
};

struct CacheLine {
    uint64_t value = 0;
    bool dirty = false;
    std::list<uint64_t>::iterator pos;
};

struct PendingFill {
    bool active = false;
    bool is_store = false;
    bool upgrade = false;
    uint64_t va = 0;
    uint64_t issue = 0;
    uint64_t new_value = 0;
    bool have_data = false;
    bool resolved = false; // the directory has ordered this request
    uint64_t data_time = 0;
    uint64_t value = 0;
    bool data_remote = false;
    bool count_known = false;
    uint32_t need = 0;
    uint32_t got = 0;
    uint64_t last_ack = 0;
    std::vector<Msg> deferred; // invalidations held until a load fill commits
};

struct NodeState {
    explicit NodeState(size_t pad_capacity) : buffer(pad_capacity) {}

    uint64_t cycle = 0;
    size_t ip = 0;
    bool done = false;
    std::map<uint64_t, CacheLine> cache;
    std::list<uint64_t> lru; // front = hottest
    uint64_t station_free = 0;
    PadFifo fifo;
    PadBuffer buffer;
    std::map<uint64_t, Seed> fab_counter; // per-block send seeds (baseline16)
    std::map<uint64_t, uint64_t> plain_mem;
    std::map<uint64_t, SealedBlock> sealed_mem;
    std::map<uint64_t, Seed> wb_seed; // storage seed counters when the
                                      // residency tree carries them
    std::unique_ptr<BonsaiTree> counters;
    std::unique_ptr<IvlcsTree> residency;
    std::unique_ptr<Prf> store_prf;
    PendingFill fill;
    uint64_t store_seq = 0;
    uint64_t instr = 0;
    uint64_t alu_n = 0, load_n = 0, store_n = 0;
    uint64_t alu_cyc = 0, load_cyc = 0, store_cyc = 0;
};

struct Event {
    uint64_t time = 0;
    int dst = 0;
    uint64_t seq = 0;
    Msg msg;
    int trigger = -1; // adversary plan index, -1 for deliveries
    int phase = 0;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.dst != b.dst) return a.dst > b.dst;
        return a.seq > b.seq;
    }
};

class Engine {
public:
    Engine(const SimConfig& cfg, const Workload& wl, std::vector<AdversaryAction> plan)
        : cfg_(cfg), scheme_(parse_scheme(cfg.scheme)), dit_(parse_dit_mode(cfg.dit)), wl_(&wl),
          fabric_prf_(derive_key(0x7461626c65ull, 0xfab51c)), guard_(derive_key(0x7461626c65ull, 0x7c3a), cfg.nodes),
          rng_(cfg.rng_seed ^ 0x5eedf00dull), plan_(std::move(plan)), plan_used_(plan_.size(), false) {
        validate_config(cfg_);
        if (wl.threads.size() > static_cast<size_t>(cfg_.nodes))
            throw std::runtime_error("workload has more threads than nodes");
        if (AdversaryKind k = parse_adversary(cfg_.adversary); k != AdversaryKind::None) {
            plan_.push_back({k, 0, 0, -1});
            plan_used_.push_back(false);
        }
        init_nodes();
        init_memory();
        for (size_t i = 0; i < plan_.size(); i++) {
            if (plan_[i].kind == AdversaryKind::ReplayMsg)
                events_.push({plan_[i].at, -1, ++seq_, Msg{}, static_cast<int>(i), 0});
            if (plan_[i].kind == AdversaryKind::RevertMemory) {
                events_.push({plan_[i].at, -1, ++seq_, Msg{}, static_cast<int>(i), 0});
                events_.push({std::max(plan_[i].until, plan_[i].at + 1), -1, ++seq_, Msg{},
                              static_cast<int>(i), 1});
            }
        }
    }

    RunResult run() {
        for (int n = 0; n < cfg_.nodes; n++) advance(n);
        while (!events_.empty() && !halted_) {
            Event ev = events_.top();
            events_.pop();
            if (ev.trigger >= 0) {
                fire(ev);
                continue;
            }
            handle(ev.msg, ev.time);
        }
        finalize();
        RunResult rr;
        rr.stats = st_;
        rr.halted = halted_;
        rr.injections = injections_;
        return rr;
    }

private:
    int home(uint64_t va) const { return static_cast<int>((va / kBlockBytes) % cfg_.nodes); }

    void init_nodes() {
        nodes_.reserve(cfg_.nodes);
        for (int n = 0; n < cfg_.nodes; n++) {
            nodes_.emplace_back(cfg_.fifo_capacity);
            nodes_[n].store_prf =
                std::make_unique<Prf>(derive_key(0x6d656d5f6b657900ull + n, 0x10c4));
            if (scheme_ == Scheme::sdsm)
                for (size_t i = 0; i < cfg_.fifo_capacity; i++) nodes_[n].fifo.push(ledger_.next(), 0);
        }
    }

    // Sealed copies, counters and integrity trees live at each block's home
    // node only; remote writebacks update them functionally.
    void init_memory() {
        std::set<uint64_t> vas;
        for (const auto& th : wl_->threads)
            for (const auto& ins : th)
                if (ins.op != TraceOp::Alu) vas.insert(ins.va);
        std::map<int, size_t> per_home;
        for (uint64_t va : vas) home_idx_[va] = per_home[home(va)]++;
        for (int n = 0; n < cfg_.nodes; n++) {
            size_t count = per_home.count(n) ? per_home[n] : 0;
            if (count == 0) continue;
            NodeState& nd = nodes_[n];
            if (dit_) nd.residency = std::make_unique<IvlcsTree>(*nd.store_prf, *dit_, count);
            else if (scheme_ != Scheme::none)
                nd.counters = std::make_unique<BonsaiTree>(*nd.store_prf, count);
        }
        for (uint64_t va : vas) {
            NodeState& nd = nodes_[home(va)];
            size_t idx = home_idx_[va];
            dir_[va]; // materialize with defaults
            if (scheme_ == Scheme::none) nd.plain_mem[va] = 0;
            else nd.sealed_mem[va] = seal_block(*nd.store_prf, kInitialSeed, va, zero_block());
            if (dit_) {
                nd.residency->arrival(idx, true);
                nd.residency->evict_dirty(idx, home_meta(nd, va, idx));
            }
        }
    }

    // Leaf metadata the home tree is expected to carry for its current copy.
    uint64_t home_meta(NodeState& nd, uint64_t va, size_t idx) {
        if (*dit_ == DitVariant::dmt) {
            if (scheme_ == Scheme::none)
                return hash16(*nd.store_prf, block_from_value(nd.plain_mem[va]), idx);
            return hash16(*nd.store_prf, nd.sealed_mem[va].cipher, idx);
        }
        return nd.wb_seed.count(va) ? nd.wb_seed[va] : 0;
    }

    // Verified read of home memory. Empty means the stored data, counters or
    // residency record no longer match the trusted roots.
    std::optional<uint64_t> open_local(int s, uint64_t va) {
        NodeState& nd = nodes_[s];
        size_t idx = home_idx_.at(va);
        if (dit_) {
            auto leaf = nd.residency->lookup(idx);
            if (!leaf || !leaf->resident) return std::nullopt;
            if (scheme_ == Scheme::none) {
                uint64_t val = nd.plain_mem[va];
                uint64_t want = (*dit_ == DitVariant::dmt)
                                    ? hash16(*nd.store_prf, block_from_value(val), idx)
                                    : (nd.wb_seed.count(va) ? nd.wb_seed[va] : 0);
                if (leaf->meta != want) return std::nullopt;
                return val;
            }
            const SealedBlock& sb = nd.sealed_mem[va];
            Seed expect = (*dit_ == DitVariant::dmt) ? sb.seed : leaf->meta;
            auto clear = open_block(*nd.store_prf, sb, expect);
            if (!clear) return std::nullopt;
            if (*dit_ == DitVariant::dmt && leaf->meta != hash16(*nd.store_prf, sb.cipher, idx))
                return std::nullopt;
            return value_from_block(*clear);
        }
        if (scheme_ != Scheme::none) {
            if (!nd.counters->verify(idx)) return std::nullopt;
            auto clear = open_block(*nd.store_prf, nd.sealed_mem[va], nd.counters->seed_of(idx));
            if (!clear) return std::nullopt;
            return value_from_block(*clear);
        }
        return nd.plain_mem[va];
    }

    // Functional writeback to the block's home: reseal under a fresh seed,
    // update the home tree, mark home memory current. Zero latency; only the
    // traffic is accounted.
    void writeback(int d, uint64_t va, uint64_t value, uint64_t t) {
        int h = home(va);
        NodeState& hm = nodes_[h];
        size_t idx = home_idx_.at(va);
        if (scheme_ == Scheme::none) {
            hm.plain_mem[va] = value;
            if (dit_ && *dit_ != DitVariant::dmt) hm.wb_seed[va]++;
        } else if (dit_) {
            Seed s = ++hm.wb_seed[va];
            hm.sealed_mem[va] = seal_block(*hm.store_prf, s, va, block_from_value(value));
        } else {
            // the counter path must verify before the update re-roots it,
            // or a rolled-back tree would be re-signed as authentic
            if (!hm.counters->verify(idx)) {
                tamper(t);
                return;
            }
            Seed s = hm.counters->seed_of(idx) + 1;
            hm.sealed_mem[va] = seal_block(*hm.store_prf, s, va, block_from_value(value));
            hm.counters->set_seed(idx, s);
        }
        if (dit_) {
            auto leaf = hm.residency->lookup(idx);
            if (!leaf) {
                tamper(t);
                return;
            }
            if (!leaf->resident) hm.residency->arrival(idx, true);
            hm.residency->evict_dirty(idx, home_meta(hm, va, idx));
        }
        DirEntry& e = dir_[va];
        if (e.owner == d) e.owner = -1;
        e.home_valid = true;
        if (d != h) {
            st_.directory_messages++;
            st_.traffic_bytes += 16 + 64 + (scheme_ != Scheme::none ? 10u : 0u) + (cfg_.tcm ? 2u : 0u);
        }
    }

    void touch_lru(NodeState& nd, uint64_t va) {
        auto it = nd.cache.find(va);
        nd.lru.erase(it->second.pos);
        nd.lru.push_front(va);
        it->second.pos = nd.lru.begin();
    }

    void erase_line(int n, uint64_t va) {
        NodeState& nd = nodes_[n];
        auto it = nd.cache.find(va);
        if (it == nd.cache.end()) return;
        nd.lru.erase(it->second.pos);
        nd.cache.erase(it);
        nd.buffer.drop(va);
    }

    void install_line(int n, uint64_t va, uint64_t value, bool dirty, uint64_t t) {
        NodeState& nd = nodes_[n];
        auto it = nd.cache.find(va);
        if (it != nd.cache.end()) {
            touch_lru(nd, va);
            it->second.value = value;
            it->second.dirty = it->second.dirty || dirty;
            return;
        }
        if (nd.cache.size() >= cfg_.cache_lines) {
            uint64_t victim = nd.lru.back();
            auto vit = nd.cache.find(victim);
            if (vit->second.dirty) writeback(n, victim, vit->second.value, t);
            erase_line(n, victim);
        }
        nd.lru.push_front(va);
        nd.cache[va] = {value, dirty, nd.lru.begin()};
    }

    void oracle_load(uint64_t va, uint64_t value) {
        auto it = expected_.find(va);
        uint64_t want = it == expected_.end() ? 0 : it->second;
        if (value != want) st_.silent_corruption++;
        checksum_ = (checksum_ ^ value) * 0x100000001b3ull + 0x9e37;
    }

    void refresh_pad_buffer(int n, uint64_t va, uint64_t t) {
        if (scheme_ != Scheme::b16) return;
        NodeState& nd = nodes_[n];
        Seed s = ++nd.fab_counter[va];
        nd.buffer.refresh(va, s, t + cfg_.kb_cycles);
    }

    // Core loop for one node: run until the trace ends or a miss blocks it.
    // Hits retire immediately, so a node can run ahead of the message world;
    // cross-node interactions serialize only at misses.
    void advance(int n) {
        if (halted_) return;
        NodeState& nd = nodes_[n];
        if (nd.done || nd.fill.active) return;
        if (static_cast<size_t>(n) >= wl_->threads.size()) {
            nd.done = true;
            return;
        }
        const auto& seqn = wl_->threads[n];
        while (nd.ip < seqn.size()) {
            const TraceInstr& ins = seqn[nd.ip];
            if (ins.op == TraceOp::Alu) {
                nd.cycle += cfg_.alu_cycles;
                nd.alu_cyc += cfg_.alu_cycles;
                nd.alu_n++;
                nd.instr++;
                nd.ip++;
                continue;
            }
            uint64_t va = ins.va;
            auto it = nd.cache.find(va);
            if (ins.op == TraceOp::Load) {
                if (it != nd.cache.end()) {
                    touch_lru(nd, va);
                    oracle_load(va, it->second.value);
                    nd.cycle += cfg_.alu_cycles;
                    nd.load_cyc += cfg_.alu_cycles;
                    nd.load_n++;
                    nd.instr++;
                    nd.ip++;
                    continue;
                }
                issue(n, va, false, 0, false);
                return;
            }
            uint64_t val = (static_cast<uint64_t>(n + 1) << 32) | ++nd.store_seq;
            if (it != nd.cache.end() && it->second.dirty) {
                touch_lru(nd, va);
                it->second.value = val;
                expected_[va] = val;
                refresh_pad_buffer(n, va, nd.cycle);
                nd.cycle += cfg_.alu_cycles;
                nd.store_cyc += cfg_.alu_cycles;
                nd.store_n++;
                nd.instr++;
                nd.ip++;
                continue;
            }
            issue(n, va, true, val, it != nd.cache.end());
            return;
        }
        nd.done = true;
    }

    void issue(int n, uint64_t va, bool store, uint64_t value, bool upgrade) {
        NodeState& nd = nodes_[n];
        PendingFill& f = nd.fill;
        f = PendingFill{};
        f.active = true;
        f.is_store = store;
        f.upgrade = upgrade;
        f.va = va;
        f.issue = nd.cycle;
        f.new_value = value;
        if (upgrade) {
            // the data is already here; only permission is missing
            f.have_data = true;
            f.data_time = nd.cycle;
        }
        Msg m;
        m.kind = store ? MsgKind::WriteReq : MsgKind::ReadReq;
        m.src = n;
        m.dst = home(va);
        m.va = va;
        m.requestor = n;
        m.for_write = store;
        m.upgrade = upgrade;
        send(m, nd.cycle);
    }

    void send(Msg m, uint64_t t) {
        m.id = ++msg_id_;
        if (cfg_.tcm) guard_.stamp(m, t);
        for (size_t i = 0; i < plan_.size(); i++) {
            if (plan_used_[i] || t < plan_[i].at) continue;
            if (plan_[i].kind == AdversaryKind::DropInvalidate && m.kind == MsgKind::Invalidate &&
                m.src != m.dst) {
                plan_used_[i] = true;
                injections_++;
                Msg forged;
                forged.kind = MsgKind::InvAck;
                forged.src = m.dst;
                forged.dst = m.requestor;
                forged.va = m.va;
                forged.requestor = m.requestor;
                forged.ts = 1;
                forged.mac = 0;
                deliver(forged, t);
                return; // the real invalidation never arrives
            }
            if (plan_[i].kind == AdversaryKind::ForgeData && m.kind == MsgKind::DataResp &&
                m.src != m.dst) {
                plan_used_[i] = true;
                injections_++;
                if (m.has_sealed) m.sealed.cipher[7] ^= 0x40;
                else m.value ^= 1ull << 40;
            }
        }
        if (m.kind == MsgKind::DataResp && m.src != m.dst) {
            if (wire_log_.size() < 4096) wire_log_.push_back(m);
        }
        deliver(m, t);
    }

    void deliver(const Msg& m, uint64_t t) {
        uint64_t arrival = t + (m.src == m.dst ? 0 : cfg_.hop_cycles);
        if (m.src != m.dst) {
            st_.directory_messages++;
            st_.traffic_bytes += msg_bytes(m, cfg_.tcm);
        }
        events_.push({arrival, m.dst, ++seq_, m, -1, 0});
    }

    void tamper(uint64_t t) {
        st_.tamper_detections++;
        st_.halts_integrity = 1;
        halted_ = true;
        halt_time_ = t;
    }

    void fire(const Event& ev) {
        const AdversaryAction& act = plan_[ev.trigger];
        if (act.kind == AdversaryKind::ReplayMsg) {
            if (wire_log_.empty()) return;
            plan_used_[ev.trigger] = true;
            injections_++;
            const Msg& m = wire_log_[rng_.uniform(wire_log_.size())];
            st_.directory_messages++;
            st_.traffic_bytes += msg_bytes(m, cfg_.tcm);
            events_.push({ev.time + cfg_.hop_cycles, m.dst, ++seq_, m, -1, 0});
            return;
        }
        if (act.kind == AdversaryKind::RevertMemory) {
            int n = act.node >= 0 && act.node < cfg_.nodes ? act.node
                                                           : static_cast<int>(rng_.uniform(cfg_.nodes));
            NodeState& nd = nodes_[n];
            if (ev.phase == 0) {
                Snapshot& s = snaps_[ev.trigger];
                s.node = n;
                s.plain = nd.plain_mem;
                s.sealed = nd.sealed_mem;
                if (nd.counters)
                    for (size_t i = 0; i < nd.counters->counter_blocks(); i++)
                        s.counter_blocks.push_back(nd.counters->raw_counter_block(i));
                if (nd.residency)
                    for (size_t i = 0; i < nd.residency->blocks(); i++)
                        s.leaf_words.push_back(nd.residency->raw_leaf_word(i));
                return;
            }
            auto it = snaps_.find(ev.trigger);
            if (it == snaps_.end()) return;
            Snapshot& s = it->second;
            NodeState& vd = nodes_[s.node];
            vd.plain_mem = s.plain;
            vd.sealed_mem = s.sealed;
            if (vd.counters) {
                for (size_t i = 0; i < s.counter_blocks.size(); i++)
                    vd.counters->raw_counter_block(i) = s.counter_blocks[i];
                // off-chip state went backwards in time; the next cold fetch
                // re-verifies against the on-chip root
                vd.counters->evict_all_cached();
            }
            if (vd.residency) {
                for (size_t i = 0; i < s.leaf_words.size(); i++)
                    vd.residency->raw_set_leaf_word(i, s.leaf_words[i]);
                vd.residency->drop_caches();
            }
            plan_used_[ev.trigger] = true;
            injections_++;
        }
    }

    void handle(Msg m, uint64_t t) {
        if (cfg_.tcm && !guard_.verify(m)) {
            tamper(t);
            return;
        }
        switch (m.kind) {
        case MsgKind::ReadReq:
        case MsgKind::WriteReq: {
            DirEntry& e = dir_[m.va];
            if (e.busy) {
                e.pending.push_back(m);
                st_.requests_redirected++;
                return;
            }
            resolve(m, t, true);
            return;
        }
        case MsgKind::Forward: on_forward(m, t); return;
        case MsgKind::Redirect:
            st_.requests_redirected++;
            data_leg(m.requestor, m.va, m.for_write, t);
            return;
        case MsgKind::Invalidate: on_invalidate(m, t); return;
        case MsgKind::InvAck: {
            PendingFill& f = nodes_[m.dst].fill;
            if (!f.active || f.va != m.va || !f.is_store) return;
            f.got++;
            f.last_ack = std::max(f.last_ack, t);
            try_commit(m.dst, t);
            return;
        }
        case MsgKind::AckCount: {
            PendingFill& f = nodes_[m.dst].fill;
            if (!f.active || f.va != m.va) return;
            f.resolved = true;
            if (m.inv_count != kNoCount) {
                f.count_known = true;
                f.need = m.inv_count;
            }
            if (m.serve_local) local_serve(m.dst, m.va, t);
            if (!halted_) try_commit(m.dst, t);
            return;
        }
        case MsgKind::DataResp: on_data(m, t); return;
        case MsgKind::InstallAck: {
            DirEntry& e = dir_[m.va];
            e.busy = false;
            e.home_valid = false;
            if (dit_) nodes_[home(m.va)].residency->invalidate(home_idx_.at(m.va));
            while (!e.busy && !e.pending.empty()) {
                Msg q = e.pending.front();
                e.pending.pop_front();
                resolve(q, t, false);
            }
            return;
        }
        }
    }

    // First resolution of a request at the block's home directory.
    void resolve(const Msg& req, uint64_t t, bool immediate) {
        st_.requests_served++;
        if (immediate) st_.served_immediately++;
        DirEntry& e = dir_[req.va];
        int r = req.requestor;
        if (!req.for_write) {
            if (home(req.va) != r) {
                // ordering marker: tells the requestor its read is bound to
                // the pre-write value of any later write
                Msg a;
                a.kind = MsgKind::AckCount;
                a.src = home(req.va);
                a.dst = r;
                a.va = req.va;
                a.requestor = r;
                send(a, t);
            } else {
                // the home is the requestor, resolution is local knowledge
                PendingFill& f = nodes_[r].fill;
                if (f.active && f.va == req.va && !f.is_store) f.resolved = true;
            }
            data_leg(r, req.va, false, t);
            return;
        }
        std::set<int> targets = e.sharers;
        targets.erase(r);
        bool upgrade_ok = req.upgrade && e.sharers.count(r) && e.owner < 0;
        if (upgrade_ok) st_.wrong_state_hits++;
        else data_leg(r, req.va, true, t);
        if (halted_) return;
        for (int s : targets) {
            Msg inv;
            inv.kind = MsgKind::Invalidate;
            inv.src = home(req.va);
            inv.dst = s;
            inv.va = req.va;
            inv.requestor = r;
            send(inv, t);
        }
        Msg a;
        a.kind = MsgKind::AckCount;
        a.src = home(req.va);
        a.dst = r;
        a.va = req.va;
        a.requestor = r;
        a.inv_count = static_cast<uint32_t>(targets.size());
        send(a, t);
        e.sharers.clear();
        e.owner = r;
        e.busy = true;
    }

    // Data delivery path, shared by first resolutions and redirect bounces:
    // forward to the modified holder if one exists, otherwise serve from the
    // home (cache hit, verified memory read, or a local grant when the
    // requestor is the home itself).
    void data_leg(int r, uint64_t va, bool for_write, uint64_t t) {
        DirEntry& e = dir_[va];
        int h = home(va);
        // every read serve records the requestor, redirect bounces included;
        // a reader the directory forgets would never see an invalidate again
        if (!for_write) e.sharers.insert(r);
        if (!for_write && e.busy) {
            // a redirected read caught mid write-install: the home still holds
            // the pre-write copy and serving it needs no acks from anyone
            if (!e.home_valid) throw std::logic_error("block has no servable copy");
            grant_serve_pad(h, t);
            station_serve(h, r, va, false, nodes_[h].cache.count(va) > 0, t);
            return;
        }
        if (e.owner >= 0 && e.owner != r) {
            // a read leaves the serving owner with a clean copy, track it
            if (!for_write) e.sharers.insert(e.owner);
            Msg f;
            f.kind = MsgKind::Forward;
            f.src = h;
            f.dst = e.owner;
            f.va = va;
            f.requestor = r;
            f.for_write = for_write;
            if (scheme_ == Scheme::sdsm) f.replenish = ledger_.next();
            send(f, t);
            return;
        }
        NodeState& hm = nodes_[h];
        if (h != r && hm.cache.count(va)) {
            grant_serve_pad(h, t);
            station_serve(h, r, va, for_write, true, t);
            return;
        }
        if (!e.home_valid) throw std::logic_error("block has no servable copy");
        if (h == r) {
            Msg a;
            a.kind = MsgKind::AckCount;
            a.src = h;
            a.dst = r;
            a.va = va;
            a.requestor = r;
            a.serve_local = true;
            a.for_write = for_write;
            send(a, t);
            return;
        }
        grant_serve_pad(h, t);
        station_serve(h, r, va, for_write, false, t);
    }

    // A fresh ledger seed for a home-side serve; forwards carry theirs in the
    // message instead. The keystream engine is pipelined: a granted pad is
    // ready one generation latency later, the queue depth is the slack.
    void grant_serve_pad(int s, uint64_t t) {
        if (scheme_ != Scheme::sdsm) return;
        nodes_[s].fifo.push(ledger_.next(), t + cfg_.kb_cycles);
    }

    // One transfer through a node's serve station: fetch (if the copy is in
    // memory), encrypt per scheme, send. The station serializes and the send
    // slot waits for the pad when encryption is not ready.
    void station_serve(int s, int r, uint64_t va, bool for_write, bool cached, uint64_t t) {
        NodeState& nd = nodes_[s];
        uint64_t start = std::max(t, nd.station_free);
        uint64_t fetch_done = start + (cached ? 0 : cfg_.mem_cycles);
        uint64_t send_time = fetch_done;
        uint64_t value;
        if (cached) {
            value = nd.cache.at(va).value;
        } else {
            auto v = open_local(s, va);
            if (!v) {
                tamper(fetch_done);
                return;
            }
            value = *v;
        }
        Msg d;
        d.kind = MsgKind::DataResp;
        d.src = s;
        d.dst = r;
        d.va = va;
        d.requestor = r;
        d.for_write = for_write;
        // the station is the memory port; the keystream engine runs beside
        // it, so pad time delays the response but not the next serve
        uint64_t port_busy = fetch_done;
        if (scheme_ == Scheme::none) {
            d.value = value;
        } else {
            Seed seed;
            uint64_t pad_ready = 0;
            if (scheme_ == Scheme::sdsm) {
                PadEntry p = nd.fifo.consume();
                seed = p.seed;
                pad_ready = p.ready_at;
            } else if (auto bp = nd.buffer.take(va)) {
                seed = bp->seed;
                pad_ready = bp->ready_at;
            } else {
                // no buffered pad: the per-block counter comes from memory
                // and keystream generation starts only once it arrives
                seed = ++nd.fab_counter[va];
                uint64_t seed_done = cached ? fetch_done + cfg_.mem_cycles : fetch_done;
                port_busy = seed_done;
                send_time = seed_done + cfg_.kb_cycles;
            }
            if (pad_ready > send_time) {
                st_.evict_kb_waits++;
                evict_delay_sum_ += pad_ready - send_time;
                send_time = pad_ready;
            }
            d.sealed = seal_block(fabric_prf_, seed, va, block_from_value(value));
            d.has_sealed = true;
        }
        nd.station_free = port_busy;
        send(d, send_time);
    }

    void on_forward(const Msg& m, uint64_t t) {
        NodeState& nd = nodes_[m.dst];
        auto it = nd.cache.find(m.va);
        if (it == nd.cache.end()) {
            // the copy left this cache while the forward was in flight
            Msg rd;
            rd.kind = MsgKind::Redirect;
            rd.src = m.dst;
            rd.dst = home(m.va);
            rd.va = m.va;
            rd.requestor = m.requestor;
            rd.for_write = m.for_write;
            send(rd, t);
            return;
        }
        if (scheme_ == Scheme::sdsm && m.replenish != 0)
            nd.fifo.push(m.replenish, t + cfg_.kb_cycles);
        uint64_t value = it->second.value;
        station_serve(m.dst, m.requestor, m.va, m.for_write, true, t);
        if (halted_) return;
        if (m.for_write) {
            erase_line(m.dst, m.va); // ownership moves with the data
        } else if (it->second.dirty) {
            writeback(m.dst, m.va, value, t);
            it->second.dirty = false;
        }
    }

    void on_invalidate(const Msg& m, uint64_t t) {
        NodeState& nd = nodes_[m.dst];
        PendingFill& f = nd.fill;
        if (f.active && f.va == m.va && !f.is_store && (f.resolved || f.have_data)) {
            // the directory ordered this load before the writer, so the kill
            // applies after its install and the load still counts first; an
            // unresolved load is still queued behind the writer and must not
            // withhold the ack it is indirectly waiting on
            f.deferred.push_back(m);
            return;
        }
        auto it = nd.cache.find(m.va);
        if (it != nd.cache.end()) {
            if (it->second.dirty) writeback(m.dst, m.va, it->second.value, t);
            erase_line(m.dst, m.va);
        }
        Msg ack;
        ack.kind = MsgKind::InvAck;
        ack.src = m.dst;
        ack.dst = m.requestor;
        ack.va = m.va;
        ack.requestor = m.requestor;
        send(ack, t);
    }

    void on_data(const Msg& m, uint64_t t) {
        int n = m.dst;
        PendingFill& f = nodes_[n].fill;
        if (!f.active || f.va != m.va || f.is_store != m.for_write) return; // stray or stale
        if (m.has_sealed) {
            auto clear = open_block(fabric_prf_, m.sealed, m.sealed.seed);
            if (!clear) {
                tamper(t);
                return;
            }
            f.value = value_from_block(*clear);
            // the seed rides the header flit, so pad generation overlaps the
            // flight; only the excess beyond the hop stalls the requestor
            uint64_t stall =
                (m.src != n && cfg_.kb_cycles > cfg_.hop_cycles) ? cfg_.kb_cycles - cfg_.hop_cycles : 0;
            if (stall > 0) {
                st_.fetch_kb_waits++;
                fetch_delay_sum_ += stall;
            }
            f.data_time = t + stall;
        } else {
            f.value = m.value;
            f.data_time = t;
        }
        f.have_data = true;
        f.resolved = true;
        f.data_remote = m.src != n;
        try_commit(n, t);
    }

    void local_serve(int n, uint64_t va, uint64_t t) {
        NodeState& nd = nodes_[n];
        uint64_t start = std::max(t, nd.station_free);
        uint64_t done = start + cfg_.mem_cycles;
        auto v = open_local(n, va);
        if (!v) {
            tamper(done);
            return;
        }
        nd.station_free = done;
        PendingFill& f = nd.fill;
        f.value = *v;
        f.have_data = true;
        f.data_time = done;
        f.data_remote = false;
    }

    void try_commit(int n, uint64_t now) {
        NodeState& nd = nodes_[n];
        PendingFill& f = nd.fill;
        if (!f.have_data) return;
        if (f.is_store && (!f.count_known || f.got < f.need)) return;
        // never earlier than the message that completed the fill
        uint64_t ct = std::max({f.data_time, f.last_ack, now});
        if (f.is_store) {
            expected_[f.va] = f.new_value;
            install_line(n, f.va, f.new_value, true, ct);
            refresh_pad_buffer(n, f.va, ct);
            Msg ia;
            ia.kind = MsgKind::InstallAck;
            ia.src = n;
            ia.dst = home(f.va);
            ia.va = f.va;
            ia.requestor = n;
            send(ia, ct);
            nd.store_cyc += ct - f.issue + cfg_.alu_cycles;
            nd.store_n++;
        } else {
            oracle_load(f.va, f.value);
            install_line(n, f.va, f.value, false, ct);
            nd.load_cyc += ct - f.issue + cfg_.alu_cycles;
            nd.load_n++;
        }
        if (f.data_remote) st_.node_misses++;
        std::vector<Msg> deferred = std::move(f.deferred);
        f = PendingFill{};
        nd.instr++;
        nd.cycle = ct + cfg_.alu_cycles;
        nd.ip++;
        for (Msg& m : deferred) {
            if (nd.cache.count(m.va)) erase_line(n, m.va);
            Msg ack;
            ack.kind = MsgKind::InvAck;
            ack.src = n;
            ack.dst = m.requestor;
            ack.va = m.va;
            ack.requestor = m.requestor;
            send(ack, ct);
        }
        advance(n);
    }

    void finalize() {
        uint64_t total = halt_time_;
        uint64_t instr_sum = 0, cyc_sum = 0;
        uint64_t alu_n = 0, load_n = 0, store_n = 0;
        uint64_t alu_c = 0, load_c = 0, store_c = 0;
        for (const NodeState& nd : nodes_) {
            total = std::max(total, nd.cycle);
            instr_sum += nd.instr;
            cyc_sum += nd.cycle;
            alu_n += nd.alu_n;
            load_n += nd.load_n;
            store_n += nd.store_n;
            alu_c += nd.alu_cyc;
            load_c += nd.load_cyc;
            store_c += nd.store_cyc;
        }
        if (!halted_) {
            for (size_t i = 0; i < nodes_.size(); i++) {
                const NodeState& nd = nodes_[i];
                if (!nd.done || nd.fill.active) {
                    char buf[160];
                    snprintf(buf, sizeof buf,
                             "simulation wedged: node %zu ip=%zu fill{active=%d store=%d va=%llx "
                             "have_data=%d count_known=%d got=%llu need=%llu}",
                             i, nd.ip, nd.fill.active ? 1 : 0, nd.fill.is_store ? 1 : 0,
                             (unsigned long long)nd.fill.va, nd.fill.have_data ? 1 : 0,
                             nd.fill.count_known ? 1 : 0, (unsigned long long)nd.fill.got,
                             (unsigned long long)nd.fill.need);
                    throw std::logic_error(buf);
                }
            }
        }
        st_.total_cycles = total;
        st_.load_checksum = checksum_;
        st_.per_core_instr_avg = instr_sum ? static_cast<double>(cyc_sum) / instr_sum : 0.0;
        st_.per_type_alu_avg = alu_n ? static_cast<double>(alu_c) / alu_n : 0.0;
        st_.per_type_load_avg = load_n ? static_cast<double>(load_c) / load_n : 0.0;
        st_.per_type_store_avg = store_n ? static_cast<double>(store_c) / store_n : 0.0;
        st_.avg_evict_kb_delay =
            st_.evict_kb_waits ? static_cast<double>(evict_delay_sum_) / st_.evict_kb_waits : 0.0;
        st_.avg_fetch_kb_delay =
            st_.fetch_kb_waits ? static_cast<double>(fetch_delay_sum_) / st_.fetch_kb_waits : 0.0;
    }

    struct Snapshot {
        int node = 0;
        std::map<uint64_t, uint64_t> plain;
        std::map<uint64_t, SealedBlock> sealed;
        std::vector<Block64> counter_blocks;
        std::vector<uint64_t> leaf_words;
    };

    SimConfig cfg_;
    Scheme scheme_;
    std::optional<DitVariant> dit_;
    const Workload* wl_;
    Prf fabric_prf_;
    FabricGuard guard_;
    TcmSeedLedger ledger_;
    Rng rng_;
    std::vector<NodeState> nodes_;
    std::map<uint64_t, DirEntry> dir_;
    std::map<uint64_t, size_t> home_idx_;
    std::map<uint64_t, uint64_t> expected_;
    std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
    uint64_t seq_ = 0;
    uint64_t msg_id_ = 0;
    bool halted_ = false;
    uint64_t halt_time_ = 0;
    StatsReport st_;
    uint64_t evict_delay_sum_ = 0;
    uint64_t fetch_delay_sum_ = 0;
    uint64_t checksum_ = 0;
    std::vector<AdversaryAction> plan_;
    std::vector<bool> plan_used_;
    std::vector<Msg> wire_log_;
    std::map<int, Snapshot> snaps_;
    uint64_t injections_ = 0;
};

} // namespace

SimConfig parse_config(const std::string& text) {
    SimConfig c;
    std::istringstream in(text);
    std::string raw;
    size_t line = 0;
    while (std::getline(in, raw)) {
        line++;
        size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.resize(hash);
        std::string s = trim(raw);
        if (s.empty()) continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("line " + std::to_string(line) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key == "nodes") c.nodes = static_cast<int>(parse_u64(val, key));
        else if (key == "scheme") c.scheme = val;
        else if (key == "dit") c.dit = val;
        else if (key == "tcm") {
            if (val == "on") c.tcm = true;
            else if (val == "off") c.tcm = false;
            else throw std::runtime_error("tcm must be on or off, got '" + val + "'");
        } else if (key == "alu_cycles") c.alu_cycles = parse_u64(val, key);
        else if (key == "mem_cycles") c.mem_cycles = parse_u64(val, key);
        else if (key == "hop_cycles") c.hop_cycles = parse_u64(val, key);
        else if (key == "kb_cycles") c.kb_cycles = parse_u64(val, key);
        else if (key == "cache_lines") c.cache_lines = parse_u64(val, key);
        else if (key == "fifo_capacity") c.fifo_capacity = parse_u64(val, key);
        else if (key == "rng_seed") c.rng_seed = parse_u64(val, key);
        else if (key == "adversary") c.adversary = val;
        else throw std::runtime_error("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    validate_config(c);
    return c;
}

std::string render_config(const SimConfig& c) {
    std::ostringstream out;
    out << "nodes = " << c.nodes << "\n";
    out << "scheme = " << c.scheme << "\n";
    out << "dit = " << c.dit << "\n";
    out << "tcm = " << (c.tcm ? "on" : "off") << "\n";
    out << "alu_cycles = " << c.alu_cycles << "\n";
    out << "mem_cycles = " << c.mem_cycles << "\n";
    out << "hop_cycles = " << c.hop_cycles << "\n";
    out << "kb_cycles = " << c.kb_cycles << "\n";
    out << "cache_lines = " << c.cache_lines << "\n";
    out << "fifo_capacity = " << c.fifo_capacity << "\n";
    out << "rng_seed = " << c.rng_seed << "\n";
    out << "adversary = " << c.adversary << "\n";
    return out.str();
}

std::vector<std::pair<std::string, double>> StatsReport::columns() const {
    return {
        {"avg_evict_kb_delay", avg_evict_kb_delay},
        {"avg_fetch_kb_delay", avg_fetch_kb_delay},
        {"directory_messages", static_cast<double>(directory_messages)},
        {"evict_kb_waits", static_cast<double>(evict_kb_waits)},
        {"fetch_kb_waits", static_cast<double>(fetch_kb_waits)},
        {"halts_bad_attach", static_cast<double>(halts_bad_attach)},
        {"halts_illegal_entry", static_cast<double>(halts_illegal_entry)},
        {"halts_integrity", static_cast<double>(halts_integrity)},
        {"halts_migration_tamper", static_cast<double>(halts_migration_tamper)},
        {"halts_missing_tsc", static_cast<double>(halts_missing_tsc)},
        {"halts_secure_access", static_cast<double>(halts_secure_access)},
        {"load_checksum", static_cast<double>(load_checksum)},
        {"node_misses", static_cast<double>(node_misses)},
        {"per_core_instr_avg", per_core_instr_avg},
        {"per_type_alu_avg", per_type_alu_avg},
        {"per_type_load_avg", per_type_load_avg},
        {"per_type_store_avg", per_type_store_avg},
        {"requests_redirected", static_cast<double>(requests_redirected)},
        {"requests_served", static_cast<double>(requests_served)},
        {"served_immediately", static_cast<double>(served_immediately)},
        {"silent_corruption", static_cast<double>(silent_corruption)},
        {"tamper_detections", static_cast<double>(tamper_detections)},
        {"total_cycles", static_cast<double>(total_cycles)},
        {"traffic_bytes", static_cast<double>(traffic_bytes)},
        {"wrong_state_hits", static_cast<double>(wrong_state_hits)},
    };
}

RunResult run_simulation(const SimConfig& cfg, const Workload& wl,
                         const std::vector<AdversaryAction>& extra) {
    Engine eng(cfg, wl, extra);
    return eng.run();
}

AttackOutcome run_stale_read_attack(bool tcm_on) {
    // Three nodes: node 0 stores to a block node 1 already shares, the
    // invalidation is dropped and an ack forged, node 1 later re-reads its
    // cached copy. The unrelated load in between pins the re-read after the
    // store in commit order, so the stale hit is a real violation.
    Workload wl;
    wl.threads.resize(3);
    const uint64_t x = 2 * kBlockBytes; // block 2 lives on node 2
    const uint64_t y = 5 * kBlockBytes;
    auto& a = wl.threads[0];
    a.push_back({TraceOp::Alu, 0});
    a.push_back({TraceOp::Alu, 0});
    a.push_back({TraceOp::Alu, 0});
    a.push_back({TraceOp::Store, x});
    auto& b = wl.threads[1];
    b.push_back({TraceOp::Load, x});
    for (int i = 0; i < 600; i++) b.push_back({TraceOp::Alu, 0});
    b.push_back({TraceOp::Load, y});
    b.push_back({TraceOp::Load, x});

    SimConfig cfg;
    cfg.nodes = 3;
    cfg.scheme = "sdsm";
    cfg.tcm = tcm_on;
    RunResult rr = run_simulation(cfg, wl, {{AdversaryKind::DropInvalidate, 0, 0, -1}});
    AttackOutcome out;
    out.tamper_detected = rr.stats.tamper_detections > 0;
    out.silent_corruptions = rr.stats.silent_corruption;
    out.stats = rr.stats;
    return out;
}

CampaignSummary run_adversary_campaign(uint64_t base_seed, int runs) {
    CampaignSummary cs;
    cs.runs = runs;
    Rng rng(base_seed ^ 0xbadacc0ull);
    for (int i = 0; i < runs; i++) {
        SynthParams wp;
        wp.nodes = 6;
        wp.instrs_per_node = 2000;
        wp.target_node_miss_rate = 0.10;
        wp.store_fraction = 0.3;
        wp.shared_region_blocks = 64;
        wp.private_region_blocks = 32;
        wp.rng_seed = base_seed * 1000003ull + i;
        Workload wl = gen_synthetic(wp);

        SimConfig cfg;
        cfg.nodes = 6;
        cfg.scheme = "sdsm";
        cfg.tcm = true;
        cfg.cache_lines = 64;
        cfg.rng_seed = wp.rng_seed;

        int k = 2 + static_cast<int>(rng.uniform(2));
        std::vector<AdversaryAction> plan;
        for (int j = 0; j < k; j++) {
            AdversaryKind kinds[4] = {AdversaryKind::DropInvalidate, AdversaryKind::ReplayMsg,
                                      AdversaryKind::ForgeData, AdversaryKind::RevertMemory};
            AdversaryKind kind = kinds[rng.uniform(4)];
            uint64_t at = 200 + rng.uniform(15000);
            plan.push_back({kind, at, at + 500 + rng.uniform(2000), static_cast<int>(rng.uniform(6))});
        }
        RunResult rr = run_simulation(cfg, wl, plan);
        cs.injections += rr.injections;
        // silent events count even when the run also raised a detection
        cs.silent += rr.stats.silent_corruption;
        if (rr.stats.silent_corruption > 0) continue;
        if (rr.stats.tamper_detections > 0) cs.detected++;
        else cs.clean++;
    }
    return cs;
}

} // namespace semsim
