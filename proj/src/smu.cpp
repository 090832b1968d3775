#include "semsim/smu.hpp"

#include <algorithm>

namespace semsim {

namespace {

constexpr uint64_t kContextSpace = 0xc0de0000ull;
constexpr uint64_t kEntrySpace = 0xb1000000ull;
constexpr uint64_t kThreadSpace = 0xb2000000ull;
constexpr uint64_t kNoValue = ~0ull;

void pack_regs(std::vector<uint64_t>& w, const RegisterFile& r) {
    for (uint64_t a : r.arg) w.push_back(a);
    w.push_back(r.retaddr);
    w.push_back(r.retval);
    for (uint64_t g : r.gp) w.push_back(g);
}

RegisterFile unpack_regs(const std::vector<uint64_t>& w, size_t& i) {
    RegisterFile r;
    for (auto& a : r.arg) a = w[i++];
    r.retaddr = w[i++];
    r.retval = w[i++];
    for (auto& g : r.gp) g = w[i++];
    return r;
}

} // namespace

const char* to_string(HaltReason r) {
    switch (r) {
    case HaltReason::IllegalEntry: return "illegal_entry";
    case HaltReason::SecureAccessViolation: return "secure_access";
    case HaltReason::MissingTsc: return "missing_tsc";
    case HaltReason::BadAttach: return "bad_attach";
    case HaltReason::IntegrityError: return "integrity";
    case HaltReason::MigrationTamper: return "migration_tamper";
    }
    return "unknown";
}

SmuState::SmuState(uint64_t node_key_seed)
    : node_prf_(derive_key(node_key_seed, 0x736d755f6b657900ull)) {}

size_t SmuState::install_entry(const SmuTableEntry& e) {
    table_.push_back(e);
    return table_.size() - 1;
}

void SmuState::set_pid(size_t slot, uint32_t pid) {
    table_[slot].pid = pid;
    cur_slot_ = slot;
    cur_pid_ = pid;
    // launch context: the only legal first entry is the registered one, with
    // whatever registers the loader hands over
    sss_ = SecretContext{};
    sss_.valid = true;
    sss_.first_entry = true;
    sss_.pid = pid;
    sss_.lep = table_[slot].first_lep;
}

uint32_t SmuState::get_results() const {
    if (halted_) return 0x100u + static_cast<uint32_t>(*halted_);
    return table_.empty() ? 0 : table_[cur_slot_].error_status;
}

void SmuState::bind_stacks(std::vector<uint64_t>* secure, std::vector<uint64_t>* nonsecure) {
    ss_ = secure;
    nss_ = nonsecure;
}

void SmuState::halt(HaltReason r) {
    if (!halted_) halted_ = r;
}

void SmuState::mark_syscall(unsigned argnum) {
    if (halted_) return;
    if (mode_ != Mode::Trusted || argnum > regs_.arg.size()) {
        halt(HaltReason::SecureAccessViolation);
        return;
    }
    pending_syscall_ = argnum;
    pending_callnosec_.reset();
}

void SmuState::mark_callnosec(unsigned argnum) {
    if (halted_) return;
    if (mode_ != Mode::Trusted || argnum > regs_.arg.size()) {
        halt(HaltReason::SecureAccessViolation);
        return;
    }
    pending_callnosec_ = argnum;
    pending_syscall_.reset();
}

void SmuState::clear_registers_for_exit() {
    RegisterFile cleared;
    unsigned keep = 0;
    if (pending_syscall_) keep = *pending_syscall_;
    if (pending_callnosec_) keep = *pending_callnosec_;
    for (unsigned i = 0; i < keep; ++i) cleared.arg[i] = regs_.arg[i];
    if (pending_syscall_) cleared.retaddr = regs_.retaddr;
    regs_ = cleared;
}

void SmuState::switch_to_untrusted(uint64_t resume, bool signal_exit) {
    if (halted_) return;
    if (signal_exit) {
        // handler return: the interrupted context stays stored, only the
        // handler's register values must not leak
        in_signal_ = false;
        regs_ = RegisterFile{};
        pending_syscall_.reset();
        pending_callnosec_.reset();
        mode_ = Mode::Untrusted;
        return;
    }
    sss_ = SecretContext{};
    sss_.valid = true;
    sss_.pid = cur_pid_;
    sss_.lep = resume;
    sss_.regs = regs_;
    if (pending_syscall_) sss_.last_exit = ExitKind::Syscall;
    else if (pending_callnosec_) sss_.last_exit = ExitKind::CallNoSec;
    else sss_.last_exit = ExitKind::None;
    clear_registers_for_exit();
    pending_syscall_.reset();
    pending_callnosec_.reset();
    mode_ = Mode::Untrusted;
}

std::optional<EnterKind> SmuState::try_enter_trusted(uint64_t at, uint32_t tid) {
    if (halted_) return std::nullopt;
    if (table_.empty()) {
        halt(HaltReason::IllegalEntry);
        return std::nullopt;
    }
    if (sss_.valid && sss_.pid == cur_pid_ && sss_.lep == at) {
        if (sss_.first_entry) {
            sss_.valid = false;
            mode_ = Mode::Trusted;
            return EnterKind::First;
        }
        ExitKind ek = sss_.last_exit;
        uint64_t produced = regs_.retval;
        regs_ = sss_.regs;
        // a syscall or untrusted callee hands its result back in retval
        if (ek == ExitKind::Syscall || ek == ExitKind::CallNoSec) regs_.retval = produced;
        sss_.valid = false;
        mode_ = Mode::Trusted;
        return EnterKind::Resume;
    }
    const SmuTableEntry& e = table_[cur_slot_];
    if (e.sig_lep && *e.sig_lep == at && !in_signal_) {
        in_signal_ = true;
        mode_ = Mode::Trusted;
        return EnterKind::Signal;
    }
    for (auto it = tscs_.begin(); it != tscs_.end(); ++it) {
        if (it->active && it->tid == tid && it->lep == at) {
            uint64_t produced = regs_.retval;
            regs_ = it->regs;
            regs_.retval = produced;
            consumed_tids_[tid] = true;
            tscs_.erase(it);
            mode_ = Mode::Trusted;
            return EnterKind::Thread;
        }
    }
    if (deleted_tids_.count(tid)) {
        halt(HaltReason::MissingTsc);
        return std::nullopt;
    }
    halt(HaltReason::IllegalEntry);
    return std::nullopt;
}

LineState& SmuState::line(uint64_t va) { return mem_[va & ~(kBlockBytes - 1ull)]; }

bool SmuState::secure_access(AccessOp op, uint64_t va, bool instr_auth) {
    (void)op;
    if (halted_) return false;
    LineState& l = line(va);
    bool allowed = l.auth == instr_auth && (!l.auth || l.owner_pid == cur_pid_);
    if (!allowed) halt(HaltReason::SecureAccessViolation);
    return allowed;
}

bool SmuState::smu_store_na(uint64_t va, uint64_t value, bool instr_auth) {
    if (halted_) return false;
    if (!instr_auth) {
        halt(HaltReason::SecureAccessViolation);
        return false;
    }
    LineState& l = line(va);
    l.value = value;
    l.auth = false; // handing data to untrusted code strips the mark
    return true;
}

std::optional<uint64_t> SmuState::smu_load_na(uint64_t va, bool instr_auth) {
    if (halted_) return std::nullopt;
    LineState& l = line(va);
    if (!instr_auth || l.auth) {
        halt(HaltReason::SecureAccessViolation);
        return std::nullopt;
    }
    return l.value;
}

bool SmuState::smu_init_a(uint64_t va, uint64_t size, bool instr_auth) {
    if (halted_) return false;
    if (!instr_auth) {
        halt(HaltReason::SecureAccessViolation);
        return false;
    }
    uint64_t first = va & ~(kBlockBytes - 1ull);
    for (uint64_t b = first; b < va + size; b += kBlockBytes)
        mem_[b] = LineState{true, cur_pid_, 0};
    return true;
}

bool SmuState::push_na(uint64_t value, bool instr_auth) {
    if (halted_) return false;
    if (!instr_auth || nss_ == nullptr) {
        halt(HaltReason::SecureAccessViolation);
        return false;
    }
    nss_->push_back(value);
    return true;
}

std::optional<uint64_t> SmuState::pop_na(bool instr_auth) {
    if (halted_) return std::nullopt;
    if (!instr_auth || nss_ == nullptr || nss_->empty()) {
        halt(HaltReason::SecureAccessViolation);
        return std::nullopt;
    }
    uint64_t v = nss_->back();
    nss_->pop_back();
    return v;
}

std::optional<uint32_t> SmuState::thread_create(uint64_t pc, uint32_t parent_tid,
                                                bool instr_auth) {
    if (halted_) return std::nullopt;
    if (!instr_auth) {
        halt(HaltReason::SecureAccessViolation);
        return std::nullopt;
    }
    ThreadContext t;
    t.scid = next_scid_++;
    t.lep = pc + 2; // past the creation instruction and the kernel call
    t.parent_tid = parent_tid;
    t.regs = regs_;
    t.regs.retval = 0;
    tscs_.push_back(t);
    regs_.retval = t.scid;
    return t.scid;
}

bool SmuState::thread_attach(uint32_t tid, uint64_t addr) {
    if (halted_) return false;
    for (auto& t : tscs_) {
        if (!t.active && t.lep == addr) {
            t.active = true;
            t.tid = tid;
            return true;
        }
    }
    halt(HaltReason::BadAttach);
    return false;
}

bool SmuState::thread_discard_scid(uint32_t scid, bool instr_auth) {
    if (halted_) return false;
    if (!instr_auth) {
        halt(HaltReason::SecureAccessViolation);
        return false;
    }
    for (auto it = tscs_.begin(); it != tscs_.end(); ++it) {
        if (it->scid == scid) {
            if (it->active) break; // a bound context is no longer discardable
            tscs_.erase(it);
            return true;
        }
    }
    halt(HaltReason::BadAttach);
    return false;
}

void SmuState::thread_discard_tid(uint32_t tid) {
    if (halted_) return;
    for (auto it = tscs_.begin(); it != tscs_.end(); ++it) {
        if (it->active && it->tid == tid) {
            tscs_.erase(it);
            deleted_tids_.insert(tid);
            return;
        }
    }
    if (consumed_tids_.count(tid)) {
        consumed_tids_.erase(tid);
        deleted_tids_.insert(tid);
    }
}

bool SmuState::signal_entry_available() const {
    return !table_.empty() && table_[cur_slot_].sig_lep.has_value() && !in_signal_;
}

SealedContext SmuState::seal_words(const Prf& prf, const std::vector<uint64_t>& words,
                                   uint64_t space) {
    SealedContext c;
    size_t nblocks = (words.size() + 7) / 8;
    for (size_t b = 0; b < nblocks; ++b) {
        Block64 clear = zero_block();
        for (size_t k = 0; k < 8; ++k) {
            size_t i = b * 8 + k;
            put_le64(clear.data() + k * 8, i < words.size() ? words[i] : 0);
        }
        c.blocks.push_back(seal_block(prf, ++ctx_seed_, space + b * kBlockBytes, clear));
    }
    return c;
}

std::optional<std::vector<uint64_t>> SmuState::open_words(const Prf& prf, const SealedContext& c,
                                                          uint64_t space, size_t count) {
    std::vector<uint64_t> words;
    for (size_t b = 0; b < c.blocks.size(); ++b) {
        if (c.blocks[b].va != space + b * kBlockBytes) return std::nullopt;
        auto clear = open_block(prf, c.blocks[b], c.blocks[b].seed);
        if (!clear) return std::nullopt;
        for (size_t k = 0; k < 8; ++k) words.push_back(get_le64(clear->data() + k * 8));
    }
    if (words.size() < count) return std::nullopt;
    return words;
}

SealedContext SmuState::context_evict() {
    std::vector<uint64_t> w;
    w.push_back(sss_.valid ? 1 : 0);
    w.push_back(sss_.first_entry ? 1 : 0);
    w.push_back(sss_.pid);
    w.push_back(sss_.lep);
    w.push_back(static_cast<uint64_t>(sss_.last_exit));
    pack_regs(w, sss_.regs);
    SealedContext c = seal_words(node_prf_, w, kContextSpace);
    c.pid = sss_.pid;
    sss_ = SecretContext{}; // moved out, the slot is free for another process
    return c;
}

bool SmuState::context_restore(const SealedContext& c) {
    if (halted_) return false;
    auto w = open_words(node_prf_, c, kContextSpace, 21);
    if (!w) {
        halt(HaltReason::IntegrityError);
        return false;
    }
    size_t i = 0;
    SecretContext s;
    s.valid = (*w)[i++] != 0;
    s.first_entry = (*w)[i++] != 0;
    s.pid = static_cast<uint32_t>((*w)[i++]);
    s.lep = (*w)[i++];
    s.last_exit = static_cast<ExitKind>((*w)[i++]);
    s.regs = unpack_regs(*w, i);
    sss_ = s;
    return true;
}

SealedContext SmuState::migrate_entry_out(const Prf& channel, size_t slot, bool with_root) {
    const SmuTableEntry& e = table_[slot];
    std::vector<uint64_t> w;
    w.push_back(e.pid ? *e.pid : kNoValue);
    for (uint64_t k : e.skey.w) w.push_back(k);
    for (uint64_t k : e.mkey.w) w.push_back(k);
    w.push_back(with_root ? 1 : 0);
    w.push_back(with_root ? e.root_hash : 0);
    w.push_back(e.process_hash);
    w.push_back(e.first_lep);
    w.push_back(e.sig_lep ? *e.sig_lep : kNoValue);
    w.push_back(e.error_status);
    SealedContext c = seal_words(channel, w, kEntrySpace);
    c.pid = e.pid ? *e.pid : 0;
    return c;
}

bool SmuState::migrate_entry_in(const Prf& channel, const SealedContext& c) {
    if (halted_) return false;
    auto w = open_words(channel, c, kEntrySpace, 15);
    if (!w) {
        halt(HaltReason::MigrationTamper);
        return false;
    }
    size_t i = 0;
    SmuTableEntry e;
    uint64_t pid = (*w)[i++];
    if (pid != kNoValue) e.pid = static_cast<uint32_t>(pid);
    for (auto& k : e.skey.w) k = (*w)[i++];
    for (auto& k : e.mkey.w) k = (*w)[i++];
    bool with_root = (*w)[i++] != 0;
    uint64_t root = (*w)[i++];
    e.root_hash = with_root ? static_cast<uint16_t>(root) : 0;
    e.process_hash = (*w)[i++];
    e.first_lep = (*w)[i++];
    uint64_t sig = (*w)[i++];
    if (sig != kNoValue) e.sig_lep = sig;
    e.error_status = static_cast<uint32_t>((*w)[i++]);
    install_entry(e);
    return true;
}

SealedContext SmuState::migrate_thread_out(const Prf& channel, uint32_t scid) {
    for (auto it = tscs_.begin(); it != tscs_.end(); ++it) {
        if (it->scid == scid) {
            std::vector<uint64_t> w;
            w.push_back(it->scid);
            w.push_back(it->active ? 1 : 0);
            w.push_back(it->tid);
            w.push_back(it->lep);
            w.push_back(it->parent_tid);
            pack_regs(w, it->regs);
            SealedContext c = seal_words(channel, w, kThreadSpace);
            tscs_.erase(it);
            return c;
        }
    }
    return SealedContext{};
}

bool SmuState::migrate_thread_in(const Prf& channel, const SealedContext& c) {
    if (halted_) return false;
    auto w = open_words(channel, c, kThreadSpace, 21);
    if (!w) {
        halt(HaltReason::MigrationTamper);
        return false;
    }
    size_t i = 0;
    ThreadContext t;
    t.scid = static_cast<uint32_t>((*w)[i++]);
    t.active = (*w)[i++] != 0;
    t.tid = static_cast<uint32_t>((*w)[i++]);
    t.lep = (*w)[i++];
    t.parent_tid = static_cast<uint32_t>((*w)[i++]);
    t.regs = unpack_regs(*w, i);
    t.active = false; // re-bound by the destination scheduler
    tscs_.push_back(t);
    next_scid_ = std::max(next_scid_, t.scid + 1);
    return true;
}

} // namespace semsim
