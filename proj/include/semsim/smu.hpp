#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semsim/crypto.hpp"

namespace semsim {

enum class Mode { Trusted, Untrusted };

enum class HaltReason {
    IllegalEntry,
    SecureAccessViolation,
    MissingTsc,
    BadAttach,
    IntegrityError,
    MigrationTamper,
};

const char* to_string(HaltReason r);

// Core registers as the security machinery sees them: six argument
// registers, a return-address and a return-value register, and scratch
// registers. Stack pointers are modeled as the stacks themselves.
struct RegisterFile {
    std::array<uint64_t, 6> arg{};
    uint64_t retaddr = 0;
    uint64_t retval = 0;
    std::array<uint64_t, 8> gp{};

    bool operator==(const RegisterFile&) const = default;
};

// One secure-process slot in the SMU table.
struct SmuTableEntry {
    std::optional<uint32_t> pid;
    Key256 skey;             // storage encryption key
    Key256 mkey;             // signing key
    uint16_t root_hash = 0;  // integrity root of the process's local tree
    uint64_t process_hash = 0;
    uint64_t first_lep = 0;          // sole legal first entry point
    std::optional<uint64_t> sig_lep; // signal-handler entry, if registered
    uint32_t error_status = 0;
};

// The single-use secret context: register snapshot and legal entry point of
// the interrupted trusted flow.
enum class ExitKind { None, Syscall, CallNoSec };

struct SecretContext {
    bool valid = false;
    bool first_entry = false; // launch context: entry enforced, regs kept
    uint32_t pid = 0;
    uint64_t lep = 0;
    ExitKind last_exit = ExitKind::None;
    RegisterFile regs;
};

// Pending context for a thread created inside the trusted region, waiting
// for the OS to bind a thread id to it.
struct ThreadContext {
    uint32_t scid = 0;
    bool active = false; // bound to a tid
    uint32_t tid = 0;
    uint64_t lep = 0;
    uint32_t parent_tid = 0;
    RegisterFile regs;
};

// Per-block state of the toy data memory used by the instruction-level
// scenarios: an authenticity mark, the owning process and a value.
struct LineState {
    bool auth = false;
    uint32_t owner_pid = 0;
    uint64_t value = 0;
};

enum class AccessOp { Load, Store };

enum class EnterKind { First, Resume, Signal, Thread };

using EventTrace = std::vector<std::string>;

// Sealed register context as it leaves the chip (context switch or
// migration).
struct SealedContext {
    std::vector<SealedBlock> blocks;
    uint32_t pid = 0;
};

// Security state machine of one node: mode tracking, legal-entry-point
// enforcement, register clearing with the declared preservation sets,
// secure-access filtering, thread contexts and sealed context movement.
//
// Halts are sticky: after the first violation the machine refuses to run.
class SmuState {
public:
    explicit SmuState(uint64_t node_key_seed = 0);

    // --- table management (performed by the OS through opaque handshakes)
    size_t install_entry(const SmuTableEntry& e);
    void set_pid(size_t slot, uint32_t pid);
    const SmuTableEntry& entry(size_t slot) const { return table_[slot]; }
    size_t table_size() const { return table_.size(); }

    Mode mode() const { return mode_; }
    std::optional<HaltReason> halted() const { return halted_; }
    uint32_t current_pid() const { return cur_pid_; }
    RegisterFile& regs() { return regs_; }
    const SecretContext& sss() const { return sss_; }
    uint32_t get_results() const; // error/halt status for the OS

    void bind_stacks(std::vector<uint64_t>* secure, std::vector<uint64_t>* nonsecure);
    std::vector<uint64_t>* secure_stack() { return ss_; }
    std::vector<uint64_t>* nonsecure_stack() { return nss_; }

    // --- mode transitions
    // Marks the next exit as a system call taking argnum register arguments.
    void mark_syscall(unsigned argnum);
    // Marks the next exit as an explicit call into untrusted code.
    void mark_callnosec(unsigned argnum);

    // Leaves trusted mode. resume is the address the trusted flow legally
    // re-enters at. Registers are snapshotted into the secret context and
    // cleared, minus the preservation set implied by a pending mark.
    // signal_exit skips the snapshot: the interrupted context must survive
    // a handler's return to the OS.
    void switch_to_untrusted(uint64_t resume, bool signal_exit = false);

    // Attempts to enter trusted mode at `at`. On success the returned kind
    // says which context admitted the entry; on failure the machine halts.
    std::optional<EnterKind> try_enter_trusted(uint64_t at, uint32_t tid);

    // --- data-side checks
    // Plain load/store filtering; false halts the machine.
    bool secure_access(AccessOp op, uint64_t va, bool instr_auth);
    LineState& line(uint64_t va);

    bool smu_store_na(uint64_t va, uint64_t value, bool instr_auth);
    std::optional<uint64_t> smu_load_na(uint64_t va, bool instr_auth);
    bool smu_init_a(uint64_t va, uint64_t size, bool instr_auth);
    bool push_na(uint64_t value, bool instr_auth);
    std::optional<uint64_t> pop_na(bool instr_auth);

    // --- thread life cycle
    // Creates a pending context whose entry point skips the creation pair
    // (this instruction and the following system call).
    std::optional<uint32_t> thread_create(uint64_t pc, uint32_t parent_tid, bool instr_auth);
    bool thread_attach(uint32_t tid, uint64_t addr); // OS side, unauthenticated
    bool thread_discard_scid(uint32_t scid, bool instr_auth);
    void thread_discard_tid(uint32_t tid); // OS side
    bool signal_entry_available() const;
    size_t pending_contexts() const { return tscs_.size(); }
    bool tid_known(uint32_t tid) const { return consumed_tids_.count(tid) != 0; }

    // --- sealed context movement
    SealedContext context_evict();
    bool context_restore(const SealedContext& c);

    // Entry migration: the serialized table entry, sealed and signed with a
    // channel key both machines trust. with_root keeps the integrity root
    // (only valid when no thread of the process is still running at the
    // source).
    SealedContext migrate_entry_out(const Prf& channel, size_t slot, bool with_root);
    bool migrate_entry_in(const Prf& channel, const SealedContext& c);
    SealedContext migrate_thread_out(const Prf& channel, uint32_t scid);
    bool migrate_thread_in(const Prf& channel, const SealedContext& c);

    void halt(HaltReason r);
    void force_signal_state(bool in_signal) { in_signal_ = in_signal; }
    bool in_signal() const { return in_signal_; }

private:
    void clear_registers_for_exit();
    SealedContext seal_words(const Prf& prf, const std::vector<uint64_t>& words, uint64_t space);
    static std::optional<std::vector<uint64_t>> open_words(const Prf& prf, const SealedContext& c,
                                                           uint64_t space, size_t count);

    std::vector<SmuTableEntry> table_;
    Mode mode_ = Mode::Untrusted;
    std::optional<HaltReason> halted_;
    uint32_t cur_pid_ = 0;
    size_t cur_slot_ = 0;
    RegisterFile regs_;
    SecretContext sss_;
    std::vector<ThreadContext> tscs_;
    std::map<uint32_t, bool> consumed_tids_;
    std::set<uint32_t> deleted_tids_;
    uint32_t next_scid_ = 1;
    std::map<uint64_t, LineState> mem_;
    std::vector<uint64_t>* ss_ = nullptr;
    std::vector<uint64_t>* nss_ = nullptr;
    std::optional<unsigned> pending_syscall_;
    std::optional<unsigned> pending_callnosec_;
    bool in_signal_ = false;
    uint64_t ctx_seed_ = 0;
    Prf node_prf_;
};

} // namespace semsim
