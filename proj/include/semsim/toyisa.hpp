#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semsim/smu.hpp"

namespace semsim {

// Tiny assembly dialect for driving the security machine at instruction
// level. Region directives mark authenticity; everything else is one
// instruction per line.
//
//   .trusted | .untrusted      region directive
//   <name>:                    label
//   ALU                        spacer, no architectural effect
//   MOV <reg> <imm>            reg in a0..a5, ra, rv, g0..g7
//   LD <addr> | ST <addr>      data access, address hex or decimal
//   CALL <label> | RET         stack through the mode-matching stack
//   SMU syscall <n> <label>    exit to kernel code, n args live across
//   SMU callnosec <n> <label>  call untrusted code, return via nonsecure stack
//   SMU storena <addr> <imm>   write a line and strip its mark
//   SMU loadna <addr>          read an unmarked line into rv
//   SMU inita <addr> <n>       claim n bytes, zeroed and marked
//   SMU pushna <imm>           push onto the nonsecure stack
//   SMU popna                  pop the nonsecure stack into rv
//   SMU newthread              pending child context, scid into rv
//   SMU newthreaddelete <scid> discard a pending child context
//   SMU threaddelete <tid>     discard a consumed thread context
enum class ToyOp {
    Alu,
    Mov,
    Load,
    Store,
    Call,
    Ret,
    SmuSyscall,
    SmuCallNoSec,
    SmuStoreNa,
    SmuLoadNa,
    SmuInitA,
    SmuPushNa,
    SmuPopNa,
    SmuNewThread,
    SmuNewThreadDelete,
    SmuThreadDelete,
};

struct ToyInstr {
    ToyOp op = ToyOp::Alu;
    bool auth = false;
    uint64_t a = 0; // address, immediate, scid or tid
    uint64_t b = 0; // second immediate or branch target
    int reg = -1;   // MOV destination
};

struct ToyProgram {
    std::vector<ToyInstr> instrs;
    std::map<std::string, uint64_t> labels;
};

ToyProgram parse_program(const std::string& text);

// Register naming shared by MOV, scripted pokes and trace rendering.
std::optional<int> reg_index(const std::string& name);
uint64_t read_reg(const RegisterFile& r, int idx);
void write_reg(RegisterFile& r, int idx, uint64_t v);
std::string render_regs(const RegisterFile& r);

// Scripted OS behavior, applied once the executed-instruction counter
// reaches at_step (immediately, if the running thread already finished).
struct OsAction {
    enum class Kind { SetReg, Attach, Schedule, RaiseSignal, AuditTscs, AuditNss };
    size_t at_step = 0;
    Kind kind = Kind::SetReg;
    int reg = -1;
    uint64_t value = 0;
    uint32_t tid = 0;
    std::string label;
};

struct SmuScenario {
    std::string name;
    std::string program;
    std::string first_label;
    std::optional<std::string> sig_label;
    std::vector<OsAction> actions;
    EventTrace golden;
};

// One core plus its security machine, running threads of a single secure
// process to a string event trace.
class ToyMachine {
public:
    ToyMachine(const ToyProgram& prog, uint64_t first_lep, std::optional<uint64_t> sig_lep,
               uint32_t pid = 7);

    EventTrace run(std::vector<OsAction> actions, size_t max_steps = 10000);

    SmuState& smu() { return smu_; }

private:
    struct ThreadCtx {
        uint64_t pc = 0;
        bool done = false;
        std::vector<uint64_t> ss;
        std::vector<uint64_t> nss;
    };

    void apply(const OsAction& a);
    void exec_one();
    void emit(std::string s) { trace_.push_back(std::move(s)); }
    ThreadCtx& cur() { return threads_[cur_tid_]; }
    void bind_current();

    const ToyProgram& prog_;
    SmuState smu_;
    std::map<uint32_t, ThreadCtx> threads_;
    uint32_t cur_tid_ = 1;
    EventTrace trace_;
    std::vector<uint64_t> saved_signal_ss_;
    bool signal_exit_pending_ = false;
    std::optional<uint64_t> last_call_target_;
    uint64_t last_trusted_next_ = 0;
    bool halt_emitted_ = false;
};

// Named instruction-level scenarios with hand-checked golden traces.
std::vector<std::string> smu_scenario_names();
SmuScenario gen_smu_program(const std::string& name);

} // namespace semsim
