#include "semsim/toyisa.hpp"

#include <stdexcept>

namespace semsim {

// Golden traces below are derived by hand from the transition rules, not
// recorded from the implementation. Keep it that way: they are the oracle.

namespace {

using K = OsAction::Kind;

SmuScenario syscall_roundtrip() {
    SmuScenario s;
    s.name = "syscall_roundtrip";
    s.program = R"(
.untrusted
start:
    CALL main
    RET
.trusted
main:
    MOV a0 5
    MOV a1 6
    MOV g0 41
    SMU syscall 2 kernel
    ALU
    RET
.untrusted
kernel:
    MOV rv 11
    RET
)";
    s.first_label = "main";
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu syscall n=2 to=8",
        "switch_u lep=6",
        "uregs a0=5 a1=6 ra=6",
        "switch_t at=6 resume",
        "tregs a0=5 a1=6 ra=6 rv=11 g0=41",
        "switch_u lep=8",
        "uregs -",
        "done tid=1",
    };
    return s;
}

SmuScenario malloc_inita() {
    SmuScenario s;
    s.name = "malloc_inita";
    s.program = R"(
.untrusted
start:
    CALL main
    LD 0x1000
    RET
.trusted
main:
    SMU syscall 1 kernel
    SMU inita 0x1000 64
    ST 0x1000
    LD 0x1000
    RET
.untrusted
kernel:
    MOV rv 4096
    RET
)";
    s.first_label = "main";
    s.golden = {
        "switch_t at=3 first",
        "tregs -",
        "smu syscall n=1 to=8",
        "switch_u lep=4",
        "uregs ra=4",
        "switch_t at=4 resume",
        "tregs ra=4 rv=4096",
        "smu inita 0x1000 n=64 ok",
        "st 0x1000 ok",
        "ld 0x1000 ok",
        "switch_u lep=8",
        "uregs -",
        "ld 0x1000 viol",
        "halt secure_access",
    };
    return s;
}

SmuScenario clone_happy() {
    SmuScenario s;
    s.name = "clone_happy";
    s.program = R"(
.untrusted
start:
    CALL main
    RET
.trusted
main:
    MOV g1 77
    SMU newthread
    SMU syscall 1 kernel
childstart:
    MOV g2 88
    RET
.untrusted
kernel:
    MOV rv 0
    RET
)";
    s.first_label = "main";
    s.actions = {
        {4, K::Attach, -1, 0, 9, "childstart"},
        {4, K::AuditTscs, -1, 0, 0, ""},
        {9, K::Schedule, -1, 0, 9, ""},
        {11, K::AuditTscs, -1, 0, 0, ""},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu newthread scid=1",
        "smu syscall n=1 to=7",
        "os attach tid=9 at=5 ok",
        "os audit tscs=1",
        "switch_u lep=5",
        "uregs ra=5",
        "switch_t at=5 resume",
        "tregs ra=5 g1=77",
        "switch_u lep=7",
        "uregs -",
        "done tid=1",
        "os schedule tid=9",
        "switch_t at=5 thread",
        "tregs g1=77",
        "done tid=9",
        "os audit tscs=0",
    };
    return s;
}

const char* kCloneProgram = R"(
.untrusted
start:
    CALL main
    RET
.trusted
main:
    SMU newthread
    SMU syscall 0 kernel
childstart:
    SMU newthreaddelete 1
    RET
.untrusted
kernel:
    RET
)";

SmuScenario clone_case1() {
    SmuScenario s;
    s.name = "clone_case1";
    s.program = kCloneProgram;
    s.first_label = "main";
    s.actions = {
        {2, K::AuditTscs, -1, 0, 0, ""},
        {5, K::AuditTscs, -1, 0, 0, ""},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu newthread scid=1",
        "os audit tscs=1",
        "smu syscall n=0 to=6",
        "switch_u lep=4",
        "uregs ra=4",
        "switch_t at=4 resume",
        "tregs ra=4",
        "smu newthreaddelete scid=1 ok",
        "os audit tscs=0",
        "switch_u lep=6",
        "uregs -",
        "done tid=1",
    };
    return s;
}

SmuScenario clone_case2a() {
    SmuScenario s;
    s.name = "clone_case2a";
    s.program = kCloneProgram;
    s.first_label = "main";
    s.actions = {
        {5, K::Attach, -1, 0, 9, "childstart"},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu newthread scid=1",
        "smu syscall n=0 to=6",
        "switch_u lep=4",
        "uregs ra=4",
        "switch_t at=4 resume",
        "tregs ra=4",
        "smu newthreaddelete scid=1 ok",
        "os attach tid=9 at=4 fail",
        "halt bad_attach",
    };
    return s;
}

SmuScenario clone_case2b() {
    SmuScenario s;
    s.name = "clone_case2b";
    s.program = kCloneProgram;
    s.first_label = "main";
    s.actions = {
        {4, K::Attach, -1, 0, 9, "childstart"},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu newthread scid=1",
        "smu syscall n=0 to=6",
        "switch_u lep=4",
        "uregs ra=4",
        "os attach tid=9 at=4 ok",
        "switch_t at=4 resume",
        "tregs ra=4",
        "smu newthreaddelete scid=1 viol",
        "halt bad_attach",
    };
    return s;
}

SmuScenario signal_entry() {
    SmuScenario s;
    s.name = "signal_entry";
    s.program = R"(
.untrusted
start:
    CALL main
    RET
.trusted
main:
    MOV g3 99
    SMU syscall 0 kernel
    RET
.untrusted
kernel:
    ALU
    RET
.trusted
handler:
    MOV g4 1
    RET
)";
    s.first_label = "main";
    s.sig_label = "handler";
    s.actions = {
        {4, K::RaiseSignal, -1, 0, 0, "handler"},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu syscall n=0 to=5",
        "switch_u lep=4",
        "uregs ra=4",
        "os signal at=6",
        "switch_t at=7 signal",
        "tregs ra=4",
        "switch_u sigret",
        "uregs -",
        "switch_t at=4 resume",
        "tregs ra=4 g3=99",
        "switch_u lep=5",
        "uregs -",
        "done tid=1",
    };
    return s;
}

SmuScenario callnosec_stackargs() {
    SmuScenario s;
    s.name = "callnosec_stackargs";
    s.program = R"(
.untrusted
start:
    CALL main
    RET
.trusted
main:
    MOV a0 1
    MOV a1 2
    MOV a2 3
    MOV a3 4
    MOV a4 5
    MOV a5 6
    SMU pushna 777
    SMU callnosec 6 helper
    SMU popna
    RET
.untrusted
helper:
    MOV rv 43
    RET
)";
    s.first_label = "main";
    s.actions = {
        {10, K::AuditNss, -1, 0, 0, ""},
    };
    s.golden = {
        "switch_t at=2 first",
        "tregs -",
        "smu pushna 777 ok",
        "smu callnosec n=6 to=12",
        "switch_u lep=10",
        "uregs a0=1 a1=2 a2=3 a3=4 a4=5 a5=6",
        "os audit nss=[777 10]",
        "switch_t at=10 resume",
        "tregs a0=1 a1=2 a2=3 a3=4 a4=5 a5=6 rv=43",
        "smu popna val=777",
        "switch_u lep=12",
        "uregs -",
        "done tid=1",
    };
    return s;
}

SmuScenario rop_probe() {
    SmuScenario s;
    s.name = "rop_probe";
    s.program = R"(
.untrusted
start:
    CALL main
    CALL gadget
    RET
.trusted
main:
    MOV g0 123
    ALU
gadget:
    ALU
    RET
)";
    s.first_label = "main";
    s.golden = {
        "switch_t at=3 first",
        "tregs -",
        "switch_u lep=7",
        "uregs -",
        "halt illegal_entry",
    };
    return s;
}

} // namespace

std::vector<std::string> smu_scenario_names() {
    return {
        "syscall_roundtrip", "malloc_inita",  "clone_happy",        "clone_case1", "clone_case2a",
        "clone_case2b",      "signal_entry",  "callnosec_stackargs", "rop_probe",
    };
}

SmuScenario gen_smu_program(const std::string& name) {
    if (name == "syscall_roundtrip") return syscall_roundtrip();
    if (name == "malloc_inita") return malloc_inita();
    if (name == "clone_happy") return clone_happy();
    if (name == "clone_case1") return clone_case1();
    if (name == "clone_case2a") return clone_case2a();
    if (name == "clone_case2b") return clone_case2b();
    if (name == "signal_entry") return signal_entry();
    if (name == "callnosec_stackargs") return callnosec_stackargs();
    if (name == "rop_probe") return rop_probe();
    throw std::invalid_argument("unknown scenario: " + name);
}

} // namespace semsim
