#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "semsim/rng.hpp"
#include "semsim/toyisa.hpp"

using namespace semsim;

namespace {

// machine already past its first entry, i.e. running trusted code
struct Fixture {
    SmuState smu;
    std::vector<uint64_t> ss, nss;

    explicit Fixture(uint32_t pid = 7, uint64_t first_lep = 0) {
        SmuTableEntry e;
        e.skey = derive_key(pid, 1);
        e.mkey = derive_key(pid, 2);
        e.first_lep = first_lep;
        smu.set_pid(smu.install_entry(e), pid);
        smu.bind_stacks(&ss, &nss);
        REQUIRE(smu.try_enter_trusted(first_lep, 1) == EnterKind::First);
    }
};

RegisterFile distinct_regs() {
    RegisterFile r;
    for (int i = 0; i < 6; ++i) r.arg[i] = 10 + i;
    r.retaddr = 20;
    r.retval = 21;
    for (int i = 0; i < 8; ++i) r.gp[i] = 30 + i;
    return r;
}

bool throws_mentioning(const std::string& text, const std::string& needle) {
    try {
        parse_program(text);
    } catch (const std::exception& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace

TEST_CASE("scenario traces match their hand-written goldens") {
    for (const auto& name : smu_scenario_names()) {
        CAPTURE(name);
        SmuScenario sc = gen_smu_program(name);
        ToyProgram prog = parse_program(sc.program);
        uint64_t first = prog.labels.at(sc.first_label);
        std::optional<uint64_t> sig;
        if (sc.sig_label) sig = prog.labels.at(*sc.sig_label);
        ToyMachine m(prog, first, sig);
        EventTrace got = m.run(sc.actions);
        REQUIRE(got.size() == sc.golden.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CAPTURE(i);
            CHECK(got[i] == sc.golden[i]);
        }

        ToyMachine again(prog, first, sig);
        CHECK(again.run(sc.actions) == got);
    }
}

TEST_CASE("exit clears exactly the declared preservation set") {
    for (unsigned n = 0; n <= 6; ++n) {
        CAPTURE(n);

        Fixture f;
        f.smu.regs() = distinct_regs();
        f.smu.mark_syscall(n);
        f.smu.regs().retaddr = 99;
        f.smu.switch_to_untrusted(99);
        for (unsigned i = 0; i < 6; ++i)
            CHECK(f.smu.regs().arg[i] == (i < n ? 10 + i : 0u));
        CHECK(f.smu.regs().retaddr == 99);
        CHECK(f.smu.regs().retval == 0);
        for (int i = 0; i < 8; ++i) CHECK(f.smu.regs().gp[i] == 0);

        Fixture g;
        g.smu.regs() = distinct_regs();
        g.smu.mark_callnosec(n);
        g.smu.switch_to_untrusted(99);
        for (unsigned i = 0; i < 6; ++i)
            CHECK(g.smu.regs().arg[i] == (i < n ? 10 + i : 0u));
        CHECK(g.smu.regs().retaddr == 0);
        CHECK(g.smu.regs().retval == 0);
    }

    Fixture h;
    h.smu.regs() = distinct_regs();
    h.smu.switch_to_untrusted(99);
    CHECK(h.smu.regs() == RegisterFile{});

    Fixture bad;
    bad.smu.mark_syscall(7);
    CHECK(bad.smu.halted() == HaltReason::SecureAccessViolation);
}

TEST_CASE("nothing outside the preservation set ever leaks across an exit") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        Fixture f;
        RegisterFile orig;
        for (auto& a : orig.arg) a = rng.next_u64() | 1;
        orig.retaddr = rng.next_u64() | 1;
        orig.retval = rng.next_u64() | 1;
        for (auto& g : orig.gp) g = rng.next_u64() | 1;
        f.smu.regs() = orig;

        unsigned kind = static_cast<unsigned>(rng.uniform(3));
        unsigned n = static_cast<unsigned>(rng.uniform(7));
        uint64_t resume = 1000 + rng.uniform(1000);
        if (kind == 1) f.smu.mark_syscall(n);
        if (kind == 2) f.smu.mark_callnosec(n);
        if (kind == 1) f.smu.regs().retaddr = resume, orig.retaddr = resume;
        f.smu.switch_to_untrusted(resume);

        const RegisterFile& v = f.smu.regs();
        for (unsigned i = 0; i < 6; ++i)
            CHECK(v.arg[i] == ((kind != 0 && i < n) ? orig.arg[i] : 0));
        CHECK(v.retaddr == (kind == 1 ? resume : 0));
        CHECK(v.retval == 0);
        for (int i = 0; i < 8; ++i) CHECK(v.gp[i] == 0);

        // OS hands back a result and resumes at the stored entry point
        uint64_t produced = rng.next_u64();
        f.smu.regs().retval = produced;
        REQUIRE(f.smu.try_enter_trusted(resume, 1) == EnterKind::Resume);
        RegisterFile expect = orig;
        if (kind != 0) expect.retval = produced;
        CHECK(f.smu.regs() == expect);
    }
}

TEST_CASE("re-entry anywhere but the stored point halts") {
    Fixture f;
    f.smu.switch_to_untrusted(50);
    CHECK(!f.smu.try_enter_trusted(51, 1));
    CHECK(f.smu.halted() == HaltReason::IllegalEntry);
}

TEST_CASE("plain access requires matching marks and ownership") {
    // trusted load of an own marked line
    {
        Fixture f;
        REQUIRE(f.smu.smu_init_a(0x1000, 64, true));
        CHECK(f.smu.secure_access(AccessOp::Load, 0x1000, true));
        CHECK(f.smu.secure_access(AccessOp::Store, 0x1010, true)); // same line
        CHECK(!f.smu.halted());
    }
    // trusted load of an unmarked line
    {
        Fixture f;
        CHECK(!f.smu.secure_access(AccessOp::Load, 0x2000, true));
        CHECK(f.smu.halted() == HaltReason::SecureAccessViolation);
    }
    // untrusted store to a marked line
    {
        Fixture f;
        REQUIRE(f.smu.smu_init_a(0x1000, 64, true));
        f.smu.switch_to_untrusted(50);
        CHECK(!f.smu.secure_access(AccessOp::Store, 0x1000, false));
        CHECK(f.smu.halted() == HaltReason::SecureAccessViolation);
    }
    // untrusted access to unmarked memory is ordinary
    {
        Fixture f;
        f.smu.switch_to_untrusted(50);
        CHECK(f.smu.secure_access(AccessOp::Load, 0x2000, false));
        CHECK(f.smu.secure_access(AccessOp::Store, 0x2000, false));
    }
    // marked line of another process
    {
        Fixture f;
        f.smu.line(0x3000).auth = true;
        f.smu.line(0x3000).owner_pid = 8;
        CHECK(!f.smu.secure_access(AccessOp::Load, 0x3000, true));
        CHECK(f.smu.halted() == HaltReason::SecureAccessViolation);
    }
}

TEST_CASE("unmarking ops move data across the boundary") {
    Fixture f;
    REQUIRE(f.smu.smu_init_a(0x1000, 128, true));
    CHECK(f.smu.line(0x1040).auth);
    CHECK(f.smu.line(0x1040).value == 0);

    // strip the mark, untrusted code can now read the value
    REQUIRE(f.smu.smu_store_na(0x1000, 42, true));
    CHECK(!f.smu.line(0x1000).auth);
    CHECK(f.smu.secure_access(AccessOp::Load, 0x1000, false));

    // read back a line untrusted code wrote
    f.smu.line(0x2000).value = 7;
    CHECK(f.smu.smu_load_na(0x2000, true) == 7);

    // but not one that is still marked
    CHECK(!f.smu.smu_load_na(0x1040, true));
    CHECK(f.smu.halted() == HaltReason::SecureAccessViolation);

    // the unmarking ops themselves are trusted-only
    Fixture g;
    g.smu.switch_to_untrusted(50);
    CHECK(!g.smu.smu_store_na(0x1000, 1, false));
    CHECK(g.smu.halted() == HaltReason::SecureAccessViolation);
    Fixture h;
    h.smu.switch_to_untrusted(50);
    CHECK(!h.smu.smu_init_a(0x1000, 64, false));
    CHECK(h.smu.halted() == HaltReason::SecureAccessViolation);
}

TEST_CASE("scheduling a thread whose context was discarded halts") {
    Fixture f;
    auto scid = f.smu.thread_create(10, 1, true);
    REQUIRE(scid);
    f.smu.switch_to_untrusted(50);
    REQUIRE(f.smu.thread_attach(9, 12));
    REQUIRE(f.smu.try_enter_trusted(12, 9) == EnterKind::Thread);
    f.smu.switch_to_untrusted(60);
    f.smu.thread_discard_tid(9);
    CHECK(!f.smu.try_enter_trusted(70, 9));
    CHECK(f.smu.halted() == HaltReason::MissingTsc);
}

TEST_CASE("attach requires a pending context at that address") {
    Fixture f;
    f.smu.switch_to_untrusted(50);
    CHECK(!f.smu.thread_attach(9, 12));
    CHECK(f.smu.halted() == HaltReason::BadAttach);
}

TEST_CASE("sealed register contexts survive the round trip and reject tampering") {
    auto make = [](uint32_t pid) {
        Fixture f(pid);
        f.smu.regs() = distinct_regs();
        f.smu.switch_to_untrusted(50);
        return f;
    };

    {
        Fixture f = make(7);
        SealedContext blob = f.smu.context_evict();
        CHECK(blob.pid == 7);
        CHECK(!f.smu.try_enter_trusted(50, 1)); // slot is empty now
        Fixture g(7);
        g.smu.switch_to_untrusted(1); // discard launch context
        REQUIRE(g.smu.context_restore(blob));
        // stale secret context from the pre-restore exit must be gone
        REQUIRE(g.smu.try_enter_trusted(50, 1) == EnterKind::Resume);
        RegisterFile expect = distinct_regs();
        CHECK(g.smu.regs() == expect);
    }
    {
        Fixture f = make(7);
        SealedContext blob = f.smu.context_evict();
        blob.blocks[0].cipher[5] ^= 1;
        Fixture g(7);
        CHECK(!g.smu.context_restore(blob));
        CHECK(g.smu.halted() == HaltReason::IntegrityError);
    }
    {
        // a context evicted from one process cannot resume another
        Fixture f = make(7);
        SealedContext blob = f.smu.context_evict();
        Fixture g(8);
        REQUIRE(g.smu.context_restore(blob));
        CHECK(!g.smu.try_enter_trusted(50, 1));
        CHECK(g.smu.halted() == HaltReason::IllegalEntry);
    }
}

TEST_CASE("entry migration carries keys intact and rejects tampering") {
    Prf channel(derive_key(99, 3));

    SmuState a(1);
    SmuTableEntry e;
    e.skey = derive_key(7, 1);
    e.mkey = derive_key(7, 2);
    e.first_lep = 5;
    e.sig_lep = 9;
    e.root_hash = 0xabcd;
    e.process_hash = 0x1234567890ull;
    size_t slot = a.install_entry(e);
    a.set_pid(slot, 7);

    SUBCASE("round trip") {
        SealedContext blob = a.migrate_entry_out(channel, slot, true);
        SmuState b(2);
        REQUIRE(b.migrate_entry_in(channel, blob));
        const SmuTableEntry& got = b.entry(0);
        CHECK(got.pid == 7u);
        CHECK(got.skey == e.skey);
        CHECK(got.mkey == e.mkey);
        CHECK(got.root_hash == 0xabcd);
        CHECK(got.process_hash == e.process_hash);
        CHECK(got.first_lep == 5);
        CHECK(got.sig_lep == 9u);
    }
    SUBCASE("a running process migrates without its integrity root") {
        SealedContext blob = a.migrate_entry_out(channel, slot, false);
        SmuState b(2);
        REQUIRE(b.migrate_entry_in(channel, blob));
        CHECK(b.entry(0).root_hash == 0);
        CHECK(b.entry(0).skey == e.skey);
    }
    SUBCASE("tamper") {
        SealedContext blob = a.migrate_entry_out(channel, slot, true);
        blob.blocks[1].cipher[0] ^= 0x80;
        SmuState b(2);
        CHECK(!b.migrate_entry_in(channel, blob));
        CHECK(b.halted() == HaltReason::MigrationTamper);
    }
    SUBCASE("thread context follows over the same channel") {
        Fixture f;
        f.smu.regs().gp[3] = 333;
        REQUIRE(f.smu.thread_create(10, 1, true));
        SealedContext blob = f.smu.migrate_thread_out(channel, 1);
        CHECK(f.smu.pending_contexts() == 0);
        SmuState b(2);
        b.install_entry(e);
        b.set_pid(0, 7);
        REQUIRE(b.migrate_thread_in(channel, blob));
        CHECK(b.pending_contexts() == 1);
        std::vector<uint64_t> ss, nss;
        b.bind_stacks(&ss, &nss);
        REQUIRE(b.thread_attach(9, 12));
        REQUIRE(b.try_enter_trusted(12, 9) == EnterKind::Thread);
        CHECK(b.regs().gp[3] == 333);

        SUBCASE("tampered thread blob") {
            Fixture f2;
            REQUIRE(f2.smu.thread_create(10, 1, true));
            SealedContext bad = f2.smu.migrate_thread_out(channel, 1);
            bad.blocks[0].mac ^= 1;
            SmuState c(3);
            CHECK(!c.migrate_thread_in(channel, bad));
            CHECK(c.halted() == HaltReason::MigrationTamper);
        }
    }
}

TEST_CASE("signal entry needs a registered handler address") {
    Fixture f; // no sig_lep in the table entry
    f.smu.switch_to_untrusted(50);
    CHECK(!f.smu.signal_entry_available());
    CHECK(!f.smu.try_enter_trusted(77, 1));
    CHECK(f.smu.halted() == HaltReason::IllegalEntry);
}

TEST_CASE("program parser reports the offending line") {
    CHECK(throws_mentioning(".trusted\nALU\nFROB\n", "line 3"));
    CHECK(throws_mentioning(".trusted\nFROB\n", "unknown mnemonic"));
    CHECK(throws_mentioning(".trusted\nMOV a0\n", "bad operand count"));
    CHECK(throws_mentioning(".trusted\nMOV x9 1\n", "bad register"));
    CHECK(throws_mentioning(".trusted\nCALL nowhere\n", "unknown label"));
    CHECK(throws_mentioning(".trusted\nx:\nALU\nx:\n", "duplicate label"));
    CHECK(throws_mentioning(".trusted\nLD zzz\n", "bad number"));
    CHECK(throws_mentioning(".trusted\nSMU frobnicate\n", "unknown smu op"));

    ToyProgram p = parse_program("# comment only\n.trusted\nmain:\n    ALU # trailing\n");
    CHECK(p.instrs.size() == 1);
    CHECK(p.labels.at("main") == 0);
    CHECK(p.instrs[0].auth);
}
