#include "semsim/toyisa.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace semsim {

namespace {

std::string hexstr(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t parse_num(const std::string& tok, size_t lineno) {
    try {
        return std::stoull(tok, nullptr, 0);
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
    }
}

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> toks;
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

const char* kRegNames[16] = {"a0", "a1", "a2", "a3", "a4", "a5", "ra", "rv",
                             "g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7"};

} // namespace

std::optional<int> reg_index(const std::string& name) {
    for (int i = 0; i < 16; ++i)
        if (name == kRegNames[i]) return i;
    return std::nullopt;
}

uint64_t read_reg(const RegisterFile& r, int idx) {
    if (idx < 6) return r.arg[idx];
    if (idx == 6) return r.retaddr;
    if (idx == 7) return r.retval;
    return r.gp[idx - 8];
}

void write_reg(RegisterFile& r, int idx, uint64_t v) {
    if (idx < 6) r.arg[idx] = v;
    else if (idx == 6) r.retaddr = v;
    else if (idx == 7) r.retval = v;
    else r.gp[idx - 8] = v;
}

std::string render_regs(const RegisterFile& r) {
    std::string out;
    for (int i = 0; i < 16; ++i) {
        uint64_t v = read_reg(r, i);
        if (v == 0) continue;
        if (!out.empty()) out += ' ';
        out += kRegNames[i];
        out += '=';
        out += std::to_string(v);
    }
    return out.empty() ? "-" : out;
}

ToyProgram parse_program(const std::string& text) {
    struct RawLine {
        std::vector<std::string> toks;
        bool auth;
        size_t lineno;
    };
    ToyProgram prog;
    std::vector<RawLine> raw;
    bool auth = false;
    std::istringstream is(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        auto toks = tokenize(line);
        if (toks.empty()) continue;
        if (toks[0] == ".trusted") {
            auth = true;
            continue;
        }
        if (toks[0] == ".untrusted") {
            auth = false;
            continue;
        }
        if (toks.size() == 1 && toks[0].back() == ':') {
            std::string name = toks[0].substr(0, toks[0].size() - 1);
            if (prog.labels.count(name))
                throw std::runtime_error("line " + std::to_string(lineno) + ": duplicate label");
            prog.labels[name] = raw.size();
            continue;
        }
        raw.push_back({std::move(toks), auth, lineno});
    }

    auto label_addr = [&](const std::string& name, size_t ln) -> uint64_t {
        auto it = prog.labels.find(name);
        if (it == prog.labels.end())
            throw std::runtime_error("line " + std::to_string(ln) + ": unknown label '" + name + "'");
        return it->second;
    };

    for (const auto& r : raw) {
        const auto& t = r.toks;
        ToyInstr ins;
        ins.auth = r.auth;
        auto need = [&](size_t n) {
            if (t.size() != n)
                throw std::runtime_error("line " + std::to_string(r.lineno) + ": bad operand count");
        };
        if (t[0] == "ALU") {
            need(1);
            ins.op = ToyOp::Alu;
        } else if (t[0] == "MOV") {
            need(3);
            ins.op = ToyOp::Mov;
            auto idx = reg_index(t[1]);
            if (!idx)
                throw std::runtime_error("line " + std::to_string(r.lineno) + ": bad register '" +
                                         t[1] + "'");
            ins.reg = *idx;
            ins.a = parse_num(t[2], r.lineno);
        } else if (t[0] == "LD" || t[0] == "ST") {
            need(2);
            ins.op = t[0] == "LD" ? ToyOp::Load : ToyOp::Store;
            ins.a = parse_num(t[1], r.lineno);
        } else if (t[0] == "CALL") {
            need(2);
            ins.op = ToyOp::Call;
            ins.b = label_addr(t[1], r.lineno);
        } else if (t[0] == "RET") {
            need(1);
            ins.op = ToyOp::Ret;
        } else if (t[0] == "SMU") {
            if (t.size() < 2)
                throw std::runtime_error("line " + std::to_string(r.lineno) + ": bad operand count");
            const std::string& op = t[1];
            if (op == "syscall") {
                need(4);
                ins.op = ToyOp::SmuSyscall;
                ins.a = parse_num(t[2], r.lineno);
                ins.b = label_addr(t[3], r.lineno);
            } else if (op == "callnosec") {
                need(4);
                ins.op = ToyOp::SmuCallNoSec;
                ins.a = parse_num(t[2], r.lineno);
                ins.b = label_addr(t[3], r.lineno);
            } else if (op == "storena") {
                need(4);
                ins.op = ToyOp::SmuStoreNa;
                ins.a = parse_num(t[2], r.lineno);
                ins.b = parse_num(t[3], r.lineno);
            } else if (op == "loadna") {
                need(3);
                ins.op = ToyOp::SmuLoadNa;
                ins.a = parse_num(t[2], r.lineno);
            } else if (op == "inita") {
                need(4);
                ins.op = ToyOp::SmuInitA;
                ins.a = parse_num(t[2], r.lineno);
                ins.b = parse_num(t[3], r.lineno);
            } else if (op == "pushna") {
                need(3);
                ins.op = ToyOp::SmuPushNa;
                ins.a = parse_num(t[2], r.lineno);
            } else if (op == "popna") {
                need(2);
                ins.op = ToyOp::SmuPopNa;
            } else if (op == "newthread") {
                need(2);
                ins.op = ToyOp::SmuNewThread;
            } else if (op == "newthreaddelete") {
                need(3);
                ins.op = ToyOp::SmuNewThreadDelete;
                ins.a = parse_num(t[2], r.lineno);
            } else if (op == "threaddelete") {
                need(3);
                ins.op = ToyOp::SmuThreadDelete;
                ins.a = parse_num(t[2], r.lineno);
            } else {
                throw std::runtime_error("line " + std::to_string(r.lineno) +
                                         ": unknown smu op '" + op + "'");
            }
        } else {
            throw std::runtime_error("line " + std::to_string(r.lineno) + ": unknown mnemonic '" +
                                     t[0] + "'");
        }
        prog.instrs.push_back(ins);
    }
    return prog;
}

ToyMachine::ToyMachine(const ToyProgram& prog, uint64_t first_lep, std::optional<uint64_t> sig_lep,
                       uint32_t pid)
    : prog_(prog) {
    SmuTableEntry e;
    e.skey = derive_key(pid, 1);
    e.mkey = derive_key(pid, 2);
    e.first_lep = first_lep;
    e.sig_lep = sig_lep;
    size_t slot = smu_.install_entry(e);
    smu_.set_pid(slot, pid);
    threads_[1] = ThreadCtx{};
    cur_tid_ = 1;
    bind_current();
}

void ToyMachine::bind_current() { smu_.bind_stacks(&cur().ss, &cur().nss); }

void ToyMachine::apply(const OsAction& a) {
    switch (a.kind) {
    case OsAction::Kind::SetReg:
        write_reg(smu_.regs(), a.reg, a.value);
        emit("os set " + std::string(kRegNames[a.reg]) + "=" + std::to_string(a.value));
        break;
    case OsAction::Kind::Attach: {
        uint64_t addr = prog_.labels.at(a.label);
        bool ok = smu_.thread_attach(a.tid, addr);
        emit("os attach tid=" + std::to_string(a.tid) + " at=" + std::to_string(addr) +
             (ok ? " ok" : " fail"));
        if (ok) threads_.emplace(a.tid, ThreadCtx{addr, false, {}, {}});
        break;
    }
    case OsAction::Kind::Schedule:
        emit("os schedule tid=" + std::to_string(a.tid));
        cur_tid_ = a.tid;
        bind_current();
        break;
    case OsAction::Kind::RaiseSignal: {
        // deliverable only while the OS has the core; the interrupted pc
        // goes to the nonsecure stack, the handler gets a fresh secure stack
        uint64_t interrupted = cur().pc;
        cur().nss.push_back(interrupted);
        saved_signal_ss_ = std::move(cur().ss);
        cur().ss.clear();
        cur().pc = prog_.labels.at(a.label);
        emit("os signal at=" + std::to_string(interrupted));
        break;
    }
    case OsAction::Kind::AuditTscs:
        emit("os audit tscs=" + std::to_string(smu_.pending_contexts()));
        break;
    case OsAction::Kind::AuditNss: {
        std::string s = "os audit nss=[";
        for (size_t i = 0; i < cur().nss.size(); ++i) {
            if (i) s += ' ';
            s += std::to_string(cur().nss[i]);
        }
        s += ']';
        emit(s);
        break;
    }
    }
}

void ToyMachine::exec_one() {
    uint64_t p = cur().pc;
    const ToyInstr& ins = prog_.instrs[p];
    bool via_call = last_call_target_ && *last_call_target_ == p;
    last_call_target_.reset();

    if (ins.auth && smu_.mode() == Mode::Untrusted) {
        auto kind = smu_.try_enter_trusted(p, cur_tid_);
        if (!kind) return;
        const char* kn = "";
        switch (*kind) {
        case EnterKind::First: kn = "first"; break;
        case EnterKind::Resume: kn = "resume"; break;
        case EnterKind::Signal: kn = "signal"; break;
        case EnterKind::Thread: kn = "thread"; break;
        }
        emit("switch_t at=" + std::to_string(p) + " " + kn);
        if (*kind == EnterKind::First && via_call && !cur().nss.empty()) {
            // the entering call's return address moves to the protected stack
            cur().ss.push_back(cur().nss.back());
            cur().nss.pop_back();
        }
        emit("tregs " + render_regs(smu_.regs()));
    } else if (!ins.auth && smu_.mode() == Mode::Trusted) {
        bool sig = signal_exit_pending_;
        signal_exit_pending_ = false;
        smu_.switch_to_untrusted(last_trusted_next_, sig);
        emit(sig ? "switch_u sigret" : "switch_u lep=" + std::to_string(last_trusted_next_));
        emit("uregs " + render_regs(smu_.regs()));
    }

    switch (ins.op) {
    case ToyOp::Alu:
        cur().pc = p + 1;
        break;
    case ToyOp::Mov:
        write_reg(smu_.regs(), ins.reg, ins.a);
        cur().pc = p + 1;
        break;
    case ToyOp::Load:
    case ToyOp::Store: {
        bool is_ld = ins.op == ToyOp::Load;
        bool ok = smu_.secure_access(is_ld ? AccessOp::Load : AccessOp::Store, ins.a, ins.auth);
        emit(std::string(is_ld ? "ld " : "st ") + hexstr(ins.a) + (ok ? " ok" : " viol"));
        if (ok) cur().pc = p + 1;
        break;
    }
    case ToyOp::Call: {
        auto& st = smu_.mode() == Mode::Trusted ? cur().ss : cur().nss;
        st.push_back(p + 1);
        cur().pc = ins.b;
        last_call_target_ = ins.b;
        break;
    }
    case ToyOp::Ret:
        if (smu_.in_signal() && smu_.mode() == Mode::Trusted) {
            // handler return: back to the interrupted flow, stored context
            // stays untouched for the real resume later
            cur().ss = std::move(saved_signal_ss_);
            saved_signal_ss_.clear();
            if (cur().nss.empty()) {
                cur().done = true;
                emit("done tid=" + std::to_string(cur_tid_));
            } else {
                cur().pc = cur().nss.back();
                cur().nss.pop_back();
                signal_exit_pending_ = true;
            }
        } else {
            auto& st = smu_.mode() == Mode::Trusted ? cur().ss : cur().nss;
            if (st.empty()) {
                cur().done = true;
                emit("done tid=" + std::to_string(cur_tid_));
            } else {
                cur().pc = st.back();
                st.pop_back();
            }
        }
        break;
    case ToyOp::SmuSyscall: {
        smu_.mark_syscall(static_cast<unsigned>(ins.a));
        if (smu_.halted()) break;
        smu_.regs().retaddr = p + 1;
        cur().nss.push_back(p + 1);
        emit("smu syscall n=" + std::to_string(ins.a) + " to=" + std::to_string(ins.b));
        cur().pc = ins.b;
        break;
    }
    case ToyOp::SmuCallNoSec: {
        smu_.mark_callnosec(static_cast<unsigned>(ins.a));
        if (smu_.halted()) break;
        cur().nss.push_back(p + 1);
        emit("smu callnosec n=" + std::to_string(ins.a) + " to=" + std::to_string(ins.b));
        cur().pc = ins.b;
        break;
    }
    case ToyOp::SmuStoreNa: {
        bool ok = smu_.smu_store_na(ins.a, ins.b, ins.auth);
        emit("smu storena " + hexstr(ins.a) + (ok ? " ok" : " viol"));
        if (ok) cur().pc = p + 1;
        break;
    }
    case ToyOp::SmuLoadNa: {
        auto v = smu_.smu_load_na(ins.a, ins.auth);
        if (v) {
            smu_.regs().retval = *v;
            emit("smu loadna " + hexstr(ins.a) + " val=" + std::to_string(*v));
            cur().pc = p + 1;
        } else {
            emit("smu loadna " + hexstr(ins.a) + " viol");
        }
        break;
    }
    case ToyOp::SmuInitA: {
        bool ok = smu_.smu_init_a(ins.a, ins.b, ins.auth);
        emit("smu inita " + hexstr(ins.a) + " n=" + std::to_string(ins.b) + (ok ? " ok" : " viol"));
        if (ok) cur().pc = p + 1;
        break;
    }
    case ToyOp::SmuPushNa: {
        bool ok = smu_.push_na(ins.a, ins.auth);
        emit("smu pushna " + std::to_string(ins.a) + (ok ? " ok" : " viol"));
        if (ok) cur().pc = p + 1;
        break;
    }
    case ToyOp::SmuPopNa: {
        auto v = smu_.pop_na(ins.auth);
        if (v) {
            smu_.regs().retval = *v;
            emit("smu popna val=" + std::to_string(*v));
            cur().pc = p + 1;
        } else {
            emit("smu popna viol");
        }
        break;
    }
    case ToyOp::SmuNewThread: {
        auto scid = smu_.thread_create(p, cur_tid_, ins.auth);
        if (scid) {
            emit("smu newthread scid=" + std::to_string(*scid));
            cur().pc = p + 1;
        } else {
            emit("smu newthread viol");
        }
        break;
    }
    case ToyOp::SmuNewThreadDelete: {
        bool ok = smu_.thread_discard_scid(static_cast<uint32_t>(ins.a), ins.auth);
        emit("smu newthreaddelete scid=" + std::to_string(ins.a) + (ok ? " ok" : " viol"));
        if (ok) cur().pc = p + 1;
        break;
    }
    case ToyOp::SmuThreadDelete:
        smu_.thread_discard_tid(static_cast<uint32_t>(ins.a));
        emit("smu threaddelete tid=" + std::to_string(ins.a));
        cur().pc = p + 1;
        break;
    }

    if (ins.auth && !smu_.halted()) last_trusted_next_ = p + 1;
}

EventTrace ToyMachine::run(std::vector<OsAction> actions, size_t max_steps) {
    size_t qi = 0;
    size_t executed = 0;
    auto note_halt = [&] {
        if (smu_.halted() && !halt_emitted_) {
            emit(std::string("halt ") + to_string(*smu_.halted()));
            halt_emitted_ = true;
        }
    };
    for (size_t step = 0; step < max_steps; ++step) {
        while (qi < actions.size() && (actions[qi].at_step <= executed || cur().done)) {
            apply(actions[qi++]);
            if (smu_.halted()) break;
        }
        note_halt();
        if (smu_.halted()) break;
        if (cur().done) {
            if (qi >= actions.size()) break;
            continue;
        }
        if (cur().pc >= prog_.instrs.size()) {
            cur().done = true;
            emit("done tid=" + std::to_string(cur_tid_));
            continue;
        }
        exec_one();
        ++executed;
        note_halt();
        if (smu_.halted()) break;
    }
    return trace_;
}

} // namespace semsim
