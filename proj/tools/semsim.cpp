#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "semsim/bonsai.hpp"
#include "semsim/csv.hpp"
#include "semsim/dit.hpp"
#include "semsim/engine.hpp"
#include "semsim/toyisa.hpp"
#include "semsim/workload.hpp"

using namespace semsim;

namespace {

int usage(const std::string& msg) {
    if (!msg.empty()) std::fprintf(stderr, "semsim: %s\n", msg.c_str());
    std::fprintf(stderr,
                 "usage: semsim <command> [flags]\n"
                 "  run        --config FILE | [--nodes N --scheme S --dit V --tcm on|off]\n"
                 "             [--workload FILE] [--instrs N] [--miss-rate R] [--rng-seed N] [--out DIR]\n"
                 "  sweep      [--nodes a,b,..] [--miss-rate r1,r2,..] [--scheme s1,s2,..]\n"
                 "             [--config FILE] [--instrs N] [--rng-seed N] [--out DIR]\n"
                 "  amat       [--grid free|costly|both] [--out DIR]\n"
                 "  overhead   BLOCK COUNTER MAC HASH | --block N --counter N --mac N --hash N [--out DIR]\n"
                 "  attack     --scenario stale-read|campaign [--tcm on|off] [--runs N] [--rng-seed N] [--out DIR]\n"
                 "  smu-golden [--scenario NAME] [--out DIR]\n");
    return 1;
}

struct Args {
    std::vector<std::string> positional;
    std::map<std::string, std::string> flags;
};

std::optional<Args> parse_args(int argc, char** argv, int from) {
    Args a;
    for (int i = from; i < argc; ++i) {
        std::string s = argv[i];
        if (s.rfind("--", 0) == 0) {
            if (i + 1 >= argc) {
                usage("missing value for " + s);
                return std::nullopt;
            }
            a.flags[s.substr(2)] = argv[++i];
        } else {
            a.positional.push_back(s);
        }
    }
    return a;
}

bool check_flags(const Args& a, std::initializer_list<const char*> allowed) {
    for (auto& [k, _] : a.flags) {
        bool ok = false;
        for (const char* s : allowed) ok = ok || k == s;
        if (!ok) {
            usage("unknown flag: --" + k);
            return false;
        }
    }
    return true;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Prints to stdout and, when an output directory was requested, writes the
// same bytes to <dir>/<name>.csv. The file copy is the machine contract.
int emit(const std::string& csv, const Args& a, const std::string& name) {
    std::fputs(csv.c_str(), stdout);
    auto it = a.flags.find("out");
    if (it == a.flags.end()) return 0;
    std::filesystem::create_directories(it->second);
    std::string path = it->second + "/" + name + ".csv";
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        std::fprintf(stderr, "semsim: cannot write %s\n", path.c_str());
        return 1;
    }
    f << csv;
    return 0;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// Workload files are either explicit traces (they contain "#thread") or
// `key = value` synthesis specs.
SynthParams parse_synth_spec(const std::string& text) {
    SynthParams p;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        std::string_view v = line;
        while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
        if (v.empty() || v.front() == '#') continue;
        auto eq = v.find('=');
        if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.remove_suffix(1);
            return std::string(s);
        };
        std::string key = trim(v.substr(0, eq));
        std::string val = trim(v.substr(eq + 1));
        if (key == "nodes") p.nodes = std::stoul(val);
        else if (key == "instrs_per_node") p.instrs_per_node = std::stoul(val);
        else if (key == "miss_rate") p.target_node_miss_rate = std::stod(val);
        else if (key == "store_fraction") p.store_fraction = std::stod(val);
        else if (key == "shared_blocks") p.shared_region_blocks = std::stoul(val);
        else if (key == "private_blocks") p.private_region_blocks = std::stoul(val);
        else if (key == "rng_seed") p.rng_seed = std::stoull(val);
        else throw ParseError(lineno, "unknown workload key: " + key);
    }
    return p;
}

SimConfig config_from(const Args& a) {
    SimConfig cfg;
    auto it = a.flags.find("config");
    if (it != a.flags.end()) cfg = parse_config(read_file(it->second));
    if (a.flags.count("nodes")) cfg.nodes = std::stoi(a.flags.at("nodes"));
    if (a.flags.count("scheme")) cfg.scheme = a.flags.at("scheme");
    if (a.flags.count("dit")) cfg.dit = a.flags.at("dit");
    if (a.flags.count("rng-seed")) cfg.rng_seed = std::stoull(a.flags.at("rng-seed"));
    if (a.flags.count("tcm")) {
        const std::string& v = a.flags.at("tcm");
        if (v != "on" && v != "off") throw std::runtime_error("bad value for --tcm: " + v);
        cfg.tcm = v == "on";
    }
    return cfg;
}

Workload workload_from(const Args& a, const SimConfig& cfg) {
    auto it = a.flags.find("workload");
    if (it != a.flags.end()) {
        std::string text = read_file(it->second);
        if (text.find("#thread") != std::string::npos) return parse_trace(text);
        SynthParams p = parse_synth_spec(text);
        return gen_synthetic(p);
    }
    SynthParams p;
    p.nodes = static_cast<size_t>(cfg.nodes);
    p.rng_seed = cfg.rng_seed;
    if (a.flags.count("instrs")) p.instrs_per_node = std::stoul(a.flags.at("instrs"));
    if (a.flags.count("miss-rate")) p.target_node_miss_rate = std::stod(a.flags.at("miss-rate"));
    return gen_synthetic(p);
}

std::string stats_header(const StatsReport& s, const std::vector<std::string>& key_cols) {
    std::vector<std::string> cells = key_cols;
    for (auto& [name, _] : s.columns()) cells.push_back(name);
    return csv_join(cells);
}

std::string stats_row(const StatsReport& s, const std::vector<std::string>& key_cells) {
    std::vector<std::string> cells = key_cells;
    for (auto& [_, v] : s.columns()) cells.push_back(format_g9(v));
    return csv_join(cells);
}

int cmd_run(const Args& a) {
    if (!check_flags(a, {"config", "workload", "nodes", "scheme", "dit", "tcm", "instrs", "miss-rate", "rng-seed", "out"})) return 1;
    SimConfig cfg = config_from(a);
    Workload wl = workload_from(a, cfg);
    RunResult rr = run_simulation(cfg, wl);
    std::string csv = stats_header(rr.stats, {"halted"}) + "\n" +
                      stats_row(rr.stats, {rr.halted ? "1" : "0"}) + "\n";
    int rc = emit(csv, a, "run");
    if (rc) return rc;
    return rr.halted ? 2 : 0;
}

int cmd_sweep(const Args& a) {
    if (!check_flags(a, {"config", "nodes", "miss-rate", "scheme", "instrs", "rng-seed", "out"})) return 1;
    std::vector<int> nodes;
    for (auto& s : split_list(a.flags.count("nodes") ? a.flags.at("nodes") : "16,64,128,256"))
        nodes.push_back(std::stoi(s));
    std::vector<double> rates;
    for (auto& s : split_list(a.flags.count("miss-rate") ? a.flags.at("miss-rate") : "0.01,0.05,0.10,0.20"))
        rates.push_back(std::stod(s));
    std::vector<std::string> schemes =
        split_list(a.flags.count("scheme") ? a.flags.at("scheme") : "none,sdsm,baseline16");
    size_t instrs = a.flags.count("instrs") ? std::stoul(a.flags.at("instrs")) : 10000;
    uint64_t seed = a.flags.count("rng-seed") ? std::stoull(a.flags.at("rng-seed")) : 1;

    SimConfig base = config_from(a);

    struct Cell {
        std::string scheme;
        int nodes;
        double rate;
        StatsReport stats;
        bool halted;
    };
    std::vector<Cell> cells;
    for (auto& sch : schemes)
        for (int n : nodes)
            for (double r : rates) cells.push_back({sch, n, r, {}, false});

    size_t max_threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("SEMSIM_THREADS")) {
        size_t cap = std::strtoul(env, nullptr, 10);
        if (cap > 0) max_threads = cap;
    }
    if (max_threads == 0) max_threads = 1;
    max_threads = std::min(max_threads, cells.size());

    // workers pull cells off a shared counter; output order is fixed by the
    // cells vector so the CSV stays byte-identical at any thread count
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_text;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= cells.size() || failed.load()) return;
            Cell& c = cells[i];
            try {
                SynthParams p;
                p.nodes = static_cast<size_t>(c.nodes);
                p.instrs_per_node = instrs;
                p.target_node_miss_rate = c.rate;
                p.rng_seed = seed;
                Workload wl = gen_synthetic(p);
                SimConfig cfg = base;
                cfg.nodes = c.nodes;
                cfg.scheme = c.scheme;
                cfg.rng_seed = seed;
                RunResult rr = run_simulation(cfg, wl);
                c.stats = rr.stats;
                c.halted = rr.halted;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(error_mu);
                error_text = e.what();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t t = 0; t < max_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) throw std::runtime_error(error_text);

    std::string csv = stats_header(cells[0].stats, {"scheme", "nodes", "miss_pct"}) + "\n";
    for (auto& c : cells) {
        if (c.halted) throw std::runtime_error("sweep cell halted: " + c.scheme);
        csv += stats_row(c.stats, {c.scheme, std::to_string(c.nodes), format_g9(c.rate * 100.0)});
        csv += "\n";
    }
    return emit(csv, a, "sweep");
}

int cmd_amat(const Args& a) {
    if (!check_flags(a, {"grid", "out"})) return 1;
    std::string which = a.flags.count("grid") ? a.flags.at("grid") : "both";
    if (which != "free" && which != "costly" && which != "both")
        throw std::runtime_error("bad value for --grid: " + which);
    std::string csv =
        "grid,variant,hit_rate,t_c,t_coh,t_fetch,t_int_miss,t_rem_mult,node_miss,"
        "amat_baseline,amat_dit,overhead_pct\n";
    auto add = [&](const std::string& grid_name, const AmatGrid& g) {
        for (const AmatCell& c : amat_sweep(g)) {
            std::vector<std::string> cells = {
                grid_name,
                to_string(c.variant),
                format_g9(c.hit_rate),
                format_g9(c.t_c),
                format_g9(c.t_coh),
                format_g9(c.t_fetch),
                format_g9(c.t_int_miss),
                format_g9(c.t_rem_mult),
                format_g9(c.node_miss),
                format_g9(c.amat_baseline),
                format_g9(c.amat_dit),
                format_g9(c.overhead_pct),
            };
            csv += csv_join(cells) + "\n";
        }
    };
    if (which != "costly") add("free_directory", grid_free_directory());
    if (which != "free") add("costly_directory", grid_costly_directory());
    return emit(csv, a, "amat");
}

int cmd_overhead(const Args& a) {
    if (!check_flags(a, {"block", "counter", "mac", "hash", "out"})) return 1;
    size_t vals[4];
    const char* names[4] = {"block", "counter", "mac", "hash"};
    if (a.positional.size() == 4) {
        for (int i = 0; i < 4; ++i) vals[i] = std::stoul(a.positional[i]);
    } else if (a.positional.empty()) {
        for (int i = 0; i < 4; ++i) {
            auto it = a.flags.find(names[i]);
            if (it == a.flags.end())
                throw std::runtime_error(std::string("missing --") + names[i]);
            vals[i] = std::stoul(it->second);
        }
    } else {
        return usage("overhead takes four sizes or four --flags");
    }
    double frac = memory_overhead(vals[0], vals[1], vals[2], vals[3]);
    std::string csv = "block,counter,mac,hash,fraction\n" +
                      csv_join({std::to_string(vals[0]), std::to_string(vals[1]),
                                std::to_string(vals[2]), std::to_string(vals[3]),
                                format_g9(frac)}) +
                      "\n";
    return emit(csv, a, "overhead");
}

int cmd_attack(const Args& a) {
    if (!check_flags(a, {"scenario", "tcm", "runs", "rng-seed", "out"})) return 1;
    std::string scen = a.flags.count("scenario") ? a.flags.at("scenario") : "stale-read";
    if (scen == "stale-read") {
        bool tcm_on = true;
        if (a.flags.count("tcm")) {
            const std::string& v = a.flags.at("tcm");
            if (v != "on" && v != "off") throw std::runtime_error("bad value for --tcm: " + v);
            tcm_on = v == "on";
        }
        AttackOutcome out = run_stale_read_attack(tcm_on);
        std::string csv =
            "scenario,tcm,tamper_detections,silent_corruption\n" +
            csv_join({"stale-read", tcm_on ? "on" : "off",
                      format_g9(static_cast<double>(out.stats.tamper_detections)),
                      format_g9(static_cast<double>(out.silent_corruptions))}) +
            "\n";
        int rc = emit(csv, a, "attack");
        if (rc) return rc;
        return out.tamper_detected && out.silent_corruptions == 0 ? 2 : 0;
    }
    if (scen == "campaign") {
        int runs = a.flags.count("runs") ? std::stoi(a.flags.at("runs")) : 400;
        uint64_t seed = a.flags.count("rng-seed") ? std::stoull(a.flags.at("rng-seed")) : 1;
        CampaignSummary cs = run_adversary_campaign(seed, runs);
        std::string csv =
            "scenario,runs,injections,detected,clean,silent_corruption\n" +
            csv_join({"campaign", std::to_string(cs.runs), std::to_string(cs.injections),
                      std::to_string(cs.detected), std::to_string(cs.clean),
                      std::to_string(cs.silent)}) +
            "\n";
        int rc = emit(csv, a, "attack");
        if (rc) return rc;
        return cs.detected >= 1 && cs.silent == 0 ? 2 : 0;
    }
    throw std::runtime_error("unknown scenario: " + scen);
}

int cmd_smu_golden(const Args& a) {
    if (!check_flags(a, {"scenario", "out"})) return 1;
    std::vector<std::string> names;
    if (a.flags.count("scenario")) names.push_back(a.flags.at("scenario"));
    else names = smu_scenario_names();
    std::string csv = "scenario,events,matched\n";
    bool all_ok = true;
    for (const auto& name : names) {
        SmuScenario sc = gen_smu_program(name);
        ToyProgram prog = parse_program(sc.program);
        uint64_t first = prog.labels.at(sc.first_label);
        std::optional<uint64_t> sig;
        if (sc.sig_label) sig = prog.labels.at(*sc.sig_label);
        ToyMachine m(prog, first, sig);
        EventTrace got = m.run(sc.actions);
        bool ok = got == sc.golden;
        all_ok = all_ok && ok;
        csv += csv_join({name, std::to_string(got.size()), ok ? "1" : "0"}) + "\n";
    }
    int rc = emit(csv, a, "smu_golden");
    if (rc) return rc;
    return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage("missing command");
    std::string cmd = argv[1];
    auto parsed = parse_args(argc, argv, 2);
    if (!parsed) return 1;
    try {
        if (cmd == "run") return cmd_run(*parsed);
        if (cmd == "sweep") return cmd_sweep(*parsed);
        if (cmd == "amat") return cmd_amat(*parsed);
        if (cmd == "overhead") return cmd_overhead(*parsed);
        if (cmd == "attack") return cmd_attack(*parsed);
        if (cmd == "smu-golden") return cmd_smu_golden(*parsed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "semsim: %s\n", e.what());
        return 1;
    }
    return usage("unknown command: " + cmd);
}
