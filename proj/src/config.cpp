#include "immunet/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace immunet {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

double get_number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

bool get_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected a boolean");
    return j.get<bool>();
}

std::string get_string(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::int64_t get_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<std::int64_t>();
}

std::uint64_t get_uint(const Json& j, const std::string& path) {
    std::int64_t v = get_int(j, path);
    if (v < 0) fail(path, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> get_number_list(const Json& j, const std::string& path) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        if (j.empty()) fail(path, "list must not be empty");
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    } else {
        fail(path, "expected a number or a list of numbers");
    }
    return out;
}

std::vector<std::uint64_t> get_uint_list(const Json& j, const std::string& path) {
    std::vector<std::uint64_t> out;
    if (j.is_number_integer()) {
        out.push_back(get_uint(j, path));
    } else if (j.is_array()) {
        if (j.empty()) fail(path, "list must not be empty");
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(get_uint(j[i], path + "[" + std::to_string(i) + "]"));
    } else {
        fail(path, "expected an integer or a list of integers");
    }
    return out;
}

std::vector<std::string> get_string_list(const Json& j, const std::string& path) {
    std::vector<std::string> out;
    if (j.is_string()) {
        out.push_back(j.get<std::string>());
    } else if (j.is_array()) {
        if (j.empty()) fail(path, "list must not be empty");
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(get_string(j[i], path + "[" + std::to_string(i) + "]"));
    } else {
        fail(path, "expected a string or a list of strings");
    }
    return out;
}

/// Walks an object's keys against a handler table, rejecting strays.
struct ObjectReader {
    ObjectReader(const Json& o, std::string pfx) : obj(o), prefix(std::move(pfx)) {}

    const Json& obj;
    std::string prefix;  // "" at top level, "worm." inside sections

    template <typename Fn>
    void key(const char* name, Fn&& fn) const {
        auto it = obj.find(name);
        if (it != obj.end()) fn(*it, prefix + name);
        handled.push_back(name);
    }

    void finish() const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool known = false;
            for (const std::string& h : handled)
                if (h == it.key()) { known = true; break; }
            if (!known) fail(prefix + it.key(), "unknown key");
        }
    }

    mutable std::vector<std::string> handled;
};

void read_worm(const Json& j, const std::string& path, WormParams& w) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("infection_attempts_per_tick", [&](const Json& v, const std::string& p) {
        w.infection_attempts_per_tick = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("infection_success_prob", [&](const Json& v, const std::string& p) {
        w.infection_success_prob = get_number(v, p);
    });
    r.key("query_fanout", [&](const Json& v, const std::string& p) {
        w.query_fanout = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("attack_externals", [&](const Json& v, const std::string& p) {
        w.attack_externals = get_bool(v, p);
    });
    r.finish();
}

void read_defense(const Json& j, const std::string& path, DefenseParams& d) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("theta_d", [&](const Json& v, const std::string& p) { d.theta_d = get_number(v, p); });
    r.key("theta_a", [&](const Json& v, const std::string& p) { d.theta_a = get_number(v, p); });
    r.key("window", [&](const Json& v, const std::string& p) {
        d.window = static_cast<std::size_t>(get_uint(v, p));
    });
    r.key("rate_limit", [&](const Json& v, const std::string& p) {
        d.rate_limit = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("sample_threshold", [&](const Json& v, const std::string& p) {
        d.sample_threshold = static_cast<std::size_t>(get_uint(v, p));
    });
    r.key("sample_peers", [&](const Json& v, const std::string& p) {
        d.sample_peers = static_cast<std::size_t>(get_uint(v, p));
    });
    r.finish();
}

void read_engine(const Json& j, const std::string& path, EngineParams& e) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("tick_ms", [&](const Json& v, const std::string& p) { e.tick_ms = get_number(v, p); });
    r.key("metric_interval_ms", [&](const Json& v, const std::string& p) {
        e.metric_interval_ms = get_number(v, p);
    });
    r.key("stale_ms", [&](const Json& v, const std::string& p) { e.stale_ms = get_number(v, p); });
    r.key("max_time_ms", [&](const Json& v, const std::string& p) {
        e.max_time_ms = get_number(v, p);
    });
    r.key("max_events", [&](const Json& v, const std::string& p) { e.max_events = get_uint(v, p); });
    r.key("periodic_patch_ticks", [&](const Json& v, const std::string& p) {
        e.periodic_patch_ticks = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.finish();
}

void read_gatekeeper(const Json& j, const std::string& path, GatekeeperParams& g) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("k_max", [&](const Json& v, const std::string& p) {
        g.k_max = static_cast<int>(get_int(v, p));
    });
    r.key("rotation_period_s", [&](const Json& v, const std::string& p) {
        g.rotation_period_s = get_number(v, p);
    });
    r.key("solve_cap", [&](const Json& v, const std::string& p) {
        g.solve_cap = static_cast<int>(get_int(v, p));
    });
    r.key("solve_window_s", [&](const Json& v, const std::string& p) {
        g.solve_window_s = get_number(v, p);
    });
    r.key("secret_bits", [&](const Json& v, const std::string& p) {
        g.secret_bits = static_cast<int>(get_int(v, p));
    });
    r.finish();
}

void read_underlay(const Json& j, const std::string& path, TransitStubParams& u) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("transit_domains", [&](const Json& v, const std::string& p) {
        u.transit_domains = static_cast<int>(get_int(v, p));
    });
    r.key("routers_per_transit", [&](const Json& v, const std::string& p) {
        u.routers_per_transit = static_cast<int>(get_int(v, p));
    });
    r.key("stub_domains_per_transit_router", [&](const Json& v, const std::string& p) {
        u.stub_domains_per_transit_router = static_cast<int>(get_int(v, p));
    });
    r.key("routers_per_stub", [&](const Json& v, const std::string& p) {
        u.routers_per_stub = static_cast<int>(get_int(v, p));
    });
    r.key("p_transit", [&](const Json& v, const std::string& p) { u.p_transit = get_number(v, p); });
    r.key("p_stub", [&](const Json& v, const std::string& p) { u.p_stub = get_number(v, p); });
    r.key("lan_delay_ms", [&](const Json& v, const std::string& p) {
        u.lan_delay_ms = get_number(v, p);
    });
    r.key("core_delay_ms", [&](const Json& v, const std::string& p) {
        u.core_delay_ms = get_number(v, p);
    });
    r.finish();
}

void read_attack(const Json& j, const std::string& path, AttackParams& a) {
    if (!j.is_object()) fail(path, "expected an object");
    ObjectReader r{j, path + "."};
    r.key("attackers", [&](const Json& v, const std::string& p) {
        a.attackers = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("hash_budget_per_s", [&](const Json& v, const std::string& p) {
        a.hash_budget_per_s = get_number(v, p);
    });
    r.key("duration_s", [&](const Json& v, const std::string& p) {
        a.duration_s = get_number(v, p);
    });
    r.key("deadline_s", [&](const Json& v, const std::string& p) {
        a.deadline_s = get_number(v, p);
    });
    r.key("capacity_rps", [&](const Json& v, const std::string& p) {
        a.capacity_rps = get_number(v, p);
    });
    r.finish();
}

void check_range(double v, double lo, double hi, const std::string& path) {
    if (!(v >= lo && v <= hi)) {
        std::ostringstream os;
        os << v << " out of range [" << lo << "," << hi << "]";
        fail(path, os.str());
    }
}

void check_positive(double v, const std::string& path) {
    if (!(v > 0.0)) fail(path, "must be positive");
}

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

std::string to_string(RunMode m) {
    switch (m) {
        case RunMode::internal: return "internal";
        case RunMode::latency: return "latency";
        case RunMode::attack: return "attack";
    }
    return "?";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "internal") return RunMode::internal;
    if (s == "latency") return RunMode::latency;
    if (s == "attack") return RunMode::attack;
    fail("mode", "'" + s + "' is not one of internal|latency|attack");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
    const std::vector<double> infect_grid{0.001, 0.01, 0.1, 1, 5, 10, 25, 50};
    cfg.preset = name;
    if (name == "exp1") {
        cfg.mode = RunMode::internal;
        cfg.traces = {"trace1"};
        cfg.immune_ph_pct = {100, 95, 90, 80, 70, 60, 50};
        cfg.immune_host_pct = {10};
        cfg.initial_infect_pct = infect_grid;
    } else if (name == "exp2") {
        cfg.mode = RunMode::internal;
        cfg.traces = {"trace1"};
        cfg.immune_ph_pct = {95};
        cfg.immune_host_pct = {0, 10, 20, 30};
        cfg.initial_infect_pct = infect_grid;
    } else if (name == "exp3") {
        cfg.mode = RunMode::internal;
        cfg.traces = {"trace1", "trace2", "trace5", "trace6"};
        cfg.immune_ph_pct = {95};
        cfg.immune_host_pct = {10};
        cfg.initial_infect_pct = infect_grid;
    } else if (name == "exp4") {
        cfg.mode = RunMode::internal;
        cfg.traces = {"trace3", "trace4", "trace5"};
        cfg.immune_ph_pct = {95};
        cfg.immune_host_pct = {10};
        cfg.initial_infect_pct = infect_grid;
    } else if (name == "exp5") {
        cfg.mode = RunMode::latency;
        cfg.traces = {"trace1"};
    } else if (name == "exp6") {
        cfg.mode = RunMode::attack;
        cfg.traces = {"trace1"};
        cfg.attack_frequencies = {0.002, 0.01, 0.05, 0.5};
        cfg.attack.duration_s = 600.0;
    } else {
        fail("preset", "'" + name + "' is not one of exp1..exp6");
    }
}

ExperimentConfig parse_config_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    ExperimentConfig cfg;
    if (auto it = j.find("preset"); it != j.end() && !get_string(*it, "preset").empty())
        apply_preset(cfg, it->get<std::string>());

    ObjectReader r{j, ""};
    r.key("preset", [&](const Json&, const std::string&) { /* applied above */ });
    r.key("mode", [&](const Json& v, const std::string& p) {
        cfg.mode = run_mode_from_string(get_string(v, p));
    });
    r.key("trace", [&](const Json& v, const std::string& p) { cfg.traces = get_string_list(v, p); });
    r.key("scale_factor", [&](const Json& v, const std::string& p) {
        cfg.scale_factor = get_number(v, p);
    });
    r.key("immune_ph_pct", [&](const Json& v, const std::string& p) {
        cfg.immune_ph_pct = get_number_list(v, p);
    });
    r.key("immune_host_pct", [&](const Json& v, const std::string& p) {
        cfg.immune_host_pct = get_number_list(v, p);
    });
    r.key("initial_infect_pct", [&](const Json& v, const std::string& p) {
        cfg.initial_infect_pct = get_number_list(v, p);
    });
    r.key("seeds", [&](const Json& v, const std::string& p) { cfg.seeds = get_uint_list(v, p); });
    r.key("defense_enabled", [&](const Json& v, const std::string& p) {
        cfg.defense_enabled = get_bool(v, p);
    });
    r.key("baseline_defense_off", [&](const Json& v, const std::string& p) {
        cfg.baseline_defense_off = get_bool(v, p);
    });
    r.key("maintainer_fraction", [&](const Json& v, const std::string& p) {
        cfg.maintainer_fraction = get_number(v, p);
    });
    r.key("worm", [&](const Json& v, const std::string& p) { read_worm(v, p, cfg.engine.worm); });
    r.key("defense", [&](const Json& v, const std::string& p) {
        read_defense(v, p, cfg.engine.defense);
    });
    r.key("engine", [&](const Json& v, const std::string& p) { read_engine(v, p, cfg.engine); });
    r.key("gatekeeper", [&](const Json& v, const std::string& p) {
        read_gatekeeper(v, p, cfg.attack.gatekeeper);
    });
    r.key("underlay", [&](const Json& v, const std::string& p) {
        read_underlay(v, p, cfg.underlay);
    });
    r.key("attack", [&](const Json& v, const std::string& p) { read_attack(v, p, cfg.attack); });
    r.key("attack_frequencies", [&](const Json& v, const std::string& p) {
        cfg.attack_frequencies = get_number_list(v, p);
    });
    r.key("n_external", [&](const Json& v, const std::string& p) {
        cfg.n_external = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("latency_samples", [&](const Json& v, const std::string& p) {
        cfg.latency_samples = static_cast<std::uint32_t>(get_uint(v, p));
    });
    r.key("output_dir", [&](const Json& v, const std::string& p) {
        cfg.output_dir = get_string(v, p);
    });
    r.finish();

    validate_config(cfg);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* dir = std::getenv("IMMUNET_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
    if (const char* seed = std::getenv("IMMUNET_SEED"); seed && *seed) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(seed, &end, 10);
        if (end == seed || *end != '\0')
            throw std::invalid_argument("config: IMMUNET_SEED: '" + std::string(seed) +
                                        "' is not an unsigned integer");
        cfg.seeds = {static_cast<std::uint64_t>(v)};
    }
}

void validate_config(const ExperimentConfig& cfg) {
    if (!cfg.preset.empty() && !(cfg.preset.size() == 4 && cfg.preset.compare(0, 3, "exp") == 0 &&
                                 cfg.preset[3] >= '1' && cfg.preset[3] <= '6'))
        fail("preset", "'" + cfg.preset + "' is not one of exp1..exp6");
    if (cfg.traces.empty()) fail("trace", "at least one trace is required");
    for (std::size_t i = 0; i < cfg.traces.size(); ++i)
        if (cfg.traces[i].empty()) fail("trace[" + std::to_string(i) + "]", "must not be empty");
    if (!(cfg.scale_factor > 0.0 && cfg.scale_factor <= 1.0))
        fail("scale_factor", fmt_num(cfg.scale_factor) + " out of range (0,1]");
    for (double v : cfg.immune_ph_pct) check_range(v, 0, 100, "immune_ph_pct");
    for (double v : cfg.immune_host_pct) check_range(v, 0, 100, "immune_host_pct");
    for (double v : cfg.initial_infect_pct) check_range(v, 0, 100, "initial_infect_pct");
    if (cfg.seeds.empty()) fail("seeds", "at least one seed is required");
    check_range(cfg.maintainer_fraction, 0, 1, "maintainer_fraction");

    const WormParams& w = cfg.engine.worm;
    if (w.infection_attempts_per_tick == 0) fail("worm.infection_attempts_per_tick", "must be positive");
    check_range(w.infection_success_prob, 0, 1, "worm.infection_success_prob");

    const DefenseParams& d = cfg.engine.defense;
    check_range(d.theta_d, 0, 1, "defense.theta_d");
    check_range(d.theta_a, 0, 1, "defense.theta_a");
    if (d.window == 0) fail("defense.window", "must be positive");
    if (d.sample_peers == 0) fail("defense.sample_peers", "must be positive");

    const EngineParams& e = cfg.engine;
    check_positive(e.tick_ms, "engine.tick_ms");
    check_positive(e.metric_interval_ms, "engine.metric_interval_ms");
    check_positive(e.stale_ms, "engine.stale_ms");
    check_positive(e.max_time_ms, "engine.max_time_ms");
    if (e.max_events == 0) fail("engine.max_events", "must be positive");
    if (e.periodic_patch_ticks == 0) fail("engine.periodic_patch_ticks", "must be positive");

    const GatekeeperParams& g = cfg.attack.gatekeeper;
    if (g.k_max < 0 || g.k_max > 32) fail("gatekeeper.k_max", "out of range [0,32]");
    check_positive(g.rotation_period_s, "gatekeeper.rotation_period_s");
    if (g.solve_cap <= 0) fail("gatekeeper.solve_cap", "must be positive");
    check_positive(g.solve_window_s, "gatekeeper.solve_window_s");
    if (g.secret_bits < 8 || g.secret_bits > 256 || g.secret_bits % 8 != 0)
        fail("gatekeeper.secret_bits", "must be a multiple of 8 in [8,256]");

    const TransitStubParams& u = cfg.underlay;
    if (u.transit_domains < 1) fail("underlay.transit_domains", "must be at least 1");
    if (u.routers_per_transit < 1) fail("underlay.routers_per_transit", "must be at least 1");
    if (u.stub_domains_per_transit_router < 0)
        fail("underlay.stub_domains_per_transit_router", "must be nonnegative");
    if (u.routers_per_stub < 1) fail("underlay.routers_per_stub", "must be at least 1");
    check_range(u.p_transit, 0, 1, "underlay.p_transit");
    check_range(u.p_stub, 0, 1, "underlay.p_stub");
    if (u.lan_delay_ms < 0) fail("underlay.lan_delay_ms", "must be nonnegative");
    if (u.core_delay_ms < 0) fail("underlay.core_delay_ms", "must be nonnegative");

    const AttackParams& a = cfg.attack;
    if (a.attackers == 0) fail("attack.attackers", "must be positive");
    if (a.hash_budget_per_s < 0) fail("attack.hash_budget_per_s", "must be nonnegative");
    check_positive(a.duration_s, "attack.duration_s");
    check_positive(a.deadline_s, "attack.deadline_s");
    check_positive(a.capacity_rps, "attack.capacity_rps");
    if (cfg.attack_frequencies.empty()) fail("attack_frequencies", "at least one frequency");
    for (double f : cfg.attack_frequencies) check_positive(f, "attack_frequencies");
    if (cfg.latency_samples == 0) fail("latency_samples", "must be positive");
    if (cfg.output_dir.empty()) fail("output_dir", "must not be empty");
}

std::string config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["preset"] = cfg.preset;
    j["mode"] = to_string(cfg.mode);
    j["trace"] = cfg.traces;
    j["scale_factor"] = cfg.scale_factor;
    j["immune_ph_pct"] = cfg.immune_ph_pct;
    j["immune_host_pct"] = cfg.immune_host_pct;
    j["initial_infect_pct"] = cfg.initial_infect_pct;
    j["seeds"] = cfg.seeds;
    j["defense_enabled"] = cfg.defense_enabled;
    j["baseline_defense_off"] = cfg.baseline_defense_off;
    j["maintainer_fraction"] = cfg.maintainer_fraction;
    j["worm"] = {{"infection_attempts_per_tick", cfg.engine.worm.infection_attempts_per_tick},
                 {"infection_success_prob", cfg.engine.worm.infection_success_prob},
                 {"query_fanout", cfg.engine.worm.query_fanout},
                 {"attack_externals", cfg.engine.worm.attack_externals}};
    j["defense"] = {{"theta_d", cfg.engine.defense.theta_d},
                    {"theta_a", cfg.engine.defense.theta_a},
                    {"window", cfg.engine.defense.window},
                    {"rate_limit", cfg.engine.defense.rate_limit},
                    {"sample_threshold", cfg.engine.defense.sample_threshold},
                    {"sample_peers", cfg.engine.defense.sample_peers}};
    j["engine"] = {{"tick_ms", cfg.engine.tick_ms},
                   {"metric_interval_ms", cfg.engine.metric_interval_ms},
                   {"stale_ms", cfg.engine.stale_ms},
                   {"max_time_ms", cfg.engine.max_time_ms},
                   {"max_events", cfg.engine.max_events},
                   {"periodic_patch_ticks", cfg.engine.periodic_patch_ticks}};
    j["gatekeeper"] = {{"k_max", cfg.attack.gatekeeper.k_max},
                       {"rotation_period_s", cfg.attack.gatekeeper.rotation_period_s},
                       {"solve_cap", cfg.attack.gatekeeper.solve_cap},
                       {"solve_window_s", cfg.attack.gatekeeper.solve_window_s},
                       {"secret_bits", cfg.attack.gatekeeper.secret_bits}};
    j["underlay"] = {{"transit_domains", cfg.underlay.transit_domains},
                     {"routers_per_transit", cfg.underlay.routers_per_transit},
                     {"stub_domains_per_transit_router", cfg.underlay.stub_domains_per_transit_router},
                     {"routers_per_stub", cfg.underlay.routers_per_stub},
                     {"p_transit", cfg.underlay.p_transit},
                     {"p_stub", cfg.underlay.p_stub},
                     {"lan_delay_ms", cfg.underlay.lan_delay_ms},
                     {"core_delay_ms", cfg.underlay.core_delay_ms}};
    j["attack"] = {{"attackers", cfg.attack.attackers},
                   {"hash_budget_per_s", cfg.attack.hash_budget_per_s},
                   {"duration_s", cfg.attack.duration_s},
                   {"deadline_s", cfg.attack.deadline_s},
                   {"capacity_rps", cfg.attack.capacity_rps}};
    j["attack_frequencies"] = cfg.attack_frequencies;
    j["n_external"] = cfg.n_external;
    j["latency_samples"] = cfg.latency_samples;
    j["output_dir"] = cfg.output_dir;
    return j.dump(2) + "\n";
}

std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg) {
    std::vector<RunSpec> runs;
    auto seed_tag = [](std::uint64_t s) { return "_s" + std::to_string(s); };

    if (cfg.mode == RunMode::latency) {
        for (const std::string& tr : cfg.traces)
            for (std::uint64_t s : cfg.seeds) {
                RunSpec r;
                r.trace = tr;
                r.seed = s;
                r.label = tr + "_lat" + seed_tag(s);
                runs.push_back(std::move(r));
            }
        return runs;
    }
    if (cfg.mode == RunMode::attack) {
        for (const std::string& tr : cfg.traces)
            for (double f : cfg.attack_frequencies)
                for (std::uint64_t s : cfg.seeds) {
                    RunSpec r;
                    r.trace = tr;
                    r.seed = s;
                    r.frequency_rps = f;
                    r.label = tr + "_f" + fmt_num(f) + seed_tag(s);
                    runs.push_back(std::move(r));
                }
        return runs;
    }

    std::vector<bool> defenses;
    defenses.push_back(cfg.defense_enabled);
    if (cfg.baseline_defense_off && cfg.defense_enabled) defenses.push_back(false);

    for (const std::string& tr : cfg.traces)
        for (double ph : cfg.immune_ph_pct)
            for (double host : cfg.immune_host_pct)
                for (double inf : cfg.initial_infect_pct)
                    for (bool def : defenses)
                        for (std::uint64_t s : cfg.seeds) {
                            RunSpec r;
                            r.trace = tr;
                            r.immune_ph_pct = ph;
                            r.immune_host_pct = host;
                            r.initial_infect_pct = inf;
                            r.seed = s;
                            r.defense_enabled = def;
                            r.label = tr + "_ph" + fmt_num(ph) + "_h" + fmt_num(host) + "_i" +
                                      fmt_num(inf) + seed_tag(s) + (def ? "_on" : "_off");
                            runs.push_back(std::move(r));
                        }
    return runs;
}

}  // namespace immunet
