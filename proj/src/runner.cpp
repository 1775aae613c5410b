#include "immunet/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "immunet/engine.hpp"
#include "immunet/overlay.hpp"
#include "immunet/rng.hpp"

namespace immunet {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr std::uint64_t kUnderlaySeedTag = 0x17A9;
constexpr std::uint64_t kOverlaySeedTag = 0x07E7;

bool is_trace_preset(const std::string& name) {
    try {
        trace_preset(name);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

void write_run_csv(const fs::path& p, const MetricSeries& m) {
    std::ofstream f = open_out(p);
    f << "time_ms,infected,isolated,patched,alerts\n";
    for (const MetricSample& s : m.infected_over_time)
        f << s.t_ms << ',' << s.infected << ',' << s.isolated << ',' << s.patched << ','
          << s.alerts << '\n';
}

void write_cdf(const fs::path& p, std::vector<double> vals, const char* xlabel) {
    std::sort(vals.begin(), vals.end());
    std::ofstream f = open_out(p);
    f << "# " << xlabel << " cum_fraction\n";
    if (vals.empty()) return;
    const std::size_t n = vals.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    for (std::size_t i = stride - 1; i < n; i += stride)
        f << vals[i] << ' ' << static_cast<double>(i + 1) / static_cast<double>(n) << '\n';
    if (n % stride != 0) f << vals[n - 1] << " 1\n";
}

double fraction_le(const std::vector<double>& sorted, double x) {
    if (sorted.empty()) return 0.0;
    auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

Json health_json(const HealthCounts& c) {
    return Json{{"immune", c.immune},
                {"vulnerable", c.vulnerable},
                {"infected", c.infected},
                {"isolated", c.isolated},
                {"patched", c.patched}};
}

/// Mean defense-on peak per grid cell, keyed (trace, ph, host, infect).
using CellKey = std::tuple<std::string, double, double, double>;

struct InternalAggregate {
    std::map<CellKey, std::vector<double>> peaks;

    void add(const RunSpec& r, const MetricSeries& m, bool want_defense) {
        if (r.defense_enabled != want_defense) return;
        peaks[{r.trace, r.immune_ph_pct, r.immune_host_pct, r.initial_infect_pct}].push_back(
            m.peak_infection_pct);
    }

    double mean(const CellKey& k) const {
        auto it = peaks.find(k);
        if (it == peaks.end() || it->second.empty()) return -1.0;
        double s = 0.0;
        for (double v : it->second) s += v;
        return s / static_cast<double>(it->second.size());
    }
};

}  // namespace

RunContext build_run_context(const ExperimentConfig& cfg, const std::string& trace,
                             std::uint64_t seed, std::uint32_t n_external) {
    RunContext ctx;
    const std::size_t window = cfg.engine.defense.window;
    if (is_trace_preset(trace)) {
        TraceSpec ts = trace_preset(trace).scaled(cfg.scale_factor);
        const std::uint64_t n_pre = ts.n_phagocytes + ts.n_managed;
        ctx.underlay = std::make_unique<UnderlayGraph>(
            synthesize_underlay(cfg.underlay, static_cast<std::uint32_t>(n_pre) + n_external,
                                derive_seed(seed, kUnderlaySeedTag)));
        OverlayGraph ov =
            synthesize_overlay(ts, derive_seed(seed, kOverlaySeedTag), ctx.underlay.get());
        std::vector<std::uint32_t> hosts;
        hosts.reserve(ov.phagocytes.size() + ov.managed.size() + n_external);
        hosts.insert(hosts.end(), ov.phagocytes.begin(), ov.phagocytes.end());
        hosts.insert(hosts.end(), ov.managed.begin(), ov.managed.end());
        for (std::uint32_t j = 0; j < n_external; ++j)
            hosts.push_back(static_cast<std::uint32_t>(n_pre) + j);
        ctx.world = World(ctx.underlay.get(), ov, n_external, std::move(hosts), window);
    } else {
        OverlayGraph ov = load_trace(trace);
        const std::uint32_t total =
            static_cast<std::uint32_t>(ov.phagocytes.size() + ov.managed.size()) + n_external;
        ctx.underlay = std::make_unique<UnderlayGraph>(
            synthesize_underlay(cfg.underlay, total, derive_seed(seed, kUnderlaySeedTag)));
        ctx.world = build_world(ctx.underlay.get(), ov, n_external, window);
    }
    return ctx;
}

int run_experiment(const ExperimentConfig& cfg, bool dry_run, std::ostream& log) {
    const std::vector<RunSpec> runs = expand_runs(cfg);
    if (dry_run) {
        log << "run matrix (" << runs.size() << " runs, mode " << to_string(cfg.mode) << "):\n";
        for (const RunSpec& r : runs) log << "  " << r.label << '\n';
        return 0;
    }

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir / "runs");
    open_out(out_dir / "config.json") << config_to_json(cfg);

    Json summary;
    summary["preset"] = cfg.preset;
    summary["mode"] = to_string(cfg.mode);
    summary["scale_factor"] = cfg.scale_factor;
    summary["runs"] = Json::array();

    InternalAggregate agg;
    std::vector<double> all_blowups, all_diffs;
    std::map<double, std::vector<double>> success_by_freq;
    int failures = 0;
    std::size_t idx = 0;

    for (const RunSpec& r : runs) {
        ++idx;
        const auto wall0 = std::chrono::steady_clock::now();
        try {
            Json row;
            row["label"] = r.label;
            row["trace"] = r.trace;
            row["seed"] = r.seed;
            if (cfg.mode == RunMode::internal) {
                const std::uint32_t n_ext = cfg.engine.worm.attack_externals ? cfg.n_external : 0;
                RunContext ctx = build_run_context(cfg, r.trace, r.seed, n_ext);
                seed_outbreak(ctx.world, r.immune_ph_pct, r.immune_host_pct,
                              r.initial_infect_pct, r.seed, cfg.maintainer_fraction);
                EngineParams ep = cfg.engine;
                ep.defense_enabled = r.defense_enabled;
                Simulation sim(std::move(ctx.world), ep, r.seed);
                sim.run();
                const MetricSeries& m = sim.result();
                write_run_csv(out_dir / "runs" / (r.label + ".csv"), m);
                agg.add(r, m, cfg.defense_enabled);
                row["immune_ph_pct"] = r.immune_ph_pct;
                row["immune_host_pct"] = r.immune_host_pct;
                row["initial_infect_pct"] = r.initial_infect_pct;
                row["defense_enabled"] = r.defense_enabled;
                row["peak_infection_pct"] = m.peak_infection_pct;
                row["peak_pct_of_vulnerable"] = m.peak_pct_of_vulnerable;
                row["peak_infected"] = m.peak_infected;
                row["final"] = health_json(m.final_counts);
                row["alerts_broadcast"] = m.alerts_broadcast;
                row["infections_delivered"] = m.infections_delivered;
                row["egress_blocked"] = m.egress_blocked;
                row["external_deliveries"] = m.external_deliveries;
                row["events_processed"] = m.events_processed;
                row["end_time_ms"] = m.end_time_ms;
                row["hit_event_cap"] = m.hit_event_cap;
                log << "[" << idx << "/" << runs.size() << "] " << r.label << ": peak "
                    << m.peak_infection_pct << "% (" << m.peak_pct_of_vulnerable
                    << "% of vulnerable), " << m.events_processed << " events";
            } else if (cfg.mode == RunMode::latency) {
                RunContext ctx = build_run_context(cfg, r.trace, r.seed, cfg.n_external);
                auto pen = latency_penalties(ctx.world, cfg.latency_samples, r.seed);
                std::vector<double> blow, diff;
                blow.reserve(pen.size());
                diff.reserve(pen.size());
                for (const LatencyPenalty& p : pen) {
                    blow.push_back(p.via_ms / p.direct_ms);
                    diff.push_back(p.via_ms - p.direct_ms);
                }
                std::sort(blow.begin(), blow.end());
                all_blowups.insert(all_blowups.end(), blow.begin(), blow.end());
                all_diffs.insert(all_diffs.end(), diff.begin(), diff.end());
                row["samples"] = pen.size();
                row["blowup_le_2"] = fraction_le(blow, 2.0);
                row["blowup_le_2_5"] = fraction_le(blow, 2.5);
                row["min_blowup"] = blow.empty() ? 0.0 : blow.front();
                log << "[" << idx << "/" << runs.size() << "] " << r.label << ": "
                    << pen.size() << " samples, P(blowup<=2) " << fraction_le(blow, 2.0);
            } else {
                const std::uint32_t n_ext = std::max(cfg.n_external, cfg.attack.attackers);
                RunContext ctx = build_run_context(cfg, r.trace, r.seed, n_ext);
                AttackParams ap = cfg.attack;
                ap.frequency_rps = r.frequency_rps;
                AttackOutcomes oc = run_external_attack(ctx.world, ap, r.seed);
                const double pct =
                    oc.total() == 0 ? 0.0
                                    : 100.0 * static_cast<double>(oc.success) /
                                          static_cast<double>(oc.total());
                success_by_freq[r.frequency_rps].push_back(pct);
                row["frequency_rps"] = r.frequency_rps;
                row["success"] = oc.success;
                row["rejected"] = oc.rejected;
                row["timed_out"] = oc.timed_out;
                row["success_pct"] = pct;
                log << "[" << idx << "/" << runs.size() << "] " << r.label << ": "
                    << oc.success << "/" << oc.total() << " ok (" << pct << "%)";
            }
            const double wall_s = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - wall0)
                                      .count();
            row["wall_s"] = wall_s;
            summary["runs"].push_back(std::move(row));
            log << ", " << wall_s << "s\n";
        } catch (const std::exception& e) {
            ++failures;
            log << "[" << idx << "/" << runs.size() << "] FAILED " << r.label << ": " << e.what()
                << '\n';
        }
    }

    // Figure-ready data files.
    if (cfg.mode == RunMode::internal) {
        {
            std::ofstream f = open_out(out_dir / "peaks.dat");
            f << "# trace immune_ph_pct immune_host_pct infect_pct mean_peak_pct n_seeds\n";
            for (const auto& [key, vals] : agg.peaks) {
                const auto& [tr, ph, host, inf] = key;
                f << tr << ' ' << ph << ' ' << host << ' ' << inf << ' ' << agg.mean(key) << ' '
                  << vals.size() << '\n';
            }
        }
        auto pivot = [&](const fs::path& p, const std::string& col_label,
                         const std::vector<std::string>& cols,
                         auto&& key_of) {
            std::ofstream f = open_out(p);
            f << "# infect_pct";
            for (const std::string& c : cols) f << ' ' << col_label << c;
            f << '\n';
            for (double inf : cfg.initial_infect_pct) {
                f << inf;
                for (std::size_t c = 0; c < cols.size(); ++c) f << ' ' << agg.mean(key_of(c, inf));
                f << '\n';
            }
        };
        if (cfg.preset == "exp1") {
            std::vector<std::string> cols;
            for (double ph : cfg.immune_ph_pct) cols.push_back(std::to_string(std::lround(ph)));
            pivot(out_dir / "fig3.dat", "ph", cols, [&](std::size_t c, double inf) {
                return CellKey{cfg.traces[0], cfg.immune_ph_pct[c], cfg.immune_host_pct[0], inf};
            });
        } else if (cfg.preset == "exp2") {
            std::vector<std::string> cols;
            for (double h : cfg.immune_host_pct) cols.push_back(std::to_string(std::lround(h)));
            pivot(out_dir / "fig4.dat", "host", cols, [&](std::size_t c, double inf) {
                return CellKey{cfg.traces[0], cfg.immune_ph_pct[0], cfg.immune_host_pct[c], inf};
            });
        } else if (cfg.preset == "exp3" || cfg.preset == "exp4") {
            pivot(out_dir / (cfg.preset == "exp3" ? "fig5.dat" : "fig6.dat"), "", cfg.traces,
                  [&](std::size_t c, double inf) {
                      return CellKey{cfg.traces[c], cfg.immune_ph_pct[0], cfg.immune_host_pct[0],
                                     inf};
                  });
        }
    } else if (cfg.mode == RunMode::latency) {
        const bool fig = cfg.preset == "exp5";
        write_cdf(out_dir / (fig ? "fig7.dat" : "blowup_cdf.dat"), all_blowups, "blowup_factor");
        write_cdf(out_dir / (fig ? "fig8.dat" : "latdiff_cdf.dat"), all_diffs, "latency_diff_ms");
        std::sort(all_blowups.begin(), all_blowups.end());
        summary["aggregates"] = {{"samples", all_blowups.size()},
                                 {"blowup_le_2", fraction_le(all_blowups, 2.0)},
                                 {"blowup_le_2_5", fraction_le(all_blowups, 2.5)},
                                 {"min_blowup", all_blowups.empty() ? 0.0 : all_blowups.front()}};
    } else {
        std::ofstream f = open_out(out_dir / (cfg.preset == "exp6" ? "fig9.dat"
                                                                   : "attack_success.dat"));
        f << "# frequency_rps mean_success_pct n_seeds\n";
        Json freq_rows = Json::array();
        for (const auto& [freq, vals] : success_by_freq) {
            double s = 0.0;
            for (double v : vals) s += v;
            const double mean = vals.empty() ? 0.0 : s / static_cast<double>(vals.size());
            f << freq << ' ' << mean << ' ' << vals.size() << '\n';
            freq_rows.push_back({{"frequency_rps", freq}, {"mean_success_pct", mean}});
        }
        summary["aggregates"] = {{"success_by_frequency", std::move(freq_rows)}};
    }

    summary["failures"] = failures;
    open_out(out_dir / "summary.json") << summary.dump(2) << '\n';
    return failures == 0 ? 0 : 1;
}

}  // namespace immunet
