#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "immunet/defense.hpp"
#include "immunet/gatekeeper.hpp"
#include "immunet/world.hpp"

namespace immunet {

struct WormParams {
    std::uint32_t infection_attempts_per_tick = 64;
    double infection_success_prob = 1.0;
    std::uint32_t query_fanout = 4;  // victims reached per key-query wave
    bool attack_externals = false;
};

struct EngineParams {
    DefenseParams defense;
    WormParams worm;
    bool defense_enabled = true;
    double tick_ms = 100.0;             // guardian scan + worm wave cadence
    double metric_interval_ms = 100.0;
    double stale_ms = 2000.0;           // stop after this long without progress
    double max_time_ms = 600'000.0;
    std::uint64_t max_events = 1'000'000;
    std::uint32_t periodic_patch_ticks = 1000;
};

enum class EventKind : std::uint8_t {
    infection_attempt = 0,
    detection_tick = 1,
    alert_delivery = 2,  // payload a: 0 = worm alert (b = epoch), 1 = isolation request
    patch_delivery = 3,  // payload a: 0 urgent arrival, 1 node delivery, 2 wave, 3 wave trigger
    handshake_step = 4,
    external_attack = 5,
    metric_sample = 6,
};

struct SimEvent {
    double t = 0.0;
    EventKind kind = EventKind::metric_sample;
    std::uint64_t seq = 0;
    std::uint32_t src = kNone;
    std::uint32_t dst = kNone;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint32_t origin = kNone;  // first detector, for worm alerts
};

struct MetricSample {
    double t_ms = 0.0;
    std::size_t infected = 0, isolated = 0, patched = 0;
    std::uint64_t alerts = 0;
};

struct AttackOutcomes {
    std::uint64_t success = 0, rejected = 0, timed_out = 0;
    std::uint64_t total() const { return success + rejected + timed_out; }
};

struct MetricSeries {
    std::vector<MetricSample> infected_over_time;
    double peak_infection_pct = 0.0;     // max (infected+isolated) over all P2P hosts
    double peak_pct_of_vulnerable = 0.0; // same peak over initially vulnerable hosts
    std::size_t peak_infected = 0;
    HealthCounts final_counts;
    std::vector<double> latency_blowups;  // sorted
    AttackOutcomes external_attack_outcomes;
    std::uint64_t alerts_broadcast = 0;
    std::uint64_t infections_delivered = 0;
    std::uint64_t egress_blocked = 0;
    std::uint64_t external_deliveries = 0;  // overlay->external payloads let through
    std::uint64_t events_processed = 0;
    double end_time_ms = 0.0;
    bool hit_event_cap = false;
};

struct SeedSummary {
    std::size_t immune_phagocytes = 0;
    std::size_t immune_hosts = 0;
    std::size_t maintainers = 0;
    std::size_t infected = 0;
};

/// Mark immune guardians/hosts and seed the initial infection uniformly at
/// random among the remaining vulnerable nodes. Counts are rounded to
/// nearest with a minimum of one infected when the percentage is positive.
/// A few guardians double as patch maintainers and are always immune.
SeedSummary seed_outbreak(World& world, double immune_ph_pct, double immune_host_pct,
                          double initial_infect_pct, std::uint64_t rng_seed,
                          double maintainer_fraction = 0.01);

/// Single-threaded deterministic event loop: worm waves and guardian scans
/// run on a fixed tick; alerts, isolation requests, patches, and infection
/// attempts travel with underlay latency. Runs until quiescence (no
/// unisolated infected node and nothing in flight), staleness, or a cap.
class Simulation {
public:
    Simulation(World world, EngineParams params, std::uint64_t seed);

    World& world() { return world_; }
    const World& world() const { return world_; }
    const EngineParams& params() const { return params_; }

    void run();
    /// One worm wave at the current simulation time (exposed for tests).
    void worm_step();
    const MetricSeries& result() const { return result_; }

private:
    struct EventAfter {
        bool operator()(const SimEvent& x, const SimEvent& y) const {
            if (x.t != y.t) return x.t > y.t;
            if (x.kind != y.kind) return x.kind > y.kind;
            return x.seq > y.seq;
        }
    };

    double lat(std::uint32_t a, std::uint32_t b) const;
    static bool is_defense_delivery(const SimEvent& e);
    void push(SimEvent e);
    void progress() { last_progress_ = now_; }
    void dispatch(const SimEvent& e);
    void generate_attack(std::uint32_t i);
    void detection_phase();
    void handle_direct_alert(std::uint32_t g);
    void trigger_urgent_patch(std::uint32_t g);
    void distribute_to_members(std::uint32_t g);
    double maintainer_delay(std::uint32_t g) const;
    void sample_metrics();
    void update_peak();

    World world_;
    EngineParams params_;
    std::mt19937_64 rng_;
    std::priority_queue<SimEvent, std::vector<SimEvent>, EventAfter> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::uint64_t tick_no_ = 0;
    std::uint64_t in_flight_ = 0;
    std::uint64_t defense_in_flight_ = 0;
    std::set<std::uint32_t> dirty_managers_;
    std::set<std::uint32_t> dirty_windows_;
    std::vector<std::uint32_t> dirty_conns_;
    std::vector<char> patch_pending_;
    std::vector<std::uint32_t> maintainers_;
    BehaviorPair worm_pair_;
    std::size_t initial_vulnerable_ = 0;
    std::size_t n_hosts_ = 0;
    double last_progress_ = 0.0;
    MetricSeries result_;
};

struct AttackParams {
    std::uint32_t attackers = 100;
    double frequency_rps = 0.05;      // requests per second per attacker
    double hash_budget_per_s = 1e6;   // per attacker
    double duration_s = 120.0;
    double deadline_s = 10.0;
    double capacity_rps = 50.0;       // per-guardian admission capacity (load term)
    GatekeeperParams gatekeeper;
};

/// External flood: each attacker camps on one random guardian and issues
/// handshakes honestly (it must solve every puzzle; solve cost is the drawn
/// number of hash attempts against its budget, solved serially). A request
/// succeeds iff it is admitted and proxied within its deadline.
AttackOutcomes run_external_attack(World& world, const AttackParams& params,
                                   std::uint64_t seed);

struct LatencyPenalty {
    double direct_ms = 0.0;
    double via_ms = 0.0;
};

/// Sampled external->overlay latency pairs: direct routing vs. relaying
/// through the target's responsible guardian. Zero-latency pairs skipped.
std::vector<LatencyPenalty> latency_penalties(const World& world,
                                              std::size_t samples_per_external,
                                              std::uint64_t seed);

/// Penalty factors via_ms/direct_ms from latency_penalties, sorted ascending.
std::vector<double> latency_blowups(const World& world, std::size_t samples_per_external,
                                    std::uint64_t seed);

}  // namespace immunet
