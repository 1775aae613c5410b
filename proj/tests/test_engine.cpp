#include <doctest.h>

#include <memory>
#include <random>

#include "immunet/engine.hpp"

using namespace immunet;

namespace {

struct Ctx {
    std::unique_ptr<UnderlayGraph> underlay;
    World world;
};

/// Small synthesized pipeline world: n_ph guardians with a degree-4 mesh,
/// n_leaf managed hosts, optional externals, on a ~24-router underlay.
Ctx make_ctx(std::uint64_t seed, std::uint64_t n_ph = 10, std::uint64_t n_leaf = 40,
             std::uint32_t n_ext = 0) {
    TransitStubParams tp;
    tp.routers_per_transit = 4;
    tp.routers_per_stub = 5;
    Ctx c;
    c.underlay = std::make_unique<UnderlayGraph>(
        synthesize_underlay(tp, static_cast<std::uint32_t>(n_ph + n_leaf + n_ext), seed + 1));
    TraceSpec spec;
    spec.n_phagocytes = n_ph;
    spec.n_managed = n_leaf;
    spec.legacy_fraction = 0.1;
    spec.mesh_degree = 4;
    spec.homing_min = 2;
    spec.homing_max = 3;
    OverlayGraph ov = synthesize_overlay(spec, seed + 2, c.underlay.get());
    c.world = build_world(c.underlay.get(), ov, n_ext);
    return c;
}

/// One guardian with five leaves, no guardian mesh, tiny underlay.
Ctx make_star(std::uint64_t seed) {
    TransitStubParams tp;
    tp.routers_per_transit = 2;
    tp.routers_per_stub = 2;
    Ctx c;
    c.underlay = std::make_unique<UnderlayGraph>(synthesize_underlay(tp, 6, seed));
    OverlayGraph ov;
    ov.phagocytes = {0};
    ov.managed = {1, 2, 3, 4, 5};
    for (NodeId l : ov.managed) ov.manager_of[l] = 0;
    c.world = build_world(c.underlay.get(), ov, 0);
    return c;
}

bool same_series(const MetricSeries& a, const MetricSeries& b) {
    if (a.infected_over_time.size() != b.infected_over_time.size()) return false;
    for (std::size_t i = 0; i < a.infected_over_time.size(); ++i) {
        const MetricSample &x = a.infected_over_time[i], &y = b.infected_over_time[i];
        if (x.t_ms != y.t_ms || x.infected != y.infected || x.isolated != y.isolated ||
            x.patched != y.patched || x.alerts != y.alerts)
            return false;
    }
    return a.peak_infected == b.peak_infected && a.events_processed == b.events_processed &&
           a.end_time_ms == b.end_time_ms && a.alerts_broadcast == b.alerts_broadcast &&
           a.infections_delivered == b.infections_delivered &&
           a.final_counts.patched == b.final_counts.patched &&
           a.final_counts.infected == b.final_counts.infected;
}

}  // namespace

TEST_CASE("outbreak seeding rounds counts and honors the maintainer floor") {
    Ctx c = make_ctx(11, 20, 80);
    REQUIRE(c.world.guardians().size() == 20);
    REQUIRE(c.world.leaves().size() == 80);

    SeedSummary s = seed_outbreak(c.world, 95, 10, 1, 5);
    CHECK(s.immune_phagocytes == 19);  // round(0.95 * 20)
    CHECK(s.immune_hosts == 8);        // round(0.10 * 80)
    CHECK(s.maintainers == 1);         // 1% of 20 rounds to 0, floor lifts to 1
    CHECK(s.infected == 1);            // 1% of the 73 remaining vulnerable
    CHECK(c.world.counts().immune == 27);
    CHECK(c.world.counts().infected == 1);
    CHECK(c.world.counts().vulnerable == 72);

    std::size_t maintainers = 0;
    for (std::uint32_t g : c.world.guardians())
        if (c.world.node(g).maintainer) {
            ++maintainers;
            CHECK(c.world.node(g).health == Health::immune);  // maintainers never fall ill
        }
    CHECK(maintainers == 1);

    Ctx c2 = make_ctx(11, 20, 80);
    SeedSummary s2 = seed_outbreak(c2.world, 0, 0, 0.5, 5, 0.2);
    CHECK(s2.maintainers == 4);
    CHECK(s2.immune_phagocytes == 4);  // only the maintainer floor immunizes

    Ctx c3 = make_ctx(11, 20, 80);
    CHECK_THROWS_AS(seed_outbreak(c3.world, 120, 0, 1, 5), std::invalid_argument);
    CHECK_THROWS_AS(seed_outbreak(c3.world, 100, 100, 1, 5), std::runtime_error);
}

TEST_CASE("a worm wave floods the window and the connection counter") {
    Ctx c = make_star(3);
    c.world.set_health(1, Health::infected);
    Simulation sim(std::move(c.world), EngineParams{}, 17);
    sim.worm_step();
    const NodeState& seed = sim.world().node(1);
    CHECK(seed.conns_this_tick == 64);
    CHECK(seed.window.size() == 64);
    CHECK(seed.window[0] == seed.window[63]);  // one repeated probe signature
}

TEST_CASE("star outbreak is detected, isolated, patched, and reattached") {
    for (double prob : {1.0, 0.0}) {
        CAPTURE(prob);
        Ctx c = make_star(4);
        c.world.set_health(2, Health::infected);
        EngineParams ep;
        ep.worm.infection_success_prob = prob;
        Simulation sim(std::move(c.world), ep, 99);
        sim.run();

        const MetricSeries& r = sim.result();
        CHECK(r.final_counts.infected == 0);
        CHECK(r.final_counts.isolated == 0);
        CHECK(r.final_counts.patched == 6);  // patches reach clean members too
        CHECK_FALSE(r.hit_event_cap);
        CHECK(sim.world().node(0).active_members.size() == 5);  // everyone rejoined
        if (prob == 0.0) {
            CHECK(r.infections_delivered == 0);
            CHECK(r.peak_infected == 1);
        } else {
            CHECK(r.infections_delivered >= 1);  // in-flight probes land after the cut
            CHECK(r.peak_infected >= 2);
        }
    }
}

TEST_CASE("identical seeds replay identical histories") {
    Ctx a = make_ctx(21, 12, 50);
    Ctx b = make_ctx(21, 12, 50);
    seed_outbreak(a.world, 50, 10, 2, 7);
    seed_outbreak(b.world, 50, 10, 2, 7);

    EngineParams ep;
    Simulation s1(std::move(a.world), ep, 1234);
    Simulation s2(std::move(b.world), ep, 1234);
    s1.run();
    s2.run();
    CHECK(same_series(s1.result(), s2.result()));

    Ctx d = make_ctx(21, 12, 50);
    seed_outbreak(d.world, 50, 10, 2, 7);
    Simulation s3(std::move(d.world), ep, 4321);
    s3.run();
    CHECK_FALSE(same_series(s1.result(), s3.result()));  // the seed matters
}

TEST_CASE("defense never worsens the outbreak and always clears it") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 8; ++trial) {
        std::uint64_t n_ph = 6 + rng() % 8;
        std::uint64_t n_leaf = 20 + rng() % 40;
        double prob = trial % 2 == 0 ? 1.0 : 0.5;
        double immune_ph = static_cast<double>(rng() % 60);
        double immune_host = static_cast<double>(rng() % 30);
        CAPTURE(trial);

        MetricSeries res[2];
        std::size_t seeded_immune = 0;
        for (int defense = 0; defense < 2; ++defense) {
            Ctx c = make_ctx(100 + trial, n_ph, n_leaf);
            SeedSummary s = seed_outbreak(c.world, immune_ph, immune_host, 2, trial);
            seeded_immune = s.immune_phagocytes + s.immune_hosts;
            EngineParams ep;
            ep.worm.infection_success_prob = prob;
            ep.defense_enabled = defense == 1;
            Simulation sim(std::move(c.world), ep, 777);
            sim.run();
            res[defense] = sim.result();
            CHECK(sim.result().final_counts.total() == sim.world().size());
            CHECK(sim.result().final_counts.immune == seeded_immune);  // protection holds
        }
        CHECK(res[0].peak_pct_of_vulnerable >= 90.0);  // unchecked worm saturates
        CHECK(res[1].peak_infection_pct <= res[0].peak_infection_pct + 0.5);
        CHECK(res[1].final_counts.infected == 0);  // defense reaches quiescence
        CHECK_FALSE(res[1].hit_event_cap);
    }
}

TEST_CASE("gateway defense keeps worm traffic off external hosts") {
    for (int defense = 0; defense < 2; ++defense) {
        Ctx c = make_ctx(55, 10, 40, 5);
        seed_outbreak(c.world, 20, 0, 2, 3);
        EngineParams ep;
        ep.worm.attack_externals = true;
        ep.defense_enabled = defense == 1;
        Simulation sim(std::move(c.world), ep, 42);
        sim.run();
        if (defense == 1) {
            CHECK(sim.result().external_deliveries == 0);
            CHECK(sim.result().egress_blocked > 0);
        } else {
            CHECK(sim.result().external_deliveries > 0);
            CHECK(sim.result().external_attack_outcomes.total() == 0);
        }
    }
}

TEST_CASE("relayed external routing never beats direct routing") {
    Ctx c = make_ctx(66, 8, 30, 3);
    std::vector<LatencyPenalty> pen = latency_penalties(c.world, 50, 9);
    REQUIRE(!pen.empty());
    for (const LatencyPenalty& p : pen) {
        CHECK(p.direct_ms > 0.0);
        CHECK(p.via_ms >= p.direct_ms);
    }
    std::vector<double> blow = latency_blowups(c.world, 50, 9);
    REQUIRE(blow.size() == pen.size());
    CHECK(std::is_sorted(blow.begin(), blow.end()));
    CHECK(blow.front() >= 1.0);

    OverlayGraph tiny;
    tiny.phagocytes = {0};
    tiny.managed = {1};
    tiny.manager_of[1] = 0;
    World no_net = build_world(nullptr, tiny, 1);
    CHECK_THROWS_AS(latency_penalties(no_net, 10, 1), std::invalid_argument);
}

TEST_CASE("admission floods degrade with difficulty, not with honesty") {
    Ctx cheap = make_ctx(77, 6, 10, 20);
    AttackParams ap;
    ap.attackers = 20;
    ap.frequency_rps = 0.05;
    ap.duration_s = 60.0;
    ap.hash_budget_per_s = 1e12;  // effectively free solving
    AttackOutcomes easy = run_external_attack(cheap.world, ap, 31);
    CHECK(easy.total() > 0);
    CHECK(easy.success == easy.total());  // honest, fast solvers always get in
    CHECK(easy.rejected == 0);

    Ctx strapped = make_ctx(77, 6, 10, 20);
    ap.frequency_rps = 2.0;
    ap.duration_s = 30.0;
    ap.hash_budget_per_s = 0.1;  // nonzero difficulty now takes tens of seconds
    AttackOutcomes hard = run_external_attack(strapped.world, ap, 31);
    CHECK(hard.success >= 1);  // the very first, zero-difficulty requests pass
    CHECK(hard.success < hard.total());
    CHECK(hard.timed_out > 0);

    AttackParams bad;
    bad.attackers = 50;  // more attackers than external hosts
    Ctx small = make_ctx(77, 6, 10, 20);
    CHECK_THROWS_AS(run_external_attack(small.world, bad, 1), std::invalid_argument);
}
