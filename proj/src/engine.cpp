#include "immunet/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_map>

#include "immunet/rng.hpp"

namespace immunet {
namespace {

std::string worm_payload(std::uint64_t seed) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t v = derive_seed(seed, 0x3057);
    std::string s = "wrm#";
    for (int i = 0; i < 16; ++i) s.push_back(hex[(v >> (4 * (15 - i))) & 0xf]);
    return s;
}

}  // namespace

SeedSummary seed_outbreak(World& world, double immune_ph_pct, double immune_host_pct,
                          double initial_infect_pct, std::uint64_t rng_seed,
                          double maintainer_fraction) {
    auto pct_ok = [](double p) { return p >= 0.0 && p <= 100.0; };
    if (!pct_ok(immune_ph_pct) || !pct_ok(immune_host_pct) || !pct_ok(initial_infect_pct))
        throw std::invalid_argument("seed_outbreak: percentages must be in [0,100]");
    if (maintainer_fraction < 0.0 || maintainer_fraction > 1.0)
        throw std::invalid_argument("seed_outbreak: maintainer fraction must be in [0,1]");

    std::mt19937_64 rng(derive_seed(rng_seed, 0x5EED));
    SeedSummary out;

    std::vector<std::uint32_t> phs = world.guardians();
    shuffle_det(phs, rng);
    std::size_t n_imm_ph =
        static_cast<std::size_t>(std::llround(immune_ph_pct / 100.0 * phs.size()));
    std::size_t n_maint = phs.empty() ? 0
                                      : std::max<std::size_t>(
                                            1, static_cast<std::size_t>(std::llround(
                                                   maintainer_fraction * phs.size())));
    n_maint = std::min(n_maint, phs.size());
    for (std::size_t i = 0; i < phs.size() && i < std::max(n_imm_ph, n_maint); ++i) {
        world.set_health(phs[i], Health::immune);
        if (i < n_maint) {
            world.node(phs[i]).maintainer = true;
            ++out.maintainers;
        }
        ++out.immune_phagocytes;
    }

    std::vector<std::uint32_t> ls = world.leaves();
    shuffle_det(ls, rng);
    std::size_t n_imm_host =
        static_cast<std::size_t>(std::llround(immune_host_pct / 100.0 * ls.size()));
    for (std::size_t i = 0; i < ls.size() && i < n_imm_host; ++i) {
        world.set_health(ls[i], Health::immune);
        ++out.immune_hosts;
    }

    std::vector<std::uint32_t> pool;
    for (std::uint32_t g : world.guardians())
        if (world.node(g).health == Health::vulnerable) pool.push_back(g);
    for (std::uint32_t l : world.leaves())
        if (world.node(l).health == Health::vulnerable) pool.push_back(l);
    std::size_t n_inf =
        static_cast<std::size_t>(std::llround(initial_infect_pct / 100.0 * pool.size()));
    if (initial_infect_pct > 0.0 && n_inf == 0) n_inf = 1;
    if (n_inf > pool.size())
        throw std::runtime_error("seed_outbreak: not enough vulnerable hosts to infect");
    shuffle_det(pool, rng);
    for (std::size_t i = 0; i < n_inf; ++i) {
        world.set_health(pool[i], Health::infected);
        ++out.infected;
    }
    return out;
}

Simulation::Simulation(World world, EngineParams params, std::uint64_t seed)
    : world_(std::move(world)),
      params_(params),
      rng_(derive_seed(seed, 0xE1613E)),
      worm_pair_{Op::connect, worm_payload(seed)} {
    patch_pending_.assign(world_.size(), 0);
    for (std::uint32_t g : world_.guardians())
        if (world_.node(g).maintainer) maintainers_.push_back(g);
    n_hosts_ = world_.guardians().size() + world_.leaves().size();
    initial_vulnerable_ = world_.counts().vulnerable + world_.counts().infected;
}

double Simulation::lat(std::uint32_t a, std::uint32_t b) const {
    return world_.underlay() ? world_.latency(a, b) : 1.0;
}

void Simulation::push(SimEvent e) {
    e.seq = seq_++;
    if (is_defense_delivery(e)) ++defense_in_flight_;
    queue_.push(e);
}

bool Simulation::is_defense_delivery(const SimEvent& e) {
    // Alerts, isolation requests, and patch deliveries headed to a node —
    // everything the response still owes the world, as opposed to the
    // self-rescheduling tick/sample/wave-trigger housekeeping.
    return e.kind == EventKind::alert_delivery ||
           (e.kind == EventKind::patch_delivery && e.a != 3);
}

double Simulation::maintainer_delay(std::uint32_t g) const {
    if (maintainers_.empty()) return 100.0;  // implicit patch server
    double best = -1.0;
    for (std::uint32_t m : maintainers_) {
        double d = lat(g, m);
        if (best < 0.0 || d < best) best = d;
    }
    return best;
}

void Simulation::distribute_to_members(std::uint32_t g) {
    for (std::uint32_t m : world_.original_members(g)) {
        Health h = world_.node(m).health;
        if (h == Health::vulnerable || h == Health::infected || h == Health::isolated) {
            SimEvent e;
            e.t = now_ + lat(g, m);
            e.kind = EventKind::patch_delivery;
            e.src = g;
            e.dst = m;
            e.a = 1;
            push(e);
        }
    }
}

void Simulation::trigger_urgent_patch(std::uint32_t g) {
    const NodeState& n = world_.node(g);
    if (n.health == Health::patched || n.health == Health::immune) {
        // Already has the patch; just push it down to any sick members.
        distribute_to_members(g);
        return;
    }
    if (patch_pending_[g]) return;
    patch_pending_[g] = 1;
    SimEvent e;
    e.t = now_ + maintainer_delay(g);
    e.kind = EventKind::patch_delivery;
    e.dst = g;
    e.a = 0;
    push(e);
}

void Simulation::handle_direct_alert(std::uint32_t g) {
    AlertDecision dec = propagate_alert(world_, g, tick_no_, g, kNone, now_, params_.defense);
    if (dec.broadcast) {
        ++result_.alerts_broadcast;
        progress();
    }
    for (std::uint32_t tg : dec.targets) {
        SimEvent e;
        e.t = now_ + lat(g, tg);
        e.kind = EventKind::alert_delivery;
        e.src = g;
        e.dst = tg;
        e.a = 0;
        e.b = tick_no_;
        e.origin = g;
        push(e);
    }
    if (dec.pull_patch) trigger_urgent_patch(g);
}

void Simulation::generate_attack(std::uint32_t i) {
    NodeState& n = world_.node(i);
    std::vector<std::uint32_t> targets;
    auto add = [&](std::uint32_t t) {
        if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    };

    if (n.role == NodeRole::managed) {
        if (!n.link_active) return;  // quarantined: every overlay path is gone
        const NodeState& mgr = world_.node(n.manager);
        for (std::uint32_t s : mgr.active_members)
            if (s != i) add(s);
        add(n.manager);
        const auto& ls = world_.leaves();
        for (std::uint32_t f = 0; f < params_.worm.query_fanout; ++f) {
            std::uint32_t j = ls[rand_index(rng_, ls.size())];
            if (j != i && world_.node(j).manager != n.manager) add(j);
        }
    } else if (n.role == NodeRole::phagocyte) {
        for (std::uint32_t m : n.active_members) add(m);
        for (std::uint32_t nb : n.active_neighbors) add(nb);
    } else {
        return;
    }

    if (params_.worm.attack_externals && !world_.externals().empty()) {
        const auto& ex = world_.externals();
        std::uint32_t e = ex[rand_index(rng_, ex.size())];
        if (params_.defense_enabled) {
            EgressDecision dec = filter_egress(world_, i, e, TrafficKind::p2p);
            if (!dec.allowed) {
                ++result_.egress_blocked;
                if (dec.alarm_guardian != kNone) handle_direct_alert(dec.alarm_guardian);
            } else {
                ++result_.external_deliveries;
            }
        } else {
            ++result_.external_deliveries;
        }
    }

    if (targets.empty()) return;

    std::uint32_t total = params_.worm.infection_attempts_per_tick;
    n.conns_this_tick += total;
    dirty_conns_.push_back(i);
    for (std::uint32_t k = 0; k < total; ++k) n.window.push(worm_pair_);
    if (n.role == NodeRole::managed)
        dirty_managers_.insert(n.manager);
    else
        dirty_windows_.insert(i);

    const std::uint32_t T = static_cast<std::uint32_t>(targets.size());
    for (std::uint32_t idx = 0; idx < T; ++idx) {
        std::uint32_t tries = total / T + (idx < total % T ? 1 : 0);
        if (tries == 0) continue;
        std::uint32_t tgt = targets[idx];
        if (world_.node(tgt).health != Health::vulnerable) continue;
        SimEvent e;
        e.t = now_ + lat(i, tgt);
        e.kind = EventKind::infection_attempt;
        e.src = i;
        e.dst = tgt;
        e.a = tries;
        push(e);
        ++in_flight_;
    }
}

void Simulation::worm_step() {
    for (std::uint32_t i : world_.infected_set()) generate_attack(i);
}

void Simulation::detection_phase() {
    for (std::uint32_t g : dirty_managers_) {
        if (world_.node(g).health == Health::isolated) continue;
        auto flagged = detect_managed(world_, g, params_.defense, rng_);
        if (flagged.empty()) continue;
        auto iso = isolate(world_, g, flagged);
        if (!iso.cut_leaves.empty()) progress();
        handle_direct_alert(g);
    }

    std::set<std::uint32_t> scan;
    for (std::uint32_t g : dirty_windows_)
        for (std::uint32_t nb : world_.node(g).active_neighbors) scan.insert(nb);
    for (std::uint32_t g : scan) {
        if (world_.node(g).health == Health::isolated) continue;
        auto flagged = detect_neighbors(world_, g, params_.defense, rng_);
        if (flagged.empty()) continue;
        for (std::uint32_t f : flagged) {
            SimEvent e;
            e.t = now_ + lat(g, f);
            e.kind = EventKind::alert_delivery;
            e.src = g;
            e.dst = f;
            e.a = 1;  // isolation request
            push(e);
        }
        handle_direct_alert(g);
    }
}

void Simulation::sample_metrics() {
    const HealthCounts& c = world_.counts();
    result_.infected_over_time.push_back(
        {now_, c.infected, c.isolated, c.patched, result_.alerts_broadcast});
}

void Simulation::update_peak() {
    const HealthCounts& c = world_.counts();
    std::size_t cur = c.infected + c.isolated;
    if (cur > result_.peak_infected) result_.peak_infected = cur;
}

void Simulation::dispatch(const SimEvent& e) {
    if (is_defense_delivery(e)) --defense_in_flight_;
    switch (e.kind) {
        case EventKind::infection_attempt: {
            --in_flight_;
            NodeState& t = world_.node(e.dst);
            if (t.role == NodeRole::external) {
                ++result_.external_deliveries;
                break;
            }
            if (t.health != Health::vulnerable) break;
            double p = params_.worm.infection_success_prob;
            bool hit = p >= 1.0;
            if (!hit && p > 0.0)
                hit = rand_unit(rng_) < 1.0 - std::pow(1.0 - p, static_cast<double>(e.a));
            if (hit) {
                world_.set_health(e.dst, Health::infected);
                ++result_.infections_delivered;
                progress();
            }
            break;
        }
        case EventKind::detection_tick: {
            ++tick_no_;
            worm_step();
            if (params_.defense_enabled) {
                detection_phase();
            }
            dirty_managers_.clear();
            dirty_windows_.clear();
            for (std::uint32_t c : dirty_conns_) world_.node(c).conns_this_tick = 0;
            dirty_conns_.clear();
            SimEvent next;
            next.t = now_ + params_.tick_ms;
            next.kind = EventKind::detection_tick;
            push(next);
            break;
        }
        case EventKind::alert_delivery: {
            if (e.a == 1) {  // isolation request
                auto out = apply_isolation_request(world_, e.dst);
                if (out.cut_any) progress();
                if (out.pull_patch) trigger_urgent_patch(e.dst);
                break;
            }
            AlertDecision dec = propagate_alert(world_, e.dst, e.b, e.origin, e.src, now_,
                                                params_.defense);
            if (dec.broadcast) {
                ++result_.alerts_broadcast;
                progress();
            }
            for (std::uint32_t tg : dec.targets) {
                SimEvent fwd;
                fwd.t = now_ + lat(e.dst, tg);
                fwd.kind = EventKind::alert_delivery;
                fwd.src = e.dst;
                fwd.dst = tg;
                fwd.a = 0;
                fwd.b = e.b;
                fwd.origin = e.origin;
                push(fwd);
            }
            if (dec.pull_patch) trigger_urgent_patch(e.dst);
            break;
        }
        case EventKind::patch_delivery: {
            if (e.a == 0) {  // urgent pull arrival at a guardian
                patch_pending_[e.dst] = 0;
                PatchOutcome out = apply_patch(world_, e.dst);
                if (!out.already_protected) progress();
                distribute_to_members(e.dst);
            } else if (e.a == 1) {  // delivery to one node
                PatchOutcome out = apply_patch(world_, e.dst);
                if (!out.already_protected) progress();
            } else if (e.a == 2) {  // periodic wave flooding the guardian tier
                NodeState& g = world_.node(e.dst);
                if (g.patch_waves_seen.count(e.b)) break;
                g.patch_waves_seen.insert(e.b);
                PatchOutcome out = apply_patch(world_, e.dst);
                if (!out.already_protected) progress();
                for (std::uint32_t nb : g.active_neighbors) {
                    SimEvent fwd;
                    fwd.t = now_ + lat(e.dst, nb);
                    fwd.kind = EventKind::patch_delivery;
                    fwd.src = e.dst;
                    fwd.dst = nb;
                    fwd.a = 2;
                    fwd.b = e.b;
                    push(fwd);
                }
                distribute_to_members(e.dst);
            } else {  // wave trigger at the maintainers
                const HealthCounts& c = world_.counts();
                if (c.vulnerable + c.infected + c.isolated == 0) break;
                for (std::uint32_t m : maintainers_) {
                    SimEvent wv;
                    wv.t = now_;
                    wv.kind = EventKind::patch_delivery;
                    wv.dst = m;
                    wv.a = 2;
                    wv.b = e.b;
                    push(wv);
                }
                SimEvent next;
                next.t = now_ + params_.periodic_patch_ticks * params_.tick_ms;
                next.kind = EventKind::patch_delivery;
                next.a = 3;
                next.b = e.b + 1;
                push(next);
            }
            break;
        }
        case EventKind::metric_sample: {
            sample_metrics();
            SimEvent next;
            next.t = now_ + params_.metric_interval_ms;
            next.kind = EventKind::metric_sample;
            push(next);
            break;
        }
        case EventKind::handshake_step:
        case EventKind::external_attack:
            break;  // only used by the external-attack loop
    }
}

void Simulation::run() {
    result_ = MetricSeries{};
    now_ = 0.0;
    last_progress_ = 0.0;
    tick_no_ = 0;

    SimEvent tick;
    tick.kind = EventKind::detection_tick;
    tick.t = 0.0;
    push(tick);
    SimEvent ms;
    ms.kind = EventKind::metric_sample;
    ms.t = 0.0;
    push(ms);
    if (!maintainers_.empty()) {
        SimEvent wave;
        wave.kind = EventKind::patch_delivery;
        wave.a = 3;
        wave.b = 1;
        wave.t = params_.periodic_patch_ticks * params_.tick_ms;
        push(wave);
    }

    while (!queue_.empty()) {
        SimEvent e = queue_.top();
        if (e.t > params_.max_time_ms) break;
        queue_.pop();
        now_ = e.t;
        dispatch(e);
        ++result_.events_processed;
        update_peak();
        if (result_.events_processed >= params_.max_events) {
            result_.hit_event_cap = true;
            break;
        }
        // Quiescent only once the outbreak is over AND the response has
        // drained: pending patches must land so end-state counts are honest.
        if (world_.counts().infected == 0 && in_flight_ == 0 && defense_in_flight_ == 0) break;
        if (now_ - last_progress_ > params_.stale_ms) break;
    }

    sample_metrics();
    result_.final_counts = world_.counts();
    result_.end_time_ms = now_;
    result_.peak_infection_pct =
        n_hosts_ ? 100.0 * static_cast<double>(result_.peak_infected) / n_hosts_ : 0.0;
    result_.peak_pct_of_vulnerable =
        initial_vulnerable_
            ? 100.0 * static_cast<double>(result_.peak_infected) / initial_vulnerable_
            : 0.0;
}

AttackOutcomes run_external_attack(World& world, const AttackParams& params,
                                   std::uint64_t seed) {
    if (params.attackers == 0) throw std::invalid_argument("attack: attackers must be positive");
    if (params.frequency_rps <= 0.0)
        throw std::invalid_argument("attack: frequency must be positive");
    if (params.duration_s <= 0.0) throw std::invalid_argument("attack: duration must be positive");
    if (world.externals().size() < params.attackers)
        throw std::invalid_argument("attack: world has fewer external hosts than attackers");
    if (world.guardians().empty()) throw std::invalid_argument("attack: world has no guardians");

    std::mt19937_64 rng(derive_seed(seed, 0xA77C));

    struct Server {
        SecretSchedule secrets;
        ReplayDb replay;
        AdaptationState adapt;
        std::deque<double> admits;
    };
    std::unordered_map<std::uint32_t, Server> servers;
    auto server_of = [&](std::uint32_t g) -> Server& {
        auto it = servers.find(g);
        if (it == servers.end())
            it = servers
                     .emplace(g, Server{SecretSchedule(params.gatekeeper, derive_seed(seed, g)),
                                        ReplayDb(params.gatekeeper.rotation_period_s),
                                        AdaptationState(params.gatekeeper),
                                        {}})
                     .first;
        return it->second;
    };

    const auto& guardians = world.guardians();
    struct Attacker {
        std::uint32_t ext = 0;
        std::uint32_t guardian = 0;
        ClientAddr addr;
        double free_at_s = 0.0;
    };
    std::vector<Attacker> attackers(params.attackers);
    for (std::uint32_t j = 0; j < params.attackers; ++j) {
        attackers[j].ext = world.externals()[j];
        attackers[j].guardian = guardians[rand_index(rng, guardians.size())];
        attackers[j].addr = ClientAddr::v4(10, static_cast<std::uint8_t>(j >> 16),
                                           static_cast<std::uint8_t>(j >> 8),
                                           static_cast<std::uint8_t>(j));
    }

    struct Pending {
        double t_s = 0.0;  // submit arrival time at the server
        std::uint64_t seq = 0;
        std::uint32_t attacker = 0;
        double started_s = 0.0;
        std::uint64_t si_h = 0, si_p = 0;
        int k = 0;
    };
    auto later = [](const Pending& x, const Pending& y) {
        if (x.t_s != y.t_s) return x.t_s > y.t_s;
        return x.seq > y.seq;
    };
    std::priority_queue<Pending, std::vector<Pending>, decltype(later)> submits(later);
    std::uint64_t seq = 0;

    AttackOutcomes out;

    // Arrival processing in time order; each arrival may enqueue one submit.
    struct Arrival {
        double t_s;
        std::uint32_t attacker;
    };
    std::vector<Arrival> arrivals;
    for (std::uint32_t j = 0; j < params.attackers; ++j) {
        double offset = rand_unit(rng) / params.frequency_rps;
        for (double t = offset; t < params.duration_s; t += 1.0 / params.frequency_rps)
            arrivals.push_back({t, j});
    }
    std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& x, const Arrival& y) {
        if (x.t_s != y.t_s) return x.t_s < y.t_s;
        return x.attacker < y.attacker;
    });

    auto process_submit = [&](const Pending& s) {
        Attacker& at = attackers[s.attacker];
        Server& sv = server_of(at.guardian);
        double now = s.t_s;
        // Admission order: replay, authenticity under current-or-previous
        // secret, then (honest-by-construction) solution, then bookkeeping.
        if (sv.replay.seen(s.si_h, s.si_p)) {
            ++out.rejected;
            return;
        }
        HashAlg alg = sv.secrets.params().hash;
        bool authentic =
            make_challenge(sv.secrets.at(now), at.addr, s.si_h, s.k, alg).si_p == s.si_p;
        if (!authentic) {
            if (auto prev = sv.secrets.previous(now))
                authentic = make_challenge(*prev, at.addr, s.si_h, s.k, alg).si_p == s.si_p;
        }
        if (!authentic) {
            ++out.rejected;
            return;
        }
        sv.replay.record(s.si_h, s.si_p, now);
        sv.replay.purge(now);
        sv.adapt.note_solve(at.addr, now);
        sv.admits.push_back(now);
        double elapsed = now - s.started_s;
        if (elapsed <= params.deadline_s)
            ++out.success;
        else
            ++out.timed_out;
    };

    std::size_t ai = 0;
    while (ai < arrivals.size() || !submits.empty()) {
        bool take_submit = !submits.empty() &&
                           (ai >= arrivals.size() || submits.top().t_s <= arrivals[ai].t_s);
        if (take_submit) {
            Pending s = submits.top();
            submits.pop();
            process_submit(s);
            continue;
        }
        const Arrival& ar = arrivals[ai++];
        Attacker& at = attackers[ar.attacker];
        Server& sv = server_of(at.guardian);
        double now = ar.t_s;

        while (!sv.admits.empty() && sv.admits.front() < now - 1.0) sv.admits.pop_front();
        sv.adapt.set_load(std::min(1.0, static_cast<double>(sv.admits.size()) /
                                            std::max(1.0, params.capacity_rps)));

        std::uint64_t si_h = rng();
        int k = choose_difficulty(sv.adapt, at.addr, now);
        Message2 challenge =
            make_challenge(sv.secrets.at(now), at.addr, si_h, k, sv.secrets.params().hash);

        double leg = world.latency(at.ext, at.guardian) / 1000.0;  // ms -> s
        double challenge_at = now + 2.0 * leg;

        double solve_s;
        if (k == 0) {
            solve_s = 0.0;  // first candidate works; no search needed
        } else if (params.hash_budget_per_s <= 0.0) {
            ++out.timed_out;  // can never finish the search
            continue;
        } else {
            double u = rand_unit(rng);
            double p = std::pow(0.5, k);
            double attempts = std::floor(std::log1p(-u) / std::log1p(-p)) + 1.0;
            solve_s = attempts / params.hash_budget_per_s;
        }

        double start_solve = std::max(at.free_at_s, challenge_at);
        at.free_at_s = start_solve + solve_s;
        Pending s;
        s.t_s = at.free_at_s + leg;
        s.seq = seq++;
        s.attacker = ar.attacker;
        s.started_s = now;
        s.si_h = si_h;
        s.si_p = challenge.si_p;
        s.k = k;
        submits.push(s);
    }
    return out;
}

std::vector<LatencyPenalty> latency_penalties(const World& world,
                                              std::size_t samples_per_external,
                                              std::uint64_t seed) {
    if (!world.underlay()) throw std::invalid_argument("latency_penalties: world has no underlay");
    std::mt19937_64 rng(derive_seed(seed, 0xB10));
    std::vector<std::uint32_t> overlay;
    overlay.insert(overlay.end(), world.guardians().begin(), world.guardians().end());
    overlay.insert(overlay.end(), world.leaves().begin(), world.leaves().end());
    std::vector<LatencyPenalty> out;
    const UnderlayGraph& g = *world.underlay();
    for (std::uint32_t e : world.externals()) {
        for (std::size_t s = 0; s < samples_per_external; ++s) {
            std::uint32_t t = overlay[rand_index(rng, overlay.size())];
            const NodeState& tn = world.node(t);
            std::uint32_t ph = tn.role == NodeRole::phagocyte ? t : tn.manager;
            if (ph == kNone) continue;
            double direct = world.latency(e, t);
            if (direct <= 0.0) continue;
            double via = proxy_latency(g, world.underlay_host(e), world.underlay_host(ph),
                                       world.underlay_host(t));
            out.push_back({direct, via});
        }
    }
    return out;
}

std::vector<double> latency_blowups(const World& world, std::size_t samples_per_external,
                                    std::uint64_t seed) {
    std::vector<double> out;
    for (const LatencyPenalty& p : latency_penalties(world, samples_per_external, seed))
        out.push_back(p.via_ms / p.direct_ms);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace immunet
