#include "immunet/defense.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "immunet/rng.hpp"

namespace immunet {
namespace {

struct Dsu {
    std::vector<std::uint32_t> parent, rank_;
    explicit Dsu(std::size_t n) : parent(n), rank_(n, 0) {
        std::iota(parent.begin(), parent.end(), 0u);
    }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }
};

/// Nodes of `pop` whose similarity cluster covers a strict majority of the
/// whole population. Nodes with empty windows can never join a cluster but
/// still count toward the majority denominator.
std::vector<std::uint32_t> majority_cluster(const World& world,
                                            const std::vector<std::uint32_t>& pop,
                                            const DefenseParams& params, std::mt19937_64& rng) {
    std::vector<std::uint32_t> cand;
    for (std::uint32_t i = 0; i < pop.size(); ++i)
        if (!world.node(pop[i]).window.empty()) cand.push_back(i);
    if (cand.size() < 2) return {};

    Dsu dsu(pop.size());
    auto similar = [&](std::uint32_t i, std::uint32_t j) {
        return is_similar(world.node(pop[i]).window, world.node(pop[j]).window, params.theta_d);
    };
    if (pop.size() <= params.sample_threshold) {
        for (std::size_t a = 0; a < cand.size(); ++a)
            for (std::size_t b = a + 1; b < cand.size(); ++b)
                if (dsu.find(cand[a]) != dsu.find(cand[b]) && similar(cand[a], cand[b]))
                    dsu.unite(cand[a], cand[b]);
    } else {
        for (std::uint32_t i : cand)
            for (std::size_t s = 0; s < params.sample_peers; ++s) {
                std::uint32_t j = cand[rand_index(rng, cand.size())];
                if (j != i && dsu.find(i) != dsu.find(j) && similar(i, j)) dsu.unite(i, j);
            }
    }

    std::vector<std::uint32_t> comp_size(pop.size(), 0);
    for (std::uint32_t i : cand) ++comp_size[dsu.find(i)];
    std::uint32_t best_root = kNone;
    std::uint32_t best = 0;
    for (std::uint32_t i : cand) {
        std::uint32_t r = dsu.find(i);
        if (comp_size[r] > best) {
            best = comp_size[r];
            best_root = r;
        }
    }
    if (2ull * best <= pop.size()) return {};
    std::vector<std::uint32_t> out;
    for (std::uint32_t i : cand)
        if (dsu.find(i) == best_root) out.push_back(pop[i]);
    return out;  // pop is sorted, so out is too
}

}  // namespace

std::vector<std::uint32_t> detect_managed(const World& world, std::uint32_t ph,
                                          const DefenseParams& params, std::mt19937_64& rng) {
    const NodeState& g = world.node(ph);
    if (g.role != NodeRole::phagocyte) throw std::invalid_argument("detect_managed: not a guardian");
    if (g.health == Health::isolated) return {};
    std::vector<std::uint32_t> flagged;
    for (std::uint32_t m : g.active_members)
        if (world.node(m).conns_this_tick > params.rate_limit) flagged.push_back(m);
    std::vector<std::uint32_t> cluster = majority_cluster(world, g.active_members, params, rng);
    flagged.insert(flagged.end(), cluster.begin(), cluster.end());
    std::sort(flagged.begin(), flagged.end());
    flagged.erase(std::unique(flagged.begin(), flagged.end()), flagged.end());
    return flagged;
}

std::vector<std::uint32_t> detect_neighbors(const World& world, std::uint32_t ph,
                                            const DefenseParams& params, std::mt19937_64& rng) {
    const NodeState& g = world.node(ph);
    if (g.role != NodeRole::phagocyte)
        throw std::invalid_argument("detect_neighbors: not a guardian");
    if (g.health == Health::isolated) return {};
    return majority_cluster(world, g.active_neighbors, params, rng);
}

IsolationOutcome isolate(World& world, std::uint32_t ph,
                         const std::vector<std::uint32_t>& flagged) {
    if (world.node(ph).role != NodeRole::phagocyte)
        throw std::invalid_argument("isolate: not a guardian");
    IsolationOutcome out;
    for (std::uint32_t f : flagged) {
        NodeState& n = world.node(f);
        if (n.role == NodeRole::managed && n.manager == ph) {
            if (n.link_active) world.cut_leaf_link(f);
            n.quarantined = true;
            if (n.health == Health::infected) world.set_health(f, Health::isolated);
            out.cut_leaves.push_back(f);
        } else if (n.role == NodeRole::phagocyte && f != ph) {
            out.requested_guardians.push_back(f);
        }
    }
    return out;
}

IsolationRequestOutcome apply_isolation_request(World& world, std::uint32_t g) {
    NodeState& n = world.node(g);
    if (n.role != NodeRole::phagocyte)
        throw std::invalid_argument("apply_isolation_request: not a guardian");
    IsolationRequestOutcome out;
    out.cut_any = !n.active_neighbors.empty() || !n.active_members.empty();
    world.cut_guardian_links(g);
    out.cut_members = n.active_members;  // copy: cutting mutates the list
    for (std::uint32_t m : out.cut_members) world.cut_leaf_link(m);
    if (n.health == Health::infected) world.set_health(g, Health::isolated);
    out.pull_patch = n.health != Health::patched && n.health != Health::immune;
    return out;
}

AlertDecision propagate_alert(World& world, std::uint32_t ph, std::uint64_t epoch,
                              std::uint32_t origin, std::uint32_t from, double now_ms,
                              const DefenseParams& params) {
    NodeState& n = world.node(ph);
    if (n.role != NodeRole::phagocyte)
        throw std::invalid_argument("propagate_alert: not a guardian");
    auto [it, created] = n.alerts.try_emplace(epoch);
    WormAlert& alert = it->second;
    if (created) {
        alert.timestamp_ms = now_ms;
        alert.origin = origin;
    }
    if (from != kNone) {
        auto pos = std::lower_bound(alert.hop_set.begin(), alert.hop_set.end(), from);
        if (pos == alert.hop_set.end() || *pos != from) alert.hop_set.insert(pos, from);
    }

    AlertDecision decision;
    if (!alert.patch_pulled) {
        alert.patch_pulled = true;
        decision.pull_patch = true;
    }
    if (!alert.broadcast_done) {
        bool direct = from == kNone;
        double received = static_cast<double>(alert.hop_set.size());
        bool majority = received > params.theta_a * static_cast<double>(n.active_neighbors.size());
        if (direct || majority) {
            alert.broadcast_done = true;
            std::set_difference(n.active_neighbors.begin(), n.active_neighbors.end(),
                                alert.hop_set.begin(), alert.hop_set.end(),
                                std::back_inserter(decision.targets));
            auto pos = std::lower_bound(alert.hop_set.begin(), alert.hop_set.end(), ph);
            if (pos == alert.hop_set.end() || *pos != ph) alert.hop_set.insert(pos, ph);
            decision.broadcast = true;
        }
    }
    return decision;
}

PatchOutcome apply_patch(World& world, std::uint32_t i) {
    NodeState& n = world.node(i);
    PatchOutcome out;
    if (n.health == Health::immune || n.health == Health::patched) {
        out.already_protected = true;
        return out;
    }
    world.set_health(i, Health::patched);
    n.window.clear();
    n.conns_this_tick = 0;
    if (n.role == NodeRole::phagocyte) {
        out.restored_neighbors = world.restore_guardian_links(i);
        for (std::uint32_t m : world.original_members(i)) {
            const NodeState& leaf = world.node(m);
            if (!leaf.link_was_cut || leaf.link_active) continue;
            // Members cut only by this guardian's own quarantine rejoin now;
            // members flagged themselves must be patched first.
            if (leaf.quarantined && leaf.health != Health::patched) continue;
            if (world.reattach_leaf(m)) out.reattached_leaves.push_back(m);
        }
    } else if (n.role == NodeRole::managed) {
        n.quarantined = false;
        if (n.link_was_cut && !n.link_active) {
            if (world.reattach_leaf(i))
                out.reattached_leaves.push_back(i);
            else
                out.reattach_deferred = true;
        }
    }
    return out;
}

EgressDecision filter_egress(const World& world, std::uint32_t src, std::uint32_t dst,
                             TrafficKind kind) {
    EgressDecision out;
    const NodeState& s = world.node(src);
    if (kind == TrafficKind::p2p && world.node(dst).role == NodeRole::external &&
        s.role != NodeRole::external) {
        out.allowed = false;
        out.alarm_guardian = s.role == NodeRole::phagocyte ? src : s.manager;
    }
    return out;
}

}  // namespace immunet
