#include "immunet/world.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace immunet {
namespace {

void insert_sorted(std::vector<std::uint32_t>& v, std::uint32_t x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
}

void erase_sorted(std::vector<std::uint32_t>& v, std::uint32_t x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x) v.erase(it);
}

const char* health_name(Health h) {
    switch (h) {
        case Health::immune: return "immune";
        case Health::vulnerable: return "vulnerable";
        case Health::infected: return "infected";
        case Health::isolated: return "isolated";
        case Health::patched: return "patched";
    }
    return "?";
}

}  // namespace

World::World(const UnderlayGraph* underlay, const OverlayGraph& overlay, std::uint32_t n_external,
             std::vector<std::uint32_t> underlay_hosts, std::size_t window_capacity)
    : underlay_(underlay) {
    std::vector<NodeId> phs(overlay.phagocytes.begin(), overlay.phagocytes.end());
    std::vector<NodeId> mans(overlay.managed.begin(), overlay.managed.end());
    std::sort(phs.begin(), phs.end());
    std::sort(mans.begin(), mans.end());

    const std::size_t total = phs.size() + mans.size() + n_external;
    if (underlay_hosts.size() != total)
        throw std::invalid_argument("world: underlay host map size mismatch");
    underlay_host_ = std::move(underlay_hosts);

    nodes_.resize(total);
    orig_id_.resize(total);
    std::unordered_map<NodeId, std::uint32_t> dense;
    dense.reserve(phs.size() + mans.size());

    std::uint32_t idx = 0;
    for (NodeId id : phs) {
        dense[id] = idx;
        orig_id_[idx] = id;
        NodeState& n = nodes_[idx];
        n.role = NodeRole::phagocyte;
        n.legacy = overlay.legacy.count(id) > 0;
        n.window = BehaviorSequence(window_capacity);
        guardians_.push_back(idx);
        ++idx;
    }
    for (NodeId id : mans) {
        dense[id] = idx;
        orig_id_[idx] = id;
        NodeState& n = nodes_[idx];
        n.role = NodeRole::managed;
        n.window = BehaviorSequence(window_capacity);
        leaves_.push_back(idx);
        ++idx;
    }
    for (std::uint32_t j = 0; j < n_external; ++j) {
        orig_id_[idx] = 0;
        NodeState& n = nodes_[idx];
        n.role = NodeRole::external;
        n.health = Health::immune;
        n.window = BehaviorSequence(window_capacity);
        externals_.push_back(idx);
        ++idx;
    }

    for (const auto& [a, b] : overlay.phagocyte_links) {
        std::uint32_t da = dense.at(a), db = dense.at(b);
        insert_sorted(nodes_[da].active_neighbors, db);
        insert_sorted(nodes_[db].active_neighbors, da);
    }
    for (const auto& [leaf, mgr] : overlay.manager_of) {
        auto it = dense.find(mgr);
        if (it == dense.end()) throw std::invalid_argument("world: leaf manager not in overlay");
        std::uint32_t dl = dense.at(leaf), dm = it->second;
        nodes_[dl].manager = dm;
        insert_sorted(nodes_[dm].active_members, dl);
        orig_members_[dm].push_back(dl);
    }
    for (auto& [g, mem] : orig_members_) std::sort(mem.begin(), mem.end());

    counts_.vulnerable = phs.size() + mans.size();
    counts_.immune = n_external;
}

const std::vector<std::uint32_t>& World::original_members(std::uint32_t g) const {
    static const std::vector<std::uint32_t> empty;
    auto it = orig_members_.find(g);
    return it == orig_members_.end() ? empty : it->second;
}

double World::latency(std::uint32_t a, std::uint32_t b) const {
    if (!underlay_) throw std::logic_error("world: no underlay attached");
    return underlay_->path_latency(underlay_host_[a], underlay_host_[b]);
}

void World::set_health(std::uint32_t i, Health h) {
    NodeState& n = nodes_[i];
    if (n.health == h) return;
    bool ok = false;
    switch (n.health) {
        case Health::vulnerable:
            ok = h == Health::immune || h == Health::infected || h == Health::patched;
            break;
        case Health::infected:
            ok = h == Health::isolated || h == Health::patched;
            break;
        case Health::isolated:
            ok = h == Health::patched;
            break;
        case Health::immune:
        case Health::patched:
            ok = false;
            break;
    }
    if (!ok)
        throw std::logic_error(std::string("illegal health transition ") + health_name(n.health) +
                               " -> " + health_name(h));

    auto bucket = [&](Health x) -> std::size_t& {
        switch (x) {
            case Health::immune: return counts_.immune;
            case Health::vulnerable: return counts_.vulnerable;
            case Health::infected: return counts_.infected;
            case Health::isolated: return counts_.isolated;
            default: return counts_.patched;
        }
    };
    --bucket(n.health);
    ++bucket(h);
    if (n.health == Health::infected) infected_.erase(i);
    if (h == Health::infected) infected_.insert(i);
    n.health = h;
}

void World::cut_leaf_link(std::uint32_t leaf) {
    NodeState& n = nodes_[leaf];
    if (n.role != NodeRole::managed || n.manager == kNone)
        throw std::invalid_argument("cut_leaf_link: not a managed host");
    if (!n.link_active) return;
    n.link_active = false;
    n.link_was_cut = true;
    erase_sorted(nodes_[n.manager].active_members, leaf);
}

bool World::reattach_leaf(std::uint32_t leaf) {
    NodeState& n = nodes_[leaf];
    if (n.role != NodeRole::managed || n.manager == kNone)
        throw std::invalid_argument("reattach_leaf: not a managed host");
    if (n.link_active) return true;
    if (nodes_[n.manager].health == Health::isolated) return false;
    n.link_active = true;
    n.link_was_cut = false;
    insert_sorted(nodes_[n.manager].active_members, leaf);
    return true;
}

void World::cut_guardian_links(std::uint32_t g) {
    NodeState& n = nodes_[g];
    if (n.role != NodeRole::phagocyte)
        throw std::invalid_argument("cut_guardian_links: not a guardian");
    for (std::uint32_t nb : n.active_neighbors) {
        erase_sorted(nodes_[nb].active_neighbors, g);
        insert_sorted(n.cut_neighbors, nb);
    }
    n.active_neighbors.clear();
}

std::vector<std::uint32_t> World::restore_guardian_links(std::uint32_t g) {
    NodeState& n = nodes_[g];
    if (n.role != NodeRole::phagocyte)
        throw std::invalid_argument("restore_guardian_links: not a guardian");
    std::vector<std::uint32_t> restored;
    for (std::uint32_t nb : n.cut_neighbors) {
        NodeState& other = nodes_[nb];
        if (other.health == Health::isolated) {
            // Far end is still quarantined: hand the link over so the far
            // end's own recovery brings it back.
            insert_sorted(other.cut_neighbors, g);
            continue;
        }
        insert_sorted(n.active_neighbors, nb);
        insert_sorted(other.active_neighbors, g);
        erase_sorted(other.cut_neighbors, g);
        restored.push_back(nb);
    }
    n.cut_neighbors.clear();
    return restored;
}

std::vector<std::uint32_t> World::links_active(std::uint32_t i) const {
    const NodeState& n = nodes_[i];
    std::vector<std::uint32_t> out;
    if (n.role == NodeRole::phagocyte) {
        out = n.active_neighbors;
        out.insert(out.end(), n.active_members.begin(), n.active_members.end());
        std::sort(out.begin(), out.end());
    } else if (n.role == NodeRole::managed && n.link_active && n.manager != kNone) {
        out.push_back(n.manager);
    }
    return out;
}

World build_world(const UnderlayGraph* underlay, const OverlayGraph& overlay,
                  std::uint32_t n_external, std::size_t window_capacity) {
    std::size_t total = overlay.phagocytes.size() + overlay.managed.size() + n_external;
    std::vector<std::uint32_t> hosts(total);
    for (std::size_t i = 0; i < total; ++i) hosts[i] = static_cast<std::uint32_t>(i);
    return World(underlay, overlay, n_external, std::move(hosts), window_capacity);
}

}  // namespace immunet
