#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "immunet/behavior.hpp"
#include "immunet/overlay.hpp"
#include "immunet/underlay.hpp"

namespace immunet {

enum class NodeRole : std::uint8_t { phagocyte, managed, external };
enum class Health : std::uint8_t { immune, vulnerable, infected, isolated, patched };
enum class TrafficKind : std::uint8_t { p2p, http };

inline constexpr std::uint32_t kNone = 0xffffffffu;

/// Per-guardian record of one worm event. Event identity is the detection
/// epoch (one scan tick); alerts about the same epoch aggregate, so the
/// threshold rebroadcast rule counts distinct alerting neighbors.
struct WormAlert {
    std::uint32_t origin = kNone;  // first detector this node heard of
    double timestamp_ms = 0.0;
    std::vector<std::uint32_t> hop_set;  // senders heard from, + self once broadcast
    bool broadcast_done = false;
    bool patch_pulled = false;
};

struct NodeState {
    NodeRole role = NodeRole::managed;
    Health health = Health::vulnerable;
    bool legacy = false;
    bool maintainer = false;

    // managed-host side of the management link
    std::uint32_t manager = kNone;
    bool link_active = true;
    bool link_was_cut = false;
    bool quarantined = false;  // cut because this host itself was flagged

    std::uint32_t conns_this_tick = 0;
    BehaviorSequence window;

    // guardian tier
    std::vector<std::uint32_t> active_neighbors;  // sorted
    std::vector<std::uint32_t> cut_neighbors;     // recorded for reestablishment
    std::vector<std::uint32_t> active_members;    // sorted
    std::map<std::uint64_t, WormAlert> alerts;    // keyed by detection epoch
    std::unordered_set<std::uint64_t> patch_waves_seen;
};

struct HealthCounts {
    std::size_t immune = 0, vulnerable = 0, infected = 0, isolated = 0, patched = 0;
    std::size_t total() const { return immune + vulnerable + infected + isolated + patched; }
};

/// Dense-indexed simulation state over an overlay + underlay. Node indices
/// are 0..size): guardians first (ascending original id), then managed
/// hosts, then external hosts. Link mutations keep both endpoints' views
/// consistent; health transitions are validated against the legal machine.
class World {
public:
    World() = default;
    World(const UnderlayGraph* underlay, const OverlayGraph& overlay, std::uint32_t n_external,
          std::vector<std::uint32_t> underlay_hosts, std::size_t window_capacity = 100);

    std::size_t size() const { return nodes_.size(); }
    NodeState& node(std::uint32_t i) { return nodes_[i]; }
    const NodeState& node(std::uint32_t i) const { return nodes_[i]; }
    const std::vector<std::uint32_t>& guardians() const { return guardians_; }
    const std::vector<std::uint32_t>& leaves() const { return leaves_; }
    const std::vector<std::uint32_t>& externals() const { return externals_; }
    const std::vector<std::uint32_t>& original_members(std::uint32_t g) const;
    NodeId original_id(std::uint32_t i) const { return orig_id_[i]; }
    std::uint32_t underlay_host(std::uint32_t i) const { return underlay_host_[i]; }
    double latency(std::uint32_t a, std::uint32_t b) const;
    const UnderlayGraph* underlay() const { return underlay_; }

    /// Validated health transition; keeps counts and the infected set.
    void set_health(std::uint32_t i, Health h);
    const HealthCounts& counts() const { return counts_; }
    const std::set<std::uint32_t>& infected_set() const { return infected_; }

    void cut_leaf_link(std::uint32_t leaf);
    /// Reattach a previously cut management link; deferred (returns false)
    /// while the manager is isolated.
    bool reattach_leaf(std::uint32_t leaf);
    void cut_guardian_links(std::uint32_t g);
    /// Restore recorded guardian-tier links. Links whose far endpoint is
    /// still isolated are handed to that endpoint's cut list so its own
    /// patch restores them. Returns the neighbors actually reconnected.
    std::vector<std::uint32_t> restore_guardian_links(std::uint32_t g);

    /// Current overlay links of a node (guardian: neighbors + members;
    /// managed host: its manager while attached).
    std::vector<std::uint32_t> links_active(std::uint32_t i) const;

private:
    std::vector<NodeState> nodes_;
    std::vector<std::uint32_t> guardians_, leaves_, externals_;
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> orig_members_;
    std::vector<NodeId> orig_id_;
    std::vector<std::uint32_t> underlay_host_;
    const UnderlayGraph* underlay_ = nullptr;
    HealthCounts counts_;
    std::set<std::uint32_t> infected_;
};

/// Build a world whose underlay host slots simply mirror the dense node
/// order (fits loaded traces; synthetic pipelines pass explicit slots).
World build_world(const UnderlayGraph* underlay, const OverlayGraph& overlay,
                  std::uint32_t n_external = 0, std::size_t window_capacity = 100);

}  // namespace immunet
