#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "immunet/underlay.hpp"

namespace immunet {

using NodeId = std::uint32_t;

/// Two-tier overlay: a guardian tier (ultrapeer-class nodes, including
/// legacy peers that cannot accept leaves) over managed leaf hosts.
struct OverlayGraph {
    std::vector<NodeId> phagocytes;  // sorted, includes legacy peers
    std::vector<NodeId> managed;     // sorted
    std::unordered_map<NodeId, NodeId> manager_of;
    std::vector<std::pair<NodeId, NodeId>> phagocyte_links;  // a < b, unique, sorted
    std::unordered_set<NodeId> legacy;  // subset of phagocytes

    std::size_t n_phagocytes() const { return phagocytes.size(); }
    std::size_t n_managed() const { return managed.size(); }
    double ratio_ph_managed() const;  // phagocytes : managed
    double ratio_ph_all() const;      // phagocytes : all hosts

    /// Guardian-tier adjacency, sorted neighbor lists.
    std::unordered_map<NodeId, std::vector<NodeId>> adjacency() const;
    /// Active members per guardian, sorted.
    std::unordered_map<NodeId, std::vector<NodeId>> members() const;
};

enum class Tier { phagocyte, managed };

/// Recipe for a synthetic overlay: population counts plus the ordered
/// random-removal steps that derive the smaller traces from bigger ones.
struct TraceSpec {
    std::uint64_t n_phagocytes = 0;
    std::uint64_t n_managed = 0;
    std::vector<std::pair<Tier, double>> removal_steps;

    double legacy_fraction = 0.05;  // guardians that accept no leaves
    int mesh_degree = 16;           // guardian-tier link target per node
    int homing_min = 3;             // candidate guardians a leaf discovers
    int homing_max = 5;

    TraceSpec scaled(double factor) const;
};

/// Named population presets matching the published trace table.
/// Names: trace1 .. trace6. Throws std::invalid_argument on unknown names.
TraceSpec trace_preset(const std::string& name);

/// Parse a trace file: `U <id>` guardian, `G <id>` legacy guardian,
/// `E <a> <b>` guardian-tier edge, `L <id> <manager>` managed host.
/// Nodes must be declared before they are referenced. Errors carry the
/// offending line number and ids.
OverlayGraph load_trace(const std::string& path, const std::string& format = "text");

void save_trace(const OverlayGraph& g, const std::string& path);

/// Build a synthetic overlay. Each leaf discovers a handful of candidate
/// guardians and homes to the closest by underlay latency (ties to the
/// lowest id); without an underlay the lowest-id candidate wins. Removal
/// steps re-elect managers among surviving candidates, then the standard
/// cleaning order runs (drop isolated guardians, then orphaned leaves).
OverlayGraph synthesize_overlay(const TraceSpec& spec, std::uint64_t rng_seed,
                                const UnderlayGraph* underlay = nullptr);

/// Remove guardians with no guardian-tier link, then leaves whose manager
/// is gone. Single pass (removing a degree-0 node cuts no edges), so the
/// operation is idempotent.
void clean_overlay(OverlayGraph& g);

}  // namespace immunet
