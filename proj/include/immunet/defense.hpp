#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "immunet/world.hpp"

namespace immunet {

struct DefenseParams {
    double theta_d = 0.5;  // similarity threshold (strict >)
    double theta_a = 0.5;  // alert rebroadcast threshold (strict >)
    std::size_t window = 100;
    std::uint32_t rate_limit = 50;  // connections per tick (strict >)
    std::size_t sample_threshold = 200;
    std::size_t sample_peers = 32;
};

struct IsolationOutcome {
    std::vector<std::uint32_t> cut_leaves;
    std::vector<std::uint32_t> requested_guardians;
};

struct IsolationRequestOutcome {
    bool cut_any = false;
    bool pull_patch = false;
    std::vector<std::uint32_t> cut_members;
};

struct AlertDecision {
    bool broadcast = false;
    bool pull_patch = false;
    std::vector<std::uint32_t> targets;
};

struct PatchOutcome {
    bool already_protected = false;
    std::vector<std::uint32_t> restored_neighbors;
    std::vector<std::uint32_t> reattached_leaves;
    bool reattach_deferred = false;
};

struct EgressDecision {
    bool allowed = true;
    std::uint32_t alarm_guardian = kNone;
};

/// Flag managed members of `ph` that either exceed the per-tick connection
/// budget or belong to a behavior-similarity cluster covering a strict
/// majority of the active members. Above `sample_threshold` members the
/// similarity graph is sampled with `sample_peers` comparisons per member.
std::vector<std::uint32_t> detect_managed(const World& world, std::uint32_t ph,
                                          const DefenseParams& params, std::mt19937_64& rng);

/// Same majority-cluster rule applied to the guardian's neighbor windows.
std::vector<std::uint32_t> detect_neighbors(const World& world, std::uint32_t ph,
                                            const DefenseParams& params, std::mt19937_64& rng);

/// Quarantine flagged nodes: members lose their management link on the spot
/// (infected ones turn isolated); flagged neighbor guardians are returned
/// for an isolation request to be delivered to them.
IsolationOutcome isolate(World& world, std::uint32_t ph,
                         const std::vector<std::uint32_t>& flagged);

/// Deliver an isolation request: cut every overlay link of the guardian —
/// tier links (recorded for reestablishment) and management links (members
/// rejoin when the guardian is patched) — and report whether it should
/// urgently pull a patch.
IsolationRequestOutcome apply_isolation_request(World& world, std::uint32_t g);

/// Record one alert contact at guardian `ph` for the worm event of a given
/// detection epoch. `from` is the sending guardian, or kNone for direct
/// detection; `origin` is the detector named in the message. Any first
/// contact requests a patch pull; rebroadcast happens on direct detection
/// or once strictly more than theta_a of the neighbors have sent alerts
/// for this epoch, at most once per epoch.
AlertDecision propagate_alert(World& world, std::uint32_t ph, std::uint64_t epoch,
                              std::uint32_t origin, std::uint32_t from, double now_ms,
                              const DefenseParams& params);

/// Apply a patch: vulnerable/infected/isolated turn patched, quarantine
/// links are reestablished (deferred while the far end stays isolated),
/// immune/patched nodes are untouched.
PatchOutcome apply_patch(World& world, std::uint32_t i);

/// Gateway egress rule: overlay traffic must not leave toward external
/// hosts; a violation names the responsible guardian for the worm event.
EgressDecision filter_egress(const World& world, std::uint32_t src, std::uint32_t dst,
                             TrafficKind kind);

}  // namespace immunet
