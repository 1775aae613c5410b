#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace immunet {

/// Transit-stub synthesis parameters. Defaults give a ~100-router desk-scale
/// network; scale the domain counts up for bigger worlds.
struct TransitStubParams {
    int transit_domains = 1;
    int routers_per_transit = 10;
    int stub_domains_per_transit_router = 1;
    int routers_per_stub = 10;
    double p_transit = 0.5;  // intra-transit-domain edge probability
    double p_stub = 0.3;     // intra-stub-domain edge probability
    double lan_delay_ms = 5.0;
    double core_delay_ms = 40.0;
};

/// Router-level network plus host attachment points. Hosts hang off routers
/// via access LANs; host-to-host latency is LAN + shortest router path + LAN.
class UnderlayGraph {
public:
    UnderlayGraph() = default;
    UnderlayGraph(int n_routers, double lan_delay_ms);

    void add_link(int r1, int r2, double delay_ms);
    void attach_hosts(std::uint32_t n_hosts, std::uint64_t seed);

    int router_count() const { return static_cast<int>(adj_.size()); }
    std::uint32_t host_count() const { return static_cast<std::uint32_t>(host_router_.size()); }
    int router_of(std::uint32_t host) const { return host_router_[host]; }
    double lan_delay() const { return lan_delay_ms_; }
    const std::vector<std::vector<std::pair<int, double>>>& adjacency() const { return adj_; }

    bool is_connected() const;
    /// Links components to the largest one (one 40ms-class link per stray
    /// component) so every synthesized network is usable.
    void repair_connectivity(double bridge_delay_ms);

    /// Shortest-path delay between two routers. Lazily caches one Dijkstra
    /// pass per source router.
    double router_distance(int r1, int r2) const;

    /// Host-to-host one-way latency in ms: 0 for a==b, otherwise
    /// lan + router path + lan (same-router hosts pay both LAN hops).
    double path_latency(std::uint32_t a, std::uint32_t b) const;

private:
    const std::vector<double>& dist_from(int src) const;

    std::vector<std::vector<std::pair<int, double>>> adj_;
    std::vector<int> host_router_;
    double lan_delay_ms_ = 5.0;

    mutable std::unordered_map<int, std::vector<double>> dist_cache_;
};

/// Random transit-stub network: transit domains form a connected core,
/// every transit router sponsors a few stub domains, intra-domain meshes
/// are Bernoulli, and all core-facing links carry the core delay.
UnderlayGraph synthesize_underlay(const TransitStubParams& params, std::uint32_t n_hosts,
                                  std::uint64_t seed);

}  // namespace immunet
