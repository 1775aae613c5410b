#include "immunet/underlay.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

#include "immunet/rng.hpp"

namespace immunet {

UnderlayGraph::UnderlayGraph(int n_routers, double lan_delay_ms)
    : adj_(static_cast<std::size_t>(n_routers)), lan_delay_ms_(lan_delay_ms) {}

void UnderlayGraph::add_link(int r1, int r2, double delay_ms) {
    if (r1 == r2) return;
    adj_[r1].emplace_back(r2, delay_ms);
    adj_[r2].emplace_back(r1, delay_ms);
}

void UnderlayGraph::attach_hosts(std::uint32_t n_hosts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    host_router_.resize(n_hosts);
    for (auto& r : host_router_) r = static_cast<int>(rand_index(rng, adj_.size()));
}

namespace {

std::vector<int> components(const std::vector<std::vector<std::pair<int, double>>>& adj) {
    std::vector<int> comp(adj.size(), -1);
    int c = 0;
    for (std::size_t s = 0; s < adj.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::queue<int> q;
        q.push(static_cast<int>(s));
        comp[s] = c;
        while (!q.empty()) {
            int r = q.front();
            q.pop();
            for (auto [n, d] : adj[r])
                if (comp[n] < 0) {
                    comp[n] = c;
                    q.push(n);
                }
        }
        ++c;
    }
    return comp;
}

}  // namespace

bool UnderlayGraph::is_connected() const {
    if (adj_.empty()) return true;
    auto comp = components(adj_);
    return *std::max_element(comp.begin(), comp.end()) == 0;
}

void UnderlayGraph::repair_connectivity(double bridge_delay_ms) {
    if (adj_.empty()) return;
    auto comp = components(adj_);
    int n_comp = *std::max_element(comp.begin(), comp.end()) + 1;
    if (n_comp == 1) return;
    // Anchor of each component = its lowest router id; bridge everything
    // into the largest component.
    std::vector<int> size(n_comp, 0), anchor(n_comp, -1);
    for (std::size_t r = 0; r < adj_.size(); ++r) {
        int c = comp[r];
        ++size[c];
        if (anchor[c] < 0) anchor[c] = static_cast<int>(r);
    }
    int big = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
    for (int c = 0; c < n_comp; ++c)
        if (c != big) add_link(anchor[c], anchor[big], bridge_delay_ms);
    dist_cache_.clear();
}

const std::vector<double>& UnderlayGraph::dist_from(int src) const {
    auto it = dist_cache_.find(src);
    if (it != dist_cache_.end()) return it->second;

    std::vector<double> dist(adj_.size(), -1.0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
        auto [d, r] = pq.top();
        pq.pop();
        if (dist[r] >= 0.0) continue;
        dist[r] = d;
        for (auto [n, w] : adj_[r])
            if (dist[n] < 0.0) pq.emplace(d + w, n);
    }
    return dist_cache_.emplace(src, std::move(dist)).first->second;
}

double UnderlayGraph::router_distance(int r1, int r2) const {
    if (r1 == r2) return 0.0;
    double d = dist_from(r1)[r2];
    if (d < 0.0) throw std::runtime_error("underlay: routers not connected");
    return d;
}

double UnderlayGraph::path_latency(std::uint32_t a, std::uint32_t b) const {
    if (a == b) return 0.0;
    return lan_delay_ms_ + router_distance(host_router_[a], host_router_[b]) + lan_delay_ms_;
}

UnderlayGraph synthesize_underlay(const TransitStubParams& p, std::uint32_t n_hosts,
                                  std::uint64_t seed) {
    if (p.transit_domains < 1 || p.routers_per_transit < 1 || p.routers_per_stub < 1 ||
        p.stub_domains_per_transit_router < 0)
        throw std::invalid_argument("synthesize_underlay: bad shape parameters");

    std::mt19937_64 rng(seed);
    int n_transit = p.transit_domains * p.routers_per_transit;
    int n_stub_domains = n_transit * p.stub_domains_per_transit_router;
    int n_routers = n_transit + n_stub_domains * p.routers_per_stub;
    UnderlayGraph g(n_routers, p.lan_delay_ms);

    auto transit_router = [&](int dom, int i) { return dom * p.routers_per_transit + i; };

    // Intra-transit meshes.
    for (int dom = 0; dom < p.transit_domains; ++dom)
        for (int i = 0; i < p.routers_per_transit; ++i)
            for (int j = i + 1; j < p.routers_per_transit; ++j)
                if (rand_unit(rng) < p.p_transit)
                    g.add_link(transit_router(dom, i), transit_router(dom, j), p.core_delay_ms);

    // Transit domains: ring plus random extra pair links.
    for (int dom = 0; dom < p.transit_domains; ++dom) {
        int next = (dom + 1) % p.transit_domains;
        if (next != dom)
            g.add_link(transit_router(dom, static_cast<int>(rand_index(rng, p.routers_per_transit))),
                       transit_router(next, static_cast<int>(rand_index(rng, p.routers_per_transit))),
                       p.core_delay_ms);
    }
    for (int a = 0; a < p.transit_domains; ++a)
        for (int b = a + 2; b < p.transit_domains; ++b)
            if (rand_unit(rng) < 0.5)
                g.add_link(transit_router(a, static_cast<int>(rand_index(rng, p.routers_per_transit))),
                           transit_router(b, static_cast<int>(rand_index(rng, p.routers_per_transit))),
                           p.core_delay_ms);

    // Stub domains: sparse internal mesh, one uplink to the sponsor router.
    int next_router = n_transit;
    for (int t = 0; t < n_transit; ++t) {
        for (int s = 0; s < p.stub_domains_per_transit_router; ++s) {
            int base = next_router;
            next_router += p.routers_per_stub;
            for (int i = 0; i < p.routers_per_stub; ++i)
                for (int j = i + 1; j < p.routers_per_stub; ++j)
                    if (rand_unit(rng) < p.p_stub)
                        g.add_link(base + i, base + j, p.core_delay_ms);
            g.add_link(base, t, p.core_delay_ms);
        }
    }

    g.repair_connectivity(p.core_delay_ms);
    g.attach_hosts(n_hosts, derive_seed(seed, 0xA77Aull));
    return g;
}

}  // namespace immunet
