#include "immunet/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "immunet/rng.hpp"

namespace immunet {

double OverlayGraph::ratio_ph_managed() const {
    if (managed.empty()) return 0.0;
    return static_cast<double>(phagocytes.size()) / static_cast<double>(managed.size());
}

double OverlayGraph::ratio_ph_all() const {
    std::size_t all = phagocytes.size() + managed.size();
    if (all == 0) return 0.0;
    return static_cast<double>(phagocytes.size()) / static_cast<double>(all);
}

std::unordered_map<NodeId, std::vector<NodeId>> OverlayGraph::adjacency() const {
    std::unordered_map<NodeId, std::vector<NodeId>> adj;
    adj.reserve(phagocytes.size());
    for (NodeId p : phagocytes) adj[p];
    for (auto [a, b] : phagocyte_links) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& [p, v] : adj) std::sort(v.begin(), v.end());
    return adj;
}

std::unordered_map<NodeId, std::vector<NodeId>> OverlayGraph::members() const {
    std::unordered_map<NodeId, std::vector<NodeId>> m;
    m.reserve(phagocytes.size());
    for (NodeId p : phagocytes) m[p];
    for (NodeId leaf : managed) m[manager_of.at(leaf)].push_back(leaf);
    for (auto& [p, v] : m) std::sort(v.begin(), v.end());
    return m;
}

TraceSpec TraceSpec::scaled(double factor) const {
    if (factor <= 0.0) throw std::invalid_argument("TraceSpec::scaled: factor must be > 0");
    TraceSpec s = *this;
    s.n_phagocytes = std::max<std::uint64_t>(1, std::llround(static_cast<double>(n_phagocytes) * factor));
    s.n_managed = static_cast<std::uint64_t>(std::llround(static_cast<double>(n_managed) * factor));
    return s;
}

TraceSpec trace_preset(const std::string& name) {
    TraceSpec s;
    if (name == "trace1") {
        s.n_phagocytes = 158985;
        s.n_managed = 717025;
    } else if (name == "trace2") {
        s.n_phagocytes = 209723;
        s.n_managed = 1026231;
    } else if (name == "trace3") {
        s.n_phagocytes = 51400;
        s.n_managed = 512448;
    } else if (name == "trace4") {
        s.n_phagocytes = 51400;
        s.n_managed = 342757;
    } else if (name == "trace5") {
        s.n_phagocytes = 51400;
        s.n_managed = 257080;
    } else if (name == "trace6") {
        s.n_phagocytes = 14705;
        s.n_managed = 73539;
    } else {
        throw std::invalid_argument("trace_preset: unknown preset '" + name + "'");
    }
    return s;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

OverlayGraph load_trace(const std::string& path, const std::string& format) {
    if (format != "text") throw std::invalid_argument("load_trace: unknown format '" + format + "'");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trace: cannot open " + path);

    OverlayGraph g;
    enum class Kind : std::uint8_t { guardian, legacy, leaf };
    std::unordered_map<NodeId, Kind> declared;
    std::string line;
    std::size_t lineno = 0;
    auto known_guardian = [&](NodeId id) {
        auto it = declared.find(id);
        return it != declared.end() && it->second != Kind::leaf;
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        char tag;
        ls >> tag;
        if (tag == 'U' || tag == 'G') {
            NodeId id;
            if (!(ls >> id)) parse_fail(path, lineno, "expected node id");
            if (declared.count(id)) parse_fail(path, lineno, "node " + std::to_string(id) + " declared twice");
            declared[id] = tag == 'U' ? Kind::guardian : Kind::legacy;
            g.phagocytes.push_back(id);
            if (tag == 'G') g.legacy.insert(id);
        } else if (tag == 'E') {
            NodeId a, b;
            if (!(ls >> a >> b)) parse_fail(path, lineno, "expected two node ids");
            if (a == b) parse_fail(path, lineno, "self edge on " + std::to_string(a));
            if (!known_guardian(a)) parse_fail(path, lineno, "edge endpoint " + std::to_string(a) + " is not a declared Phagocyte");
            if (!known_guardian(b)) parse_fail(path, lineno, "edge endpoint " + std::to_string(b) + " is not a declared Phagocyte");
            g.phagocyte_links.emplace_back(std::min(a, b), std::max(a, b));
        } else if (tag == 'L') {
            NodeId id, mgr;
            if (!(ls >> id >> mgr)) parse_fail(path, lineno, "expected node id and manager id");
            if (declared.count(id)) {
                if (declared[id] == Kind::leaf)
                    parse_fail(path, lineno, "managed host " + std::to_string(id) + " already has manager " +
                                                 std::to_string(g.manager_of[id]));
                parse_fail(path, lineno, "node " + std::to_string(id) + " declared twice");
            }
            if (!known_guardian(mgr))
                parse_fail(path, lineno, "manager " + std::to_string(mgr) + " of host " + std::to_string(id) +
                                             " is not a declared Phagocyte");
            if (g.legacy.count(mgr))
                parse_fail(path, lineno, "legacy peer " + std::to_string(mgr) + " cannot manage host " + std::to_string(id));
            declared[id] = Kind::leaf;
            g.managed.push_back(id);
            g.manager_of[id] = mgr;
        } else {
            parse_fail(path, lineno, std::string("unknown record tag '") + tag + "'");
        }
    }

    std::sort(g.phagocytes.begin(), g.phagocytes.end());
    std::sort(g.managed.begin(), g.managed.end());
    std::sort(g.phagocyte_links.begin(), g.phagocyte_links.end());
    g.phagocyte_links.erase(std::unique(g.phagocyte_links.begin(), g.phagocyte_links.end()),
                            g.phagocyte_links.end());
    return g;
}

void save_trace(const OverlayGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_trace: cannot open " + path);
    for (NodeId p : g.phagocytes) out << (g.legacy.count(p) ? "G " : "U ") << p << "\n";
    auto links = g.phagocyte_links;
    std::sort(links.begin(), links.end());
    for (auto [a, b] : links) out << "E " << a << " " << b << "\n";
    auto leaves = g.managed;
    std::sort(leaves.begin(), leaves.end());
    for (NodeId l : leaves) out << "L " << l << " " << g.manager_of.at(l) << "\n";
}

namespace {

// Internal synthesis state: leaves keep all discovered candidate guardians
// so removal steps can re-elect a manager instead of orphaning on first loss.
struct Synth {
    std::uint32_t n_g = 0;
    std::vector<char> g_alive;
    std::vector<char> legacy;
    std::vector<std::vector<std::uint32_t>> mesh;  // sorted neighbor ids
    std::vector<char> l_alive;
    std::vector<std::vector<std::uint32_t>> candidates;  // per leaf, sorted

    std::uint32_t alive_guardians() const {
        return static_cast<std::uint32_t>(std::count(g_alive.begin(), g_alive.end(), 1));
    }
};

void remove_random(std::vector<char>& alive, double fraction, std::mt19937_64& rng) {
    std::vector<std::uint32_t> pool;
    for (std::uint32_t i = 0; i < alive.size(); ++i)
        if (alive[i]) pool.push_back(i);
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
    for (std::size_t t = 0; t < k; ++t) {
        std::size_t j = t + rand_index(rng, pool.size() - t);
        std::swap(pool[t], pool[j]);
        alive[pool[t]] = 0;
    }
}

// Paper cleaning order, multi-homed form: drop guardians left with no
// guardian-tier link, then leaves with no surviving candidate.
void clean_synth(Synth& s) {
    for (std::uint32_t gi = 0; gi < s.n_g; ++gi) {
        if (!s.g_alive[gi]) continue;
        bool linked = false;
        for (std::uint32_t nb : s.mesh[gi])
            if (s.g_alive[nb]) {
                linked = true;
                break;
            }
        if (!linked && s.n_g > 1) s.g_alive[gi] = 0;
    }
    for (std::size_t li = 0; li < s.candidates.size(); ++li) {
        if (!s.l_alive[li]) continue;
        bool has = false;
        for (std::uint32_t c : s.candidates[li])
            if (s.g_alive[c]) {
                has = true;
                break;
            }
        if (!has) s.l_alive[li] = 0;
    }
}

}  // namespace

OverlayGraph synthesize_overlay(const TraceSpec& spec, std::uint64_t rng_seed,
                                const UnderlayGraph* underlay) {
    if (spec.n_phagocytes == 0) throw std::invalid_argument("synthesize_overlay: empty Phagocyte tier");
    if (spec.legacy_fraction < 0.0 || spec.legacy_fraction >= 1.0)
        throw std::invalid_argument("synthesize_overlay: legacy_fraction outside [0,1)");
    if (spec.homing_min < 1 || spec.homing_max < spec.homing_min)
        throw std::invalid_argument("synthesize_overlay: bad homing range");

    std::mt19937_64 rng(rng_seed);
    Synth s;
    s.n_g = static_cast<std::uint32_t>(spec.n_phagocytes);
    const auto n_l = static_cast<std::uint32_t>(spec.n_managed);
    s.g_alive.assign(s.n_g, 1);
    s.legacy.assign(s.n_g, 0);
    s.mesh.resize(s.n_g);
    s.l_alive.assign(n_l, 1);
    s.candidates.resize(n_l);

    if (underlay && underlay->host_count() < s.n_g + n_l)
        throw std::invalid_argument("synthesize_overlay: underlay has too few hosts attached");

    // Legacy peers.
    {
        auto k = static_cast<std::size_t>(spec.legacy_fraction * static_cast<double>(s.n_g));
        std::vector<std::uint32_t> pool(s.n_g);
        for (std::uint32_t i = 0; i < s.n_g; ++i) pool[i] = i;
        for (std::size_t t = 0; t < k; ++t) {
            std::size_t j = t + rand_index(rng, pool.size() - t);
            std::swap(pool[t], pool[j]);
            s.legacy[pool[t]] = 1;
        }
    }

    // Guardian mesh: each node initiates links to distinct random peers.
    if (s.n_g > 1) {
        int want = std::min<int>(spec.mesh_degree, static_cast<int>(s.n_g) - 1);
        std::unordered_set<std::uint64_t> seen;
        for (std::uint32_t gi = 0; gi < s.n_g; ++gi) {
            for (int d = 0; d < want; ++d) {
                auto nb = static_cast<std::uint32_t>(rand_index(rng, s.n_g - 1));
                if (nb >= gi) ++nb;
                std::uint64_t key = (static_cast<std::uint64_t>(std::min(gi, nb)) << 32) | std::max(gi, nb);
                if (seen.insert(key).second) {
                    s.mesh[gi].push_back(nb);
                    s.mesh[nb].push_back(gi);
                }
            }
        }
        for (auto& v : s.mesh) std::sort(v.begin(), v.end());
    }

    // Leaf homing: discover candidates among non-legacy guardians.
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t gi = 0; gi < s.n_g; ++gi)
        if (!s.legacy[gi]) eligible.push_back(gi);
    if (n_l > 0 && eligible.empty())
        throw std::runtime_error("synthesize_overlay: no guardian can accept managed hosts");
    for (std::uint32_t li = 0; li < n_l; ++li) {
        int span = spec.homing_max - spec.homing_min + 1;
        auto h = static_cast<std::size_t>(spec.homing_min + static_cast<int>(rand_index(rng, static_cast<std::size_t>(span))));
        h = std::min(h, eligible.size());
        std::unordered_set<std::uint32_t> picked;
        while (picked.size() < h) picked.insert(eligible[rand_index(rng, eligible.size())]);
        s.candidates[li].assign(picked.begin(), picked.end());
        std::sort(s.candidates[li].begin(), s.candidates[li].end());
    }

    // Derivation steps, each followed by the standard cleaning pass.
    for (auto [tier, fraction] : spec.removal_steps) {
        if (fraction < 0.0 || fraction > 1.0)
            throw std::invalid_argument("synthesize_overlay: removal fraction outside [0,1]");
        if (tier == Tier::phagocyte)
            remove_random(s.g_alive, fraction, rng);
        else
            remove_random(s.l_alive, fraction, rng);
        clean_synth(s);
    }
    if (s.alive_guardians() == 0)
        throw std::runtime_error("synthesize_overlay: removal steps emptied the Phagocyte tier");

    // Final election: closest surviving candidate by underlay latency
    // (lowest id breaks ties and the no-underlay case).
    OverlayGraph g;
    for (std::uint32_t gi = 0; gi < s.n_g; ++gi) {
        if (!s.g_alive[gi]) continue;
        g.phagocytes.push_back(gi);
        if (s.legacy[gi]) g.legacy.insert(gi);
        for (std::uint32_t nb : s.mesh[gi])
            if (nb > gi && s.g_alive[nb]) g.phagocyte_links.emplace_back(gi, nb);
    }
    for (std::uint32_t li = 0; li < n_l; ++li) {
        if (!s.l_alive[li]) continue;
        NodeId leaf = s.n_g + li;
        NodeId best = 0;
        double best_lat = -1.0;
        bool found = false;
        for (std::uint32_t c : s.candidates[li]) {
            if (!s.g_alive[c]) continue;
            if (!underlay) {
                best = c;  // candidates are sorted: first alive = lowest id
                found = true;
                break;
            }
            double lat = underlay->path_latency(leaf, c);
            if (!found || lat < best_lat) {
                best = c;
                best_lat = lat;
                found = true;
            }
        }
        if (!found) continue;  // cleaned leaves never reach here
        g.managed.push_back(leaf);
        g.manager_of[leaf] = best;
    }
    std::sort(g.phagocyte_links.begin(), g.phagocyte_links.end());
    return g;
}

void clean_overlay(OverlayGraph& g) {
    std::unordered_map<NodeId, std::uint32_t> degree;
    for (auto [a, b] : g.phagocyte_links) {
        ++degree[a];
        ++degree[b];
    }
    std::unordered_set<NodeId> keep;
    for (NodeId p : g.phagocytes)
        if (degree[p] > 0) keep.insert(p);

    g.phagocytes.erase(std::remove_if(g.phagocytes.begin(), g.phagocytes.end(),
                                      [&](NodeId p) { return !keep.count(p); }),
                       g.phagocytes.end());
    std::erase_if(g.legacy, [&](NodeId p) { return !keep.count(p); });
    g.managed.erase(std::remove_if(g.managed.begin(), g.managed.end(),
                                   [&](NodeId l) { return !keep.count(g.manager_of.at(l)); }),
                    g.managed.end());
    std::erase_if(g.manager_of, [&](const auto& kv) { return !keep.count(kv.second); });
}

}  // namespace immunet
