#include "immunet/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace immunet {

void BehaviorSequence::push(Op op, std::string_view payload) {
    if (payload.size() > kMaxPayloadLen) payload = payload.substr(0, kMaxPayloadLen);
    BehaviorPair p{op, std::string(payload)};
    if (buf_.size() < cap_) {
        buf_.push_back(std::move(p));
    } else {
        buf_[head_] = std::move(p);
        head_ = (head_ + 1) % cap_;
    }
}

void BehaviorSequence::clear() {
    buf_.clear();
    head_ = 0;
}

const BehaviorPair& BehaviorSequence::operator[](std::size_t i) const {
    return buf_[(head_ + i) % buf_.size()];
}

BehaviorSequence BehaviorSequence::from_pairs(const std::vector<BehaviorPair>& pairs,
                                              std::size_t capacity) {
    BehaviorSequence bs(capacity);
    for (const auto& p : pairs) bs.push(p);
    return bs;
}

std::uint32_t levenshtein(std::string_view a, std::string_view b) {
    if (a == b) return 0;
    if (a.empty()) return static_cast<std::uint32_t>(b.size());
    if (b.empty()) return static_cast<std::uint32_t>(a.size());
    if (a.size() < b.size()) std::swap(a, b);  // b is the short side

    std::vector<std::uint32_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<std::uint32_t>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::uint32_t diag = row[0];
        row[0] = static_cast<std::uint32_t>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::uint32_t sub = diag + (a[i - 1] != b[j - 1]);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
        }
    }
    return row[b.size()];
}

double pair_score(const BehaviorPair& a, const BehaviorPair& b) {
    if (a.op != b.op) return 0.0;
    std::size_t m = std::max(a.payload.size(), b.payload.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a.payload, b.payload)) / static_cast<double>(m);
}

namespace {

// Distinct (op,payload) values of a sequence, with the ascending index list
// per value. Greedy matching only ever consumes the lowest live index of a
// value, so a cursor per bucket is enough.
struct Buckets {
    std::vector<BehaviorPair> values;
    std::vector<std::vector<std::uint32_t>> indices;  // ascending
    std::vector<std::size_t> cursor;
    std::unordered_map<std::string, std::uint32_t> lookup;  // key -> value id

    static std::string key(const BehaviorPair& p) {
        std::string k(1, static_cast<char>(p.op));
        k += p.payload;
        return k;
    }

    explicit Buckets(const BehaviorSequence& bs) {
        for (std::size_t i = 0; i < bs.size(); ++i) {
            auto [it, inserted] = lookup.try_emplace(key(bs[i]), static_cast<std::uint32_t>(values.size()));
            if (inserted) {
                values.push_back(bs[i]);
                indices.emplace_back();
                cursor.push_back(0);
            }
            indices[it->second].push_back(static_cast<std::uint32_t>(i));
        }
    }

    bool live(std::uint32_t v) const { return cursor[v] < indices[v].size(); }
    std::uint32_t lowest(std::uint32_t v) const { return indices[v][cursor[v]]; }
    std::uint32_t take(std::uint32_t v) { return indices[v][cursor[v]++]; }
};

}  // namespace

SimilarityResult similarity_greedy(const BehaviorSequence& bs1, const BehaviorSequence& bs2) {
    if (bs1.empty() || bs2.empty())
        throw std::invalid_argument("similarity_greedy: empty behavior sequence");

    Buckets b2(bs2);
    // Distinct values of bs1 as well, so each value pair is scored once.
    std::unordered_map<std::string, std::uint32_t> seen1;
    std::vector<std::uint32_t> value1_of(bs1.size());
    std::vector<const BehaviorPair*> values1;
    for (std::size_t i = 0; i < bs1.size(); ++i) {
        auto [it, inserted] = seen1.try_emplace(Buckets::key(bs1[i]), static_cast<std::uint32_t>(values1.size()));
        if (inserted) values1.push_back(&bs1[i]);
        value1_of[i] = it->second;
    }
    std::vector<double> memo(values1.size() * b2.values.size(), -1.0);
    auto score_of = [&](std::uint32_t v1, std::uint32_t v2) {
        double& m = memo[v1 * b2.values.size() + v2];
        if (m < 0.0) m = pair_score(*values1[v1], b2.values[v2]);
        return m;
    };

    SimilarityResult r;
    r.matched_in_bs1.assign(bs2.size(), -1);
    double total = 0.0;
    std::size_t taken = 0;
    for (std::size_t j1 = 0; j1 < bs1.size() && taken < bs2.size(); ++j1) {
        std::uint32_t v1 = value1_of[j1];
        // Identical value present => pair_score 1, which nothing else can tie.
        double best = -1.0;
        std::uint32_t best_v2 = 0, best_idx = 0;
        if (auto it = b2.lookup.find(Buckets::key(*values1[v1]));
            it != b2.lookup.end() && b2.live(it->second)) {
            best = 1.0;
            best_v2 = it->second;
            best_idx = b2.lowest(best_v2);
        } else {
            for (std::uint32_t v2 = 0; v2 < b2.values.size(); ++v2) {
                if (!b2.live(v2)) continue;
                double s = score_of(v1, v2);
                std::uint32_t idx = b2.lowest(v2);
                if (s > best || (s == best && idx < best_idx)) {
                    best = s;
                    best_v2 = v2;
                    best_idx = idx;
                }
            }
        }
        if (best <= 0.0) continue;  // don't burn a bs2 pair on a worthless match
        std::uint32_t j2 = b2.take(best_v2);
        r.matched_in_bs1[j2] = static_cast<std::int32_t>(j1);
        total += best;
        ++taken;
    }
    r.score = total / static_cast<double>(bs1.size());
    return r;
}

namespace {

// Jonker-Volgenant style shortest augmenting path assignment, minimizing.
// cost is n x n row-major. Returns row -> column.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, n), way(n + 1, 0);  // p[col] = row matched to col
    for (int i = 0; i < n; ++i) {
        p[n] = i;
        int j0 = n;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = inf;
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 * n + j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 0; j < n; ++j)
        if (p[j] < n) row_to_col[p[j]] = j;
    return row_to_col;
}

}  // namespace

SimilarityResult similarity_exact(const BehaviorSequence& bs1, const BehaviorSequence& bs2,
                                  std::size_t max_len) {
    if (bs1.empty() || bs2.empty())
        throw std::invalid_argument("similarity_exact: empty behavior sequence");
    if (bs1.size() > max_len || bs2.size() > max_len)
        throw std::invalid_argument("similarity_exact: sequence exceeds solver cap");

    const int n1 = static_cast<int>(bs1.size());
    const int n2 = static_cast<int>(bs2.size());
    const int n = std::max(n1, n2);
    // Pad to square with zero-score dummies; minimize negated scores.
    std::vector<double> score(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> cost(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            double s = pair_score(bs1[i], bs2[j]);
            score[i * n + j] = s;
            cost[i * n + j] = -s;
        }
    std::vector<int> row_to_col = solve_assignment(cost, n);

    SimilarityResult r;
    r.matched_in_bs1.assign(bs2.size(), -1);
    double total = 0.0;
    for (int i = 0; i < n1; ++i) {
        int j = row_to_col[i];
        if (j >= 0 && j < n2) {
            r.matched_in_bs1[j] = i;
            total += score[i * n + j];
        }
    }
    r.score = total / static_cast<double>(n1);
    return r;
}

double eval_matching(const BehaviorSequence& bs1, const BehaviorSequence& bs2,
                     const std::vector<std::int32_t>& matched_in_bs1) {
    double total = 0.0;
    for (std::size_t j = 0; j < matched_in_bs1.size(); ++j) {
        std::int32_t i = matched_in_bs1[j];
        if (i >= 0) total += pair_score(bs1[static_cast<std::size_t>(i)], bs2[j]);
    }
    return total / static_cast<double>(bs1.size());
}

bool is_similar(const BehaviorSequence& bs1, const BehaviorSequence& bs2, double theta) {
    if (theta < 0.0 || theta > 1.0)
        throw std::invalid_argument("is_similar: theta outside [0,1]");
    return similarity_greedy(bs1, bs2).score > theta;
}

}  // namespace immunet
