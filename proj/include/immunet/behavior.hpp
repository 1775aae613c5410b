#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace immunet {

/// Operation tag of one observed request.
enum class Op : std::uint8_t { query, connect, upload, download, other };

/// One observed request: operation tag plus raw payload bytes.
struct BehaviorPair {
    Op op = Op::other;
    std::string payload;

    friend bool operator==(const BehaviorPair&, const BehaviorPair&) = default;
};

/// Payloads longer than this are truncated on insertion.
inline constexpr std::size_t kMaxPayloadLen = 256;

/// Sliding window of the latest requests seen from one host.
/// Fixed capacity ring: appending beyond capacity evicts the oldest entry.
class BehaviorSequence {
public:
    explicit BehaviorSequence(std::size_t capacity = 100) : cap_(capacity) {}

    void push(Op op, std::string_view payload);
    void push(const BehaviorPair& p) { push(p.op, p.payload); }
    void clear();

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return cap_; }
    bool empty() const { return buf_.empty(); }

    /// Logical index: 0 is the oldest retained pair.
    const BehaviorPair& operator[](std::size_t i) const;

    static BehaviorSequence from_pairs(const std::vector<BehaviorPair>& pairs,
                                       std::size_t capacity = 100);

private:
    std::size_t cap_;
    std::size_t head_ = 0;  // index of oldest element once the ring is full
    std::vector<BehaviorPair> buf_;
};

/// Unit-cost edit distance between two byte strings.
std::uint32_t levenshtein(std::string_view a, std::string_view b);

/// Score of one aligned pair: s(op)*s(payload), where s(op) is equality
/// (0 or 1) and s(payload) = 1 - levenshtein/max(len). Two empty payloads
/// under the same op score 1. Result is in [0,1].
double pair_score(const BehaviorPair& a, const BehaviorPair& b);

/// Result of a similarity computation: the score plus the matching that
/// produced it. matched_in_bs1[j] is the bs1 index matched to bs2[j],
/// or -1 if bs2[j] went unmatched.
struct SimilarityResult {
    double score = 0.0;
    std::vector<std::int32_t> matched_in_bs1;
};

/// Greedy alignment: walk bs1 in order, matching each pair to the unmatched
/// bs2 pair with the highest pair_score (ties to the lowest bs2 index;
/// zero-score pairs stay unmatched so they cannot block later elements).
/// Score is the matched total divided by |bs1|. Throws std::invalid_argument
/// if either sequence is empty.
SimilarityResult similarity_greedy(const BehaviorSequence& bs1,
                                   const BehaviorSequence& bs2);

/// Exact optimum over injective matchings (assignment problem, O(n^3)).
/// Same normalization as the greedy variant, so greedy <= exact always.
/// Throws std::invalid_argument if empty or longer than max_len (oracle
/// guard: the exact solver exists to check the greedy one, not to run hot).
SimilarityResult similarity_exact(const BehaviorSequence& bs1,
                                  const BehaviorSequence& bs2,
                                  std::size_t max_len = 64);

/// Recompute the normalized score implied by a matching (test helper;
/// ties results back to their claimed scores).
double eval_matching(const BehaviorSequence& bs1, const BehaviorSequence& bs2,
                     const std::vector<std::int32_t>& matched_in_bs1);

/// Strict threshold test on the greedy score. theta must be in [0,1].
bool is_similar(const BehaviorSequence& bs1, const BehaviorSequence& bs2,
                double theta);

}  // namespace immunet
