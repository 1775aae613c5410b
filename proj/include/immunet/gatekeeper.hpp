#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "immunet/underlay.hpp"

namespace immunet {

enum class HashAlg : std::uint8_t { sha1, sha256 };

/// Raw digest; len is 20 for SHA-1, 32 for SHA-256.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};
    std::size_t len = 0;
};

Digest hash_bytes(HashAlg alg, const std::uint8_t* data, std::size_t n);
Digest hmac_bytes(HashAlg alg, const std::vector<std::uint8_t>& key, const std::uint8_t* data,
                  std::size_t n);

/// Client address as raw bytes: 4 for IPv4, 16 for IPv6.
struct ClientAddr {
    std::array<std::uint8_t, 16> bytes{};
    std::uint8_t len = 4;

    static ClientAddr v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
    friend bool operator==(const ClientAddr&, const ClientAddr&) = default;
};

struct ClientAddrHash {
    std::size_t operator()(const ClientAddr& a) const;
};

struct GatekeeperParams {
    int k_max = 26;
    double rotation_period_s = 300.0;
    int solve_cap = 16;
    double solve_window_s = 300.0;
    int secret_bits = 32;  // configurable up to 256
    HashAlg hash = HashAlg::sha1;
};

// --- wire messages (all integers big-endian) ---

struct Message1 {
    std::uint64_t si_h = 0;
};  // 8 bytes

struct Message2 {
    std::uint64_t si_h = 0;
    std::uint64_t si_p = 0;
    std::uint8_t k = 0;
};  // 17 bytes

struct Message3 {
    std::uint64_t si_h = 0;
    std::uint64_t si_p = 0;
    std::uint8_t k = 0;
    std::uint64_t x = 0;
    std::string request;
};  // 29 bytes + request

std::vector<std::uint8_t> encode_message1(const Message1&);
std::vector<std::uint8_t> encode_message2(const Message2&);
std::vector<std::uint8_t> encode_message3(const Message3&);
Message1 decode_message1(const std::uint8_t* data, std::size_t n);
Message2 decode_message2(const std::uint8_t* data, std::size_t n);
Message3 decode_message3(const std::uint8_t* data, std::size_t n);

/// One client-side handshake in progress.
struct PuzzleSession {
    enum class Status : std::uint8_t { initiated, challenged, solved, verified, rejected };
    std::uint64_t si_h = 0;
    std::uint64_t si_p = 0;
    std::uint8_t k = 0;
    std::uint64_t solution_x = 0;
    Status status = Status::initiated;
    std::uint64_t attempts = 0;  // hash evaluations spent solving
};

struct ServerSecret {
    std::vector<std::uint8_t> secret;  // secret_bits/8 bytes
    std::uint64_t epoch = 0;
    double rotation_period_s = 300.0;
};

/// Rotating server secret: the epoch-e key is derived deterministically from
/// the schedule seed, so nothing per-epoch is stored and any epoch can be
/// recomputed for the previous-epoch verification grace.
class SecretSchedule {
public:
    SecretSchedule(const GatekeeperParams& params, std::uint64_t seed);
    ServerSecret at(double now_s) const;
    std::optional<ServerSecret> previous(double now_s) const;
    std::uint64_t epoch_of(double now_s) const;
    const GatekeeperParams& params() const { return params_; }

private:
    ServerSecret for_epoch(std::uint64_t epoch) const;
    GatekeeperParams params_;
    std::uint64_t seed_;
};

/// Seen (si_h, si_p) pairs, bucketed by rotation epoch so purging drops
/// whole epochs. Pairs are retained for at least two rotation periods.
class ReplayDb {
public:
    explicit ReplayDb(double rotation_period_s) : rotation_s_(rotation_period_s) {}
    bool seen(std::uint64_t si_h, std::uint64_t si_p) const;
    void record(std::uint64_t si_h, std::uint64_t si_p, double now_s);
    void purge(double now_s);
    std::size_t size() const;

private:
    struct PairHash {
        std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const;
    };
    double rotation_s_;
    std::map<std::uint64_t, std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, PairHash>> by_epoch_;
};

/// Difficulty inputs: instantaneous server load plus per-client solved-puzzle
/// counts over a sliding window.
class AdaptationState {
public:
    explicit AdaptationState(const GatekeeperParams& params) : params_(params) {}
    void set_load(double v);
    double load() const { return load_; }
    void note_solve(const ClientAddr& client, double now_s);
    int solves_in_window(const ClientAddr& client, double now_s);
    int difficulty(const ClientAddr& client, double now_s);

private:
    GatekeeperParams params_;
    double load_ = 0.0;
    std::unordered_map<ClientAddr, std::deque<double>, ClientAddrHash> solves_;
};

// --- protocol operations ---

std::pair<PuzzleSession, Message1> client_init(std::mt19937_64& rng);

/// k = clamp(round(k_max * max(server_load, solves/solve_cap)), 0, k_max).
int choose_difficulty(AdaptationState& a, const ClientAddr& client, double now_s);

/// si_p = first 8 bytes of HMAC(secret, client_ip || si_h || k). Pure.
Message2 make_challenge(const ServerSecret& secret, const ClientAddr& client_ip,
                        std::uint64_t si_h, int k, HashAlg alg = HashAlg::sha1);

/// True iff hash(si_h || si_p || x) has its k most significant bits zero.
bool solution_valid(HashAlg alg, std::uint64_t si_h, std::uint64_t si_p, int k, std::uint64_t x);

/// Brute-force solve from a random start; session must hold the si_h the
/// challenge echoes, otherwise the session is rejected (spoofed challenge)
/// and nullopt returned.
std::optional<Message3> client_solve(PuzzleSession& session, const Message2& challenge,
                                     std::mt19937_64& rng, HashAlg alg = HashAlg::sha1,
                                     std::string request = {});

struct Verdict {
    enum class Reason : std::uint8_t { admitted, replay, forged_identifier, bad_solution };
    bool admitted = false;
    Reason reason = Reason::admitted;
};

/// Server-side checks in fixed order: (a) pair freshness, (b) si_p/k
/// authenticity under the current or previous secret, (c) solution,
/// (d) record the pair and count the solve. First failure cancels the rest.
Verdict verify_and_admit(const SecretSchedule& secrets, ReplayDb& replay, AdaptationState& adapt,
                         const Message3& msg3, const ClientAddr& client_ip, double now_s);

/// One-way latency of a proxied request: request leg ext->ph, ph->target,
/// plus two handshake round trips ext<->ph.
double proxy_latency(const UnderlayGraph& g, std::uint32_t ext, std::uint32_t ph,
                     std::uint32_t target);

}  // namespace immunet
