#include "immunet/gatekeeper.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "immunet/rng.hpp"

namespace immunet {

namespace {

const EVP_MD* md_of(HashAlg alg) {
    return alg == HashAlg::sha1 ? EVP_sha1() : EVP_sha256();
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

Digest hash_bytes(HashAlg alg, const std::uint8_t* data, std::size_t n) {
    Digest d;
    unsigned int len = 0;
    if (EVP_Digest(data, n, d.bytes.data(), &len, md_of(alg), nullptr) != 1)
        throw std::runtime_error("hash_bytes: digest failure");
    d.len = len;
    return d;
}

Digest hmac_bytes(HashAlg alg, const std::vector<std::uint8_t>& key, const std::uint8_t* data,
                  std::size_t n) {
    Digest d;
    unsigned int len = 0;
    if (HMAC(md_of(alg), key.data(), static_cast<int>(key.size()), data, n, d.bytes.data(), &len) ==
        nullptr)
        throw std::runtime_error("hmac_bytes: mac failure");
    d.len = len;
    return d;
}

ClientAddr ClientAddr::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    ClientAddr addr;
    addr.len = 4;
    addr.bytes = {a, b, c, d};
    return addr;
}

std::size_t ClientAddrHash::operator()(const ClientAddr& a) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t i = 0; i < a.len; ++i) h = (h ^ a.bytes[i]) * 0x100000001b3ull;
    return static_cast<std::size_t>(h ^ a.len);
}

// --- wire codecs ---

std::vector<std::uint8_t> encode_message1(const Message1& m) {
    std::vector<std::uint8_t> out;
    out.reserve(8);
    put_u64(out, m.si_h);
    return out;
}

std::vector<std::uint8_t> encode_message2(const Message2& m) {
    std::vector<std::uint8_t> out;
    out.reserve(17);
    put_u64(out, m.si_h);
    put_u64(out, m.si_p);
    out.push_back(m.k);
    return out;
}

std::vector<std::uint8_t> encode_message3(const Message3& m) {
    std::vector<std::uint8_t> out;
    out.reserve(29 + m.request.size());
    put_u64(out, m.si_h);
    put_u64(out, m.si_p);
    out.push_back(m.k);
    put_u64(out, m.x);
    put_u32(out, static_cast<std::uint32_t>(m.request.size()));
    out.insert(out.end(), m.request.begin(), m.request.end());
    return out;
}

Message1 decode_message1(const std::uint8_t* data, std::size_t n) {
    if (n != 8) throw std::runtime_error("decode_message1: need 8 bytes");
    return {get_u64(data)};
}

Message2 decode_message2(const std::uint8_t* data, std::size_t n) {
    if (n != 17) throw std::runtime_error("decode_message2: need 17 bytes");
    return {get_u64(data), get_u64(data + 8), data[16]};
}

Message3 decode_message3(const std::uint8_t* data, std::size_t n) {
    if (n < 29) throw std::runtime_error("decode_message3: truncated header");
    Message3 m;
    m.si_h = get_u64(data);
    m.si_p = get_u64(data + 8);
    m.k = data[16];
    m.x = get_u64(data + 17);
    std::uint32_t len = get_u32(data + 25);
    if (n != 29 + static_cast<std::size_t>(len))
        throw std::runtime_error("decode_message3: request length mismatch");
    m.request.assign(reinterpret_cast<const char*>(data + 29), len);
    return m;
}

// --- secret schedule ---

SecretSchedule::SecretSchedule(const GatekeeperParams& params, std::uint64_t seed)
    : params_(params), seed_(seed) {
    if (params_.secret_bits < 8 || params_.secret_bits > 256 || params_.secret_bits % 8 != 0)
        throw std::invalid_argument("SecretSchedule: secret_bits must be a multiple of 8 in [8,256]");
    if (params_.rotation_period_s <= 0.0)
        throw std::invalid_argument("SecretSchedule: rotation period must be positive");
}

std::uint64_t SecretSchedule::epoch_of(double now_s) const {
    return static_cast<std::uint64_t>(std::max(0.0, now_s) / params_.rotation_period_s);
}

ServerSecret SecretSchedule::for_epoch(std::uint64_t epoch) const {
    ServerSecret s;
    s.epoch = epoch;
    s.rotation_period_s = params_.rotation_period_s;
    std::mt19937_64 rng(derive_seed(seed_, epoch ^ 0x5EC2E7ull));
    s.secret.resize(static_cast<std::size_t>(params_.secret_bits / 8));
    for (auto& b : s.secret) b = static_cast<std::uint8_t>(rng() & 0xff);
    return s;
}

ServerSecret SecretSchedule::at(double now_s) const { return for_epoch(epoch_of(now_s)); }

std::optional<ServerSecret> SecretSchedule::previous(double now_s) const {
    std::uint64_t e = epoch_of(now_s);
    if (e == 0) return std::nullopt;
    return for_epoch(e - 1);
}

// --- replay db ---

std::size_t ReplayDb::PairHash::operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return static_cast<std::size_t>(derive_seed(p.first, p.second));
}

bool ReplayDb::seen(std::uint64_t si_h, std::uint64_t si_p) const {
    for (const auto& [epoch, set] : by_epoch_)
        if (set.count({si_h, si_p})) return true;
    return false;
}

void ReplayDb::record(std::uint64_t si_h, std::uint64_t si_p, double now_s) {
    auto epoch = static_cast<std::uint64_t>(std::max(0.0, now_s) / rotation_s_);
    by_epoch_[epoch].insert({si_h, si_p});
}

void ReplayDb::purge(double now_s) {
    // Keep the current and two previous epochs: strictly more than two full
    // rotation periods of retention for any recorded pair.
    auto epoch = static_cast<std::uint64_t>(std::max(0.0, now_s) / rotation_s_);
    std::uint64_t floor_epoch = epoch >= 2 ? epoch - 2 : 0;
    while (!by_epoch_.empty() && by_epoch_.begin()->first < floor_epoch)
        by_epoch_.erase(by_epoch_.begin());
}

std::size_t ReplayDb::size() const {
    std::size_t n = 0;
    for (const auto& [epoch, set] : by_epoch_) n += set.size();
    return n;
}

// --- adaptation ---

void AdaptationState::set_load(double v) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("AdaptationState: load outside [0,1]");
    load_ = v;
}

void AdaptationState::note_solve(const ClientAddr& client, double now_s) {
    solves_[client].push_back(now_s);
}

int AdaptationState::solves_in_window(const ClientAddr& client, double now_s) {
    auto it = solves_.find(client);
    if (it == solves_.end()) return 0;
    auto& q = it->second;
    while (!q.empty() && q.front() < now_s - params_.solve_window_s) q.pop_front();
    if (q.empty()) {
        solves_.erase(it);
        return 0;
    }
    return static_cast<int>(q.size());
}

int AdaptationState::difficulty(const ClientAddr& client, double now_s) {
    double client_term =
        std::min(1.0, static_cast<double>(solves_in_window(client, now_s)) /
                          static_cast<double>(params_.solve_cap));
    double term = std::max(load_, client_term);
    auto k = static_cast<int>(std::lround(params_.k_max * term));
    return std::clamp(k, 0, params_.k_max);
}

// --- protocol ---

std::pair<PuzzleSession, Message1> client_init(std::mt19937_64& rng) {
    PuzzleSession s;
    s.si_h = rng();
    s.status = PuzzleSession::Status::initiated;
    return {s, Message1{s.si_h}};
}

int choose_difficulty(AdaptationState& a, const ClientAddr& client, double now_s) {
    return a.difficulty(client, now_s);
}

Message2 make_challenge(const ServerSecret& secret, const ClientAddr& client_ip,
                        std::uint64_t si_h, int k, HashAlg alg) {
    std::vector<std::uint8_t> input;
    input.reserve(client_ip.len + 9);
    input.insert(input.end(), client_ip.bytes.begin(), client_ip.bytes.begin() + client_ip.len);
    put_u64(input, si_h);
    input.push_back(static_cast<std::uint8_t>(k));
    Digest mac = hmac_bytes(alg, secret.secret, input.data(), input.size());
    return {si_h, get_u64(mac.bytes.data()), static_cast<std::uint8_t>(k)};
}

bool solution_valid(HashAlg alg, std::uint64_t si_h, std::uint64_t si_p, int k, std::uint64_t x) {
    if (k < 0) k = 0;
    std::vector<std::uint8_t> input;
    input.reserve(24);
    put_u64(input, si_h);
    put_u64(input, si_p);
    put_u64(input, x);
    Digest d = hash_bytes(alg, input.data(), input.size());
    if (static_cast<std::size_t>(k) > d.len * 8) return false;
    int full = k / 8, rem = k % 8;
    for (int i = 0; i < full; ++i)
        if (d.bytes[i] != 0) return false;
    if (rem != 0 && (d.bytes[full] >> (8 - rem)) != 0) return false;
    return true;
}

std::optional<Message3> client_solve(PuzzleSession& session, const Message2& challenge,
                                     std::mt19937_64& rng, HashAlg alg, std::string request) {
    if (challenge.si_h != session.si_h) {
        session.status = PuzzleSession::Status::rejected;
        return std::nullopt;
    }
    session.si_p = challenge.si_p;
    session.k = challenge.k;
    session.status = PuzzleSession::Status::challenged;

    std::uint64_t x = rng();
    session.attempts = 0;
    for (;;) {
        ++session.attempts;
        if (solution_valid(alg, session.si_h, session.si_p, session.k, x)) break;
        ++x;
    }
    session.solution_x = x;
    session.status = PuzzleSession::Status::solved;
    return Message3{session.si_h, session.si_p, session.k, x, std::move(request)};
}

Verdict verify_and_admit(const SecretSchedule& secrets, ReplayDb& replay, AdaptationState& adapt,
                         const Message3& msg3, const ClientAddr& client_ip, double now_s) {
    // (a) freshness
    if (replay.seen(msg3.si_h, msg3.si_p)) return {false, Verdict::Reason::replay};
    // (b) identifier authenticity: recompute si_p under current, then
    // previous-epoch grace. The MAC input binds k.
    ServerSecret cur = secrets.at(now_s);
    HashAlg alg = secrets.params().hash;
    Message2 expect = make_challenge(cur, client_ip, msg3.si_h, msg3.k, alg);
    bool authentic = expect.si_p == msg3.si_p;
    if (!authentic) {
        if (auto prev = secrets.previous(now_s)) {
            Message2 old = make_challenge(*prev, client_ip, msg3.si_h, msg3.k, alg);
            authentic = old.si_p == msg3.si_p;
        }
    }
    if (!authentic) return {false, Verdict::Reason::forged_identifier};
    // (c) solution
    if (!solution_valid(alg, msg3.si_h, msg3.si_p, msg3.k, msg3.x))
        return {false, Verdict::Reason::bad_solution};
    // (d) commit: remember the pair, count the solve, admit (caller proxies).
    replay.record(msg3.si_h, msg3.si_p, now_s);
    replay.purge(now_s);
    adapt.note_solve(client_ip, now_s);
    return {true, Verdict::Reason::admitted};
}

double proxy_latency(const UnderlayGraph& g, std::uint32_t ext, std::uint32_t ph,
                     std::uint32_t target) {
    double leg = g.path_latency(ext, ph);
    return leg + g.path_latency(ph, target) + 2.0 * (2.0 * leg);
}

}  // namespace immunet
