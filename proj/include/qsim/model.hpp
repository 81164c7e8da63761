#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qsim/config.hpp"
#include "qsim/rng.hpp"

namespace qsim {

/// Sentinel for "no server" / "no queue".
inline constexpr int kNone = -1;

/// The single message an agent may send per slot: a target server and a bid.
/// target == kNone means the agent stays silent that slot.
struct Request {
    int agent = kNone;
    int target = kNone;
    double bid = 0.0;

    bool is_null() const { return target == kNone; }
};

/// Queue update: one arrival in, at most one job out, never negative.
inline uint64_t advance_queue(uint64_t length, bool arrival, bool served) {
    uint64_t q = length + (arrival ? 1 : 0);
    if (served && q > 0) --q;
    return q;
}

/// Highest bid wins; exact ties go to the lowest agent id so collisions stay
/// reproducible. Empty request set leaves the server idle.
inline int resolve_server(std::span<const Request> requests) {
    int best = kNone;
    double best_bid = 0.0;
    for (const Request& r : requests) {
        if (r.is_null()) continue;
        if (best == kNone || r.bid > best_bid ||
            (r.bid == best_bid && r.agent < best)) {
            best = r.agent;
            best_bid = r.bid;
        }
    }
    return best;
}

/// Independent Bernoulli(lambda_i) arrival draws for slot t.
inline std::vector<uint8_t> sample_arrivals(const SystemConfig& cfg, RngStream& rng,
                                            int64_t slot) {
    std::vector<uint8_t> a(static_cast<size_t>(cfg.n_queues), 0);
    for (int i = 0; i < cfg.n_queues; ++i)
        a[static_cast<size_t>(i)] = rng.bernoulli(cfg.arrival_rate_at(i, slot)) ? 1 : 0;
    return a;
}

/// Service draw for one server: Bernoulli(mu_{i,j}) for the selected agent.
/// An idle server (selected == kNone) emits no service event.
inline bool sample_service(int selected, int server, const SystemConfig& cfg,
                           RngStream& rng) {
    double u = rng.next_double();
    if (selected == kNone) return false;
    return u < cfg.service_rates[static_cast<size_t>(selected)][static_cast<size_t>(server)];
}

/// Slackness implied by the capacity gap of a symmetric system: gap / K.
inline double symmetric_slack_from_gap(double gap, int n_servers) {
    return gap / static_cast<double>(n_servers);
}

} // namespace qsim
