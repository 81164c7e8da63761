#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qsim/epoch_params.hpp"
#include "qsim/matching.hpp"
#include "qsim/model.hpp"
#include "qsim/rng.hpp"

namespace qsim {

// ---------------------------------------------------------------------------
// Service-rate estimation
// ---------------------------------------------------------------------------

/// Running sample mean over harvested service observations for one
/// queue-server pair. mean is defined as 0 while count == 0.
struct RateEstimate {
    double mean = 0.0;
    int64_t count = 0;
};

/// Fold a window of own service outcomes into an estimate. The agent cannot
/// tell whether it was the server's selected requester before its first
/// success, so everything up to and including that success is discarded;
/// the remaining outcomes are unbiased Bernoulli samples.
inline RateEstimate dam_update(std::span<const uint8_t> window, RateEstimate est) {
    size_t first = window.size();
    for (size_t t = 0; t < window.size(); ++t) {
        if (window[t]) {
            first = t;
            break;
        }
    }
    if (first == window.size()) return est;  // no success: keep as is

    int64_t extra = static_cast<int64_t>(window.size() - 1 - first);
    if (extra == 0) return est;
    int64_t successes = 0;
    for (size_t t = first + 1; t < window.size(); ++t) successes += window[t];
    RateEstimate out;
    out.count = est.count + extra;
    out.mean = (est.mean * static_cast<double>(est.count) + static_cast<double>(successes)) /
               static_cast<double>(out.count);
    return out;
}

/// Exploration probability of a forced-exploration agent in its ell-th
/// epoch: min(1, K / ell^gamma).
inline double explore_probability(int64_t ell, int n_servers, double gamma) {
    return std::min(1.0, static_cast<double>(n_servers) /
                             std::pow(static_cast<double>(ell), gamma));
}

/// Optimistic estimate used by forced exploration in exploit epochs: sample
/// mean plus a confidence radius, clamped to [0,1]; unexplored pairs stay at
/// 0 so they are never targeted. The log argument is floored at e so the
/// radius is positive even in the first epochs.
inline double fe_optimistic_rate(const RateEstimate& est, int64_t epoch_start_slot) {
    if (est.count < 1) return 0.0;
    double radius = std::sqrt(3.0 * std::max(1.0, std::log(static_cast<double>(epoch_start_slot))) /
                              static_cast<double>(est.count));
    return std::min(1.0, est.mean + radius);
}

/// Optimistic estimate used by adaptive exploration: never below the known
/// rate floor, and equal to 1 for unexplored pairs.
inline double ucb_optimistic_rate(const RateEstimate& est, int64_t effective_slot,
                                  int n_servers, double rate_floor) {
    double up = 1.0;
    if (est.count >= 1) {
        double radius =
            std::sqrt(3.0 * std::log(static_cast<double>(effective_slot + n_servers)) /
                      static_cast<double>(est.count));
        up = std::min(1.0, est.mean + radius);
    }
    return std::max(rate_floor, up);
}

// ---------------------------------------------------------------------------
// Converge phase
// ---------------------------------------------------------------------------

struct AgentAction {
    int target = kNone;
    double bid = 0.0;
};

/// One agent's state machine for the converge window of an epoch. The agent
/// repeats its current request until it goes a full checking period without
/// being served, then either raises its price on the best payoff server and
/// requests it, or goes silent when no server is worth its price.
///
/// Prices are private to the agent, start at zero each epoch, and only ever
/// increase; a fixed per-agent perturbation eta keeps bid ties across agents
/// measure-zero.
class ConvergePhase {
public:
    ConvergePhase() = default;
    ConvergePhase(std::vector<double> weights, double price_step, double eta,
                  int64_t epoch_start, int64_t check_period)
        : w_(std::move(weights)),
          p_(w_.size(), 0.0),
          step_(price_step),
          eta_(eta),
          t0_(epoch_start),
          check_period_(check_period),
          last_event_(epoch_start - 1) {}

    AgentAction act(int64_t t) {
        price_changed_ = false;
        if (!(t > t0_ && t - last_event_ <= check_period_)) {
            int best = kNone;
            double best_payoff = 0.0;
            for (size_t j = 0; j < w_.size(); ++j) {
                double payoff = w_[j] - p_[j];
                if (best == kNone || payoff > best_payoff) {
                    best = static_cast<int>(j);
                    best_payoff = payoff;
                }
            }
            if (best != kNone && best_payoff > 0.0) {
                p_[static_cast<size_t>(best)] += step_ * (1.0 - eta_) * w_[static_cast<size_t>(best)];
                price_changed_ = true;
                target_ = best;
            } else {
                target_ = kNone;
            }
        }
        double bid = target_ == kNone ? 0.0 : p_[static_cast<size_t>(target_)];
        return {target_, bid};
    }

    void observe(int64_t t, bool served) {
        if (price_changed_ || served) last_event_ = t;
    }

    int target() const { return target_; }
    double committed_bid() const {
        return target_ == kNone ? 0.0 : p_[static_cast<size_t>(target_)];
    }
    const std::vector<double>& prices() const { return p_; }
    const std::vector<double>& weights() const { return w_; }

private:
    std::vector<double> w_;
    std::vector<double> p_;
    double step_ = 0.0;
    double eta_ = 0.0;
    int64_t t0_ = 1;
    int64_t check_period_ = 1;
    int64_t last_event_ = 0;
    int target_ = kNone;
    bool price_changed_ = false;
};

// ---------------------------------------------------------------------------
// Stand-alone converge run under guaranteed service
// ---------------------------------------------------------------------------

struct ConvergeOutcome {
    Matching matching;                // committed servers
    DualCertificate certificate;      // server prices seen at the end + payoffs
    int64_t converge_offset = -1;     // slots from window start until the
                                      // request profile froze; -1 if never
    bool converged = false;
    int64_t slots_run = 0;
};

/// Run one converge window with every selected request succeeding (the
/// checking events all hold, so the dynamics are deterministic). Once every
/// server receives at most one request the profile is frozen, which lets the
/// run stop early; a guard re-simulates one extra checking period to confirm.
inline ConvergeOutcome run_forced_converge(const WeightMatrix& w, const EpochParams& params,
                                           std::span<const double> etas,
                                           int64_t window_len = -1) {
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    const int64_t t0 = 1;
    const int64_t len = window_len > 0 ? window_len : params.converge_len;

    std::vector<ConvergePhase> agents;
    agents.reserve(n);
    for (size_t i = 0; i < n; ++i)
        agents.emplace_back(w[i], params.price_step, etas[i], t0, params.check_period);

    ConvergeOutcome out;
    std::vector<AgentAction> acts(n);
    std::vector<int> selected(k, kNone);
    std::vector<AgentAction> prev(n, AgentAction{kNone, -1.0});
    int64_t last_change = t0;
    int64_t frozen_at = -1;

    for (int64_t t = t0; t < t0 + len; ++t) {
        out.slots_run = t - t0 + 1;
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            acts[i] = agents[i].act(t);
            if (acts[i].target != prev[i].target || acts[i].bid != prev[i].bid)
                changed = true;
            prev[i] = acts[i];
        }
        if (changed) last_change = t;

        std::fill(selected.begin(), selected.end(), kNone);
        std::vector<int> load(k, 0);
        std::vector<double> top_bid(k, 0.0);
        for (size_t i = 0; i < n; ++i) {
            int j = acts[i].target;
            if (j == kNone) continue;
            ++load[static_cast<size_t>(j)];
            if (selected[static_cast<size_t>(j)] == kNone ||
                acts[i].bid > top_bid[static_cast<size_t>(j)]) {
                selected[static_cast<size_t>(j)] = static_cast<int>(i);
                top_bid[static_cast<size_t>(j)] = acts[i].bid;
            }
        }
        for (size_t i = 0; i < n; ++i) {
            bool served = acts[i].target != kNone &&
                          selected[static_cast<size_t>(acts[i].target)] == static_cast<int>(i);
            agents[i].observe(t, served);
        }

        bool single = true;
        for (size_t j = 0; j < k; ++j)
            if (load[j] > 1) single = false;
        frozen_at = single ? last_change : -1;
        // Stay a full checking period past the freeze to confirm nothing moves.
        if (frozen_at >= 0 && t - last_change > params.check_period + 1) break;
    }

    out.converged = frozen_at >= 0;
    out.converge_offset = out.converged ? frozen_at - t0 : -1;
    out.matching.assignment.assign(n, kNone);
    out.certificate.prices.assign(k, 0.0);
    out.certificate.payoffs.assign(n, 0.0);
    for (size_t j = 0; j < k; ++j) {
        if (selected[j] != kNone && out.converged) {
            size_t i = static_cast<size_t>(selected[j]);
            out.matching.assignment[i] = static_cast<int>(j);
            out.certificate.prices[j] = prev[i].bid;
        }
    }
    for (size_t i = 0; i < n; ++i) {
        double best = 0.0;
        for (size_t j = 0; j < k; ++j)
            best = std::max(best, w[i][j] - out.certificate.prices[j]);
        out.certificate.payoffs[i] = best;
    }
    return out;
}

} // namespace qsim
