#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsim/dam.hpp"
#include "qsim/epoch_params.hpp"
#include "qsim/model.hpp"
#include "qsim/rng.hpp"

namespace qsim {

/// Everything an agent is allowed to see. This type is the decentralization
/// boundary: no arrival or service rates of others, no other queue lengths,
/// no global request traffic.
struct AgentView {
    uint64_t queue_len = 0;
    int64_t slot = 1;
    int64_t slots_since_join = 1;
    bool last_served = false;
};

/// Agent-side decision algorithm. act() is called exactly once per slot and
/// returns the single request (possibly null); observe() reports whether
/// that request was served.
class AgentPolicy {
public:
    virtual ~AgentPolicy() = default;
    virtual Request act(const AgentView& view) = 0;
    virtual void observe(const AgentView& view, bool served) = 0;
    /// Whether the agent is in a dedicated exploration epoch right now.
    virtual bool exploring() const { return false; }
};

enum class PolicyKind {
    dam_k,
    dam_fe,
    dam_ucb,
    dyn_dam_fe,
    dyn_dam_ucb,
    maxweight,
    fixed,
    random,
};

inline bool is_dam(PolicyKind k) {
    return k == PolicyKind::dam_k || k == PolicyKind::dam_fe || k == PolicyKind::dam_ucb ||
           k == PolicyKind::dyn_dam_fe || k == PolicyKind::dyn_dam_ucb;
}
inline bool is_centralized(PolicyKind k) { return k == PolicyKind::maxweight; }

inline const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::dam_k: return "dam-k";
        case PolicyKind::dam_fe: return "dam-fe";
        case PolicyKind::dam_ucb: return "dam-ucb";
        case PolicyKind::dyn_dam_fe: return "dyn-dam-fe";
        case PolicyKind::dyn_dam_ucb: return "dyn-dam-ucb";
        case PolicyKind::maxweight: return "maxweight";
        case PolicyKind::fixed: return "fixed";
        case PolicyKind::random: return "random";
    }
    return "?";
}

inline std::optional<PolicyKind> policy_kind_from_string(const std::string& s) {
    for (PolicyKind k :
         {PolicyKind::dam_k, PolicyKind::dam_fe, PolicyKind::dam_ucb, PolicyKind::dyn_dam_fe,
          PolicyKind::dyn_dam_ucb, PolicyKind::maxweight, PolicyKind::fixed,
          PolicyKind::random}) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

/// Policy selection plus hyperparameters, as read from config keys or flags.
struct PolicySpec {
    PolicyKind kind = PolicyKind::dam_k;
    ParamMode mode = ParamMode::tuned;
    double gamma = 0.8;              // forced-exploration decay exponent
    bool harvest_commit = true;      // fold commit-window samples into estimates
    int fixed_server = 0;            // for the fixed baseline
};

// ---------------------------------------------------------------------------
// Decentralized auction policies
// ---------------------------------------------------------------------------

/// The epoch-structured auction policy in its three learning variants:
///  - known_rates: weights come from the true service rates of this agent;
///  - forced_exploration: dedicated high-bid exploration epochs harvest
///    unbiased samples, exploit epochs use optimistic estimates;
///  - adaptive_ucb: every epoch exploits optimistic estimates and harvests
///    samples from its commit window.
///
/// In dynamic mode the agent stays silent until the first epoch boundary at
/// or after it joined, and measures time relative to its join slot where the
/// confidence radius or exploration schedule calls for it.
class DamPolicy : public AgentPolicy {
public:
    enum class Learning { known_rates, forced_exploration, adaptive_ucb };

    DamPolicy(int agent_id, int n_servers, EpochParams params, Learning learning,
              RngStream stream, std::vector<double> true_rates = {},
              double gamma = 0.8, bool harvest_commit = true, bool dynamic = false,
              int64_t join_slot = 1, double rate_floor = 0.0)
        : id_(agent_id),
          k_(n_servers),
          params_(params),
          learning_(learning),
          rng_(stream),
          true_rates_(std::move(true_rates)),
          gamma_(gamma),
          harvest_commit_(harvest_commit),
          dynamic_(dynamic),
          join_slot_(join_slot),
          rate_floor_(rate_floor),
          estimates_(static_cast<size_t>(n_servers)) {
        eta_ = rng_.uniform(0.0, 1e-9);
        int64_t l = params_.epoch_len;
        start_slot_ = dynamic_ ? ((join_slot_ - 1 + l - 1) / l) * l + 1 : 1;
        if (learning_ == Learning::known_rates &&
            true_rates_.size() != static_cast<size_t>(k_))
            throw std::invalid_argument("known-rate policy needs this agent's rate row");
    }

    Request act(const AgentView& view) override {
        const int64_t t = view.slot;
        if (t < start_slot_) return {id_, kNone, 0.0};
        const int64_t t0 = params_.epoch_start(t);
        if (t == t0) begin_epoch(t0, view.queue_len);

        if (explore_epoch_) return {id_, explore_target_, explore_bid_};

        if (t - t0 < params_.converge_len) {
            AgentAction a = converge_.act(t);
            awaiting_converge_observe_ = true;
            if (t - t0 == params_.converge_len - 1) {
                committed_target_ = converge_.target();
                committed_bid_ = converge_.committed_bid();
                if (wants_commit_samples() && committed_target_ != kNone) {
                    sample_target_ = committed_target_;
                    window_.clear();
                    window_open_ = true;
                }
            }
            return {id_, a.target, a.bid};
        }
        return {id_, committed_target_, committed_target_ == kNone ? 0.0 : committed_bid_};
    }

    void observe(const AgentView& view, bool served) override {
        const int64_t t = view.slot;
        if (t < start_slot_) return;
        if (awaiting_converge_observe_) {
            converge_.observe(t, served);
            awaiting_converge_observe_ = false;
        }
        if (window_open_) {
            const int64_t t0 = params_.epoch_start(t);
            bool in_window = explore_epoch_ || t - t0 >= params_.converge_len;
            if (in_window) window_.push_back(served ? 1 : 0);
        }
    }

    bool exploring() const override { return explore_epoch_; }

    /// Fold any pending sample window into the estimates. Called on epoch
    /// boundaries; tests may call it after a run that ends mid-epoch.
    void flush_samples() {
        if (window_open_ && sample_target_ != kNone && !window_.empty()) {
            auto& est = estimates_[static_cast<size_t>(sample_target_)];
            est = dam_update(window_, est);
        }
        window_.clear();
        window_open_ = false;
        sample_target_ = kNone;
    }

    const std::vector<RateEstimate>& estimates() const { return estimates_; }
    const EpochParams& params() const { return params_; }
    const ConvergePhase& converge_state() const { return converge_; }
    double eta() const { return eta_; }
    int committed_target() const { return committed_target_; }

private:
    bool wants_commit_samples() const {
        if (learning_ == Learning::adaptive_ucb) return true;
        return learning_ == Learning::forced_exploration && harvest_commit_;
    }

    int64_t local_epoch_index(int64_t t0) const { return (t0 - start_slot_) / params_.epoch_len + 1; }

    void begin_epoch(int64_t t0, uint64_t queue_len) {
        flush_samples();
        explore_epoch_ = false;
        committed_target_ = kNone;
        committed_bid_ = 0.0;

        std::vector<double> weights(static_cast<size_t>(k_), 0.0);
        const double q = static_cast<double>(queue_len);
        switch (learning_) {
            case Learning::known_rates:
                for (int j = 0; j < k_; ++j)
                    weights[static_cast<size_t>(j)] = true_rates_[static_cast<size_t>(j)] * q;
                break;
            case Learning::forced_exploration: {
                int64_t ell = dynamic_ ? local_epoch_index(t0) : params_.epoch_index(t0);
                if (rng_.bernoulli(explore_probability(ell, k_, gamma_))) {
                    explore_epoch_ = true;
                    explore_target_ = static_cast<int>(rng_.next_below(static_cast<uint64_t>(k_)));
                    explore_bid_ =
                        static_cast<double>(t0 + params_.epoch_len + 1) * (1.0 + eta_);
                    sample_target_ = explore_target_;
                    window_.clear();
                    window_open_ = true;
                    return;
                }
                for (int j = 0; j < k_; ++j)
                    weights[static_cast<size_t>(j)] =
                        fe_optimistic_rate(estimates_[static_cast<size_t>(j)], t0) * q;
                break;
            }
            case Learning::adaptive_ucb: {
                int64_t effective = dynamic_ ? t0 - join_slot_ + 1 : t0;
                for (int j = 0; j < k_; ++j)
                    weights[static_cast<size_t>(j)] =
                        ucb_optimistic_rate(estimates_[static_cast<size_t>(j)], effective, k_,
                                            rate_floor_) *
                        q;
                break;
            }
        }
        converge_ = ConvergePhase(std::move(weights), params_.price_step, eta_, t0,
                                  params_.check_period);
    }

    int id_;
    int k_;
    EpochParams params_;
    Learning learning_;
    RngStream rng_;
    std::vector<double> true_rates_;
    double gamma_;
    bool harvest_commit_;
    bool dynamic_;
    int64_t join_slot_;
    double rate_floor_;
    double eta_ = 0.0;
    int64_t start_slot_ = 1;

    std::vector<RateEstimate> estimates_;
    ConvergePhase converge_;
    bool awaiting_converge_observe_ = false;
    bool explore_epoch_ = false;
    int explore_target_ = kNone;
    double explore_bid_ = 0.0;
    int committed_target_ = kNone;
    double committed_bid_ = 0.0;

    int sample_target_ = kNone;
    bool window_open_ = false;
    std::vector<uint8_t> window_;
};

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Always request one configured server, bidding the own queue length.
/// Negative control: cannot stabilize systems that need matching rotation.
class FixedPolicy : public AgentPolicy {
public:
    FixedPolicy(int agent_id, int server) : id_(agent_id), server_(server) {}
    Request act(const AgentView& view) override {
        return {id_, server_, static_cast<double>(view.queue_len)};
    }
    void observe(const AgentView&, bool) override {}

private:
    int id_;
    int server_;
};

/// Request a uniformly random server each slot.
class UniformRandomPolicy : public AgentPolicy {
public:
    UniformRandomPolicy(int agent_id, int n_servers, RngStream stream)
        : id_(agent_id), k_(n_servers), rng_(stream) {}
    Request act(const AgentView& view) override {
        int j = static_cast<int>(rng_.next_below(static_cast<uint64_t>(k_)));
        return {id_, j, static_cast<double>(view.queue_len)};
    }
    void observe(const AgentView&, bool) override {}

private:
    int id_;
    int k_;
    RngStream rng_;
};

} // namespace qsim
