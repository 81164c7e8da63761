#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsim/config.hpp"
#include "qsim/dam.hpp"
#include "qsim/epoch_params.hpp"
#include "qsim/matching.hpp"
#include "qsim/model.hpp"
#include "qsim/policy.hpp"
#include "qsim/rng.hpp"
#include "qsim/slackness.hpp"

namespace qsim {

enum class ServiceMode { stochastic, forced_success };

inline constexpr int64_t kForever = std::numeric_limits<int64_t>::max();

/// One presence interval of a queue: active in slots [t_start, t_end].
struct DynamicInterval {
    int queue = 0;
    int64_t t_start = 1;
    int64_t t_end = kForever;
};

struct SimulationSpec {
    SystemConfig config;
    PolicySpec policy;
    int64_t horizon = 1;
    uint64_t master_seed = 1;
    ServiceMode service_mode = ServiceMode::stochastic;
    std::vector<DynamicInterval> dynamic_schedule;  // empty: everyone stays
    std::optional<double> refresh_probability;      // epoch-start refresh of queue 1
    bool epoch_diagnostics = true;
    bool record_series = true;  // per-slot series and trajectories
};

struct EpochRecord {
    int64_t epoch = 0;
    int64_t converge_offset = -1;  // slots into the epoch until requests froze
    double weight_ratio = 1.0;     // matched weight / per-slot optimum at epoch start
    int n_explorers = 0;
    double matched_weight = 0.0;
    double optimum = 0.0;
};

struct MetricsSeries {
    std::vector<double> weighted_sum;  // per slot, sum_i lambda_i(t) Q_i(t)
    std::vector<double> total_queue;   // per slot, sum_i Q_i(t)
    int64_t traj_stride = 1;
    std::vector<int64_t> traj_slots;
    std::vector<std::vector<uint64_t>> trajectories;  // rows follow traj_slots
    std::vector<EpochRecord> epochs;
    uint64_t dominance_violations = 0;  // exploit bid outbid an exploration bid
    std::vector<std::string> warnings;
    std::vector<uint64_t> final_lengths;  // state after the last processed slot
    double weighted_running_sum = 0.0;
    double total_running_sum = 0.0;
    int64_t slots = 0;

    double time_avg_weighted() const {
        return slots > 0 ? weighted_running_sum / static_cast<double>(slots) : 0.0;
    }
    /// Mean of the per-slot weighted sum over slots [from, to] (1-based,
    /// inclusive); requires recorded series.
    double window_avg_weighted(int64_t from, int64_t to) const {
        return window_avg(weighted_sum, from, to);
    }
    double window_avg_total(int64_t from, int64_t to) const {
        return window_avg(total_queue, from, to);
    }

private:
    static double window_avg(const std::vector<double>& v, int64_t from, int64_t to) {
        if (from < 1 || to > static_cast<int64_t>(v.size()) || from > to)
            throw std::out_of_range("window outside recorded series");
        double s = 0.0;
        for (int64_t t = from; t <= to; ++t) s += v[static_cast<size_t>(t - 1)];
        return s / static_cast<double>(to - from + 1);
    }
};

/// Presence intervals for the two-queue refresh process: queue 0 persists,
/// queue 1 is replaced by a fresh identical copy at each epoch start with
/// probability p.
inline std::vector<DynamicInterval> dynamic_refresh_process(double p, int64_t epoch_len,
                                                            int64_t horizon,
                                                            RngStream& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("refresh probability must lie in [0,1]");
    std::vector<DynamicInterval> sched;
    sched.push_back({0, 1, kForever});
    int64_t start = 1;
    for (int64_t boundary = epoch_len + 1; boundary <= horizon; boundary += epoch_len) {
        if (rng.bernoulli(p)) {
            sched.push_back({1, start, boundary - 1});
            start = boundary;
        }
    }
    sched.push_back({1, start, kForever});
    return sched;
}

/// Per-slot observation for tests: everything the world saw this slot.
struct SlotTrace {
    int64_t slot;
    const std::vector<uint64_t>& lengths;  // Q(t), start of slot
    const std::vector<uint8_t>& arrivals;
    const std::vector<Request>& requests;
    const std::vector<int>& selected;  // per server
    const std::vector<uint8_t>& served;
    const std::vector<uint8_t>& active;
};

struct RunHooks {
    std::function<void(const SlotTrace&)> on_slot;
};

/// The slot-by-slot event loop: lifecycle changes, arrivals, one request per
/// agent, highest-bid selection per server, Bernoulli service, queue update.
/// A run is a pure function of (spec, master_seed).
class Simulation {
public:
    explicit Simulation(SimulationSpec spec, RunHooks hooks = {})
        : spec_(std::move(spec)), hooks_(std::move(hooks)) {
        const SystemConfig& cfg = spec_.config;
        auto violations = validate_config(cfg);
        if (!violations.empty())
            throw std::invalid_argument("invalid config: " + violations.front());
        if (spec_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");

        n_ = cfg.n_queues;
        k_ = cfg.n_servers;
        world_ = derive_stream(spec_.master_seed, StreamPurpose::world);

        if (is_dam(spec_.policy.kind))
            params_ = compute_params(spec_.policy.mode, cfg.slackness, cfg.rate_floor, n_, k_);

        if (spec_.policy.kind == PolicyKind::dam_ucb ||
            spec_.policy.kind == PolicyKind::dyn_dam_ucb) {
            bool any_zero = false;
            for (const auto& row : cfg.service_rates)
                for (double mu : row)
                    if (mu == 0.0) any_zero = true;
            if (any_zero)
                metrics_.warnings.push_back(
                    "adaptive exploration assumes all service rates are positive; "
                    "this instance has zero entries and may not stabilize");
        }

        if (spec_.refresh_probability) {
            if (!params_)
                throw std::invalid_argument("refresh process requires an epoch-based policy");
            if (n_ != 2)
                throw std::invalid_argument("refresh process is defined for two queues");
            RngStream refresh_rng = derive_stream(spec_.master_seed, StreamPurpose::refresh);
            spec_.dynamic_schedule = dynamic_refresh_process(
                *spec_.refresh_probability, params_->epoch_len, spec_.horizon, refresh_rng);
        }

        agents_.resize(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            auto& a = agents_[static_cast<size_t>(i)];
            if (spec_.dynamic_schedule.empty()) {
                a.intervals.push_back({1, kForever});
            } else {
                for (const auto& iv : spec_.dynamic_schedule) {
                    if (iv.queue != i) continue;
                    if (iv.t_end < iv.t_start)
                        throw std::invalid_argument("dynamic interval ends before it starts");
                    a.intervals.push_back({iv.t_start, iv.t_end});
                }
                std::sort(a.intervals.begin(), a.intervals.end());
                for (size_t v = 1; v < a.intervals.size(); ++v)
                    if (a.intervals[v].first <= a.intervals[v - 1].second)
                        throw std::invalid_argument(
                            "dynamic intervals overlap for queue " + std::to_string(i));
                if (a.intervals.empty()) a.intervals.push_back({1, kForever});
            }
        }

        metrics_.traj_stride = 1;
        if (spec_.horizon >= 1'000'000)
            metrics_.traj_stride = params_ ? params_->epoch_len : 1024;
    }

    int64_t now() const { return t_; }
    const MetricsSeries& metrics() const { return metrics_; }
    MetricsSeries take_metrics() {
        metrics_.final_lengths.assign(n_ ? static_cast<size_t>(n_) : 0, 0);
        for (int i = 0; i < n_; ++i)
            metrics_.final_lengths[static_cast<size_t>(i)] =
                agents_[static_cast<size_t>(i)].length;
        return std::move(metrics_);
    }

    const DamPolicy* dam_policy(int queue) const {
        return dynamic_cast<const DamPolicy*>(agents_[static_cast<size_t>(queue)].policy.get());
    }
    DamPolicy* dam_policy(int queue) {
        return dynamic_cast<DamPolicy*>(agents_[static_cast<size_t>(queue)].policy.get());
    }

    void run_to(int64_t t_end) {
        while (t_ <= t_end && t_ <= spec_.horizon) step();
    }

    void step() {
        const int64_t t = t_;
        const SystemConfig& cfg = spec_.config;

        // Departures first, then joins; a replaced queue starts empty with a
        // fresh policy and no learning memory.
        for (int i = 0; i < n_; ++i) {
            auto& a = agents_[static_cast<size_t>(i)];
            if (a.active && t > a.intervals[a.cursor].second) {
                a.active = false;
                a.length = 0;
                a.policy.reset();
                ++a.cursor;
            }
            if (!a.active && a.cursor < a.intervals.size() &&
                a.intervals[a.cursor].first == t) {
                a.active = true;
                a.length = 0;
                a.last_served = false;
                a.join_slot = t;
                a.policy = make_policy(i, t, a.incarnation++);
            }
        }

        // Metrics see Q(t): lengths at the start of the slot, departures
        // already removed, this slot's arrivals not yet counted.
        double weighted = 0.0;
        double total = 0.0;
        for (int i = 0; i < n_; ++i) {
            const auto& a = agents_[static_cast<size_t>(i)];
            if (!a.active) continue;
            weighted += cfg.arrival_rate_at(i, t) * static_cast<double>(a.length);
            total += static_cast<double>(a.length);
        }
        metrics_.weighted_running_sum += weighted;
        metrics_.total_running_sum += total;
        metrics_.slots = t;
        if (spec_.record_series) {
            metrics_.weighted_sum.push_back(weighted);
            metrics_.total_queue.push_back(total);
            if ((t - 1) % metrics_.traj_stride == 0 || t == spec_.horizon) {
                std::vector<uint64_t> row(static_cast<size_t>(n_), 0);
                for (int i = 0; i < n_; ++i)
                    if (agents_[static_cast<size_t>(i)].active)
                        row[static_cast<size_t>(i)] = agents_[static_cast<size_t>(i)].length;
                metrics_.traj_slots.push_back(t);
                metrics_.trajectories.push_back(std::move(row));
            }
        }

        std::vector<uint8_t>& arrivals = arrivals_;
        arrivals.assign(static_cast<size_t>(n_), 0);
        for (int i = 0; i < n_; ++i)
            arrivals[static_cast<size_t>(i)] =
                world_.bernoulli(cfg.arrival_rate_at(i, t)) ? 1 : 0;

        // One request per active agent.
        std::vector<Request>& requests = requests_;
        std::vector<AgentView>& views = views_;
        requests.assign(static_cast<size_t>(n_), Request{});
        views.assign(static_cast<size_t>(n_), AgentView{});
        if (is_centralized(spec_.policy.kind)) {
            maxweight_requests(requests);
        } else {
            for (int i = 0; i < n_; ++i) {
                auto& a = agents_[static_cast<size_t>(i)];
                requests[static_cast<size_t>(i)] = {i, kNone, 0.0};
                if (!a.active) continue;
                views[static_cast<size_t>(i)] = {a.length, t, t - a.join_slot + 1,
                                                 a.last_served};
                requests[static_cast<size_t>(i)] = a.policy->act(views[static_cast<size_t>(i)]);
                requests[static_cast<size_t>(i)].agent = i;
            }
        }

        // Highest bid wins each server.
        std::vector<int>& selected = selected_;
        std::vector<double>& best_bid = best_bid_;
        selected.assign(static_cast<size_t>(k_), kNone);
        best_bid.assign(static_cast<size_t>(k_), 0.0);
        for (const Request& r : requests) {
            if (r.is_null()) continue;
            size_t j = static_cast<size_t>(r.target);
            if (selected[j] == kNone || r.bid > best_bid[j] ||
                (r.bid == best_bid[j] && r.agent < selected[j])) {
                selected[j] = r.agent;
                best_bid[j] = r.bid;
            }
        }
        check_bid_dominance(requests);

        // Service: one Bernoulli draw per server; in forced mode every
        // selected request with a positive rate succeeds.
        std::vector<uint8_t>& served = served_;
        served.assign(static_cast<size_t>(n_), 0);
        for (int j = 0; j < k_; ++j) {
            int i = selected[static_cast<size_t>(j)];
            if (spec_.service_mode == ServiceMode::forced_success) {
                if (i != kNone &&
                    cfg.service_rates[static_cast<size_t>(i)][static_cast<size_t>(j)] > 0.0)
                    served[static_cast<size_t>(i)] = 1;
            } else {
                if (sample_service(i, j, cfg, world_)) served[static_cast<size_t>(i)] = 1;
            }
        }

        if (params_ && spec_.epoch_diagnostics) track_epoch(t, requests, selected);

        // Agents learn only their own outcome.
        if (!is_centralized(spec_.policy.kind)) {
            for (int i = 0; i < n_; ++i) {
                auto& a = agents_[static_cast<size_t>(i)];
                if (!a.active) continue;
                a.policy->observe(views[static_cast<size_t>(i)],
                                  served[static_cast<size_t>(i)] != 0);
            }
        }

        if (hooks_.on_slot) {
            std::vector<uint64_t> lengths(static_cast<size_t>(n_), 0);
            std::vector<uint8_t> active(static_cast<size_t>(n_), 0);
            for (int i = 0; i < n_; ++i) {
                lengths[static_cast<size_t>(i)] = agents_[static_cast<size_t>(i)].length;
                active[static_cast<size_t>(i)] = agents_[static_cast<size_t>(i)].active;
            }
            hooks_.on_slot(SlotTrace{t, lengths, arrivals, requests, selected, served, active});
        }

        for (int i = 0; i < n_; ++i) {
            auto& a = agents_[static_cast<size_t>(i)];
            if (!a.active) continue;
            a.length = advance_queue(a.length, arrivals[static_cast<size_t>(i)] != 0,
                                     served[static_cast<size_t>(i)] != 0);
            a.last_served = served[static_cast<size_t>(i)] != 0;
        }
        ++t_;
    }

    const std::optional<EpochParams>& epoch_params() const { return params_; }

private:
    struct AgentSlot {
        bool active = false;
        uint64_t length = 0;
        bool last_served = false;
        int64_t join_slot = 1;
        uint64_t incarnation = 0;
        size_t cursor = 0;
        std::vector<std::pair<int64_t, int64_t>> intervals;
        std::unique_ptr<AgentPolicy> policy;
    };

    std::unique_ptr<AgentPolicy> make_policy(int queue, int64_t join_slot,
                                             uint64_t incarnation) {
        const SystemConfig& cfg = spec_.config;
        RngStream stream = derive_stream(spec_.master_seed, StreamPurpose::agent,
                                         static_cast<uint64_t>(queue), incarnation);
        switch (spec_.policy.kind) {
            case PolicyKind::dam_k:
                return std::make_unique<DamPolicy>(queue, k_, *params_,
                                                   DamPolicy::Learning::known_rates, stream,
                                                   cfg.service_rates[static_cast<size_t>(queue)]);
            case PolicyKind::dam_fe:
            case PolicyKind::dyn_dam_fe:
                return std::make_unique<DamPolicy>(
                    queue, k_, *params_, DamPolicy::Learning::forced_exploration, stream,
                    std::vector<double>{}, spec_.policy.gamma, spec_.policy.harvest_commit,
                    spec_.policy.kind == PolicyKind::dyn_dam_fe, join_slot, cfg.rate_floor);
            case PolicyKind::dam_ucb:
            case PolicyKind::dyn_dam_ucb:
                return std::make_unique<DamPolicy>(
                    queue, k_, *params_, DamPolicy::Learning::adaptive_ucb, stream,
                    std::vector<double>{}, spec_.policy.gamma, true,
                    spec_.policy.kind == PolicyKind::dyn_dam_ucb, join_slot, cfg.rate_floor);
            case PolicyKind::fixed:
                return std::make_unique<FixedPolicy>(queue, spec_.policy.fixed_server);
            case PolicyKind::random:
                return std::make_unique<UniformRandomPolicy>(queue, k_, stream);
            case PolicyKind::maxweight:
                return nullptr;  // handled centrally
        }
        return nullptr;
    }

    void maxweight_requests(std::vector<Request>& requests) {
        const SystemConfig& cfg = spec_.config;
        WeightMatrix w(static_cast<size_t>(n_), std::vector<double>(static_cast<size_t>(k_)));
        for (int i = 0; i < n_; ++i) {
            const auto& a = agents_[static_cast<size_t>(i)];
            double q = a.active ? static_cast<double>(a.length) : 0.0;
            for (int j = 0; j < k_; ++j)
                w[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    q * cfg.service_rates[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
        MatchResult res = max_weight_matching(w);
        for (int i = 0; i < n_; ++i) {
            int j = res.matching.assignment[static_cast<size_t>(i)];
            requests[static_cast<size_t>(i)] =
                {i, j, j == kNone ? 0.0 : w[static_cast<size_t>(i)][static_cast<size_t>(j)]};
        }
    }

    void check_bid_dominance(const std::vector<Request>& requests) {
        if (!params_) return;
        std::vector<double>& min_explore = min_explore_;
        std::vector<double>& max_exploit = max_exploit_;
        min_explore.assign(static_cast<size_t>(k_), std::numeric_limits<double>::infinity());
        max_exploit.assign(static_cast<size_t>(k_), -1.0);
        for (const Request& r : requests) {
            if (r.is_null()) continue;
            const auto& a = agents_[static_cast<size_t>(r.agent)];
            if (!a.active || !a.policy) continue;
            size_t j = static_cast<size_t>(r.target);
            if (a.policy->exploring())
                min_explore[j] = std::min(min_explore[j], r.bid);
            else
                max_exploit[j] = std::max(max_exploit[j], r.bid);
        }
        for (int j = 0; j < k_; ++j) {
            size_t sj = static_cast<size_t>(j);
            if (max_exploit[sj] >= 0.0 && std::isfinite(min_explore[sj]) &&
                max_exploit[sj] >= min_explore[sj])
                ++metrics_.dominance_violations;
        }
    }

    void track_epoch(int64_t t, const std::vector<Request>& requests,
                     const std::vector<int>& selected) {
        const int64_t t0 = params_->epoch_start(t);
        if (t == t0) {
            epoch_q0_.assign(static_cast<size_t>(n_), 0);
            epoch_explorers_ = 0;
            for (int i = 0; i < n_; ++i) {
                const auto& a = agents_[static_cast<size_t>(i)];
                if (!a.active) continue;
                epoch_q0_[static_cast<size_t>(i)] = a.length;
                if (a.policy && a.policy->exploring()) ++epoch_explorers_;
            }
            epoch_profile_.assign(static_cast<size_t>(n_), {kNone, 0.0});
            epoch_profile_valid_ = false;
            epoch_last_change_ = t0;
        }
        if (t - t0 < params_->converge_len) {
            bool changed = !epoch_profile_valid_;
            for (int i = 0; i < n_; ++i) {
                const Request& r = requests[static_cast<size_t>(i)];
                auto& slot = epoch_profile_[static_cast<size_t>(i)];
                if (slot.first != r.target || slot.second != r.bid) {
                    changed = true;
                    slot = {r.target, r.bid};
                }
            }
            epoch_profile_valid_ = true;
            if (changed) epoch_last_change_ = t;
        }
        if (t - t0 == params_->converge_len - 1) {
            const SystemConfig& cfg = spec_.config;
            std::vector<int> load(static_cast<size_t>(k_), 0);
            for (const Request& r : requests)
                if (!r.is_null()) ++load[static_cast<size_t>(r.target)];
            bool converged = true;
            for (int c : load)
                if (c > 1) converged = false;

            double matched = 0.0;
            for (int j = 0; j < k_; ++j) {
                int i = selected[static_cast<size_t>(j)];
                if (i == kNone) continue;
                matched += cfg.service_rates[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                           static_cast<double>(epoch_q0_[static_cast<size_t>(i)]);
            }
            WeightMatrix w(static_cast<size_t>(n_),
                           std::vector<double>(static_cast<size_t>(k_)));
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < k_; ++j)
                    w[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                        static_cast<double>(epoch_q0_[static_cast<size_t>(i)]) *
                        cfg.service_rates[static_cast<size_t>(i)][static_cast<size_t>(j)];
            double opt = max_weight_matching(w).value;

            EpochRecord rec;
            rec.epoch = params_->epoch_index(t);
            rec.converge_offset = converged ? epoch_last_change_ - t0 : -1;
            rec.matched_weight = matched;
            rec.optimum = opt;
            rec.weight_ratio = opt > 0.0 ? matched / opt : 1.0;
            rec.n_explorers = epoch_explorers_;
            metrics_.epochs.push_back(rec);
        }
    }

    SimulationSpec spec_;
    RunHooks hooks_;
    int n_ = 0;
    int k_ = 0;
    RngStream world_;
    std::optional<EpochParams> params_;
    std::vector<AgentSlot> agents_;
    MetricsSeries metrics_;
    int64_t t_ = 1;

    // per-slot scratch, reused across steps
    std::vector<uint8_t> arrivals_;
    std::vector<Request> requests_;
    std::vector<AgentView> views_;
    std::vector<int> selected_;
    std::vector<double> best_bid_;
    std::vector<uint8_t> served_;
    std::vector<double> min_explore_;
    std::vector<double> max_exploit_;

    // epoch diagnostics scratch
    std::vector<uint64_t> epoch_q0_;
    std::vector<std::pair<int, double>> epoch_profile_;
    bool epoch_profile_valid_ = false;
    int64_t epoch_last_change_ = 1;
    int epoch_explorers_ = 0;
};

inline MetricsSeries run(const SimulationSpec& spec, RunHooks hooks = {}) {
    Simulation sim(spec, std::move(hooks));
    sim.run_to(spec.horizon);
    return sim.take_metrics();
}

/// Pointwise mean and standard error over seeds master_seed .. master_seed+n-1.
struct ReplicationSummary {
    int n_seeds = 0;
    int64_t horizon = 0;
    std::vector<double> weighted_mean, weighted_stderr;
    std::vector<double> total_mean, total_stderr;
    std::vector<double> per_seed_time_avg_weighted;
    double time_avg_weighted_mean = 0.0;
    double time_avg_weighted_stderr = 0.0;
};

inline ReplicationSummary run_replications(SimulationSpec spec, int n_seeds) {
    if (n_seeds < 1) throw std::invalid_argument("need at least one seed");
    spec.record_series = true;
    ReplicationSummary out;
    out.n_seeds = n_seeds;
    out.horizon = spec.horizon;
    size_t t_len = static_cast<size_t>(spec.horizon);
    std::vector<double> wsum(t_len, 0.0), wsq(t_len, 0.0), tsum(t_len, 0.0), tsq(t_len, 0.0);

    const uint64_t base = spec.master_seed;
    for (int s = 0; s < n_seeds; ++s) {
        spec.master_seed = base + static_cast<uint64_t>(s);
        MetricsSeries m = run(spec);
        for (size_t t = 0; t < t_len; ++t) {
            wsum[t] += m.weighted_sum[t];
            wsq[t] += m.weighted_sum[t] * m.weighted_sum[t];
            tsum[t] += m.total_queue[t];
            tsq[t] += m.total_queue[t] * m.total_queue[t];
        }
        out.per_seed_time_avg_weighted.push_back(m.time_avg_weighted());
    }

    auto finalize = [&](const std::vector<double>& sum, const std::vector<double>& sq,
                        std::vector<double>& mean, std::vector<double>& se) {
        mean.resize(t_len);
        se.resize(t_len);
        for (size_t t = 0; t < t_len; ++t) {
            double mu = sum[t] / n_seeds;
            mean[t] = mu;
            if (n_seeds > 1) {
                double var = std::max(0.0, (sq[t] - n_seeds * mu * mu) / (n_seeds - 1));
                se[t] = std::sqrt(var / n_seeds);
            } else {
                se[t] = 0.0;
            }
        }
    };
    finalize(wsum, wsq, out.weighted_mean, out.weighted_stderr);
    finalize(tsum, tsq, out.total_mean, out.total_stderr);

    double m = 0.0;
    for (double v : out.per_seed_time_avg_weighted) m += v;
    m /= n_seeds;
    out.time_avg_weighted_mean = m;
    if (n_seeds > 1) {
        double var = 0.0;
        for (double v : out.per_seed_time_avg_weighted) var += (v - m) * (v - m);
        out.time_avg_weighted_stderr = std::sqrt(var / (n_seeds - 1) / n_seeds);
    }
    return out;
}

} // namespace qsim
