#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qsim {

enum class ParamMode { theoretical, tuned };

/// Epoch structure constants shared by every auction-based policy:
/// a checking period (slots an agent keeps requesting an unresponsive server
/// before concluding it lost it), the length of the converge phase, and the
/// full epoch length.
struct EpochParams {
    int64_t check_period = 0;  // T_c
    int64_t converge_len = 0;  // T_s
    int64_t epoch_len = 0;     // L
    double xi = 0.0;
    double price_step = 0.0;  // multiplier on the weight for one price raise
    ParamMode mode = ParamMode::theoretical;

    int64_t epoch_start(int64_t slot) const {
        return ((slot - 1) / epoch_len) * epoch_len + 1;
    }
    int64_t epoch_index(int64_t slot) const { return (slot - 1) / epoch_len + 1; }
    bool in_converge_window(int64_t slot) const {
        return slot - epoch_start(slot) < converge_len;
    }
};

namespace detail {

inline void check_param_inputs(double eps, double delta, int n_queues, int n_servers) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("slackness must lie in (0,1]");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("rate floor must lie in (0,1)");
    if (n_queues < 1 || n_servers < 1)
        throw std::invalid_argument("need at least one queue and one server");
}

inline int64_t checking_period(double eps, double delta, int n_queues, int n_servers,
                               double* xi_out) {
    const double log_n = std::log(static_cast<double>(n_queues));
    const double k = static_cast<double>(n_servers);
    const double xi = eps * eps / (3200.0 * k * k * (log_n + k));
    const double lg = std::log(1.0 - delta);  // negative
    const double t1 = 3.0;
    const double t2 = (2.0 / lg) * (2.0 / lg);
    const double t3 = 2.0 * std::log(xi) / lg;
    if (xi_out) *xi_out = xi;
    return static_cast<int64_t>(std::ceil(std::max(t1, std::max(t2, t3))));
}

} // namespace detail

/// The parameter choices backing the stability guarantees. Conservative by
/// design: converge windows long enough that convergence holds with high
/// probability on every epoch.
inline EpochParams compute_theoretical_params(double eps, double delta, int n_queues,
                                              int n_servers) {
    detail::check_param_inputs(eps, delta, n_queues, n_servers);
    EpochParams p;
    p.mode = ParamMode::theoretical;
    p.check_period = detail::checking_period(eps, delta, n_queues, n_servers, &p.xi);
    const double log_n = std::log(static_cast<double>(n_queues));
    const double k = static_cast<double>(n_servers);
    p.converge_len = static_cast<int64_t>(
        std::ceil(99.0 * k * static_cast<double>(p.check_period) * (log_n + k) / eps));
    p.epoch_len = static_cast<int64_t>(
        std::ceil((32.0 / eps + 1.0) * static_cast<double>(p.converge_len)));
    p.price_step = eps / 16.0;
    return p;
}

/// Constants sized for experiments rather than proofs: the converge window
/// shrinks by ~400x and price raises are far more aggressive (0.5*eps of the
/// weight instead of eps/16).
inline EpochParams compute_tuned_params(double eps, double delta, int n_queues,
                                        int n_servers) {
    detail::check_param_inputs(eps, delta, n_queues, n_servers);
    EpochParams p;
    p.mode = ParamMode::tuned;
    p.check_period = detail::checking_period(eps, delta, n_queues, n_servers, &p.xi);
    const double log_n = std::log(static_cast<double>(n_queues));
    const double k = static_cast<double>(n_servers);
    p.converge_len = static_cast<int64_t>(
        std::ceil(k * static_cast<double>(p.check_period) * (log_n + k) / (4.0 * eps)));
    p.epoch_len =
        static_cast<int64_t>(std::ceil(2.0 * static_cast<double>(p.converge_len) / eps));
    p.price_step = 0.5 * eps;
    return p;
}

inline EpochParams compute_params(ParamMode mode, double eps, double delta, int n_queues,
                                  int n_servers) {
    return mode == ParamMode::tuned
               ? compute_tuned_params(eps, delta, n_queues, n_servers)
               : compute_theoretical_params(eps, delta, n_queues, n_servers);
}

} // namespace qsim
