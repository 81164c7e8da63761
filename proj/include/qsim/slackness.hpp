#pragma once

#include <vector>

#include "qsim/config.hpp"
#include "qsim/simplex.hpp"

namespace qsim {

namespace detail {

/// Feasibility of serving rates (1+eps)*lambda with a doubly substochastic
/// time-sharing plan phi: rows sum to <= 1, columns sum to <= 1, and each
/// queue's effective rate sum_j mu_{i,j} phi_{i,j} covers its target.
inline bool slackness_feasible_for(const std::vector<double>& lambda,
                                   const std::vector<std::vector<double>>& mu,
                                   double eps) {
    const size_t n = lambda.size();
    const size_t k = mu.empty() ? 0 : mu.front().size();
    const size_t nv = n * k;
    std::vector<LinearConstraint> rows;
    rows.reserve(2 * n + k);

    for (size_t i = 0; i < n; ++i) {
        LinearConstraint c;
        c.coeff.assign(nv, 0.0);
        for (size_t j = 0; j < k; ++j) c.coeff[i * k + j] = 1.0;
        c.sense = RowSense::le;
        c.rhs = 1.0;
        rows.push_back(std::move(c));
    }
    for (size_t j = 0; j < k; ++j) {
        LinearConstraint c;
        c.coeff.assign(nv, 0.0);
        for (size_t i = 0; i < n; ++i) c.coeff[i * k + j] = 1.0;
        c.sense = RowSense::le;
        c.rhs = 1.0;
        rows.push_back(std::move(c));
    }
    for (size_t i = 0; i < n; ++i) {
        LinearConstraint c;
        c.coeff.assign(nv, 0.0);
        for (size_t j = 0; j < k; ++j) c.coeff[i * k + j] = mu[i][j];
        c.sense = RowSense::ge;
        c.rhs = (1.0 + eps) * lambda[i];
        rows.push_back(std::move(c));
    }
    return lp_feasible(std::move(rows), nv);
}

} // namespace detail

/// Whether the instance has traffic slackness eps. With phased arrival rates
/// the margin must hold in every phase.
inline bool check_slackness(const SystemConfig& cfg, double eps) {
    if (cfg.arrival_phases.empty())
        return detail::slackness_feasible_for(cfg.arrival_rates, cfg.service_rates, eps);
    for (const auto& lambda : cfg.arrival_phases)
        if (!detail::slackness_feasible_for(lambda, cfg.service_rates, eps))
            return false;
    return true;
}

/// Largest slackness the instance supports, by bisection. Useful for the
/// catalog and CLI diagnostics; accuracy ~1e-6 is plenty there.
inline double max_feasible_slackness(const SystemConfig& cfg, double hi = 4.0) {
    if (!check_slackness(cfg, 0.0)) return -1.0;
    if (check_slackness(cfg, hi)) return hi;
    double lo = 0.0;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        (check_slackness(cfg, mid) ? lo : hi) = mid;
    }
    return lo;
}

} // namespace qsim
