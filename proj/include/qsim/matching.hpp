#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsim/model.hpp"

namespace qsim {

/// Nonnegative queue-by-server weights, row-major.
using WeightMatrix = std::vector<std::vector<double>>;

/// Partial assignment of queues to servers: assignment[i] is a server id or
/// kNone; no two queues share a server.
struct Matching {
    std::vector<int> assignment;

    bool is_valid(int n_servers) const {
        std::vector<char> used(static_cast<size_t>(n_servers), 0);
        for (int j : assignment) {
            if (j == kNone) continue;
            if (j < 0 || j >= n_servers || used[static_cast<size_t>(j)]) return false;
            used[static_cast<size_t>(j)] = 1;
        }
        return true;
    }
};

struct MatchResult {
    Matching matching;
    double value = 0.0;
};

/// Server prices and queue payoffs certifying approximate optimality of a
/// matching.
struct DualCertificate {
    std::vector<double> prices;   // per server
    std::vector<double> payoffs;  // per queue
};

inline double matching_weight(const WeightMatrix& w, const Matching& m) {
    double v = 0.0;
    for (size_t i = 0; i < m.assignment.size(); ++i)
        if (m.assignment[i] != kNone)
            v += w[i][static_cast<size_t>(m.assignment[i])];
    return v;
}

namespace detail {

// Min-cost assignment of every row to a distinct column (rows <= cols),
// potentials/shortest-augmenting-path form, O(rows^2 * cols).
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& a) {
    const size_t n = a.size();
    const size_t m = a.empty() ? 0 : a.front().size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<size_t> p(m + 1, 0), way(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        p[0] = i;
        size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, kNone);
    for (size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    return row_to_col;
}

} // namespace detail

/// Exact maximum-weight partial matching via the Hungarian method. The
/// smaller side is treated as the row set, so rectangular instances cost
/// O(min(N,K)^2 * max(N,K)). Zero-weight pairs are left unmatched.
inline MatchResult max_weight_matching(const WeightMatrix& w) {
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    MatchResult out;
    out.matching.assignment.assign(n, kNone);
    if (n == 0 || k == 0) return out;
    for (const auto& row : w) {
        if (row.size() != k) throw std::invalid_argument("ragged weight matrix");
        for (double x : row)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw std::invalid_argument("weights must be finite and nonnegative");
    }

    const bool transpose = n > k;
    const size_t rows = transpose ? k : n;
    const size_t cols = transpose ? n : k;
    std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c)
            cost[r][c] = -(transpose ? w[c][r] : w[r][c]);

    std::vector<int> row_to_col = detail::min_cost_assignment(cost);
    for (size_t r = 0; r < rows; ++r) {
        int c = row_to_col[r];
        if (c == kNone) continue;
        size_t qi = transpose ? static_cast<size_t>(c) : r;
        size_t sj = transpose ? r : static_cast<size_t>(c);
        if (w[qi][sj] > 0.0) {
            out.matching.assignment[qi] = static_cast<int>(sj);
            out.value += w[qi][sj];
        }
    }
    return out;
}

/// Exhaustive search over all partial injective assignments. Test oracle;
/// guarded to min(N,K) <= 8 rows on the enumerated side.
inline MatchResult brute_force_matching(const WeightMatrix& w) {
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    MatchResult out;
    out.matching.assignment.assign(n, kNone);
    if (n == 0 || k == 0) return out;
    if (std::min(n, k) > 8)
        throw std::invalid_argument("brute_force_matching: min(N,K) must be <= 8");
    if (std::max(n, k) > 63)
        throw std::invalid_argument("brute_force_matching: max(N,K) must be <= 63");

    const bool transpose = n > k;
    const size_t rows = transpose ? k : n;
    const size_t cols = transpose ? n : k;
    auto at = [&](size_t r, size_t c) { return transpose ? w[c][r] : w[r][c]; };

    std::vector<int> cur(rows, kNone), best(rows, kNone);
    double best_val = 0.0;
    auto rec = [&](auto&& self, size_t r, uint64_t used, double val) -> void {
        if (r == rows) {
            if (val > best_val) {
                best_val = val;
                best = cur;
            }
            return;
        }
        cur[r] = kNone;
        self(self, r + 1, used, val);
        for (size_t c = 0; c < cols; ++c) {
            if (used & (uint64_t{1} << c)) continue;
            cur[r] = static_cast<int>(c);
            self(self, r + 1, used | (uint64_t{1} << c), val + at(r, c));
        }
        cur[r] = kNone;
    };
    rec(rec, 0, 0, 0.0);

    for (size_t r = 0; r < rows; ++r) {
        int c = best[r];
        if (c == kNone) continue;
        size_t qi = transpose ? static_cast<size_t>(c) : r;
        size_t sj = transpose ? r : static_cast<size_t>(c);
        if (w[qi][sj] > 0.0) {
            out.matching.assignment[qi] = static_cast<int>(sj);
            out.value += w[qi][sj];
        }
    }
    return out;
}

/// Verify the three certificate conditions:
///   (i)  unmatched servers have price zero, all prices nonnegative;
///   (ii) each payoff equals the best achievable at the quoted prices;
///   (iii) unmatched queues have payoff zero, matched queues have positive
///         weight and payoff + price within (1+alpha) of their weight.
/// Returns a list of human-readable violations; empty means ok.
inline std::vector<std::string> check_complementary_slackness(
    const Matching& m, const DualCertificate& cert, const WeightMatrix& w, double alpha,
    double tol = 1e-9) {
    std::vector<std::string> bad;
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    if (m.assignment.size() != n || cert.payoffs.size() != n || cert.prices.size() != k) {
        bad.push_back("dimension mismatch");
        return bad;
    }

    std::vector<char> server_matched(k, 0);
    for (size_t i = 0; i < n; ++i) {
        int j = m.assignment[i];
        if (j == kNone) continue;
        if (j < 0 || static_cast<size_t>(j) >= k || server_matched[static_cast<size_t>(j)]) {
            bad.push_back("assignment is not a matching at queue " + std::to_string(i));
            return bad;
        }
        server_matched[static_cast<size_t>(j)] = 1;
    }

    for (size_t j = 0; j < k; ++j) {
        if (cert.prices[j] < -tol)
            bad.push_back("negative price at server " + std::to_string(j));
        if (!server_matched[j] && std::abs(cert.prices[j]) > tol)
            bad.push_back("unmatched server " + std::to_string(j) + " has nonzero price");
    }

    for (size_t i = 0; i < n; ++i) {
        double best = 0.0;
        for (size_t j = 0; j < k; ++j) best = std::max(best, w[i][j] - cert.prices[j]);
        if (std::abs(cert.payoffs[i] - best) > tol)
            bad.push_back("payoff of queue " + std::to_string(i) +
                          " is not the best price-adjusted weight");
        int sj = m.assignment[i];
        if (sj == kNone) {
            if (cert.payoffs[i] > tol)
                bad.push_back("unmatched queue " + std::to_string(i) + " has positive payoff");
        } else {
            double wij = w[i][static_cast<size_t>(sj)];
            if (!(wij > tol))
                bad.push_back("queue " + std::to_string(i) + " matched at nonpositive weight");
            if (cert.payoffs[i] + cert.prices[static_cast<size_t>(sj)] >
                (1.0 + alpha) * wij + tol)
                bad.push_back("payoff+price exceeds (1+alpha) weight at queue " +
                              std::to_string(i));
        }
    }
    return bad;
}

struct ApproxReport {
    double matched_weight = 0.0;
    double optimum = 0.0;
    double ratio = 1.0;
    bool bound_holds = false;
};

/// A certificate at level alpha implies the matching captures at least a
/// (1-alpha) fraction of the optimum; this evaluates that bound against an
/// independently computed optimum.
inline ApproxReport slackness_implies_approx(const Matching& m, const DualCertificate&,
                                             const WeightMatrix& w, double alpha,
                                             double tol = 1e-9) {
    ApproxReport rep;
    rep.matched_weight = matching_weight(w, m);
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    rep.optimum = (std::min(n, k) <= 8 && std::max(n, k) <= 63)
                      ? brute_force_matching(w).value
                      : max_weight_matching(w).value;
    rep.ratio = rep.optimum > 0.0 ? rep.matched_weight / rep.optimum : 1.0;
    rep.bound_holds = rep.matched_weight + tol >= (1.0 - alpha) * rep.optimum;
    return rep;
}

/// Synchronous ascending auction with one shared price per server. Each
/// round every unmatched queue with positive payoff bids its best server at
/// the current price plus step_fraction times its weight there; each server
/// keeps the highest bid. Terminates with a matching whose certificate
/// satisfies the conditions above at alpha = step_fraction.
inline std::pair<MatchResult, DualCertificate> centralized_auction(const WeightMatrix& w,
                                                                   double step_fraction) {
    if (!(step_fraction > 0.0 && step_fraction < 1.0))
        throw std::invalid_argument("step_fraction must lie in (0,1)");
    const size_t n = w.size();
    const size_t k = n == 0 ? 0 : w.front().size();
    std::vector<double> price(k, 0.0);
    std::vector<int> owner(k, kNone);
    std::vector<int> assigned(n, kNone);

    struct Bid {
        size_t queue;
        double amount;
    };
    uint64_t accepted = 0;
    const uint64_t cap = 10'000'000;
    for (;;) {
        std::vector<std::vector<Bid>> bids(k);
        bool any = false;
        for (size_t i = 0; i < n; ++i) {
            if (assigned[i] != kNone) continue;
            size_t best_j = 0;
            double best_payoff = -1.0;
            for (size_t j = 0; j < k; ++j) {
                double payoff = w[i][j] - price[j];
                if (payoff > best_payoff) {
                    best_payoff = payoff;
                    best_j = j;
                }
            }
            if (best_payoff > 0.0) {
                bids[best_j].push_back({i, price[best_j] + step_fraction * w[i][best_j]});
                any = true;
            }
        }
        if (!any) break;
        for (size_t j = 0; j < k; ++j) {
            if (bids[j].empty()) continue;
            const Bid* win = &bids[j].front();
            for (const Bid& b : bids[j])
                if (b.amount > win->amount ||
                    (b.amount == win->amount && b.queue < win->queue))
                    win = &b;
            if (owner[j] != kNone) assigned[static_cast<size_t>(owner[j])] = kNone;
            owner[j] = static_cast<int>(win->queue);
            assigned[win->queue] = static_cast<int>(j);
            price[j] = win->amount;
            if (++accepted > cap)
                throw std::runtime_error("centralized_auction failed to terminate");
        }
    }

    MatchResult res;
    res.matching.assignment = assigned;
    res.value = matching_weight(w, res.matching);
    DualCertificate cert;
    cert.prices = price;
    cert.payoffs.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double best = 0.0;
        for (size_t j = 0; j < k; ++j) best = std::max(best, w[i][j] - price[j]);
        cert.payoffs[i] = best;
    }
    return {res, cert};
}

} // namespace qsim
