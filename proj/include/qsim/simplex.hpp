#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qsim {

// Dense phase-1 simplex, just enough to decide feasibility of small linear
// systems with nonnegative variables. Instances in this project stay below a
// few hundred variables, so a tableau with Bland's rule is plenty.

enum class RowSense { le, ge, eq };

struct LinearConstraint {
    std::vector<double> coeff;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
};

/// True iff { x >= 0 : constraints hold } is nonempty. Minimizes the sum of
/// artificial variables; feasible when that optimum is (numerically) zero.
inline bool lp_feasible(std::vector<LinearConstraint> rows, size_t n_vars,
                        double tol = 1e-7) {
    const size_t m = rows.size();
    // Canonicalize to nonnegative right-hand sides.
    for (auto& r : rows) {
        if (r.coeff.size() != n_vars)
            throw std::invalid_argument("lp_feasible: coefficient length mismatch");
        if (r.rhs < 0.0) {
            for (double& c : r.coeff) c = -c;
            r.rhs = -r.rhs;
            if (r.sense == RowSense::le) r.sense = RowSense::ge;
            else if (r.sense == RowSense::ge) r.sense = RowSense::le;
        }
    }

    size_t n_slack = 0;
    for (const auto& r : rows)
        if (r.sense != RowSense::eq) ++n_slack;

    // Columns: structural vars | slack/surplus | artificials.
    // A ">=" row gets a surplus plus an artificial; "<=" rows use their slack
    // as the starting basis and need no artificial.
    size_t n_art = 0;
    for (const auto& r : rows)
        if (r.sense != RowSense::le) ++n_art;

    const size_t total = n_vars + n_slack + n_art;
    std::vector<std::vector<double>> tab(m + 1, std::vector<double>(total + 1, 0.0));
    std::vector<size_t> basis(m);

    size_t slack_at = n_vars;
    size_t art_at = n_vars + n_slack;
    for (size_t r = 0; r < m; ++r) {
        for (size_t c = 0; c < n_vars; ++c) tab[r][c] = rows[r].coeff[c];
        tab[r][total] = rows[r].rhs;
        switch (rows[r].sense) {
            case RowSense::le:
                tab[r][slack_at] = 1.0;
                basis[r] = slack_at++;
                break;
            case RowSense::ge:
                tab[r][slack_at++] = -1.0;
                tab[r][art_at] = 1.0;
                basis[r] = art_at++;
                break;
            case RowSense::eq:
                tab[r][art_at] = 1.0;
                basis[r] = art_at++;
                break;
        }
    }

    // Objective row: minimize the sum of artificials. Reduced cost of column
    // j is c_j minus the sum of that column over the artificial-basis rows;
    // artificial columns carry cost 1 and start with reduced cost 0.
    auto& obj = tab[m];
    for (size_t r = 0; r < m; ++r) {
        if (basis[r] >= n_vars + n_slack) {
            for (size_t c = 0; c <= total; ++c) obj[c] -= tab[r][c];
        }
    }
    for (size_t c = n_vars + n_slack; c < total; ++c) obj[c] += 1.0;

    const size_t max_pivots = 200 * (m + total) + 1000;
    for (size_t iter = 0; iter < max_pivots; ++iter) {
        // Bland's rule: first column with a negative reduced cost.
        size_t pivot_col = total;
        for (size_t c = 0; c < total; ++c) {
            if (obj[c] < -1e-10) {
                pivot_col = c;
                break;
            }
        }
        if (pivot_col == total) break;  // optimal

        size_t pivot_row = m;
        double best_ratio = 0.0;
        for (size_t r = 0; r < m; ++r) {
            if (tab[r][pivot_col] > 1e-10) {
                double ratio = tab[r][total] / tab[r][pivot_col];
                if (pivot_row == m || ratio < best_ratio - 1e-12 ||
                    (std::abs(ratio - best_ratio) <= 1e-12 && basis[r] < basis[pivot_row])) {
                    pivot_row = r;
                    best_ratio = ratio;
                }
            }
        }
        if (pivot_row == m)
            return false;  // unbounded phase-1 cannot happen; treat as infeasible

        double pv = tab[pivot_row][pivot_col];
        for (size_t c = 0; c <= total; ++c) tab[pivot_row][c] /= pv;
        for (size_t r = 0; r <= m; ++r) {
            if (r == pivot_row) continue;
            double f = tab[r][pivot_col];
            if (f == 0.0) continue;
            for (size_t c = 0; c <= total; ++c) tab[r][c] -= f * tab[pivot_row][c];
        }
        basis[pivot_row] = pivot_col;
    }

    return -obj[total] <= tol;  // objective value = -obj[rhs]
}

} // namespace qsim
