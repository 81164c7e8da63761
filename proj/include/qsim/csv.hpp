#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qsim/simulator.hpp"

namespace qsim {

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace detail

/// Per-slot series: slot, weighted_sum, total_queue, then one column per
/// queue. Trajectory cells are blank on slots the stride skipped.
inline void write_slots_csv(std::ostream& out, const MetricsSeries& m, int n_queues) {
    out << "slot,weighted_sum,total_queue";
    for (int i = 0; i < n_queues; ++i) out << ",q" << i;
    out << "\n";
    size_t traj_row = 0;
    for (size_t t = 0; t < m.weighted_sum.size(); ++t) {
        int64_t slot = static_cast<int64_t>(t) + 1;
        out << slot << ',' << detail::fmt(m.weighted_sum[t]) << ','
            << detail::fmt(m.total_queue[t]);
        bool have_traj =
            traj_row < m.traj_slots.size() && m.traj_slots[traj_row] == slot;
        for (int i = 0; i < n_queues; ++i) {
            out << ',';
            if (have_traj) out << m.trajectories[traj_row][static_cast<size_t>(i)];
        }
        if (have_traj) ++traj_row;
        out << "\n";
    }
}

/// Per-epoch convergence diagnostics.
inline void write_epochs_csv(std::ostream& out, const MetricsSeries& m) {
    out << "epoch,converge_slot,weight_ratio,n_explorers,matched_weight,optimum\n";
    for (const EpochRecord& r : m.epochs) {
        out << r.epoch << ',' << r.converge_offset << ',' << detail::fmt(r.weight_ratio)
            << ',' << r.n_explorers << ',' << detail::fmt(r.matched_weight) << ','
            << detail::fmt(r.optimum) << "\n";
    }
}

/// Pointwise mean/stderr across replications.
inline void write_aggregate_csv(std::ostream& out, const ReplicationSummary& s) {
    out << "slot,weighted_mean,weighted_stderr,total_mean,total_stderr\n";
    for (size_t t = 0; t < s.weighted_mean.size(); ++t) {
        out << (t + 1) << ',' << detail::fmt(s.weighted_mean[t]) << ','
            << detail::fmt(s.weighted_stderr[t]) << ',' << detail::fmt(s.total_mean[t])
            << ',' << detail::fmt(s.total_stderr[t]) << "\n";
    }
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

} // namespace qsim
