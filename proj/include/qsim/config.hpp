#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsim {

/// Immutable problem instance: N queues, K servers, Bernoulli arrival rates,
/// per-pair Bernoulli service rates, a known traffic slackness and a known
/// floor on the non-zero service rates.
///
/// Arrival rates may cycle through phases (a fixed schedule of rate vectors
/// switched every `arrival_phase_len` slots); everything else is constant.
struct SystemConfig {
    int n_queues = 0;
    int n_servers = 0;
    std::vector<double> arrival_rates;               // phase 0
    std::vector<std::vector<double>> service_rates;  // N x K
    double slackness = 0.0;                          // epsilon
    double rate_floor = 0.0;                         // delta

    std::vector<std::vector<double>> arrival_phases; // optional, defaults to {arrival_rates}
    int64_t arrival_phase_len = 0;                   // slots per phase, 0 = static

    double arrival_rate_at(int queue, int64_t slot) const {
        if (arrival_phases.size() <= 1 || arrival_phase_len <= 0)
            return arrival_rates[static_cast<size_t>(queue)];
        size_t phase = static_cast<size_t>(((slot - 1) / arrival_phase_len) %
                                           static_cast<int64_t>(arrival_phases.size()));
        return arrival_phases[phase][static_cast<size_t>(queue)];
    }
};

/// Collect every invariant violation instead of failing on the first one.
/// An empty result means the instance is valid.
inline std::vector<std::string> validate_config(const SystemConfig& cfg) {
    std::vector<std::string> bad;
    auto fail = [&](const std::string& s) { bad.push_back(s); };

    if (cfg.n_queues < 1) fail("n_queues must be >= 1");
    if (cfg.n_servers < 1) fail("n_servers must be >= 1");
    if (!(cfg.slackness > 0.0 && cfg.slackness <= 1.0))
        fail("slackness out of range (0,1]");
    if (!(cfg.rate_floor > 0.0 && cfg.rate_floor <= 1.0))
        fail("rate_floor out of range (0,1]");

    const size_t n = static_cast<size_t>(cfg.n_queues);
    const size_t k = static_cast<size_t>(cfg.n_servers);
    if (cfg.arrival_rates.size() != n) fail("arrival_rates length != n_queues");
    if (cfg.service_rates.size() != n) fail("service_rates rows != n_queues");

    auto check_lambda = [&](const std::vector<double>& lam, const std::string& tag) {
        for (size_t i = 0; i < lam.size() && i < n; ++i)
            if (!(lam[i] >= 0.0 && lam[i] <= 1.0))
                fail("arrival rate out of range [0,1] at queue " + std::to_string(i) + tag);
    };
    check_lambda(cfg.arrival_rates, "");
    for (size_t p = 0; p < cfg.arrival_phases.size(); ++p) {
        if (cfg.arrival_phases[p].size() != n)
            fail("arrival phase " + std::to_string(p) + " length != n_queues");
        else
            check_lambda(cfg.arrival_phases[p], " (phase " + std::to_string(p) + ")");
    }

    for (size_t i = 0; i < cfg.service_rates.size() && i < n; ++i) {
        if (cfg.service_rates[i].size() != k) {
            fail("service_rates row " + std::to_string(i) + " length != n_servers");
            continue;
        }
        for (size_t j = 0; j < k; ++j) {
            double mu = cfg.service_rates[i][j];
            if (!(mu >= 0.0 && mu <= 1.0))
                fail("service rate out of range [0,1] at (" + std::to_string(i) + "," +
                     std::to_string(j) + ")");
            else if (mu > 0.0 && mu < cfg.rate_floor - 1e-12)
                fail("service rate below floor at (" + std::to_string(i) + "," +
                     std::to_string(j) + ")");
        }
    }
    return bad;
}

namespace detail {

inline std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        if (tok == ",") continue;
        // tolerate commas between numbers
        for (char& c : tok)
            if (c == ',') c = ' ';
        std::istringstream ts(tok);
        double v;
        while (ts >> v) out.push_back(v);
    }
    return out;
}

inline std::vector<std::vector<double>> parse_rows(const std::string& s) {
    std::vector<std::vector<double>> rows;
    std::string part;
    std::istringstream is(s);
    while (std::getline(is, part, ';')) {
        auto nums = parse_number_list(part);
        if (!nums.empty()) rows.push_back(std::move(nums));
    }
    return rows;
}

} // namespace detail

/// Extra key/value pairs found in a config file that are not part of the
/// instance itself (policy selection, horizon, seed, ...). The CLI merges
/// them with command-line flags; flags win.
using ConfigExtras = std::map<std::string, std::string>;

/// Parse the documented key = value format. Lines starting with '#' are
/// comments. Recognized instance keys: n_queues, n_servers, slackness,
/// rate_floor, arrival_rates, service_rates (rows separated by ';'),
/// arrival_phases, arrival_phase_len. Anything else is returned in extras.
inline SystemConfig parse_config(std::istream& in, ConfigExtras* extras = nullptr) {
    SystemConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) continue;

        if (key == "n_queues") cfg.n_queues = std::stoi(val);
        else if (key == "n_servers") cfg.n_servers = std::stoi(val);
        else if (key == "slackness") cfg.slackness = std::stod(val);
        else if (key == "rate_floor") cfg.rate_floor = std::stod(val);
        else if (key == "arrival_rates") cfg.arrival_rates = detail::parse_number_list(val);
        else if (key == "service_rates") cfg.service_rates = detail::parse_rows(val);
        else if (key == "arrival_phases") cfg.arrival_phases = detail::parse_rows(val);
        else if (key == "arrival_phase_len") cfg.arrival_phase_len = std::stoll(val);
        else if (extras) (*extras)[key] = val;
    }
    if (cfg.arrival_rates.empty() && !cfg.arrival_phases.empty())
        cfg.arrival_rates = cfg.arrival_phases.front();
    return cfg;
}

inline SystemConfig load_config(const std::string& path, ConfigExtras* extras = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(in, extras);
}

inline void save_config(const SystemConfig& cfg, std::ostream& out) {
    out << "n_queues = " << cfg.n_queues << "\n";
    out << "n_servers = " << cfg.n_servers << "\n";
    out << "slackness = " << cfg.slackness << "\n";
    out << "rate_floor = " << cfg.rate_floor << "\n";
    out << "arrival_rates =";
    for (double v : cfg.arrival_rates) out << ' ' << v;
    out << "\n";
    out << "service_rates = ";
    for (size_t i = 0; i < cfg.service_rates.size(); ++i) {
        if (i) out << " ; ";
        for (size_t j = 0; j < cfg.service_rates[i].size(); ++j) {
            if (j) out << ' ';
            out << cfg.service_rates[i][j];
        }
    }
    out << "\n";
    if (cfg.arrival_phases.size() > 1) {
        out << "arrival_phases = ";
        for (size_t p = 0; p < cfg.arrival_phases.size(); ++p) {
            if (p) out << " ; ";
            for (size_t i = 0; i < cfg.arrival_phases[p].size(); ++i) {
                if (i) out << ' ';
                out << cfg.arrival_phases[p][i];
            }
        }
        out << "\n";
        out << "arrival_phase_len = " << cfg.arrival_phase_len << "\n";
    }
}

} // namespace qsim
