// Command-line front end: benchmark catalog, experiment runner, refresh-
// probability sweeps, parameter tables, and a matching/certificate debugger.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qsim/catalog.hpp"
#include "qsim/csv.hpp"
#include "qsim/matching.hpp"
#include "qsim/simulator.hpp"
#include "qsim/slackness.hpp"

namespace fs = std::filesystem;
using namespace qsim;

namespace {

uint64_t default_seed() {
    if (const char* env = std::getenv("QSIM_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            std::cerr << "warning: ignoring unparsable QSIM_SEED\n";
        }
    }
    return 1;
}

struct LoadedInstance {
    std::string tag;
    SystemConfig config;
    ConfigExtras extras;
    int64_t default_horizon = 200'000;
    std::optional<double> default_refresh_p;
};

LoadedInstance load_instance(const std::string& instance, const std::string& config_path) {
    LoadedInstance out;
    if (!instance.empty() && !config_path.empty())
        throw CLI::ValidationError("use either --instance or --config, not both");
    if (!instance.empty()) {
        const auto* e = find_instance(instance);
        if (!e) throw CLI::ValidationError("unknown instance '" + instance + "'");
        out.tag = e->name;
        out.config = e->config;
        out.default_horizon = e->default_horizon;
        out.default_refresh_p = e->default_refresh_p;
    } else if (!config_path.empty()) {
        out.config = load_config(config_path, &out.extras);
        out.tag = fs::path(config_path).stem().string();
    } else {
        throw CLI::ValidationError("need --instance or --config");
    }
    return out;
}

ParamMode parse_mode(const std::string& s) {
    if (s == "tuned") return ParamMode::tuned;
    if (s == "theoretical") return ParamMode::theoretical;
    throw CLI::ValidationError("mode must be 'tuned' or 'theoretical'");
}

ServiceMode parse_service_mode(const std::string& s) {
    if (s == "stochastic") return ServiceMode::stochastic;
    if (s == "forced") return ServiceMode::forced_success;
    throw CLI::ValidationError("service-mode must be 'stochastic' or 'forced'");
}

void require_valid(const SystemConfig& cfg) {
    auto violations = validate_config(cfg);
    if (!violations.empty()) {
        std::cerr << "config is invalid:\n";
        for (const auto& v : violations) std::cerr << "  - " << v << "\n";
        std::exit(2);
    }
    if (!check_slackness(cfg, cfg.slackness)) {
        std::cerr << "refusing to run: the instance does not have traffic slackness "
                  << cfg.slackness << " (max feasible ~" << max_feasible_slackness(cfg)
                  << ")\n";
        std::exit(2);
    }
}

std::string slots_csv(const MetricsSeries& m, int n_queues) {
    std::ostringstream s;
    write_slots_csv(s, m, n_queues);
    return s.str();
}

std::vector<DynamicInterval> parse_dynamic_schedule(const std::string& text) {
    std::vector<DynamicInterval> sched;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ';')) {
        std::istringstream ps(part);
        DynamicInterval iv;
        std::string t_end;
        if (!(ps >> iv.queue >> iv.t_start >> t_end)) continue;
        iv.t_end = (t_end == "inf" || t_end == "-") ? kForever : std::stoll(t_end);
        sched.push_back(iv);
    }
    return sched;
}

struct RunFlags {
    bool policy_given = false, horizon_given = false, seeds_given = false;
    bool seed_given = false, service_given = false, mode_given = false;
    bool gamma_given = false, harvest_given = false, fixed_given = false;
};

int cmd_run(const std::string& instance, const std::string& config_path,
            std::vector<std::string> policy_names, int64_t horizon, int seeds,
            uint64_t seed, std::string service_mode, std::string mode, double gamma,
            bool no_harvest, int fixed_server, std::optional<double> refresh_p,
            const std::string& out_dir, const RunFlags& given) {
    LoadedInstance inst = load_instance(instance, config_path);

    // Config-file keys provide defaults; command-line flags override them.
    auto extra = [&](const char* key) -> const std::string* {
        auto it = inst.extras.find(key);
        return it == inst.extras.end() ? nullptr : &it->second;
    };
    if (!given.policy_given) {
        if (const auto* v = extra("policy")) policy_names = {*v};
    }
    if (policy_names.empty()) policy_names.push_back("dam-ucb");
    if (!given.horizon_given) {
        const auto* v = extra("horizon");
        horizon = v ? std::stoll(*v) : inst.default_horizon;
    }
    if (!given.seeds_given)
        if (const auto* v = extra("seeds")) seeds = std::stoi(*v);
    if (!given.seed_given)
        if (const auto* v = extra("seed")) seed = std::stoull(*v);
    if (!given.service_given)
        if (const auto* v = extra("service_mode")) service_mode = *v;
    if (!given.mode_given)
        if (const auto* v = extra("mode")) mode = *v;
    if (!given.gamma_given)
        if (const auto* v = extra("gamma")) gamma = std::stod(*v);
    if (!given.harvest_given)
        if (const auto* v = extra("harvest_commit")) no_harvest = (*v == "0" || *v == "false");
    if (!given.fixed_given)
        if (const auto* v = extra("fixed_server")) fixed_server = std::stoi(*v);
    if (!refresh_p)
        if (const auto* v = extra("refresh_probability")) refresh_p = std::stod(*v);
    std::vector<DynamicInterval> schedule;
    if (const auto* v = extra("dynamic_schedule")) schedule = parse_dynamic_schedule(*v);

    require_valid(inst.config);
    fs::create_directories(out_dir);

    std::printf("instance %s: N=%d K=%d eps=%g delta=%g horizon=%lld seeds=%d seed=%llu\n",
                inst.tag.c_str(), inst.config.n_queues, inst.config.n_servers,
                inst.config.slackness, inst.config.rate_floor,
                static_cast<long long>(horizon), seeds,
                static_cast<unsigned long long>(seed));
    std::printf("%-12s %18s %14s\n", "policy", "time-avg weighted", "stderr");

    for (const auto& name : policy_names) {
        auto kind = policy_kind_from_string(name);
        if (!kind) {
            std::cerr << "unknown policy '" << name << "'\n";
            return 2;
        }
        SimulationSpec spec;
        spec.config = inst.config;
        spec.policy.kind = *kind;
        spec.policy.mode = parse_mode(mode);
        spec.policy.gamma = gamma;
        spec.policy.harvest_commit = !no_harvest;
        spec.policy.fixed_server = fixed_server;
        spec.horizon = horizon;
        spec.master_seed = seed;
        spec.service_mode = parse_service_mode(service_mode);
        spec.dynamic_schedule = schedule;
        bool dynamic_kind =
            *kind == PolicyKind::dyn_dam_fe || *kind == PolicyKind::dyn_dam_ucb;
        if (dynamic_kind && schedule.empty()) {
            double p = refresh_p ? *refresh_p : inst.default_refresh_p.value_or(0.0);
            spec.refresh_probability = p;
        }

        MetricsSeries first = run(spec);
        for (const auto& w : first.warnings) std::cerr << "warning: " << w << "\n";

        std::string base = out_dir + "/" + inst.tag + "_" + name;
        write_file(base + "_slots.csv", slots_csv(first, inst.config.n_queues));
        if (!first.epochs.empty()) {
            std::ostringstream es;
            write_epochs_csv(es, first);
            write_file(base + "_epochs.csv", es.str());
        }

        double mean = first.time_avg_weighted(), se = 0.0;
        if (seeds > 1) {
            auto summary = run_replications(spec, seeds);
            std::ostringstream as;
            write_aggregate_csv(as, summary);
            write_file(base + "_aggregate.csv", as.str());
            mean = summary.time_avg_weighted_mean;
            se = summary.time_avg_weighted_stderr;
        }
        std::printf("%-12s %18.6f %14.6f\n", name.c_str(), mean, se);
    }
    std::printf("CSV files written to %s/\n", out_dir.c_str());
    return 0;
}

int cmd_sweep_refresh(std::vector<double> p_list, std::vector<std::string> policy_names,
                      int64_t horizon, int seeds, uint64_t seed,
                      const std::string& out_dir) {
    if (p_list.empty())
        for (int e = -19; e <= 0; ++e) p_list.push_back(std::pow(2.0, e));
    if (policy_names.empty()) policy_names = {"dyn-dam-fe", "dyn-dam-ucb"};

    const auto* f6 = find_instance("f6");
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "p,policy,time_avg_total\n";
    std::printf("%-12s %-12s %16s\n", "p", "policy", "time-avg total");
    for (double p : p_list) {
        for (const auto& name : policy_names) {
            auto kind = policy_kind_from_string(name);
            if (!kind) {
                std::cerr << "unknown policy '" << name << "'\n";
                return 2;
            }
            double acc = 0.0;
            for (int s = 0; s < seeds; ++s) {
                SimulationSpec spec;
                spec.config = f6->config;
                spec.policy.kind = *kind;
                spec.horizon = horizon;
                spec.master_seed = seed + static_cast<uint64_t>(s);
                spec.refresh_probability = p;
                spec.record_series = false;
                spec.epoch_diagnostics = false;
                Simulation sim(spec);
                sim.run_to(horizon);
                acc += sim.metrics().total_running_sum / static_cast<double>(horizon);
            }
            double avg = acc / seeds;
            char pbuf[32];
            std::snprintf(pbuf, sizeof(pbuf), "%.10g", p);
            csv << pbuf << ',' << name << ',' << avg << "\n";
            std::printf("%-12.6g %-12s %16.4f\n", p, name.c_str(), avg);
        }
    }
    write_file(out_dir + "/refresh_sweep.csv", csv.str());
    std::printf("CSV written to %s/refresh_sweep.csv\n", out_dir.c_str());
    return 0;
}

void print_params_row(const char* label, const EpochParams& p) {
    std::printf("%-14s %12lld %14lld %14lld %12.4e %12.5f\n", label,
                static_cast<long long>(p.check_period),
                static_cast<long long>(p.converge_len),
                static_cast<long long>(p.epoch_len), p.xi, p.price_step);
}

int cmd_params(double eps, double delta, int n, int k, const std::string& mode) {
    std::printf("epoch parameters for eps=%g delta=%g N=%d K=%d\n", eps, delta, n, k);
    std::printf("%-14s %12s %14s %14s %12s %12s\n", "mode", "check_period",
                "converge_len", "epoch_len", "xi", "price_step");
    if (mode.empty() || mode == "theoretical")
        print_params_row("theoretical", compute_theoretical_params(eps, delta, n, k));
    if (mode.empty() || mode == "tuned")
        print_params_row("tuned", compute_tuned_params(eps, delta, n, k));
    return 0;
}

int cmd_solve(const std::string& path, double step) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 2;
    }
    WeightMatrix w;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) w.push_back(std::move(row));
    }
    if (w.empty()) {
        std::cerr << "no weights found in " << path << "\n";
        return 2;
    }

    auto exact = max_weight_matching(w);
    std::printf("exact max-weight value: %.9g\n", exact.value);
    for (size_t i = 0; i < w.size(); ++i) {
        int j = exact.matching.assignment[i];
        if (j == kNone)
            std::printf("  queue %zu -> (unmatched)\n", i);
        else
            std::printf("  queue %zu -> server %d   (w=%.9g)\n", i, j,
                        w[i][static_cast<size_t>(j)]);
    }

    auto [res, cert] = centralized_auction(w, step);
    std::printf("auction (step %.5g) value: %.9g\n", step, res.value);
    for (size_t j = 0; j < cert.prices.size(); ++j)
        std::printf("  price[%zu]  = %.9g\n", j, cert.prices[j]);
    for (size_t i = 0; i < cert.payoffs.size(); ++i)
        std::printf("  payoff[%zu] = %.9g\n", i, cert.payoffs[i]);
    auto violations = check_complementary_slackness(res.matching, cert, w, step);
    if (violations.empty()) {
        auto rep = slackness_implies_approx(res.matching, cert, w, step);
        std::printf("certificate: ok (ratio %.6f >= %.6f)\n", rep.ratio, 1.0 - step);
    } else {
        std::printf("certificate: VIOLATED\n");
        for (const auto& v : violations) std::printf("  - %s\n", v.c_str());
        return 1;
    }
    return 0;
}

int cmd_catalog() {
    std::printf("%-5s %5s %5s %9s %9s %10s  %s\n", "name", "N", "K", "eps", "delta",
                "horizon", "description");
    for (const auto& e : catalog()) {
        bool ok = validate_config(e.config).empty() &&
                  check_slackness(e.config, e.config.slackness);
        std::printf("%-5s %5d %5d %9g %9g %10lld  %s%s\n", e.name.c_str(),
                    e.config.n_queues, e.config.n_servers, e.config.slackness,
                    e.config.rate_floor, static_cast<long long>(e.default_horizon),
                    e.description.c_str(), ok ? "" : "  [INVALID]");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized bipartite queueing simulator"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "simulate an instance and emit CSV metrics");
    std::string instance, config_path, service_mode = "stochastic", mode = "tuned";
    std::string out_dir = "out";
    std::vector<std::string> policies;
    int64_t horizon = 0;
    int seeds = 1;
    uint64_t seed = default_seed();
    double gamma = 0.8;
    bool no_harvest = false;
    int fixed_server = 0;
    std::optional<double> refresh_p;
    run_cmd->add_option("--instance", instance, "catalog instance name (f1..f6)");
    run_cmd->add_option("--config", config_path, "instance config file");
    run_cmd->add_option("--policy", policies,
                        "dam-k|dam-fe|dam-ucb|dyn-dam-fe|dyn-dam-ucb|maxweight|fixed|random");
    run_cmd->add_option("--horizon", horizon, "slots to simulate");
    run_cmd->add_option("--seeds", seeds, "number of replications");
    run_cmd->add_option("--seed", seed, "master seed (env QSIM_SEED as fallback)");
    run_cmd->add_option("--service-mode", service_mode, "stochastic|forced");
    run_cmd->add_option("--mode", mode, "parameter mode: tuned|theoretical");
    run_cmd->add_option("--gamma", gamma, "forced-exploration decay exponent");
    run_cmd->add_flag("--no-harvest", no_harvest,
                      "disable commit-window sample harvesting for dam-fe");
    run_cmd->add_option("--fixed-server", fixed_server, "server for the fixed baseline");
    double refresh_val = -1.0;
    run_cmd->add_option("--refresh-p", refresh_val,
                        "refresh probability for dynamic policies");
    run_cmd->add_option("--out-dir", out_dir, "output directory for CSV files");
    run_cmd->callback([&, run_cmd] {
        if (refresh_val >= 0.0) refresh_p = refresh_val;
        RunFlags given;
        given.policy_given = run_cmd->count("--policy") > 0;
        given.horizon_given = run_cmd->count("--horizon") > 0;
        given.seeds_given = run_cmd->count("--seeds") > 0;
        given.seed_given = run_cmd->count("--seed") > 0;
        given.service_given = run_cmd->count("--service-mode") > 0;
        given.mode_given = run_cmd->count("--mode") > 0;
        given.gamma_given = run_cmd->count("--gamma") > 0;
        given.harvest_given = run_cmd->count("--no-harvest") > 0;
        given.fixed_given = run_cmd->count("--fixed-server") > 0;
        std::exit(cmd_run(instance, config_path, policies, horizon, seeds, seed,
                          service_mode, mode, gamma, no_harvest, fixed_server, refresh_p,
                          out_dir, given));
    });

    // sweep-refresh
    auto* sweep_cmd = app.add_subcommand(
        "sweep-refresh", "sweep the refresh probability on the two-queue instance");
    std::vector<double> p_list;
    std::vector<std::string> sweep_policies;
    int64_t sweep_horizon = 100'000;
    int sweep_seeds = 5;
    uint64_t sweep_seed = default_seed();
    std::string sweep_out = "out";
    sweep_cmd->add_option("--p", p_list, "refresh probabilities (default 2^-19..2^0)");
    sweep_cmd->add_option("--policy", sweep_policies,
                          "policies to sweep (default dyn-dam-fe dyn-dam-ucb)");
    sweep_cmd->add_option("--horizon", sweep_horizon, "slots per run");
    sweep_cmd->add_option("--seeds", sweep_seeds, "replications per point");
    sweep_cmd->add_option("--seed", sweep_seed, "master seed");
    sweep_cmd->add_option("--out-dir", sweep_out, "output directory");
    sweep_cmd->callback([&] {
        std::exit(cmd_sweep_refresh(p_list, sweep_policies, sweep_horizon, sweep_seeds,
                                    sweep_seed, sweep_out));
    });

    // params
    auto* params_cmd = app.add_subcommand("params", "print the epoch parameter table");
    double eps = 0.25, delta = 0.1875;
    int pn = 4, pk = 4;
    std::string params_mode;
    params_cmd->add_option("--epsilon", eps, "traffic slackness")->required();
    params_cmd->add_option("--delta", delta, "rate floor")->required();
    params_cmd->add_option("--queues", pn, "number of queues")->required();
    params_cmd->add_option("--servers", pk, "number of servers")->required();
    params_cmd->add_option("--mode", params_mode, "tuned|theoretical (default both)");
    params_cmd->callback([&] { std::exit(cmd_params(eps, delta, pn, pk, params_mode)); });

    // solve
    auto* solve_cmd =
        app.add_subcommand("solve", "solve a weight matrix and print the certificate");
    std::string matrix_path;
    double step = 1.0 / 16.0;
    solve_cmd->add_option("matrix", matrix_path, "file with one weight row per line")
        ->required();
    solve_cmd->add_option("--step", step, "auction price step fraction");
    solve_cmd->callback([&] { std::exit(cmd_solve(matrix_path, step)); });

    // catalog
    auto* cat_cmd = app.add_subcommand("catalog", "list the benchmark instances");
    cat_cmd->callback([&] { std::exit(cmd_catalog()); });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
