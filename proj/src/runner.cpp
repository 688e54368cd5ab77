#include "mcac/runner.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <variant>

#include "mcac/checkpoint.hpp"
#include "mcac/errors.hpp"

namespace mcac {

namespace {

using harness::format_real;

void write_metadata(std::ostream& os, const harness::Metadata& meta) {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

std::ofstream open_output(const RunConfig& config, const std::string& name, std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw Error("cli", "cannot create output directory '" + config.out_dir + "'");
    path = (std::filesystem::path(config.out_dir) / name).string();
    std::ofstream os(path);
    if (!os) throw Error("cli", "cannot open '" + path + "' for writing");
    return os;
}

template <typename Agent>
void check_resumed(const Agent& agent, const RunConfig& config) {
    if (agent.config().n_channels != config.spec.pattern.n_channels) {
        throw ConfigError("checkpoint has " + std::to_string(agent.config().n_channels) +
                          " channels but channels=" +
                          std::to_string(config.spec.pattern.n_channels));
    }
}

}  // namespace

harness::MetricSeries run_training(const RunConfig& config, std::ostream& log) {
    const auto& spec = config.spec;
    if (spec.agent != harness::AgentKind::AC && spec.agent != harness::AgentKind::DQN) {
        throw ConfigError("agent: train needs ac or dqn, got " + harness::to_string(spec.agent));
    }
    const int n = spec.pattern.n_channels;
    Environment env(spec.pattern, derive_seed(spec.seed_base, 11));
    harness::MetricSeries series(spec.window_len);
    write_metadata(log, config.metadata());

    if (spec.agent == harness::AgentKind::AC) {
        AcAgentConfig c = spec.settings.ac;
        c.n_channels = n;
        c.init_seed = derive_seed(spec.seed_base, 12);
        c.action_seed = derive_seed(spec.seed_base, 13);
        AcAgent agent(c);
        if (!config.load_checkpoint.empty()) {
            auto loaded = load_checkpoint(config.load_checkpoint);
            if (!std::holds_alternative<AcAgent>(loaded)) {
                throw ConfigError("load_checkpoint: holds a dqn agent but agent=ac");
            }
            agent = std::get<AcAgent>(std::move(loaded));
            check_resumed(agent, config);
        }
        log << "t,action,reward,delta,actor_lr,critic_lr\n";
        for (std::int64_t i = 0; i < spec.slots; ++i) {
            const auto s = agent.train_step(env);
            series.push(s.reward);
            log << s.t << ',' << s.action << ',' << s.reward << ',' << format_real(s.delta) << ','
                << format_real(s.actor_lr) << ',' << format_real(s.critic_lr) << '\n';
        }
        if (!config.checkpoint.empty()) save_checkpoint(config.checkpoint, agent);
    } else {
        DqnConfig c = spec.settings.dqn;
        c.n_channels = n;
        c.init_seed = derive_seed(spec.seed_base, 12);
        c.action_seed = derive_seed(spec.seed_base, 13);
        c.replay_seed = derive_seed(spec.seed_base, 14);
        DqnAgent agent(c);
        if (!config.load_checkpoint.empty()) {
            auto loaded = load_checkpoint(config.load_checkpoint);
            if (!std::holds_alternative<DqnAgent>(loaded)) {
                throw ConfigError("load_checkpoint: holds an ac agent but agent=dqn");
            }
            agent = std::get<DqnAgent>(std::move(loaded));
            check_resumed(agent, config);
        }
        log << "t,action,reward,epsilon,loss\n";
        for (std::int64_t i = 0; i < spec.slots; ++i) {
            const auto s = agent.train_step(env);
            series.push(s.reward);
            log << s.t << ',' << s.action << ',' << s.reward << ',' << format_real(s.epsilon) << ',';
            if (s.loss) log << format_real(*s.loss);
            log << '\n';
        }
        if (!config.checkpoint.empty()) save_checkpoint(config.checkpoint, agent);
    }
    return series;
}

std::vector<std::string> run_scenario(const RunConfig& config, std::ostream& status) {
    const auto& spec = config.spec;
    const auto meta = config.metadata();
    if (config.seed_from_entropy) {
        status << "seed drawn from entropy: " << spec.seed_base << '\n';
    }
    std::string path;
    switch (spec.scenario) {
        case harness::Scenario::RoundRobinSweep: {
            const auto rows = harness::run_round_robin_sweep(spec);
            auto os = open_output(config, "round_robin_sweep.csv", path);
            harness::write_sweep_csv(os, meta, rows);
            std::map<std::pair<int, double>, std::pair<double, int>> cells;
            for (const auto& r : rows) {
                auto& [sum, count] = cells[{r.n_channels, r.p}];
                sum += r.avg_reward;
                ++count;
            }
            for (const auto& [key, acc] : cells) {
                status << "N=" << key.first << " p=" << format_real(key.second)
                       << " mean=" << format_real(acc.first / acc.second)
                       << " genie=" << format_real(genie_average_reward(key.second)) << '\n';
            }
            break;
        }
        case harness::Scenario::ArbitraryOrders: {
            const auto rows = harness::run_arbitrary_orders(spec);
            auto os = open_output(config, "arbitrary_orders.csv", path);
            harness::write_orders_csv(os, meta, rows);
            for (const auto& r : rows) {
                status << "order_seed=" << r.order_seed << " avg=" << format_real(r.avg_reward) << '\n';
            }
            break;
        }
        case harness::Scenario::TimeVarying: {
            const auto result = harness::run_time_varying(spec);
            auto os = open_output(config, "time_varying.csv", path);
            harness::write_time_varying_csv(os, meta, result);
            status << "windows=" << result.windows.size()
                   << " first_changed_window=" << result.first_changed_window << '\n';
            break;
        }
        case harness::Scenario::Runtime: {
            const auto rows = harness::measure_runtime(spec);
            auto os = open_output(config, "runtime.csv", path);
            harness::write_runtime_csv(os, meta, rows);
            for (const auto& r : rows) {
                status << "N=" << r.n_channels << ' ' << harness::to_string(r.agent)
                       << " sec/decision=" << format_real(r.sec_per_decision);
                if (r.agent == harness::AgentKind::AC) {
                    status << " reduced=" << format_real(r.percent_reduced) << '%';
                }
                status << '\n';
            }
            break;
        }
        case harness::Scenario::Train: {
            auto os = open_output(config, "train_log.csv", path);
            const auto series = run_training(config, os);
            status << "slots=" << series.size()
                   << " tail_avg=" << format_real(series.tail_average(spec.eval_fraction)) << '\n';
            if (!config.checkpoint.empty()) status << "checkpoint: " << config.checkpoint << '\n';
            break;
        }
    }
    status << "wrote " << path << '\n';
    return {path};
}

}  // namespace mcac
