#include "mcac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mcac/errors.hpp"

namespace mcac::harness {

namespace {

// Runs fn(0..count-1) on a pool of worker threads. Each index is an
// independent cell; the first exception is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_metadata(std::ostream& os, const Metadata& meta) {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::RoundRobinSweep: return "round_robin_sweep";
        case Scenario::ArbitraryOrders: return "arbitrary_orders";
        case Scenario::TimeVarying: return "time_varying";
        case Scenario::Runtime: return "runtime";
        case Scenario::Train: return "train";
    }
    return "?";
}

Scenario parse_scenario(const std::string& name) {
    for (auto s : {Scenario::RoundRobinSweep, Scenario::ArbitraryOrders, Scenario::TimeVarying,
                   Scenario::Runtime, Scenario::Train}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown scenario '" + name +
                      "' (expected round_robin_sweep, arbitrary_orders, time_varying, runtime "
                      "or train)");
}

std::string to_string(AgentKind k) {
    switch (k) {
        case AgentKind::AC: return "ac";
        case AgentKind::DQN: return "dqn";
        case AgentKind::Genie: return "genie";
        case AgentKind::Random: return "random";
    }
    return "?";
}

AgentKind parse_agent(const std::string& name) {
    for (auto k : {AgentKind::AC, AgentKind::DQN, AgentKind::Genie, AgentKind::Random}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown agent '" + name + "' (expected ac, dqn, genie or random)");
}

MetricSeries::MetricSeries(int window_len) : window_len_(window_len) {
    if (window_len_ < 1) throw ConfigError("window_len must be >= 1", "harness");
}

double MetricSeries::cumulative() const {
    if (rewards_.empty()) return 0.0;
    std::int64_t sum = 0;
    for (auto r : rewards_) sum += r;
    return static_cast<double>(sum) / static_cast<double>(rewards_.size());
}

double MetricSeries::tail_average(double fraction) const {
    if (rewards_.empty()) return 0.0;
    const auto n = static_cast<std::size_t>(
        std::ceil(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(rewards_.size())));
    const std::size_t count = std::max<std::size_t>(n, 1);
    std::int64_t sum = 0;
    for (std::size_t i = rewards_.size() - count; i < rewards_.size(); ++i) sum += rewards_[i];
    return static_cast<double>(sum) / static_cast<double>(count);
}

std::vector<double> MetricSeries::windowed() const {
    const auto w = static_cast<std::size_t>(window_len_);
    std::vector<double> out;
    for (std::size_t start = 0; start + w <= rewards_.size(); start += w) {
        std::int64_t sum = 0;
        for (std::size_t i = start; i < start + w; ++i) sum += rewards_[i];
        out.push_back(static_cast<double>(sum) / static_cast<double>(w));
    }
    return out;
}

int GenieAgent::step(Environment& env) {
    const int reward = env.sense(genie_channel(env.chain(), env.previous_index()));
    env.advance();
    return reward;
}

int RandomAgent::step(Environment& env) {
    const auto n = static_cast<std::uint64_t>(env.n_channels());
    const int reward = env.sense(static_cast<int>(rng_.below(n)) + 1);
    env.advance();
    return reward;
}

std::unique_ptr<SlotAgent> make_agent(AgentKind kind, const AgentSettings& settings,
                                      int n_channels, std::uint64_t seed) {
    switch (kind) {
        case AgentKind::AC: {
            AcAgentConfig c = settings.ac;
            c.n_channels = n_channels;
            c.init_seed = derive_seed(seed, 12);
            c.action_seed = derive_seed(seed, 13);
            return std::make_unique<AcSlotAgent>(c);
        }
        case AgentKind::DQN: {
            DqnConfig c = settings.dqn;
            c.n_channels = n_channels;
            c.init_seed = derive_seed(seed, 12);
            c.action_seed = derive_seed(seed, 13);
            c.replay_seed = derive_seed(seed, 14);
            return std::make_unique<DqnSlotAgent>(c);
        }
        case AgentKind::Genie: return std::make_unique<GenieAgent>();
        case AgentKind::Random: return std::make_unique<RandomAgent>(derive_seed(seed, 13));
    }
    throw ConfigError("unknown agent kind", "harness");
}

void ExperimentSpec::validate() const {
    if (slots < 1) throw ConfigError("slots must be >= 1", "harness");
    if (n_seeds < 1) throw ConfigError("seeds must be >= 1", "harness");
    if (window_len < 1) throw ConfigError("window_len must be >= 1", "harness");
    if (!(eval_fraction > 0.0 && eval_fraction <= 1.0)) {
        throw ConfigError("eval_fraction must lie in (0,1]", "harness");
    }
    if (pretrain_slots < 0) throw ConfigError("pretrain_slots must be >= 0", "harness");
    if (runtime_steps < 1 || runtime_warmup < 0) {
        throw ConfigError("runtime_steps must be >= 1 and runtime_warmup >= 0", "harness");
    }
    switch (scenario) {
        case Scenario::RoundRobinSweep:
            if (channel_list.empty() || p_list.empty()) {
                throw ConfigError("sweep needs a non-empty channel_list and p_list", "harness");
            }
            if (slots < window_len) throw ConfigError("slots must be >= window_len", "harness");
            break;
        case Scenario::ArbitraryOrders:
            if (order_seeds.empty()) throw ConfigError("need at least one order seed", "harness");
            if (slots < window_len) throw ConfigError("slots must be >= window_len", "harness");
            break;
        case Scenario::TimeVarying:
            if (change_at < 1 || change_at >= slots) {
                throw ConfigError("change_at must lie inside (0, slots)", "harness");
            }
            if (slots < window_len) throw ConfigError("slots must be >= window_len", "harness");
            break;
        case Scenario::Runtime:
            if (channel_list.empty()) throw ConfigError("runtime needs a channel_list", "harness");
            break;
        case Scenario::Train: break;
    }
    for (int n : channel_list) {
        if (n < 2) throw ConfigError("channel counts must be >= 2", "harness");
    }
    for (double p : p_list) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p values must lie in [0,1]", "harness");
    }
}

MetricSeries run_cell(SlotAgent& agent, Environment& env, std::int64_t slots, int window_len,
                      std::int64_t pretrain) {
    for (std::int64_t t = 0; t < pretrain; ++t) agent.step(env);
    MetricSeries series(window_len);
    for (std::int64_t t = 0; t < slots; ++t) series.push(agent.step(env));
    return series;
}

double percent_reduced(double ac_seconds, double dqn_seconds) {
    if (!(dqn_seconds > 0.0)) throw NumericError("DQN time must be positive", "harness");
    return 100.0 * (dqn_seconds - ac_seconds) / dqn_seconds;
}

std::vector<SweepRow> run_round_robin_sweep(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<SweepRow> rows;
    for (int n : spec.channel_list) {
        for (double p : spec.p_list) {
            for (int s = 0; s < spec.n_seeds; ++s) rows.push_back({n, p, cell_seed(spec, s), 0.0});
        }
    }
    parallel_for(rows.size(), spec.threads, [&](std::size_t i) {
        auto& row = rows[i];
        Environment env(make_round_robin(row.n_channels, row.p), derive_seed(row.seed, 11));
        auto agent = make_agent(spec.agent, spec.settings, row.n_channels, row.seed);
        row.avg_reward =
            run_cell(*agent, env, spec.slots, spec.window_len).tail_average(spec.eval_fraction);
    });
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.n_channels, a.p, a.seed) < std::tie(b.n_channels, b.p, b.seed);
    });
    return rows;
}

std::vector<OrderRow> run_arbitrary_orders(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<OrderRow> rows;
    for (auto seed : spec.order_seeds) rows.push_back({seed, 0.0});
    const std::uint64_t agent_seed = cell_seed(spec, 0);
    parallel_for(rows.size(), spec.threads, [&](std::size_t i) {
        auto& row = rows[i];
        const auto chain = make_arbitrary(spec.pattern.n_channels, spec.pattern.p, row.order_seed);
        Environment env(chain, derive_seed(agent_seed, 11));
        auto agent = make_agent(spec.agent, spec.settings, spec.pattern.n_channels, agent_seed);
        row.avg_reward =
            run_cell(*agent, env, spec.slots, spec.window_len).tail_average(spec.eval_fraction);
    });
    std::sort(rows.begin(), rows.end(),
              [](const OrderRow& a, const OrderRow& b) { return a.order_seed < b.order_seed; });
    return rows;
}

TimeVaryingResult run_time_varying(const ExperimentSpec& spec) {
    spec.validate();
    PatternSpec second = spec.pattern;
    second.order_seed = spec.second_order_seed;
    TimeVaryingSchedule schedule;
    schedule.segments = {{0, spec.pattern}, {spec.pretrain_slots + spec.change_at, second}};
    const std::uint64_t seed = cell_seed(spec, 0);
    Environment env(schedule, derive_seed(seed, 11));
    auto agent = make_agent(spec.agent, spec.settings, spec.pattern.n_channels, seed);

    TimeVaryingResult result{
        run_cell(*agent, env, spec.slots, spec.window_len, spec.pretrain_slots), {}, 0};
    const auto windows = result.series.windowed();
    const auto w = static_cast<std::int64_t>(spec.window_len);
    result.first_changed_window = static_cast<std::size_t>((spec.change_at + w - 1) / w);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        result.windows.push_back({i, windows[i], i >= result.first_changed_window});
    }
    return result;
}

std::vector<RuntimeRow> measure_runtime(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<RuntimeRow> rows;
    const std::uint64_t seed = cell_seed(spec, 0);
    for (int n : spec.channel_list) {
        const PatternSpec pattern{PatternKind::RoundRobin, n, 1, 0.9, 1};

        AcAgentConfig ac_config = spec.settings.ac;
        ac_config.n_channels = n;
        ac_config.init_seed = derive_seed(seed, 12);
        ac_config.action_seed = derive_seed(seed, 13);
        AcSlotAgent ac(ac_config);
        DqnConfig dc = spec.settings.dqn;
        dc.n_channels = n;
        dc.init_seed = derive_seed(seed, 12);
        dc.action_seed = derive_seed(seed, 13);
        dc.replay_seed = derive_seed(seed, 14);
        DqnSlotAgent dqn(dc);

        // DQN timing only counts once replay updates are running.
        const auto dqn_warmup = std::max<std::int64_t>(spec.runtime_warmup,
                                                       static_cast<std::int64_t>(dc.warmup));
        auto time_agent = [&](SlotAgent& agent, std::int64_t warmup, auto forward_only) {
            Environment env(pattern, derive_seed(seed, 11));
            for (std::int64_t t = 0; t < warmup; ++t) agent.step(env);
            auto start = std::chrono::steady_clock::now();
            for (std::int64_t t = 0; t < spec.runtime_steps; ++t) agent.step(env);
            const double per_step = seconds_since(start) / static_cast<double>(spec.runtime_steps);
            start = std::chrono::steady_clock::now();
            for (std::int64_t t = 0; t < spec.runtime_steps; ++t) forward_only();
            const double per_forward =
                seconds_since(start) / static_cast<double>(spec.runtime_steps);
            return std::pair{per_step, per_forward};
        };

        const auto [ac_step, ac_fwd] =
            time_agent(ac, spec.runtime_warmup, [&] { return ac.agent().select_action(SelectionMode::Argmax); });
        const auto [dqn_step, dqn_fwd] =
            time_agent(dqn, dqn_warmup, [&] { return dqn.agent().select_action(0.0); });
        const double reduced = percent_reduced(ac_step, dqn_step);
        rows.push_back({n, AgentKind::AC, ac_step, ac_fwd, reduced});
        rows.push_back({n, AgentKind::DQN, dqn_step, dqn_fwd, reduced});
    }
    return rows;
}

MetricSeries run_random_baseline(const PatternSpec& pattern, std::int64_t slots, int window_len,
                                 std::uint64_t seed) {
    Environment env(pattern, derive_seed(seed, 11));
    RandomAgent agent(derive_seed(seed, 13));
    return run_cell(agent, env, slots, window_len);
}

MetricSeries run_genie_baseline(const PatternSpec& pattern, std::int64_t slots, int window_len,
                                std::uint64_t seed) {
    Environment env(pattern, derive_seed(seed, 11));
    GenieAgent agent;
    return run_cell(agent, env, slots, window_len);
}

std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

void write_sweep_csv(std::ostream& os, const Metadata& meta, const std::vector<SweepRow>& rows) {
    write_metadata(os, meta);
    os << "n_channels,p,seed,avg_reward\n";
    for (const auto& r : rows) {
        os << r.n_channels << ',' << format_real(r.p) << ',' << r.seed << ','
           << format_real(r.avg_reward) << '\n';
    }
}

void write_orders_csv(std::ostream& os, const Metadata& meta, const std::vector<OrderRow>& rows) {
    write_metadata(os, meta);
    os << "order_seed,avg_reward\n";
    for (const auto& r : rows) os << r.order_seed << ',' << format_real(r.avg_reward) << '\n';
}

void write_time_varying_csv(std::ostream& os, const Metadata& meta, const TimeVaryingResult& r) {
    write_metadata(os, meta);
    os << "window_index,avg_reward,changed\n";
    for (const auto& w : r.windows) {
        os << w.window_index << ',' << format_real(w.avg_reward) << ',' << (w.changed ? 1 : 0)
           << '\n';
    }
}

void write_runtime_csv(std::ostream& os, const Metadata& meta, const std::vector<RuntimeRow>& rows) {
    write_metadata(os, meta);
    os << "n_channels,agent,sec_per_decision,percent_reduced,forward_sec_per_decision\n";
    for (const auto& r : rows) {
        os << r.n_channels << ',' << to_string(r.agent) << ',' << format_real(r.sec_per_decision)
           << ',' << format_real(r.percent_reduced) << ','
           << format_real(r.forward_sec_per_decision) << '\n';
    }
}

}  // namespace mcac::harness
