#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mcac/agent_ac.hpp"
#include "mcac/agent_dqn.hpp"
#include "mcac/channel_env.hpp"

namespace mcac::harness {

enum class Scenario { RoundRobinSweep, ArbitraryOrders, TimeVarying, Runtime, Train };
enum class AgentKind { AC, DQN, Genie, Random };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& name);
std::string to_string(AgentKind k);
AgentKind parse_agent(const std::string& name);

// Per-slot rewards plus the two summaries every experiment reports.
class MetricSeries {
public:
    explicit MetricSeries(int window_len = 500);

    void push(int reward) { rewards_.push_back(static_cast<std::int8_t>(reward)); }
    std::size_t size() const noexcept { return rewards_.size(); }
    int window_len() const noexcept { return window_len_; }
    const std::vector<std::int8_t>& rewards() const noexcept { return rewards_; }

    // R = (1/T) sum r_i over all slots.
    double cumulative() const;
    // Mean reward over the last ceil(fraction * T) slots.
    double tail_average(double fraction) const;
    // Means of consecutive full blocks of window_len slots; floor(T / window_len) entries.
    std::vector<double> windowed() const;

private:
    int window_len_;
    std::vector<std::int8_t> rewards_;
};

// Common driving interface over the four agent kinds.
class SlotAgent {
public:
    virtual ~SlotAgent() = default;
    // Acts for one slot (learning agents also update) and advances env.
    virtual int step(Environment& env) = 0;
};

class GenieAgent final : public SlotAgent {
public:
    int step(Environment& env) override;
};

class RandomAgent final : public SlotAgent {
public:
    explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
    int step(Environment& env) override;

private:
    Rng rng_;
};

class AcSlotAgent final : public SlotAgent {
public:
    explicit AcSlotAgent(const AcAgentConfig& c) : agent_(c) {}
    int step(Environment& env) override { return agent_.train_step(env).reward; }
    AcAgent& agent() { return agent_; }

private:
    AcAgent agent_;
};

class DqnSlotAgent final : public SlotAgent {
public:
    explicit DqnSlotAgent(const DqnConfig& c) : agent_(c) {}
    int step(Environment& env) override { return agent_.train_step(env).reward; }
    DqnAgent& agent() { return agent_; }

private:
    DqnAgent agent_;
};

struct AgentSettings {
    AcAgentConfig ac;
    DqnConfig dqn;
};

// Builds an agent for `n_channels`, deriving all of its seeds from `seed`.
std::unique_ptr<SlotAgent> make_agent(AgentKind kind, const AgentSettings& settings,
                                      int n_channels, std::uint64_t seed);

struct ExperimentSpec {
    Scenario scenario = Scenario::RoundRobinSweep;
    AgentKind agent = AgentKind::AC;
    // RoundRobinSweep and Runtime
    std::vector<int> channel_list{16, 32, 64};
    std::vector<double> p_list{0.75, 0.80, 0.85, 0.90, 0.95};
    std::int64_t slots = 50'000;
    int n_seeds = 5;
    std::uint64_t seed_base = 1;
    std::vector<std::uint64_t> order_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int window_len = 500;
    double eval_fraction = 0.2;

    // ArbitraryOrders uses pattern.n_channels and pattern.p; TimeVarying
    // switches from `pattern` to the same pattern with second_order_seed;
    // Train runs on `pattern`.
    PatternSpec pattern{PatternKind::RoundRobin, 16, 1, 0.9, 1};
    std::uint64_t second_order_seed = 2;
    std::int64_t pretrain_slots = 50'000;
    std::int64_t change_at = 500;

    // Runtime
    std::int64_t runtime_steps = 10'000;
    std::int64_t runtime_warmup = 1'000;

    int threads = 0;  // 0 = hardware concurrency
    AgentSettings settings;

    void validate() const;
};

// Seed for the s-th repetition of a configuration.
inline std::uint64_t cell_seed(const ExperimentSpec& spec, int s) {
    return spec.seed_base + static_cast<std::uint64_t>(s);
}

// Trains a fresh agent on `env` for `slots` slots after `pretrain` unrecorded slots.
MetricSeries run_cell(SlotAgent& agent, Environment& env, std::int64_t slots,
                      int window_len, std::int64_t pretrain = 0);

struct SweepRow {
    int n_channels = 0;
    double p = 0.0;
    std::uint64_t seed = 0;
    double avg_reward = 0.0;
};

struct OrderRow {
    std::uint64_t order_seed = 0;
    double avg_reward = 0.0;
};

struct WindowRow {
    std::size_t window_index = 0;
    double avg_reward = 0.0;
    bool changed = false;  // window starts at or after the pattern change
};

struct TimeVaryingResult {
    MetricSeries series;
    std::vector<WindowRow> windows;
    std::size_t first_changed_window = 0;
};

struct RuntimeRow {
    int n_channels = 0;
    AgentKind agent = AgentKind::AC;
    double sec_per_decision = 0.0;
    double forward_sec_per_decision = 0.0;
    double percent_reduced = 0.0;
};

// 100 (t_dqn - t_ac) / t_dqn
double percent_reduced(double ac_seconds, double dqn_seconds);

std::vector<SweepRow> run_round_robin_sweep(const ExperimentSpec& spec);
std::vector<OrderRow> run_arbitrary_orders(const ExperimentSpec& spec);
TimeVaryingResult run_time_varying(const ExperimentSpec& spec);
std::vector<RuntimeRow> measure_runtime(const ExperimentSpec& spec);

// Baselines on a single pattern; `seed` drives env (and Random's choices).
MetricSeries run_random_baseline(const PatternSpec& pattern, std::int64_t slots, int window_len,
                                 std::uint64_t seed);
MetricSeries run_genie_baseline(const PatternSpec& pattern, std::int64_t slots, int window_len,
                                std::uint64_t seed);

// CSV output: a block of "# key=value" lines, a column header, then rows.
using Metadata = std::vector<std::pair<std::string, std::string>>;

void write_sweep_csv(std::ostream& os, const Metadata& meta, const std::vector<SweepRow>& rows);
void write_orders_csv(std::ostream& os, const Metadata& meta, const std::vector<OrderRow>& rows);
void write_time_varying_csv(std::ostream& os, const Metadata& meta, const TimeVaryingResult& r);
void write_runtime_csv(std::ostream& os, const Metadata& meta, const std::vector<RuntimeRow>& rows);

std::string format_real(double v);

}  // namespace mcac::harness
