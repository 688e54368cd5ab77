#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcac/channel_env.hpp"
#include "mcac/observation.hpp"
#include "mcac/random.hpp"
#include "mcac/tinynet.hpp"

namespace mcac {

// Windows are stored as their compact column codes (see ObservationWindow).
struct Transition {
    std::vector<std::int16_t> window;
    int action = 0;
    int reward = 0;
    std::vector<std::int16_t> next_window;

    friend bool operator==(const Transition&, const Transition&) = default;
};

// Fixed-capacity FIFO replay memory with uniform sampling.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int window_length);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return size_; }
    int window_length() const noexcept { return window_length_; }

    // Evicts the oldest transition when full.
    void push(const Transition& t);
    // i = 0 is the oldest stored transition.
    Transition at(std::size_t i) const;
    // Uniform with replacement over stored transitions.
    std::size_t sample_index(Rng& rng) const;
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;

private:
    std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

    std::size_t capacity_;
    int window_length_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    std::vector<std::int16_t> windows_;  // capacity x (2 * window_length)
    std::vector<std::int16_t> actions_;
    std::vector<std::int8_t> rewards_;
};

struct DqnConfig {
    int n_channels = 16;
    int window = 0;  // 0 means M = N
    double gamma = 0.5;
    std::vector<int> hidden_units{200, 200};
    std::size_t minibatch = 32;
    std::size_t buffer_capacity = 100'000;
    std::size_t warmup = 500;
    tinynet::LrSchedule lr{5e-4, 0.95, 5000};
    tinynet::OptimizerKind optimizer = tinynet::OptimizerKind::Adam;
    double epsilon_start = 0.9;
    double epsilon_end = 0.02;
    std::int64_t epsilon_decay_slots = 10'000;
    std::int64_t target_sync_period = 500;
    std::uint64_t init_seed = 1;
    std::uint64_t action_seed = 2;
    std::uint64_t replay_seed = 3;

    int window_length() const noexcept { return window > 0 ? window : n_channels; }
    // Linear from epsilon_start to epsilon_end over epsilon_decay_slots, then flat.
    double epsilon_at(std::int64_t t) const;
    void validate() const;
};

// Explore uniformly with probability epsilon, otherwise argmax Q (lowest
// index on ties). Returns a 1-based channel.
int epsilon_greedy(const tinynet::Mlp& qnet, const tinynet::Vector& x, double epsilon, Rng& rng);

struct DqnLoss {
    double loss = 0.0;
    tinynet::Gradients gradients;
};

// Mean over the batch of (y - Q(w, a))^2 with y = r + gamma max_a' Q_target(w', a').
// Only the taken action's output carries gradient.
double dqn_loss(const tinynet::Mlp& qnet, const tinynet::Mlp& target,
                std::span<const Transition> batch, int n_channels, double gamma);
DqnLoss dqn_loss_gradient(const tinynet::Mlp& qnet, const tinynet::Mlp& target,
                          std::span<const Transition> batch, int n_channels, double gamma);

// One descent step on dqn_loss. Returns the pre-update loss.
double q_update(tinynet::Mlp& qnet, const tinynet::Mlp& target, std::span<const Transition> batch,
                int n_channels, double gamma, double rate, tinynet::Optimizer& optimizer);

void sync_target(const tinynet::Mlp& qnet, tinynet::Mlp& target);

struct DqnStep {
    std::int64_t t = 0;
    int action = 0;
    int reward = 0;
    double epsilon = 0.0;
    std::optional<double> loss;  // empty before warmup
};

class DqnAgent {
public:
    explicit DqnAgent(const DqnConfig& config);

    const DqnConfig& config() const noexcept { return config_; }
    const tinynet::Mlp& qnet() const noexcept { return qnet_; }
    const tinynet::Mlp& target() const noexcept { return target_; }
    const ReplayBuffer& replay() const noexcept { return replay_; }
    const ObservationWindow& window() const noexcept { return window_; }
    std::int64_t step_counter() const noexcept { return steps_; }
    std::int64_t updates() const noexcept { return updates_; }
    std::int64_t syncs() const noexcept { return syncs_; }

    tinynet::Vector q_values() const;
    int select_action(double epsilon);

    // Select, sense, store, replay (after warmup), maybe sync, advance env.
    DqnStep train_step(Environment& env);

    void restore(tinynet::Mlp qnet, tinynet::Mlp target, std::int64_t steps,
                 ObservationWindow window);

private:
    DqnConfig config_;
    tinynet::Mlp qnet_;
    tinynet::Mlp target_;
    tinynet::Optimizer optimizer_;
    ReplayBuffer replay_;
    ObservationWindow window_;
    Rng action_rng_;
    Rng replay_rng_;
    std::int64_t steps_ = 0;
    std::int64_t updates_ = 0;
    std::int64_t syncs_ = 0;

    tinynet::Gradients grad_;
    std::vector<Transition> batch_;
    tinynet::Vector x_;
};

}  // namespace mcac
