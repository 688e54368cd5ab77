#pragma once

#include <cstdint>
#include <string>

#include "mcac/channel_env.hpp"
#include "mcac/observation.hpp"
#include "mcac/random.hpp"
#include "mcac/tinynet.hpp"

namespace mcac {

enum class SelectionMode { Sample, Argmax };

std::string to_string(SelectionMode m);
SelectionMode parse_selection_mode(const std::string& name);

struct AcAgentConfig {
    int n_channels = 16;
    int window = 0;  // M; 0 means M = N
    double gamma = 0.5;
    tinynet::LrSchedule actor_lr{1e-3, 0.95, 5000};
    tinynet::LrSchedule critic_lr{5e-3, 0.95, 5000};
    int hidden_units = 200;
    tinynet::OptimizerKind optimizer = tinynet::OptimizerKind::Adam;
    // Training selection. Argmax lets TD-driven logit updates do the
    // exploring: a miss lowers the chosen channel's score.
    SelectionMode selection = SelectionMode::Argmax;
    std::uint64_t init_seed = 1;
    std::uint64_t action_seed = 2;

    int window_length() const noexcept { return window > 0 ? window : n_channels; }
    void validate() const;
};

// One slot of actor-critic training.
struct AcStep {
    std::int64_t t = 0;
    int action = 0;
    int reward = 0;
    double delta = 0.0;
    double actor_lr = 0.0;
    double critic_lr = 0.0;
};

double td_error(double reward, double v_next, double v_current, double gamma);

// Semi-gradient of delta^2 w.r.t. the critic at window x (bootstrapped
// target held constant): -2 delta grad V(x).
tinynet::Gradients critic_gradient(const tinynet::Mlp& critic, const tinynet::Vector& x,
                                   double delta);
// Gradient of delta * log pi(action | x) w.r.t. the actor.
tinynet::Gradients actor_gradient(const tinynet::Mlp& actor, const tinynet::Vector& x, int action,
                                  double delta);

// Index of the largest score, lowest index on ties. Returns a 1-based channel.
int argmax_channel(const tinynet::Vector& scores);
// Draws a 1-based channel with probability proportional to `probs`.
int sample_channel(const tinynet::Vector& probs, Rng& rng);

// Actor: N*M -> hidden ReLU -> N softmax. Critic: N*M -> hidden ReLU -> 1.
// The two networks share no parameters.
class AcAgent {
public:
    explicit AcAgent(const AcAgentConfig& config);

    const AcAgentConfig& config() const noexcept { return config_; }
    const tinynet::Mlp& actor() const noexcept { return actor_; }
    const tinynet::Mlp& critic() const noexcept { return critic_; }
    const ObservationWindow& window() const noexcept { return window_; }
    std::int64_t step_counter() const noexcept { return steps_; }

    // Softmax scores pi(. | window) for the current window.
    tinynet::Vector policy() const;
    double value() const;

    int select_action() { return select_action(config_.selection); }
    int select_action(SelectionMode mode);
    void observe(int action, int reward) { window_.push(action, reward); }

    // Semi-gradient step on delta^2: theta += 2 * rate * delta * grad V(window_t).
    void critic_update(const tinynet::Vector& window_t, double delta, std::int64_t t);
    // Gradient ascent on delta * log pi(action | window_t).
    void actor_update(const tinynet::Vector& window_t, int action, double delta, std::int64_t t);

    // One slot: select from O_t, sense, build O_{t+1}, evaluate delta with the
    // unmodified critic, update critic, update actor, advance env, count.
    AcStep train_step(Environment& env);

    // Used by checkpoint loading; shapes are validated against the config.
    void restore(tinynet::Mlp actor, tinynet::Mlp critic, std::int64_t steps,
                 ObservationWindow window);

private:
    void critic_step(const tinynet::ForwardPass& pass, double delta, double rate);
    void actor_step(const tinynet::ForwardPass& pass, int action, double delta, double rate);

    AcAgentConfig config_;
    tinynet::Mlp actor_;
    tinynet::Mlp critic_;
    ObservationWindow window_;
    Rng action_rng_;
    std::int64_t steps_ = 0;

    tinynet::Optimizer actor_opt_;
    tinynet::Optimizer critic_opt_;
    tinynet::Gradients actor_grad_;
    tinynet::Gradients critic_grad_;
    tinynet::Vector x_now_;
    tinynet::Vector x_next_;
};

}  // namespace mcac
