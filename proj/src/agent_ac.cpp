#include "mcac/agent_ac.hpp"

#include <array>
#include <cmath>

#include "mcac/errors.hpp"

namespace mcac {

using tinynet::Activation;
using tinynet::Direction;
using tinynet::LayerShape;
using tinynet::Vector;

std::string to_string(SelectionMode m) { return m == SelectionMode::Sample ? "sample" : "argmax"; }

SelectionMode parse_selection_mode(const std::string& name) {
    if (name == "sample") return SelectionMode::Sample;
    if (name == "argmax") return SelectionMode::Argmax;
    throw ConfigError("unknown selection mode '" + name + "' (expected sample or argmax)");
}

void AcAgentConfig::validate() const {
    if (n_channels < 2) throw ConfigError("agent needs at least 2 channels", "agent-ac");
    if (window < 0) throw ConfigError("window length must be >= 0 (0 = N)", "agent-ac");
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw ConfigError("gamma must lie strictly inside (0,1)", "agent-ac");
    }
    if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1", "agent-ac");
    actor_lr.validate();
    critic_lr.validate();
    if (!(critic_lr.base_rate > actor_lr.base_rate)) {
        throw ConfigError("critic learning rate must exceed the actor learning rate", "agent-ac");
    }
}

double td_error(double reward, double v_next, double v_current, double gamma) {
    return reward + gamma * v_next - v_current;
}

namespace {

tinynet::Vector critic_output_gradient(double delta) { return Vector::Constant(1, -2.0 * delta); }

// Softmax + log-likelihood: d log pi_a / d logits = onehot(a) - pi.
tinynet::Vector actor_logit_gradient(const Vector& pi, int action, double delta) {
    Vector g = -pi;
    g[action - 1] += 1.0;
    return g * delta;
}

}  // namespace

tinynet::Gradients critic_gradient(const tinynet::Mlp& critic, const Vector& x, double delta) {
    return tinynet::backward_from_logits(critic, tinynet::forward(critic, x),
                                         critic_output_gradient(delta));
}

tinynet::Gradients actor_gradient(const tinynet::Mlp& actor, const Vector& x, int action,
                                  double delta) {
    if (action < 1 || action > actor.output_size()) {
        throw ActionError("channel " + std::to_string(action) + " outside the actor's outputs");
    }
    const auto pass = tinynet::forward(actor, x);
    return tinynet::backward_from_logits(actor, pass, actor_logit_gradient(pass.output, action, delta));
}

int argmax_channel(const Vector& scores) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return static_cast<int>(best) + 1;
}

int sample_channel(const Vector& probs, Rng& rng) {
    const double u = rng.uniform() * probs.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i) + 1;
    }
    // u landed in the rounding slack above the last partial sum.
    for (Eigen::Index i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(probs.size());
}

AcAgent::AcAgent(const AcAgentConfig& config)
    : config_(config),
      window_(config.n_channels, config.window_length() > 0 ? config.window_length() : 1),
      action_rng_(config.action_seed) {
    config_.validate();
    const int inputs = config_.n_channels * config_.window_length();
    const std::array actor_shape{LayerShape{inputs, config_.hidden_units, Activation::ReLU},
                                 LayerShape{config_.hidden_units, config_.n_channels,
                                            Activation::Softmax}};
    const std::array critic_shape{LayerShape{inputs, config_.hidden_units, Activation::ReLU},
                                  LayerShape{config_.hidden_units, 1, Activation::Identity}};
    actor_ = tinynet::init_weights(actor_shape, derive_seed(config_.init_seed, 1));
    critic_ = tinynet::init_weights(critic_shape, derive_seed(config_.init_seed, 2));
    actor_opt_ = tinynet::Optimizer(config_.optimizer, actor_);
    critic_opt_ = tinynet::Optimizer(config_.optimizer, critic_);
    actor_grad_ = tinynet::Gradients::zeros_like(actor_);
    critic_grad_ = tinynet::Gradients::zeros_like(critic_);
}

Vector AcAgent::policy() const { return tinynet::evaluate(actor_, window_.flatten()); }

double AcAgent::value() const { return tinynet::evaluate(critic_, window_.flatten())[0]; }

int AcAgent::select_action(SelectionMode mode) {
    const Vector scores = policy();
    if (!scores.allFinite()) throw NumericError("actor produced non-finite scores", "agent-ac");
    return mode == SelectionMode::Argmax ? argmax_channel(scores)
                                         : sample_channel(scores, action_rng_);
}

void AcAgent::critic_step(const tinynet::ForwardPass& pass, double delta, double rate) {
    critic_grad_.clear();
    tinynet::accumulate_from_logits(critic_, pass, critic_output_gradient(delta), critic_grad_);
    critic_opt_.step(critic_, critic_grad_, rate, Direction::Descent);
}

void AcAgent::actor_step(const tinynet::ForwardPass& pass, int action, double delta, double rate) {
    actor_grad_.clear();
    tinynet::accumulate_from_logits(actor_, pass, actor_logit_gradient(pass.output, action, delta),
                                    actor_grad_);
    actor_opt_.step(actor_, actor_grad_, rate, Direction::Ascent);
}

void AcAgent::critic_update(const Vector& window_t, double delta, std::int64_t t) {
    critic_step(tinynet::forward(critic_, window_t), delta, config_.critic_lr.rate_at(t));
}

void AcAgent::actor_update(const Vector& window_t, int action, double delta, std::int64_t t) {
    if (action < 1 || action > config_.n_channels) {
        throw ActionError("actor update for channel " + std::to_string(action) + " outside 1.." +
                          std::to_string(config_.n_channels));
    }
    actor_step(tinynet::forward(actor_, window_t), action, delta, config_.actor_lr.rate_at(t));
}

AcStep AcAgent::train_step(Environment& env) {
    AcStep step;
    step.t = steps_;
    step.actor_lr = config_.actor_lr.rate_at(steps_);
    step.critic_lr = config_.critic_lr.rate_at(steps_);

    window_.flatten_into(x_now_);
    const auto actor_pass = tinynet::forward(actor_, x_now_);
    if (!actor_pass.output.allFinite()) {
        throw NumericError("actor produced non-finite scores", "agent-ac");
    }
    step.action = config_.selection == SelectionMode::Argmax
                      ? argmax_channel(actor_pass.output)
                      : sample_channel(actor_pass.output, action_rng_);
    step.reward = env.sense(step.action);

    window_.push(step.action, step.reward);
    window_.flatten_into(x_next_);

    const auto critic_pass = tinynet::forward(critic_, x_now_);
    const double v_next = tinynet::evaluate(critic_, x_next_)[0];
    step.delta = td_error(step.reward, v_next, critic_pass.output[0], config_.gamma);
    if (!std::isfinite(step.delta)) throw NumericError("non-finite TD error", "agent-ac");

    critic_step(critic_pass, step.delta, step.critic_lr);
    actor_step(actor_pass, step.action, step.delta, step.actor_lr);

    env.advance();
    ++steps_;
    return step;
}

void AcAgent::restore(tinynet::Mlp actor, tinynet::Mlp critic, std::int64_t steps,
                      ObservationWindow window) {
    const int inputs = config_.n_channels * config_.window_length();
    actor.validate();
    critic.validate();
    if (actor.layers.size() != actor_.layers.size() || critic.layers.size() != critic_.layers.size() ||
        actor.input_size() != inputs || critic.input_size() != inputs ||
        actor.output_size() != config_.n_channels || critic.output_size() != 1 ||
        actor.layers.front().out() != config_.hidden_units ||
        critic.layers.front().out() != config_.hidden_units ||
        actor.layers.back().activation != Activation::Softmax) {
        throw CheckpointError("network shapes do not match the agent configuration");
    }
    if (window.n_channels() != config_.n_channels || window.length() != config_.window_length()) {
        throw CheckpointError("observation window does not match the agent configuration");
    }
    actor_ = std::move(actor);
    critic_ = std::move(critic);
    actor_opt_ = tinynet::Optimizer(config_.optimizer, actor_);
    critic_opt_ = tinynet::Optimizer(config_.optimizer, critic_);
    steps_ = steps;
    window_ = std::move(window);
}

}  // namespace mcac
