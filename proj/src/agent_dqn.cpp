#include "mcac/agent_dqn.hpp"

#include <algorithm>
#include <cmath>

#include "mcac/agent_ac.hpp"
#include "mcac/errors.hpp"

namespace mcac {

using tinynet::Activation;
using tinynet::LayerShape;
using tinynet::Vector;

ReplayBuffer::ReplayBuffer(std::size_t capacity, int window_length)
    : capacity_(capacity), window_length_(window_length) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be >= 1", "agent-dqn");
    if (window_length_ < 1) throw ConfigError("replay window length must be >= 1", "agent-dqn");
    windows_.assign(capacity_ * 2 * static_cast<std::size_t>(window_length_), 0);
    actions_.assign(capacity_, 0);
    rewards_.assign(capacity_, 0);
}

void ReplayBuffer::push(const Transition& t) {
    const auto m = static_cast<std::size_t>(window_length_);
    if (t.window.size() != m || t.next_window.size() != m) {
        throw ShapeError("transition window length does not match the replay buffer");
    }
    std::size_t s;
    if (size_ < capacity_) {
        s = slot(size_);
        ++size_;
    } else {
        s = head_;
        head_ = (head_ + 1) % capacity_;
    }
    auto* dst = windows_.data() + s * 2 * m;
    std::copy(t.window.begin(), t.window.end(), dst);
    std::copy(t.next_window.begin(), t.next_window.end(), dst + m);
    actions_[s] = static_cast<std::int16_t>(t.action);
    rewards_[s] = static_cast<std::int8_t>(t.reward);
}

Transition ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw ShapeError("replay index out of range");
    const auto m = static_cast<std::size_t>(window_length_);
    const std::size_t s = slot(i);
    const auto* src = windows_.data() + s * 2 * m;
    Transition t;
    t.window.assign(src, src + m);
    t.next_window.assign(src + m, src + 2 * m);
    t.action = actions_[s];
    t.reward = rewards_[s];
    return t;
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
    if (size_ == 0) throw ShapeError("cannot sample from an empty replay buffer");
    return static_cast<std::size_t>(rng.below(size_));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(at(sample_index(rng)));
    return out;
}

double DqnConfig::epsilon_at(std::int64_t t) const {
    if (t >= epsilon_decay_slots) return epsilon_end;
    const double frac = static_cast<double>(std::max<std::int64_t>(t, 0)) /
                        static_cast<double>(epsilon_decay_slots);
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void DqnConfig::validate() const {
    if (n_channels < 2) throw ConfigError("agent needs at least 2 channels", "agent-dqn");
    if (window < 0) throw ConfigError("window length must be >= 0 (0 = N)", "agent-dqn");
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw ConfigError("gamma must lie strictly inside (0,1)", "agent-dqn");
    }
    if (hidden_units.empty()) throw ConfigError("need at least one hidden layer", "agent-dqn");
    for (int h : hidden_units) {
        if (h < 1) throw ConfigError("hidden layer widths must be >= 1", "agent-dqn");
    }
    if (minibatch < 1) throw ConfigError("minibatch must be >= 1", "agent-dqn");
    if (warmup < minibatch) throw ConfigError("warmup must be >= minibatch", "agent-dqn");
    if (buffer_capacity < warmup) {
        throw ConfigError("buffer capacity must be >= warmup", "agent-dqn");
    }
    lr.validate();
    for (double e : {epsilon_start, epsilon_end}) {
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon must lie in [0,1]", "agent-dqn");
    }
    if (epsilon_end > epsilon_start) {
        throw ConfigError("epsilon_end must not exceed epsilon_start", "agent-dqn");
    }
    if (epsilon_decay_slots < 1) throw ConfigError("epsilon decay slots must be >= 1", "agent-dqn");
    if (target_sync_period < 1) throw ConfigError("target sync period must be >= 1", "agent-dqn");
}

int epsilon_greedy(const tinynet::Mlp& qnet, const Vector& x, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError("epsilon must lie in [0,1]", "agent-dqn");
    }
    if (rng.uniform() < epsilon) {
        return static_cast<int>(rng.below(static_cast<std::uint64_t>(qnet.output_size()))) + 1;
    }
    const Vector q = tinynet::evaluate(qnet, x);
    if (!q.allFinite()) throw NumericError("Q-network produced non-finite values", "agent-dqn");
    return argmax_channel(q);
}

namespace {

// Adds the minibatch loss gradient into `into` and returns the loss.
double accumulate_dqn(const tinynet::Mlp& qnet, const tinynet::Mlp& target,
                      std::span<const Transition> batch, int n_channels, double gamma,
                      tinynet::Gradients* into) {
    if (batch.empty()) throw ShapeError("empty minibatch");
    const double scale = 1.0 / static_cast<double>(batch.size());
    Vector x;
    Vector x_next;
    double loss = 0.0;
    for (const auto& tr : batch) {
        if (tr.action < 1 || tr.action > qnet.output_size()) {
            throw ActionError("stored action " + std::to_string(tr.action) + " out of range");
        }
        ObservationWindow::flatten_codes(n_channels, tr.window, x);
        ObservationWindow::flatten_codes(n_channels, tr.next_window, x_next);
        const double y = tr.reward + gamma * tinynet::evaluate(target, x_next).maxCoeff();
        const auto pass = tinynet::forward(qnet, x);
        const double err = y - pass.output[tr.action - 1];
        loss += scale * err * err;
        if (into != nullptr) {
            Vector g = Vector::Zero(qnet.output_size());
            g[tr.action - 1] = -2.0 * err * scale;
            tinynet::accumulate_from_logits(qnet, pass, g, *into);
        }
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite DQN loss", "agent-dqn");
    return loss;
}

}  // namespace

double dqn_loss(const tinynet::Mlp& qnet, const tinynet::Mlp& target,
                std::span<const Transition> batch, int n_channels, double gamma) {
    return accumulate_dqn(qnet, target, batch, n_channels, gamma, nullptr);
}

DqnLoss dqn_loss_gradient(const tinynet::Mlp& qnet, const tinynet::Mlp& target,
                          std::span<const Transition> batch, int n_channels, double gamma) {
    DqnLoss out{0.0, tinynet::Gradients::zeros_like(qnet)};
    out.loss = accumulate_dqn(qnet, target, batch, n_channels, gamma, &out.gradients);
    return out;
}

double q_update(tinynet::Mlp& qnet, const tinynet::Mlp& target, std::span<const Transition> batch,
                int n_channels, double gamma, double rate, tinynet::Optimizer& optimizer) {
    auto lg = dqn_loss_gradient(qnet, target, batch, n_channels, gamma);
    optimizer.step(qnet, lg.gradients, rate, tinynet::Direction::Descent);
    return lg.loss;
}

void sync_target(const tinynet::Mlp& qnet, tinynet::Mlp& target) {
    if (target.layers.size() != qnet.layers.size()) {
        throw ShapeError("target network depth does not match Q-network");
    }
    for (std::size_t k = 0; k < qnet.layers.size(); ++k) {
        if (target.layers[k].weights.rows() != qnet.layers[k].weights.rows() ||
            target.layers[k].weights.cols() != qnet.layers[k].weights.cols()) {
            throw ShapeError("target network shape does not match Q-network");
        }
    }
    target = qnet;
}

namespace {

tinynet::Mlp build_qnet(const DqnConfig& c) {
    std::vector<LayerShape> shapes;
    int in = c.n_channels * c.window_length();
    for (int h : c.hidden_units) {
        shapes.push_back({in, h, Activation::ReLU});
        in = h;
    }
    shapes.push_back({in, c.n_channels, Activation::Identity});
    return tinynet::init_weights(shapes, derive_seed(c.init_seed, 3));
}

}  // namespace

DqnAgent::DqnAgent(const DqnConfig& config)
    : config_((config.validate(), config)),
      qnet_(build_qnet(config_)),
      target_(qnet_),
      optimizer_(config_.optimizer, qnet_),
      replay_(config_.buffer_capacity, config_.window_length()),
      window_(config_.n_channels, config_.window_length()),
      action_rng_(config_.action_seed),
      replay_rng_(config_.replay_seed),
      grad_(tinynet::Gradients::zeros_like(qnet_)) {}

Vector DqnAgent::q_values() const { return tinynet::evaluate(qnet_, window_.flatten()); }

int DqnAgent::select_action(double epsilon) {
    return epsilon_greedy(qnet_, window_.flatten(), epsilon, action_rng_);
}

DqnStep DqnAgent::train_step(Environment& env) {
    DqnStep step;
    step.t = steps_;
    step.epsilon = config_.epsilon_at(steps_);

    Transition tr;
    tr.window = window_.codes();
    window_.flatten_into(x_);
    step.action = epsilon_greedy(qnet_, x_, step.epsilon, action_rng_);
    step.reward = env.sense(step.action);
    window_.push(step.action, step.reward);
    tr.action = step.action;
    tr.reward = step.reward;
    tr.next_window = window_.codes();
    replay_.push(tr);

    if (replay_.size() >= config_.warmup) {
        batch_.clear();
        for (std::size_t k = 0; k < config_.minibatch; ++k) {
            batch_.push_back(replay_.at(replay_.sample_index(replay_rng_)));
        }
        grad_.clear();
        step.loss = accumulate_dqn(qnet_, target_, batch_, config_.n_channels, config_.gamma,
                                   &grad_);
        optimizer_.step(qnet_, grad_, config_.lr.rate_at(steps_), tinynet::Direction::Descent);
        ++updates_;
    }
    if ((steps_ + 1) % config_.target_sync_period == 0) {
        sync_target(qnet_, target_);
        ++syncs_;
    }

    env.advance();
    ++steps_;
    return step;
}

void DqnAgent::restore(tinynet::Mlp qnet, tinynet::Mlp target, std::int64_t steps,
                       ObservationWindow window) {
    const auto reference = build_qnet(config_);
    auto same_shape = [&](const tinynet::Mlp& m) {
        if (m.layers.size() != reference.layers.size()) return false;
        for (std::size_t k = 0; k < m.layers.size(); ++k) {
            if (m.layers[k].in() != reference.layers[k].in() ||
                m.layers[k].out() != reference.layers[k].out() ||
                m.layers[k].activation != reference.layers[k].activation) {
                return false;
            }
        }
        return true;
    };
    if (!same_shape(qnet) || !same_shape(target)) {
        throw CheckpointError("network shapes do not match the DQN configuration");
    }
    if (window.n_channels() != config_.n_channels || window.length() != config_.window_length()) {
        throw CheckpointError("observation window does not match the DQN configuration");
    }
    qnet_ = std::move(qnet);
    target_ = std::move(target);
    optimizer_ = tinynet::Optimizer(config_.optimizer, qnet_);
    grad_ = tinynet::Gradients::zeros_like(qnet_);
    steps_ = steps;
    window_ = std::move(window);
}

}  // namespace mcac
