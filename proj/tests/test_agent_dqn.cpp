#include <doctest.h>

#include <chrono>
#include <random>

#include "mcac/agent_dqn.hpp"
#include "mcac/errors.hpp"
#include "oracles.hpp"

using namespace mcac;
using namespace mcac::tinynet;

namespace {

Transition tr(std::int16_t tag, int window_length = 1) {
    return Transition{std::vector<std::int16_t>(static_cast<std::size_t>(window_length), tag), 1, 1,
                      std::vector<std::int16_t>(static_cast<std::size_t>(window_length), tag)};
}

// Flatten compact window codes: code c = reward * channel.
oracle::Vec flat(int n, const std::vector<std::int16_t>& codes) {
    oracle::Vec x(static_cast<std::size_t>(n) * codes.size(), 0.0);
    for (std::size_t col = 0; col < codes.size(); ++col) {
        const int c = codes[col];
        if (c != 0) x[col * static_cast<std::size_t>(n) + static_cast<std::size_t>(std::abs(c) - 1)] = c > 0 ? 1.0 : -1.0;
    }
    return x;
}

std::vector<std::int16_t> random_codes(int n, int m, std::mt19937_64& gen) {
    std::vector<std::int16_t> codes(static_cast<std::size_t>(m));
    for (auto& c : codes) c = static_cast<std::int16_t>((1 + gen() % n) * (gen() % 2 ? 1 : -1));
    return codes;
}

// Loss with an independent evaluation of both networks.
double oracle_loss(const Mlp& q, const Mlp& target, const std::vector<Transition>& batch, int n, double gamma) {
    double total = 0;
    for (const auto& t : batch) {
        const auto next = oracle::eval(target, flat(n, t.next_window));
        const double y = t.reward + gamma * *std::max_element(next.begin(), next.end());
        const double qa = oracle::eval(q, flat(n, t.window))[static_cast<std::size_t>(t.action - 1)];
        total += (y - qa) * (y - qa);
    }
    return total / static_cast<double>(batch.size());
}

DqnConfig small_config() {
    DqnConfig c;
    c.n_channels = 4;
    c.window = 2;
    c.hidden_units = {8, 8};
    c.warmup = 40;
    c.minibatch = 8;
    c.buffer_capacity = 1000;
    return c;
}

}  // namespace

TEST_CASE("replay buffer is FIFO") {
    ReplayBuffer buf(2, 1);
    buf.push(tr(1));
    buf.push(tr(2));
    buf.push(tr(3));
    REQUIRE(buf.size() == 2);
    CHECK(buf.at(0) == tr(2));
    CHECK(buf.at(1) == tr(3));
    CHECK_THROWS(buf.at(2));
}

TEST_CASE("replay size never exceeds capacity") {
    ReplayBuffer buf(1000, 1);
    for (int i = 0; i < 1000000; ++i) {
        buf.push(tr(static_cast<std::int16_t>(i % 30000)));
        REQUIRE(buf.size() <= 1000);
    }
    CHECK(buf.size() == 1000);
    // Oldest surviving item is push #999000.
    CHECK(buf.at(0).window[0] == static_cast<std::int16_t>(999000 % 30000));
}

TEST_CASE("replay sampling is uniform") {
    ReplayBuffer buf(10, 1);
    for (std::int16_t i = 0; i < 10; ++i) buf.push(tr(i));
    Rng rng(31);
    std::vector<int> hits(10, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++hits[buf.sample_index(rng)];
    for (int h : hits) CHECK(std::abs(static_cast<double>(h) / draws - 0.1) <= 0.01);
    const auto batch = buf.sample(32, rng);
    CHECK(batch.size() == 32);
    ReplayBuffer empty(4, 1);
    CHECK_THROWS(empty.sample_index(rng));
    CHECK_THROWS(empty.push(tr(1, 2)));
}

TEST_CASE("epsilon greedy") {
    // Q ignores the input: zero weights, biases carry the values.
    Mlp q{{DenseLayer{Matrix::Zero(3, 6), Vector::Zero(3), Activation::Identity}}};
    q.layers[0].biases << 1, 3, 2;
    const Vector x = Vector::Zero(6);
    Rng rng(32);
    CHECK(epsilon_greedy(q, x, 0.0, rng) == 2);
    q.layers[0].biases << 5, 5, 1;
    CHECK(epsilon_greedy(q, x, 0.0, rng) == 1);

    std::vector<int> hits(3, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++hits[static_cast<std::size_t>(epsilon_greedy(q, x, 1.0, rng) - 1)];
    for (int h : hits) CHECK(std::abs(static_cast<double>(h) / draws - 1.0 / 3) <= 0.01);
}

TEST_CASE("q update: consistent target gives zero loss and no change") {
    Mlp q{{DenseLayer{Matrix::Zero(2, 2), Vector::Zero(2), Activation::Identity}}};
    q.layers[0].biases << 1.0, 0.0;
    const Mlp target = q;
    const std::vector<Transition> batch{{{1}, 1, 1, {-2}}};
    // gamma must lie in (0,1) for the agent, but the loss itself accepts 0.
    Optimizer opt(OptimizerKind::Sgd, q);
    const auto before = q;
    CHECK(q_update(q, target, batch, 2, 0.0, 0.1, opt) == 0.0);
    CHECK(q == before);
}

TEST_CASE("q update: one-parameter closed form") {
    Mlp q{{DenseLayer{Matrix(2, 2), Vector(2), Activation::Identity}}};
    q.layers[0].weights << 0.5, 0.2, -0.3, 0.1;
    q.layers[0].biases << 0.1, -0.2;
    const Mlp target = q;
    // x = [1, 0] (channel 1 good), x' = [0, -1] (channel 2 bad).
    // Q(x, 1) = 0.6; Q_t(x') = [-0.1, -0.3]; y = 1 + 0.5 * -0.1 = 0.95.
    const std::vector<Transition> batch{{{1}, 1, 1, {-2}}};
    Optimizer opt(OptimizerKind::Sgd, q);
    const double loss = q_update(q, target, batch, 2, 0.5, 0.1, opt);
    CHECK(loss == doctest::Approx(0.35 * 0.35).epsilon(1e-12));
    CHECK(q.layers[0].weights(0, 0) == doctest::Approx(0.5 + 2 * 0.1 * 0.35).epsilon(1e-12));
    CHECK(q.layers[0].biases(0) == doctest::Approx(0.1 + 2 * 0.1 * 0.35).epsilon(1e-12));
    // Untouched: the other action's row and the absent input column.
    CHECK(q.layers[0].weights(0, 1) == 0.2);
    CHECK(q.layers[0].weights(1, 0) == -0.3);
    CHECK(q.layers[0].biases(1) == -0.2);
}

TEST_CASE("dqn loss and gradient against the oracle") {
    std::mt19937_64 gen(33);
    const int n = 4, m = 2;
    for (int trial = 0; trial < 20; ++trial) {
        CAPTURE(trial);
        const auto q = oracle::random_net({n * m, 8, 8, n}, Activation::Identity, gen);
        const auto target = oracle::random_net({n * m, 8, 8, n}, Activation::Identity, gen);
        std::vector<Transition> batch;
        std::vector<oracle::Vec> inputs;
        for (int i = 0; i < 6; ++i) {
            Transition t{random_codes(n, m, gen), 1 + static_cast<int>(gen() % n), gen() % 2 ? 1 : -1,
                         random_codes(n, m, gen)};
            inputs.push_back(flat(n, t.window));
            batch.push_back(std::move(t));
        }
        const double gamma = 0.9;
        const auto lg = dqn_loss_gradient(q, target, batch, n, gamma);
        CHECK(lg.loss == doctest::Approx(oracle_loss(q, target, batch, n, gamma)).epsilon(1e-12));
        CHECK(dqn_loss(q, target, batch, n, gamma) == doctest::Approx(lg.loss).epsilon(1e-14));
        auto loss = [&](const Mlp& net) { return oracle_loss(net, target, batch, n, gamma); };
        const auto r = oracle::finite_difference(q, loss, lg.gradients, inputs);
        CHECK(r.max_rel < 1e-4);
        CHECK(r.checked > 0);
    }
}

TEST_CASE("targets come from the frozen network only") {
    std::mt19937_64 gen(34);
    const int n = 4, m = 2;
    const auto target = oracle::random_net({n * m, 8, n}, Activation::Identity, gen);
    const auto q1 = oracle::random_net({n * m, 8, n}, Activation::Identity, gen);
    const auto q2 = oracle::random_net({n * m, 8, n}, Activation::Identity, gen);
    std::vector<Transition> batch;
    for (int i = 0; i < 5; ++i) batch.push_back({random_codes(n, m, gen), 2, 1, random_codes(n, m, gen)});
    // With both losses expressed through the same y (from the target), they
    // differ only through Q(w, a).
    CHECK(dqn_loss(q1, target, batch, n, 0.5) == doctest::Approx(oracle_loss(q1, target, batch, n, 0.5)));
    CHECK(dqn_loss(q2, target, batch, n, 0.5) == doctest::Approx(oracle_loss(q2, target, batch, n, 0.5)));
    // Using q1 as its own target gives a different value: y really depends on the target argument.
    CHECK(dqn_loss(q1, q1, batch, n, 0.5) != doctest::Approx(dqn_loss(q1, target, batch, n, 0.5)));
}

TEST_CASE("target synchronisation") {
    std::mt19937_64 gen(35);
    const auto q = oracle::random_net({8, 5, 4}, Activation::Identity, gen);
    auto target = oracle::random_net({8, 5, 4}, Activation::Identity, gen);
    sync_target(q, target);
    CHECK(target == q);
    for (int i = 0; i < 10; ++i) {
        const auto x = oracle::to_eigen(oracle::random_window(4, 2, gen));
        CHECK(evaluate(target, x) == evaluate(q, x));
    }

    auto cfg = small_config();
    cfg.target_sync_period = 7;
    DqnAgent agent(cfg);
    CHECK(agent.target() == agent.qnet());
    Environment env(PatternSpec{PatternKind::RoundRobin, 4, 1, 0.9, 1}, 2);
    const int steps = 100;
    for (int t = 0; t < steps; ++t) agent.train_step(env);
    CHECK(agent.syncs() == steps / 7);
    // The last sync happened at step 98; updates since then moved qnet away.
    CHECK_FALSE(agent.target() == agent.qnet());
}

TEST_CASE("epsilon schedule") {
    DqnConfig c;
    CHECK(c.epsilon_at(0) == doctest::Approx(0.9));
    CHECK(c.epsilon_at(10000) == doctest::Approx(0.02));
    CHECK(c.epsilon_at(5000) == doctest::Approx(0.46));
    double prev = 1.0;
    for (std::int64_t t = 0; t < 30000; t += 37) {
        const double e = c.epsilon_at(t);
        CHECK(e <= prev);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        prev = e;
    }
}

TEST_CASE("config validation") {
    DqnConfig c;
    CHECK_NOTHROW(c.validate());
    c.warmup = 16;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DqnConfig{};
    c.epsilon_start = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DqnConfig{};
    c.hidden_units.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DqnConfig{};
    c.buffer_capacity = 100;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("no updates before warmup") {
    auto cfg = small_config();
    DqnAgent agent(cfg);
    Environment env(PatternSpec{PatternKind::RoundRobin, 4, 1, 0.9, 1}, 2);
    for (int t = 0; t < 100; ++t) {
        const auto s = agent.train_step(env);
        CHECK(s.t == t);
        CHECK(s.epsilon == doctest::Approx(cfg.epsilon_at(t)));
        const bool should = static_cast<std::size_t>(t + 1) >= cfg.warmup;
        CHECK(s.loss.has_value() == should);
        CHECK(agent.updates() == std::max(0, t + 2 - static_cast<int>(cfg.warmup)));
    }
    CHECK(agent.replay().size() == 100);
}

TEST_CASE("training step costs more than a forward pass once replay starts") {
    DqnConfig cfg;
    cfg.n_channels = 8;
    DqnAgent agent(cfg);
    Environment env(PatternSpec{PatternKind::RoundRobin, 8, 1, 0.9, 1}, 3);
    for (std::size_t t = 0; t < cfg.warmup; ++t) agent.train_step(env);
    const int reps = 200;
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) agent.train_step(env);
    const auto train = std::chrono::steady_clock::now() - start;
    start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) agent.select_action(0.0);
    const auto fwd = std::chrono::steady_clock::now() - start;
    CHECK(train > fwd);
}

TEST_CASE("determinism under fixed seeds") {
    auto cfg = small_config();
    DqnAgent a(cfg), b(cfg);
    const PatternSpec spec{PatternKind::ArbitraryOrder, 4, 1, 0.9, 3};
    Environment ea(spec, 9), eb(spec, 9);
    for (int t = 0; t < 1500; ++t) {
        const auto sa = a.train_step(ea);
        const auto sb = b.train_step(eb);
        REQUIRE(sa.action == sb.action);
        REQUIRE(sa.loss == sb.loss);
    }
    CHECK(a.qnet() == b.qnet());
}

TEST_CASE("learns a deterministic four-channel cycle") {
    DqnConfig cfg;
    cfg.n_channels = 4;
    cfg.init_seed = derive_seed(1, 12);
    cfg.action_seed = derive_seed(1, 13);
    cfg.replay_seed = derive_seed(1, 14);
    DqnAgent agent(cfg);
    Environment env(PatternSpec{PatternKind::RoundRobin, 4, 1, 1.0, 1}, derive_seed(1, 11));
    long long tail = 0;
    for (int t = 0; t < 20000; ++t) {
        const int r = agent.train_step(env).reward;
        if (t >= 18000) tail += r;
    }
    CHECK(static_cast<double>(tail) / 2000.0 >= 0.9);
}
