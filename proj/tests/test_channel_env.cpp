#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "mcac/channel_env.hpp"
#include "mcac/errors.hpp"
#include "oracles.hpp"

using namespace mcac;

namespace {

std::vector<std::size_t> cycle_from(const MarkovChannelChain& c, std::size_t start = 0) {
    std::vector<std::size_t> order{start};
    for (std::size_t i = c.successor(start); i != start; i = c.successor(i)) order.push_back(i);
    return order;
}

int good_channel(const ChannelStateVector& s) {
    for (int ch = 1; ch <= static_cast<int>(s.size()); ++ch) {
        if (s.good(ch)) return ch;
    }
    return 0;
}

double switch_fraction(MarkovChannelChain chain, std::uint64_t seed, int steps) {
    Rng rng(seed);
    chain.reset(rng);
    int changed = 0;
    for (int t = 0; t < steps; ++t) {
        const auto before = chain.current_index();
        chain.step(rng);
        changed += chain.current_index() != before;
    }
    return static_cast<double>(changed) / steps;
}

}  // namespace

TEST_CASE("round robin on three channels") {
    const auto c = make_round_robin(3, 0.9);
    REQUIRE(c.n_states() == 3);
    CHECK(c.state(0).to_string() == "100");
    CHECK(c.state(1).to_string() == "010");
    CHECK(c.state(2).to_string() == "001");
    CHECK(c.successor(0) == 1);
    CHECK(c.successor(1) == 2);
    CHECK(c.successor(2) == 0);
}

TEST_CASE("round robin cycle length and good channel order") {
    const auto c = make_round_robin(16, 0.75);
    CHECK(c.n_states() == 16);
    const auto order = cycle_from(c);
    CHECK(order.size() == 16);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int now = good_channel(c.state(order[i]));
        const int next = good_channel(c.state(c.successor(order[i])));
        CHECK(next == now % 16 + 1);
    }
}

TEST_CASE("p = 1 on two channels alternates") {
    auto c = make_round_robin(2, 1.0);
    Rng rng(5);
    c.reset(rng);
    int prev = good_channel(c.current());
    for (int t = 0; t < 50; ++t) {
        const int now = good_channel(c.step(rng));
        CHECK(now != prev);
        prev = now;
    }
}

TEST_CASE("generator argument errors") {
    CHECK_THROWS_AS(make_round_robin(1, 0.5), ConfigError);
    CHECK_THROWS_AS(make_round_robin(4, 1.5), ConfigError);
    CHECK_THROWS_AS(make_round_robin(4, -0.1), ConfigError);
    CHECK_THROWS_AS(make_arbitrary(1, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(make_correlated_subsets(10, 3, 0.9, 1), ConfigError);
}

TEST_CASE("chain constructor rejects broken successor maps") {
    std::vector<ChannelStateVector> s{{{1, 0, 0}}, {{0, 1, 0}}, {{0, 0, 1}}};
    CHECK_NOTHROW(MarkovChannelChain(s, {1, 2, 0}, 0.5));
    CHECK_THROWS_AS(MarkovChannelChain(s, {1, 0, 2}, 0.5), ConfigError);  // two cycles
    CHECK_THROWS_AS(MarkovChannelChain(s, {1, 1, 0}, 0.5), ConfigError);  // not a permutation
    CHECK_THROWS_AS(MarkovChannelChain(s, {1, 2}, 0.5), ConfigError);
    std::vector<ChannelStateVector> ragged{{{1, 0, 0}}, {{0, 1}}};
    CHECK_THROWS_AS(MarkovChannelChain(ragged, {1, 0}, 0.5), ConfigError);
    std::vector<ChannelStateVector> bad_bit{{{2, 0}}};
    CHECK_THROWS_AS(MarkovChannelChain(bad_bit, {0}, 0.5), ConfigError);
}

TEST_CASE("arbitrary order is seed-deterministic") {
    CHECK(make_arbitrary(16, 0.9, 7) == make_arbitrary(16, 0.9, 7));
    CHECK(make_arbitrary(16, 0.9, 7).successors() == make_arbitrary(16, 0.9, 7).successors());
}

TEST_CASE("ten order seeds give ten distinct cycles") {
    std::set<std::vector<int>> cycles;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto c = make_arbitrary(16, 0.9, seed);
        // Canonical form: good-channel sequence starting from channel 1.
        std::size_t start = 0;
        while (good_channel(c.state(start)) != 1) ++start;
        std::vector<int> seq;
        for (auto i : cycle_from(c, start)) seq.push_back(good_channel(c.state(i)));
        CHECK(seq.size() == 16);
        cycles.insert(seq);
    }
    CHECK(cycles.size() == 10);
}

TEST_CASE("three-channel arbitrary order is one of the two cyclic orders") {
    // Enumerate every cyclic order on {1,2,3} independently: fix 1 first,
    // permute the rest.
    std::set<std::vector<int>> all;
    std::vector<int> rest{2, 3};
    do {
        all.insert({1, rest[0], rest[1]});
    } while (std::next_permutation(rest.begin(), rest.end()));
    REQUIRE(all.size() == 2);
    std::set<std::vector<int>> seen;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto c = make_arbitrary(3, 0.5, seed);
        std::size_t start = 0;
        while (good_channel(c.state(start)) != 1) ++start;
        std::vector<int> seq;
        for (auto i : cycle_from(c, start)) seq.push_back(good_channel(c.state(i)));
        CHECK(all.count(seq) == 1);
        seen.insert(seq);
    }
    CHECK(seen.size() == 2);
}

TEST_CASE("correlated subsets: 32 channels in 8 groups of 4") {
    const auto c = make_correlated_subsets(32, 8, 0.9, 3);
    REQUIRE(c.n_states() == 8);
    std::vector<int> owner(33, -1);
    for (std::size_t s = 0; s < 8; ++s) {
        CHECK(c.state(s).count_good() == 4);
        for (int ch = 1; ch <= 32; ++ch) {
            if (c.state(s).good(ch)) {
                CHECK(owner[ch] == -1);
                owner[ch] = static_cast<int>(s);
            }
        }
    }
    CHECK(std::count(owner.begin() + 1, owner.end(), -1) == 0);
    CHECK(cycle_from(c).size() == 8);
}

TEST_CASE("correlated subsets of size one reduce to a single-good chain") {
    const auto c = make_correlated_subsets(4, 4, 0.9, 11);
    CHECK(c.n_states() == 4);
    std::set<int> goods;
    for (std::size_t s = 0; s < 4; ++s) {
        CHECK(c.state(s).count_good() == 1);
        goods.insert(good_channel(c.state(s)));
    }
    CHECK(goods.size() == 4);
    CHECK(cycle_from(c).size() == 4);
}

TEST_CASE("two subsets at p = 1 alternate") {
    auto c = make_correlated_subsets(8, 2, 1.0, 4);
    Rng rng(9);
    auto prev = c.reset(rng);
    for (int t = 0; t < 20; ++t) {
        const auto now = c.step(rng);
        CHECK_FALSE(now == prev);
        CHECK(now.count_good() == 4);
        prev = now;
    }
}

TEST_CASE("reset") {
    SUBCASE("single state") {
        MarkovChannelChain c({{{1, 0}}}, {0}, 0.5);
        Rng rng(1);
        for (int i = 0; i < 10; ++i) CHECK(c.reset(rng) == ChannelStateVector{{1, 0}});
    }
    SUBCASE("uniform over states") {
        auto c = make_round_robin(8, 0.9);
        Rng rng(2024);
        std::vector<int> hits(8, 0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            c.reset(rng);
            ++hits[c.current_index()];
        }
        for (int h : hits) CHECK(std::abs(static_cast<double>(h) / draws - 1.0 / 8) <= 0.01);
    }
    SUBCASE("reproducible") {
        auto a = make_round_robin(16, 0.9);
        auto b = make_round_robin(16, 0.9);
        Rng ra(77), rb(77);
        for (int i = 0; i < 100; ++i) CHECK(a.reset(ra) == b.reset(rb));
    }
}

TEST_CASE("step extremes") {
    auto c = make_arbitrary(6, 1.0, 2);
    Rng rng(3);
    c.reset(rng);
    for (int i = 0; i < 30; ++i) {
        const auto before = c.current_index();
        c.step(rng);
        CHECK(c.current_index() == c.successor(before));
    }
    auto still = make_arbitrary(6, 0.0, 2);
    still.reset(rng);
    const auto fixed = still.current_index();
    for (int i = 0; i < 30; ++i) CHECK(still.step(rng) == still.state(fixed));
}

TEST_CASE("empirical switch frequency matches p") {
    for (double p : {0.25, 0.5, 0.9}) {
        CAPTURE(p);
        CHECK(std::abs(switch_fraction(make_round_robin(16, p), 101, 100000) - p) <= 0.01);
        CHECK(std::abs(switch_fraction(make_correlated_subsets(32, 8, p, 5), 102, 100000) - p) <=
              0.01);
    }
}

TEST_CASE("sense") {
    const ChannelStateVector s{{0, 1, 0}};
    CHECK(sense(s, 2) == 1);
    CHECK(sense(s, 1) == -1);
    const ChannelStateVector bad{{0, 0, 0}};
    for (int ch = 1; ch <= 3; ++ch) CHECK(sense(bad, ch) == -1);
    CHECK_THROWS_AS(sense(s, 0), ActionError);
    CHECK_THROWS_AS(sense(s, 4), ActionError);
}

TEST_CASE("genie reward formula") {
    CHECK(genie_average_reward(0.9) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(genie_average_reward(0.5) == doctest::Approx(0.0));
    CHECK(genie_average_reward(1.0) == doctest::Approx(1.0));
    CHECK(genie_average_reward(0.1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("independent genie simulation agrees with the formula") {
    for (double p : {0.25, 0.75, 0.9, 0.95}) {
        CAPTURE(p);
        CHECK(std::abs(oracle::simulate_genie(16, p, 100000, 31) - genie_average_reward(p)) <=
              0.01);
    }
}

TEST_CASE("library genie policy reaches the bound") {
    for (double p : {0.3, 0.9}) {
        CAPTURE(p);
        Environment env(PatternSpec{PatternKind::ArbitraryOrder, 16, 1, p, 4}, 12);
        long long total = 0;
        const int steps = 100000;
        for (int t = 0; t < steps; ++t) {
            total += env.sense(genie_channel(env.chain(), env.previous_index()));
            env.advance();
        }
        CHECK(std::abs(static_cast<double>(total) / steps - genie_average_reward(p)) <= 0.01);
    }
}

TEST_CASE("trajectory invariants and determinism") {
    const PatternSpec rr{PatternKind::ArbitraryOrder, 16, 1, 0.9, 3};
    const PatternSpec cs{PatternKind::CorrelatedSubsets, 32, 8, 0.9, 3};
    Environment a(rr, 5), b(rr, 5);
    for (int t = 0; t < 5000; ++t) {
        REQUIRE(a.state().count_good() == 1);
        REQUIRE(a.state() == b.state());
        for (int ch = 1; ch <= 16; ++ch) {
            const int r = a.sense(ch);
            REQUIRE((r == 1 || r == -1));
        }
        a.advance();
        b.advance();
    }
    // Correlated subsets: the good set is always one of the fixed groups.
    Environment c(cs, 8);
    std::set<std::string> groups;
    for (std::size_t s = 0; s < c.chain().n_states(); ++s) groups.insert(c.chain().state(s).to_string());
    for (int t = 0; t < 5000; ++t) {
        REQUIRE(c.state().count_good() == 4);
        REQUIRE(groups.count(c.state().to_string()) == 1);
        c.advance();
    }
}

TEST_CASE("time-varying schedule switches pattern at the segment start") {
    TimeVaryingSchedule sched;
    sched.segments.push_back({0, PatternSpec{PatternKind::CorrelatedSubsets, 32, 8, 0.9, 1}});
    sched.segments.push_back({100, PatternSpec{PatternKind::CorrelatedSubsets, 32, 8, 0.9, 2}});
    Environment env(sched, 3);
    const auto first = make_chain(sched.segments[0].pattern);
    const auto second = make_chain(sched.segments[1].pattern);
    for (int t = 0; t < 100; ++t) {
        CHECK(env.segment_index() == 0);
        env.advance();
    }
    CHECK(env.time() == 100);
    CHECK(env.segment_index() == 1);
    CHECK(env.chain().successors() == second.successors());
    CHECK_FALSE(first.successors() == second.successors());

    TimeVaryingSchedule bad;
    bad.segments.push_back({5, sched.segments[0].pattern});
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.segments = {{0, sched.segments[0].pattern}, {0, sched.segments[1].pattern}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pattern names round-trip") {
    for (auto k : {PatternKind::RoundRobin, PatternKind::ArbitraryOrder, PatternKind::CorrelatedSubsets}) {
        CHECK(parse_pattern_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_pattern_kind("zigzag"), ConfigError);
}
