#include "mcac/channel_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcac/errors.hpp"

namespace mcac {

namespace {

void check_p(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError("switching probability p must lie in [0,1], got " + std::to_string(p),
                          "channel-env");
    }
}

void check_channels(int n_channels) {
    if (n_channels < 2) {
        throw ConfigError("need at least 2 channels, got " + std::to_string(n_channels),
                          "channel-env");
    }
}

ChannelStateVector single_good(int n_channels, int good_index) {
    ChannelStateVector s;
    s.bits.assign(static_cast<std::size_t>(n_channels), 0);
    s.bits[static_cast<std::size_t>(good_index)] = 1;
    return s;
}

// Successor map for the cycle order[0] -> order[1] -> ... -> order[0].
std::vector<std::size_t> cycle_from_order(const std::vector<std::size_t>& order) {
    std::vector<std::size_t> successor(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        successor[order[i]] = order[(i + 1) % order.size()];
    }
    return successor;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

}  // namespace

std::size_t ChannelStateVector::count_good() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string ChannelStateVector::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

MarkovChannelChain::MarkovChannelChain(std::vector<ChannelStateVector> states,
                                       std::vector<std::size_t> successor, double p)
    : states_(std::move(states)), successor_(std::move(successor)), p_(p) {
    check_p(p_);
    if (states_.empty()) throw ConfigError("chain needs at least one state", "channel-env");
    const std::size_t n = states_.front().size();
    check_channels(static_cast<int>(n));
    if (n < 63 && states_.size() > (std::size_t{1} << n)) {
        throw ConfigError("chain has more than 2^N states", "channel-env");
    }
    for (const auto& s : states_) {
        if (s.size() != n) throw ConfigError("chain states differ in length", "channel-env");
        for (auto b : s.bits) {
            if (b > 1) throw ConfigError("channel state bits must be 0 or 1", "channel-env");
        }
    }
    if (successor_.size() != states_.size()) {
        throw ConfigError("successor map size does not match state count", "channel-env");
    }
    // Walking the successor map from state 0 must visit every state once.
    std::vector<bool> seen(states_.size(), false);
    std::size_t at = 0;
    for (std::size_t k = 0; k < states_.size(); ++k) {
        if (at >= states_.size() || seen[at]) {
            throw ConfigError("successor map is not a single cycle over all states",
                              "channel-env");
        }
        seen[at] = true;
        at = successor_[at];
    }
    if (at != 0) {
        throw ConfigError("successor map is not a single cycle over all states", "channel-env");
    }
}

void MarkovChannelChain::set_current(std::size_t i) {
    if (i >= states_.size()) throw ConfigError("state index out of range", "channel-env");
    current_ = i;
}

const ChannelStateVector& MarkovChannelChain::reset(Rng& rng) {
    current_ = static_cast<std::size_t>(rng.below(states_.size()));
    return states_[current_];
}

const ChannelStateVector& MarkovChannelChain::step(Rng& rng) {
    if (rng.bernoulli(p_)) current_ = successor_[current_];
    return states_[current_];
}

std::string to_string(PatternKind kind) {
    switch (kind) {
        case PatternKind::RoundRobin: return "round_robin";
        case PatternKind::ArbitraryOrder: return "arbitrary";
        case PatternKind::CorrelatedSubsets: return "correlated_subsets";
    }
    return "?";
}

PatternKind parse_pattern_kind(const std::string& name) {
    if (name == "round_robin") return PatternKind::RoundRobin;
    if (name == "arbitrary") return PatternKind::ArbitraryOrder;
    if (name == "correlated_subsets") return PatternKind::CorrelatedSubsets;
    throw ConfigError("unknown pattern '" + name +
                      "' (expected round_robin, arbitrary or correlated_subsets)");
}

MarkovChannelChain make_round_robin(int n_channels, double p) {
    check_channels(n_channels);
    check_p(p);
    std::vector<ChannelStateVector> states;
    std::vector<std::size_t> order(static_cast<std::size_t>(n_channels));
    for (int i = 0; i < n_channels; ++i) states.push_back(single_good(n_channels, i));
    std::iota(order.begin(), order.end(), std::size_t{0});
    return MarkovChannelChain(std::move(states), cycle_from_order(order), p);
}

MarkovChannelChain make_arbitrary(int n_channels, double p, std::uint64_t order_seed) {
    check_channels(n_channels);
    check_p(p);
    std::vector<ChannelStateVector> states;
    for (int i = 0; i < n_channels; ++i) states.push_back(single_good(n_channels, i));
    // A uniform shuffle read as a cycle is a uniform cyclic permutation.
    std::vector<std::size_t> order(static_cast<std::size_t>(n_channels));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(order_seed, 0x0a));
    shuffle(order, rng);
    return MarkovChannelChain(std::move(states), cycle_from_order(order), p);
}

MarkovChannelChain make_correlated_subsets(int n_channels, int n_subsets, double p,
                                           std::uint64_t order_seed) {
    check_channels(n_channels);
    check_p(p);
    if (n_subsets < 1 || n_channels % n_subsets != 0) {
        throw ConfigError("channels (" + std::to_string(n_channels) +
                              ") not divisible into subsets (" + std::to_string(n_subsets) + ")",
                          "channel-env");
    }
    const int subset_size = n_channels / n_subsets;
    std::vector<int> channels(static_cast<std::size_t>(n_channels));
    std::iota(channels.begin(), channels.end(), 0);
    Rng partition_rng(derive_seed(order_seed, 0x5b));
    shuffle(channels, partition_rng);

    std::vector<ChannelStateVector> states;
    for (int k = 0; k < n_subsets; ++k) {
        ChannelStateVector s;
        s.bits.assign(static_cast<std::size_t>(n_channels), 0);
        for (int j = 0; j < subset_size; ++j) {
            s.bits[static_cast<std::size_t>(channels[static_cast<std::size_t>(k * subset_size + j)])] = 1;
        }
        states.push_back(std::move(s));
    }
    std::vector<std::size_t> order(static_cast<std::size_t>(n_subsets));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(order_seed, 0x0a));
    shuffle(order, order_rng);
    return MarkovChannelChain(std::move(states), cycle_from_order(order), p);
}

MarkovChannelChain make_chain(const PatternSpec& spec) {
    switch (spec.kind) {
        case PatternKind::RoundRobin: return make_round_robin(spec.n_channels, spec.p);
        case PatternKind::ArbitraryOrder:
            return make_arbitrary(spec.n_channels, spec.p, spec.order_seed);
        case PatternKind::CorrelatedSubsets:
            return make_correlated_subsets(spec.n_channels, spec.n_subsets, spec.p, spec.order_seed);
    }
    throw ConfigError("unknown pattern kind", "channel-env");
}

int sense(const ChannelStateVector& state, int channel) {
    if (channel < 1 || static_cast<std::size_t>(channel) > state.size()) {
        throw ActionError("channel index " + std::to_string(channel) + " outside 1.." +
                          std::to_string(state.size()));
    }
    return state.bits[static_cast<std::size_t>(channel - 1)] ? +1 : -1;
}

double genie_average_reward(double p) { return 2.0 * std::max(p, 1.0 - p) - 1.0; }

int genie_channel(const MarkovChannelChain& chain, std::size_t known_state) {
    const std::size_t next = chain.p() >= 0.5 ? chain.successor(known_state) : known_state;
    const auto& bits = chain.state(next).bits;
    const auto it = std::find(bits.begin(), bits.end(), std::uint8_t{1});
    // A state with no good channel gives the genie nothing to aim for.
    if (it == bits.end()) return 1;
    return static_cast<int>(it - bits.begin()) + 1;
}

void TimeVaryingSchedule::validate() const {
    if (segments.empty()) throw ConfigError("schedule has no segments", "channel-env");
    if (segments.front().start_time != 0) {
        throw ConfigError("first schedule segment must start at slot 0", "channel-env");
    }
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].start_time <= segments[i - 1].start_time) {
            throw ConfigError("schedule start times must be strictly increasing", "channel-env");
        }
        if (segments[i].pattern.n_channels != segments.front().pattern.n_channels) {
            throw ConfigError("schedule segments must share the channel count", "channel-env");
        }
    }
}

Environment::Environment(const PatternSpec& pattern, std::uint64_t seed)
    : Environment(make_chain(pattern), seed) {}

Environment::Environment(MarkovChannelChain chain, std::uint64_t seed) : rng_(seed) {
    chains_.push_back(std::move(chain));
    starts_.push_back(0);
    chains_.front().reset(rng_);
    previous_ = chains_.front().current_index();
}

Environment::Environment(TimeVaryingSchedule schedule, std::uint64_t seed) : rng_(seed) {
    schedule.validate();
    for (const auto& seg : schedule.segments) {
        chains_.push_back(make_chain(seg.pattern));
        starts_.push_back(seg.start_time);
    }
    chains_.front().reset(rng_);
    previous_ = chains_.front().current_index();
}

void Environment::advance() {
    ++time_;
    if (segment_ + 1 < chains_.size() && time_ == starts_[segment_ + 1]) {
        ++segment_;
        chains_[segment_].reset(rng_);
        previous_ = chains_[segment_].current_index();
        return;
    }
    previous_ = chains_[segment_].current_index();
    chains_[segment_].step(rng_);
}

}  // namespace mcac
