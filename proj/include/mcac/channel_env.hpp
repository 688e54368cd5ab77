#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mcac/random.hpp"

namespace mcac {

// Hidden joint state of the N channels: 1 = good, 0 = bad.
// Channel indices at this API are 1-based.
struct ChannelStateVector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const noexcept { return bits.size(); }
    bool good(int channel) const { return bits.at(static_cast<std::size_t>(channel - 1)) != 0; }
    std::size_t count_good() const noexcept;
    std::string to_string() const;

    friend bool operator==(const ChannelStateVector&, const ChannelStateVector&) = default;
};

// Markov chain over an explicit list of joint states. Each slot the
// chain moves to the successor of the current state with probability p
// and stays put with probability 1 - p. The successor map is a single
// cycle through all states.
class MarkovChannelChain {
public:
    MarkovChannelChain(std::vector<ChannelStateVector> states,
                       std::vector<std::size_t> successor, double p);

    std::size_t n_channels() const noexcept { return states_.front().size(); }
    std::size_t n_states() const noexcept { return states_.size(); }
    double p() const noexcept { return p_; }

    const ChannelStateVector& state(std::size_t i) const { return states_.at(i); }
    std::size_t successor(std::size_t i) const { return successor_.at(i); }
    const std::vector<std::size_t>& successors() const noexcept { return successor_; }

    std::size_t current_index() const noexcept { return current_; }
    const ChannelStateVector& current() const { return states_[current_]; }
    void set_current(std::size_t i);

    // Uniform over chain states.
    const ChannelStateVector& reset(Rng& rng);
    const ChannelStateVector& step(Rng& rng);

    friend bool operator==(const MarkovChannelChain&, const MarkovChannelChain&) = default;

private:
    std::vector<ChannelStateVector> states_;
    std::vector<std::size_t> successor_;
    double p_;
    std::size_t current_ = 0;
};

enum class PatternKind { RoundRobin, ArbitraryOrder, CorrelatedSubsets };

std::string to_string(PatternKind kind);
PatternKind parse_pattern_kind(const std::string& name);

struct PatternSpec {
    PatternKind kind = PatternKind::RoundRobin;
    int n_channels = 16;
    int n_subsets = 1;  // CorrelatedSubsets only
    double p = 0.9;
    std::uint64_t order_seed = 1;
};

MarkovChannelChain make_round_robin(int n_channels, double p);
MarkovChannelChain make_arbitrary(int n_channels, double p, std::uint64_t order_seed);
MarkovChannelChain make_correlated_subsets(int n_channels, int n_subsets, double p,
                                           std::uint64_t order_seed);
MarkovChannelChain make_chain(const PatternSpec& spec);

// +1 if the channel is good, -1 otherwise. Throws ActionError outside 1..N.
int sense(const ChannelStateVector& state, int channel);

// Steady-state average reward of a policy that knows the previous chain
// state of a single-good-channel chain: 2 max(p, 1 - p) - 1.
double genie_average_reward(double p);

// Channel a one-step-lookahead genie senses when it knows the chain was in
// `known_state` during the previous slot: the lowest good channel of the
// likelier next state.
int genie_channel(const MarkovChannelChain& chain, std::size_t known_state);

struct ScheduleSegment {
    std::int64_t start_time = 0;
    PatternSpec pattern;
};

struct TimeVaryingSchedule {
    std::vector<ScheduleSegment> segments;

    void validate() const;
};

// A chain (or a schedule of chains) with its own RNG and slot clock.
//
// Slot t: the agent senses state(), then advance() moves to slot t + 1.
// When slot t + 1 starts a new schedule segment, the new pattern's chain
// is reset uniformly instead of stepped.
class Environment {
public:
    Environment(const PatternSpec& pattern, std::uint64_t seed);
    Environment(TimeVaryingSchedule schedule, std::uint64_t seed);
    Environment(MarkovChannelChain chain, std::uint64_t seed);

    std::int64_t time() const noexcept { return time_; }
    std::size_t n_channels() const noexcept { return chains_.front().n_channels(); }

    const ChannelStateVector& state() const { return active().current(); }
    int sense(int channel) const { return mcac::sense(state(), channel); }
    void advance();

    const MarkovChannelChain& chain() const { return active(); }
    std::size_t segment_index() const noexcept { return segment_; }
    // State index (in the active chain) during the previous slot. Equals
    // the current index on the first slot of a segment.
    std::size_t previous_index() const noexcept { return previous_; }

private:
    const MarkovChannelChain& active() const { return chains_[segment_]; }

    std::vector<MarkovChannelChain> chains_;
    std::vector<std::int64_t> starts_;
    Rng rng_;
    std::int64_t time_ = 0;
    std::size_t segment_ = 0;
    std::size_t previous_ = 0;
};

}  // namespace mcac
