#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcac/tinynet.hpp"

namespace mcac {

// The agent's N x M record of its last M sensing results.
//
// Column 0 holds the newest observation O_t, column M-1 the oldest. A
// column is all zero except (possibly) the sensed channel's row, which
// holds the reward. Stored compactly as one signed code per column:
// reward * channel, or 0 for a column not yet filled.
class ObservationWindow {
public:
    ObservationWindow(int n_channels, int length);

    int n_channels() const noexcept { return n_channels_; }
    int length() const noexcept { return static_cast<int>(codes_.size()); }

    // Shift every column one step older and write the new observation.
    void push(int channel, int reward);

    // Entry for 1-based channel `channel` in column `col`.
    int at(int channel, int col) const;
    // Signed code of column `col` (newest first).
    std::int16_t code(int col) const;
    std::vector<std::int16_t> codes() const;
    static ObservationWindow from_codes(int n_channels, const std::vector<std::int16_t>& codes);

    // Column-major, newest column first: entry (channel, col) lands at
    // col * N + (channel - 1).
    tinynet::Vector flatten() const;
    void flatten_into(tinynet::Vector& out) const;
    // Same layout from compact codes (newest first), without building a window.
    static void flatten_codes(int n_channels, std::span<const std::int16_t> codes,
                              tinynet::Vector& out);

    friend bool operator==(const ObservationWindow& a, const ObservationWindow& b) {
        return a.n_channels_ == b.n_channels_ && a.codes() == b.codes();
    }

private:
    int n_channels_;
    std::vector<std::int16_t> codes_;  // ring buffer
    int head_ = 0;                     // index of column 0 in codes_
};

}  // namespace mcac
