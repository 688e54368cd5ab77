#include "mcac/observation.hpp"

#include <cstdlib>
#include <string>

#include "mcac/errors.hpp"

namespace mcac {

ObservationWindow::ObservationWindow(int n_channels, int length) : n_channels_(n_channels) {
    if (n_channels < 2 || n_channels > 32767) {
        throw ConfigError("observation window needs 2..32767 channels", "agent");
    }
    if (length < 1) throw ConfigError("observation window length must be >= 1", "agent");
    codes_.assign(static_cast<std::size_t>(length), 0);
}

void ObservationWindow::push(int channel, int reward) {
    if (channel < 1 || channel > n_channels_) {
        throw ActionError("observed channel " + std::to_string(channel) + " outside 1.." +
                          std::to_string(n_channels_));
    }
    if (reward != 1 && reward != -1) {
        throw ActionError("observed reward must be +1 or -1, got " + std::to_string(reward));
    }
    head_ = (head_ + length() - 1) % length();
    codes_[static_cast<std::size_t>(head_)] = static_cast<std::int16_t>(channel * reward);
}

std::int16_t ObservationWindow::code(int col) const {
    return codes_[static_cast<std::size_t>((head_ + col) % length())];
}

int ObservationWindow::at(int channel, int col) const {
    const int c = code(col);
    if (c == 0 || std::abs(c) != channel) return 0;
    return c > 0 ? 1 : -1;
}

std::vector<std::int16_t> ObservationWindow::codes() const {
    std::vector<std::int16_t> out(codes_.size());
    for (int col = 0; col < length(); ++col) out[static_cast<std::size_t>(col)] = code(col);
    return out;
}

ObservationWindow ObservationWindow::from_codes(int n_channels,
                                                const std::vector<std::int16_t>& codes) {
    ObservationWindow w(n_channels, static_cast<int>(codes.size()));
    for (std::size_t col = 0; col < codes.size(); ++col) {
        if (std::abs(codes[col]) > n_channels) {
            throw ActionError("window code " + std::to_string(codes[col]) + " out of range");
        }
        w.codes_[col] = codes[col];
    }
    return w;
}

void ObservationWindow::flatten_codes(int n_channels, std::span<const std::int16_t> codes,
                                      tinynet::Vector& out) {
    out.setZero(static_cast<Eigen::Index>(n_channels) * static_cast<Eigen::Index>(codes.size()));
    for (std::size_t col = 0; col < codes.size(); ++col) {
        const int c = codes[col];
        if (c == 0) continue;
        if (std::abs(c) > n_channels) {
            throw ActionError("window code " + std::to_string(c) + " out of range");
        }
        out[static_cast<Eigen::Index>(col) * n_channels + std::abs(c) - 1] = c > 0 ? 1.0 : -1.0;
    }
}

void ObservationWindow::flatten_into(tinynet::Vector& out) const {
    out.setZero(static_cast<Eigen::Index>(n_channels_) * length());
    for (int col = 0; col < length(); ++col) {
        const int c = code(col);
        if (c == 0) continue;
        out[static_cast<Eigen::Index>(col) * n_channels_ + std::abs(c) - 1] = c > 0 ? 1.0 : -1.0;
    }
}

tinynet::Vector ObservationWindow::flatten() const {
    tinynet::Vector out;
    flatten_into(out);
    return out;
}

}  // namespace mcac
