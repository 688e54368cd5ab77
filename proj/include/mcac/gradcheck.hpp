#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mcac/tinynet.hpp"

namespace mcac::tinynet {

// Central finite-difference checker. It only ever evaluates the loss, so it
// stays independent of backward().

using ScalarLoss = std::function<double(const Mlp&)>;
// Any discrete signature of the loss's non-smooth points (e.g. ReLU masks).
// A perturbation that changes the signature straddles a kink and is skipped.
using KinkSignature = std::function<std::vector<std::uint8_t>(const Mlp&)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

// |a - f| / max(1e-8, |a| + |f|)
double relative_error(double analytic, double numeric);

GradCheckResult check_gradients(const Mlp& mlp, const ScalarLoss& loss, const Gradients& analytic,
                                double step = 1e-5, const KinkSignature& signature = {});

// ReLU on/off pattern of every hidden unit over the given inputs.
std::vector<std::uint8_t> relu_pattern(const Mlp& mlp, const std::vector<Vector>& inputs);

}  // namespace mcac::tinynet
