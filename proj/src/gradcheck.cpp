#include "mcac/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mcac/errors.hpp"

namespace mcac::tinynet {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult check_gradients(const Mlp& mlp, const ScalarLoss& loss, const Gradients& analytic,
                                double step, const KinkSignature& signature) {
    if (!analytic.congruent_with(mlp)) throw ShapeError("gradient shapes do not match network");
    GradCheckResult result;
    Mlp probe = mlp;
    const auto base_sig = signature ? signature(mlp) : std::vector<std::uint8_t>{};

    auto check_one = [&](double& param, double a) {
        const double saved = param;
        param = saved + step;
        const double up = loss(probe);
        const bool up_same = !signature || signature(probe) == base_sig;
        param = saved - step;
        const double down = loss(probe);
        const bool down_same = !signature || signature(probe) == base_sig;
        param = saved;
        if (!up_same || !down_same) {
            ++result.skipped;
            return;
        }
        const double numeric = (up - down) / (2.0 * step);
        result.max_relative_error = std::max(result.max_relative_error, relative_error(a, numeric));
        ++result.checked;
    };

    for (std::size_t k = 0; k < probe.layers.size(); ++k) {
        auto& layer = probe.layers[k];
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                check_one(layer.weights(r, c), analytic.d_weights[k](r, c));
            }
        }
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) {
            check_one(layer.biases[r], analytic.d_biases[k][r]);
        }
    }
    return result;
}

std::vector<std::uint8_t> relu_pattern(const Mlp& mlp, const std::vector<Vector>& inputs) {
    std::vector<std::uint8_t> sig;
    for (const auto& x : inputs) {
        const auto pass = forward(mlp, x);
        for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
            if (mlp.layers[k].activation != Activation::ReLU) continue;
            for (Eigen::Index i = 0; i < pass.pre[k].size(); ++i) {
                sig.push_back(pass.pre[k][i] > 0.0 ? 1 : 0);
            }
        }
    }
    return sig;
}

}  // namespace mcac::tinynet
