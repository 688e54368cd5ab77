#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcac::tinynet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1, Softmax = 2 };

std::string to_string(Activation a);

struct LayerShape {
    int in = 0;
    int out = 0;
    Activation activation = Activation::Identity;
};

struct DenseLayer {
    Matrix weights;  // out x in
    Vector biases;   // out
    Activation activation = Activation::Identity;

    int in() const noexcept { return static_cast<int>(weights.cols()); }
    int out() const noexcept { return static_cast<int>(weights.rows()); }
};

// Dense feedforward network. Softmax may only appear on the last layer.
struct Mlp {
    std::vector<DenseLayer> layers;

    // Throws ShapeError on incompatible or empty layer lists.
    void validate() const;
    int input_size() const { return layers.front().in(); }
    int output_size() const { return layers.back().out(); }
    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const Mlp& a, const Mlp& b);
};

// Everything backward() needs: the input and pre-activation of each layer.
struct ForwardPass {
    std::vector<Vector> inputs;  // inputs[k] feeds layer k
    std::vector<Vector> pre;     // pre[k] = W_k inputs[k] + b_k
    Vector output;
};

Vector softmax(const Vector& logits);

ForwardPass forward(const Mlp& mlp, const Vector& input);
// forward() without keeping the cache.
Vector evaluate(const Mlp& mlp, const Vector& input);

// Per-parameter gradients, shaped like the network.
//
// After clear() the object tracks which weight columns accumulate_* has
// written to, so sparse inputs only cost their nonzero columns in
// set-to-zero and apply. Columns outside the tracked set are exactly zero;
// write through d_weights directly only in dense mode (zeros_like or after
// mark_dense()).
struct Gradients {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;

    static Gradients zeros_like(const Mlp& mlp);
    void set_zero();
    // Zero and switch to column tracking.
    void clear();
    void mark_dense();
    void mark_dense(std::size_t layer) { dense_cols_.at(layer) = 1; }
    bool dense(std::size_t layer) const { return dense_cols_.at(layer) != 0; }
    // Columns that may be nonzero in layer k (meaningful when !dense(k)).
    const std::vector<Eigen::Index>& touched(std::size_t layer) const { return touched_.at(layer); }
    void touch(std::size_t layer, Eigen::Index col);
    bool all_finite() const;
    bool congruent_with(const Mlp& mlp) const;

    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);

private:
    std::vector<std::uint8_t> dense_cols_;
    std::vector<std::vector<Eigen::Index>> touched_;
    std::vector<std::vector<std::uint8_t>> marks_;
};

// Gradient of a scalar objective given its gradient w.r.t. the network
// output (the post-activation of the last layer). A softmax head is
// handled with the closed-form vector-Jacobian product.
Gradients backward(const Mlp& mlp, const ForwardPass& pass, const Vector& output_gradient);

// Same, but the gradient is taken w.r.t. the last layer's pre-activation
// (the logits). Used for the fused softmax/log-likelihood head.
Gradients backward_from_logits(const Mlp& mlp, const ForwardPass& pass,
                               const Vector& logit_gradient);

// Adds the logit-space backward result into `into` without allocating.
void accumulate_from_logits(const Mlp& mlp, const ForwardPass& pass, const Vector& logit_gradient,
                            Gradients& into);

enum class Direction { Descent, Ascent };

// theta <- theta -/+ rate * g. Throws NumericError without touching the
// network when g has non-finite entries, and after the update if any
// parameter overflowed.
void apply(Mlp& mlp, const Gradients& g, double rate, Direction direction);

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Plain SGD forwards to apply(). Adam keeps first/second moment estimates;
// for column-tracked gradients only the touched columns' moments and
// weights move (lazy Adam), matching what a sparse input can inform.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerKind kind, const Mlp& mlp, AdamSettings settings = {});

    OptimizerKind kind() const noexcept { return kind_; }
    std::int64_t steps() const noexcept { return steps_; }

    void step(Mlp& mlp, const Gradients& g, double rate, Direction direction);

private:
    OptimizerKind kind_ = OptimizerKind::Sgd;
    AdamSettings settings_;
    std::int64_t steps_ = 0;
    std::vector<Matrix> m_w_, v_w_;
    std::vector<Vector> m_b_, v_b_;
};

struct LrSchedule {
    double base_rate = 1e-4;
    double decay_factor = 0.95;
    std::int64_t decay_interval = 5000;

    // base_rate * decay_factor ^ floor(t / decay_interval)
    double rate_at(std::int64_t t) const;
    void validate() const;
};

// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)), zero biases.
Mlp init_weights(std::span<const LayerShape> shapes, std::uint64_t seed);

// Network container: "TNET", u32 version, u32 layer count, then per layer
// u32 in, u32 out, u8 activation, row-major weights and biases as
// little-endian f64.
inline constexpr std::uint32_t kContainerVersion = 1;
void write_mlp(std::ostream& os, const Mlp& mlp);
Mlp read_mlp(std::istream& is);

}  // namespace mcac::tinynet
