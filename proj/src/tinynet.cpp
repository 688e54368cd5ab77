#include "mcac/tinynet.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

#include "mcac/errors.hpp"
#include "mcac/random.hpp"

namespace mcac::tinynet {

namespace {

// Observation inputs are mostly zeros; below this density the first
// layer is evaluated column by column.
constexpr double kSparseDensity = 0.25;

bool is_sparse(const Vector& x, std::vector<Eigen::Index>& nonzero) {
    nonzero.clear();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) nonzero.push_back(j);
    }
    return static_cast<double>(nonzero.size()) < kSparseDensity * static_cast<double>(x.size());
}

void affine(const DenseLayer& layer, const Vector& x, Vector& z) {
    thread_local std::vector<Eigen::Index> nonzero;
    if (is_sparse(x, nonzero)) {
        z = layer.biases;
        for (auto j : nonzero) z.noalias() += layer.weights.col(j) * x[j];
    } else {
        z.noalias() = layer.weights * x;
        z += layer.biases;
    }
}

Vector activate(Activation a, const Vector& z) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::ReLU: return z.cwiseMax(0.0);
        case Activation::Softmax: return softmax(z);
    }
    return z;
}

void check_pass(const Mlp& mlp, const ForwardPass& pass) {
    if (pass.inputs.size() != mlp.layers.size() || pass.pre.size() != mlp.layers.size()) {
        throw ShapeError("forward cache does not match network depth");
    }
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        if (pass.inputs[k].size() != mlp.layers[k].in() ||
            pass.pre[k].size() != mlp.layers[k].out()) {
            throw ShapeError("forward cache does not match layer " + std::to_string(k));
        }
    }
}

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void read_exact(std::istream& is, char* buf, std::size_t n) {
    is.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw CheckpointError("network block truncated");
    }
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    read_exact(is, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    read_exact(is, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::ReLU: return "relu";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

void Mlp::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        if (l.weights.rows() == 0 || l.weights.cols() == 0) {
            throw ShapeError("layer " + std::to_string(k) + " has an empty weight matrix");
        }
        if (l.biases.size() != l.weights.rows()) {
            throw ShapeError("layer " + std::to_string(k) + " bias length != output width");
        }
        if (k + 1 < layers.size() && layers[k + 1].in() != l.out()) {
            throw ShapeError("layer " + std::to_string(k + 1) + " input width " +
                             std::to_string(layers[k + 1].in()) + " != previous output width " +
                             std::to_string(l.out()));
        }
        if (l.activation == Activation::Softmax && k + 1 != layers.size()) {
            throw ShapeError("softmax is only allowed on the final layer");
        }
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
    }
    return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const auto& x = a.layers[k];
        const auto& y = b.layers[k];
        if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
            x.weights.cols() != y.weights.cols() || x.weights != y.weights ||
            x.biases != y.biases) {
            return false;
        }
    }
    return true;
}

Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp();
    return e / e.sum();
}

ForwardPass forward(const Mlp& mlp, const Vector& input) {
    if (input.size() != mlp.input_size()) {
        throw ShapeError("input length " + std::to_string(input.size()) +
                         " != network input width " + std::to_string(mlp.input_size()));
    }
    ForwardPass pass;
    pass.inputs.reserve(mlp.layers.size());
    pass.pre.resize(mlp.layers.size());
    pass.inputs.push_back(input);
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        const auto& layer = mlp.layers[k];
        affine(layer, pass.inputs[k], pass.pre[k]);
        Vector post = activate(layer.activation, pass.pre[k]);
        if (k + 1 < mlp.layers.size()) {
            pass.inputs.push_back(std::move(post));
        } else {
            pass.output = std::move(post);
        }
    }
    return pass;
}

Vector evaluate(const Mlp& mlp, const Vector& input) { return forward(mlp, input).output; }

Gradients Gradients::zeros_like(const Mlp& mlp) {
    Gradients g;
    for (const auto& l : mlp.layers) {
        g.d_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        g.d_biases.push_back(Vector::Zero(l.biases.size()));
        g.marks_.emplace_back(static_cast<std::size_t>(l.weights.cols()), 0);
    }
    g.dense_cols_.assign(mlp.layers.size(), 1);
    g.touched_.resize(mlp.layers.size());
    return g;
}

void Gradients::set_zero() {
    for (std::size_t k = 0; k < d_weights.size(); ++k) {
        if (dense(k)) {
            d_weights[k].setZero();
        } else {
            for (auto c : touched_[k]) d_weights[k].col(c).setZero();
        }
        d_biases[k].setZero();
    }
    for (std::size_t k = 0; k < touched_.size(); ++k) {
        for (auto c : touched_[k]) marks_[k][static_cast<std::size_t>(c)] = 0;
        touched_[k].clear();
    }
}

void Gradients::clear() {
    set_zero();
    std::fill(dense_cols_.begin(), dense_cols_.end(), std::uint8_t{0});
}

void Gradients::mark_dense() {
    std::fill(dense_cols_.begin(), dense_cols_.end(), std::uint8_t{1});
}

void Gradients::touch(std::size_t layer, Eigen::Index col) {
    if (dense(layer)) return;
    auto& mark = marks_[layer][static_cast<std::size_t>(col)];
    if (!mark) {
        mark = 1;
        touched_[layer].push_back(col);
    }
}

bool Gradients::all_finite() const {
    for (std::size_t k = 0; k < d_weights.size(); ++k) {
        if (dense(k)) {
            if (!d_weights[k].allFinite()) return false;
        } else {
            for (auto c : touched_[k]) {
                if (!d_weights[k].col(c).allFinite()) return false;
            }
        }
    }
    for (const auto& b : d_biases) {
        if (!b.allFinite()) return false;
    }
    return true;
}

bool Gradients::congruent_with(const Mlp& mlp) const {
    if (d_weights.size() != mlp.layers.size() || d_biases.size() != mlp.layers.size()) return false;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        const auto& l = mlp.layers[k];
        if (d_weights[k].rows() != l.weights.rows() || d_weights[k].cols() != l.weights.cols() ||
            d_biases[k].size() != l.biases.size()) {
            return false;
        }
    }
    return true;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.d_weights.size() != d_weights.size()) throw ShapeError("gradient depth mismatch");
    for (std::size_t k = 0; k < d_weights.size(); ++k) {
        if (d_weights[k].rows() != other.d_weights[k].rows() ||
            d_weights[k].cols() != other.d_weights[k].cols()) {
            throw ShapeError("gradient shape mismatch");
        }
        if (other.dense(k)) {
            dense_cols_[k] = 1;
            d_weights[k] += other.d_weights[k];
        } else {
            for (auto c : other.touched_[k]) {
                touch(k, c);
                d_weights[k].col(c) += other.d_weights[k].col(c);
            }
        }
        d_biases[k] += other.d_biases[k];
    }
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    for (auto& w : d_weights) w *= s;
    for (auto& b : d_biases) b *= s;
    return *this;
}

void accumulate_from_logits(const Mlp& mlp, const ForwardPass& pass, const Vector& logit_gradient,
                            Gradients& into) {
    check_pass(mlp, pass);
    if (!into.congruent_with(mlp)) throw ShapeError("gradient shapes do not match network");
    if (logit_gradient.size() != mlp.output_size()) {
        throw ShapeError("output gradient length does not match network output width");
    }
    thread_local std::vector<Eigen::Index> nonzero;
    Vector delta = logit_gradient;
    for (std::size_t k = mlp.layers.size(); k-- > 0;) {
        const Vector& x = pass.inputs[k];
        if (is_sparse(x, nonzero)) {
            for (auto j : nonzero) {
                into.touch(k, j);
                into.d_weights[k].col(j).noalias() += delta * x[j];
            }
        } else {
            into.mark_dense(k);
            into.d_weights[k].noalias() += delta * x.transpose();
        }
        into.d_biases[k] += delta;
        if (k == 0) break;
        Vector upstream = mlp.layers[k].weights.transpose() * delta;
        // Hidden layers are ReLU or identity; the subgradient at 0 is 0.
        if (mlp.layers[k - 1].activation == Activation::ReLU) {
            upstream = (pass.pre[k - 1].array() > 0.0).select(upstream, 0.0);
        }
        delta = std::move(upstream);
    }
}

Gradients backward_from_logits(const Mlp& mlp, const ForwardPass& pass,
                               const Vector& logit_gradient) {
    Gradients g = Gradients::zeros_like(mlp);
    accumulate_from_logits(mlp, pass, logit_gradient, g);
    return g;
}

Gradients backward(const Mlp& mlp, const ForwardPass& pass, const Vector& output_gradient) {
    if (output_gradient.size() != mlp.output_size()) {
        throw ShapeError("output gradient length does not match network output width");
    }
    check_pass(mlp, pass);
    const auto& last = mlp.layers.back();
    Vector logit_gradient;
    switch (last.activation) {
        case Activation::Identity: logit_gradient = output_gradient; break;
        case Activation::ReLU:
            logit_gradient = (pass.pre.back().array() > 0.0).select(output_gradient, 0.0);
            break;
        case Activation::Softmax: {
            // J^T g for J = diag(s) - s s^T
            const Vector& s = pass.output;
            logit_gradient = s.cwiseProduct(output_gradient.array().matrix() -
                                            Vector::Constant(s.size(), s.dot(output_gradient)));
            break;
        }
    }
    return backward_from_logits(mlp, pass, logit_gradient);
}

void apply(Mlp& mlp, const Gradients& g, double rate, Direction direction) {
    if (!g.congruent_with(mlp)) throw ShapeError("gradient shapes do not match network");
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw NumericError("learning rate must be positive and finite");
    }
    if (!g.all_finite()) throw NumericError("non-finite gradient entries");
    const double signed_rate = direction == Direction::Descent ? -rate : rate;
    bool finite = true;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        auto& layer = mlp.layers[k];
        if (g.dense(k)) {
            layer.weights.noalias() += signed_rate * g.d_weights[k];
            finite = finite && layer.weights.allFinite();
        } else {
            for (auto c : g.touched(k)) {
                layer.weights.col(c).noalias() += signed_rate * g.d_weights[k].col(c);
                finite = finite && layer.weights.col(c).allFinite();
            }
        }
        layer.biases.noalias() += signed_rate * g.d_biases[k];
        finite = finite && layer.biases.allFinite();
    }
    if (!finite) throw NumericError("parameters became non-finite after update");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)", "tinynet");
}

Optimizer::Optimizer(OptimizerKind kind, const Mlp& mlp, AdamSettings settings)
    : kind_(kind), settings_(settings) {
    if (kind_ != OptimizerKind::Adam) return;
    for (const auto& l : mlp.layers) {
        m_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        v_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        m_b_.push_back(Vector::Zero(l.biases.size()));
        v_b_.push_back(Vector::Zero(l.biases.size()));
    }
}

void Optimizer::step(Mlp& mlp, const Gradients& g, double rate, Direction direction) {
    if (kind_ == OptimizerKind::Sgd) {
        apply(mlp, g, rate, direction);
        ++steps_;
        return;
    }
    if (!g.congruent_with(mlp) || m_w_.size() != mlp.layers.size()) {
        throw ShapeError("gradient shapes do not match network");
    }
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw NumericError("learning rate must be positive and finite");
    }
    if (!g.all_finite()) throw NumericError("non-finite gradient entries");
    ++steps_;
    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double signed_rate = (direction == Direction::Descent ? -rate : rate) / c1;
    const double eps = settings_.epsilon;
    auto update = [&](auto&& param, auto&& m, auto&& v, const auto& grad) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseAbs2();
        param.array() += signed_rate * m.array() / ((v.array() / c2).sqrt() + eps);
    };
    bool finite = true;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        auto& layer = mlp.layers[k];
        if (g.dense(k)) {
            update(layer.weights, m_w_[k], v_w_[k], g.d_weights[k]);
            finite = finite && layer.weights.allFinite();
        } else {
            for (auto c : g.touched(k)) {
                update(layer.weights.col(c), m_w_[k].col(c), v_w_[k].col(c), g.d_weights[k].col(c));
                finite = finite && layer.weights.col(c).allFinite();
            }
        }
        update(layer.biases, m_b_[k], v_b_[k], g.d_biases[k]);
        finite = finite && layer.biases.allFinite();
    }
    if (!finite) throw NumericError("parameters became non-finite after update");
}

double LrSchedule::rate_at(std::int64_t t) const {
    if (t < 0) t = 0;
    return base_rate * std::pow(decay_factor, static_cast<double>(t / decay_interval));
}

void LrSchedule::validate() const {
    if (!(base_rate > 0.0) || !std::isfinite(base_rate)) {
        throw ConfigError("learning rate must be positive", "tinynet");
    }
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
        throw ConfigError("decay factor must lie in (0,1]", "tinynet");
    }
    if (decay_interval < 1) throw ConfigError("decay interval must be >= 1 slot", "tinynet");
}

Mlp init_weights(std::span<const LayerShape> shapes, std::uint64_t seed) {
    Rng rng(seed);
    Mlp mlp;
    for (const auto& s : shapes) {
        if (s.in < 1 || s.out < 1) throw ShapeError("layer dimensions must be positive");
        DenseLayer layer;
        layer.activation = s.activation;
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        layer.weights.resize(s.out, s.in);
        // Row-major draw order so the stream does not depend on storage order.
        for (int r = 0; r < s.out; ++r) {
            for (int c = 0; c < s.in; ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
        }
        layer.biases = Vector::Zero(s.out);
        mlp.layers.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
}

void write_mlp(std::ostream& os, const Mlp& mlp) {
    mlp.validate();
    os.write("TNET", 4);
    put_u32(os, kContainerVersion);
    put_u32(os, static_cast<std::uint32_t>(mlp.layers.size()));
    for (const auto& l : mlp.layers) {
        put_u32(os, static_cast<std::uint32_t>(l.in()));
        put_u32(os, static_cast<std::uint32_t>(l.out()));
        const char act = static_cast<char>(l.activation);
        os.write(&act, 1);
        for (int r = 0; r < l.out(); ++r) {
            for (int c = 0; c < l.in(); ++c) put_f64(os, l.weights(r, c));
        }
        for (int r = 0; r < l.out(); ++r) put_f64(os, l.biases[r]);
    }
    if (!os) throw CheckpointError("failed writing network block");
}

Mlp read_mlp(std::istream& is) {
    char magic[4];
    read_exact(is, magic, 4);
    if (std::string(magic, 4) != "TNET") throw CheckpointError("bad network block magic");
    const auto version = get_u32(is);
    if (version != kContainerVersion) {
        throw CheckpointError("unsupported network container version " + std::to_string(version));
    }
    const auto n_layers = get_u32(is);
    if (n_layers == 0 || n_layers > 64) throw CheckpointError("implausible layer count");
    Mlp mlp;
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const auto in = get_u32(is);
        const auto out = get_u32(is);
        if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) {
            throw CheckpointError("implausible layer dimensions");
        }
        char act = 0;
        read_exact(is, &act, 1);
        if (act < 0 || act > 2) throw CheckpointError("unknown activation tag");
        DenseLayer layer;
        layer.activation = static_cast<Activation>(act);
        layer.weights.resize(out, in);
        layer.biases.resize(out);
        for (std::uint32_t r = 0; r < out; ++r) {
            for (std::uint32_t c = 0; c < in; ++c) layer.weights(r, c) = get_f64(is);
        }
        for (std::uint32_t r = 0; r < out; ++r) layer.biases[r] = get_f64(is);
        mlp.layers.push_back(std::move(layer));
    }
    try {
        mlp.validate();
    } catch (const ShapeError& e) {
        throw CheckpointError(std::string("inconsistent network block: ") + e.what());
    }
    return mlp;
}

}  // namespace mcac::tinynet
