#pragma once

#include "distvae/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace distvae::nn {

enum class Activation { identity, relu };

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight;  // out x in
    Vector<Scalar> bias;    // out
    Activation activation = Activation::identity;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

template <typename Scalar>
struct Mlp {
    std::vector<DenseLayer<Scalar>> layers;

    Eigen::Index in_dim() const { return layers.front().in_dim(); }
    Eigen::Index out_dim() const { return layers.back().out_dim(); }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
};

/// Per-layer inputs and pre-activations of one forward pass.
template <typename Scalar>
struct ForwardCache {
    std::vector<Matrix<Scalar>> inputs;
    std::vector<Matrix<Scalar>> pre_activations;
};

template <typename Scalar>
struct LayerGradient {
    Matrix<Scalar> weight;
    Vector<Scalar> bias;
};

/// Accumulated gradients, one entry per layer, shaped like the parameters.
template <typename Scalar>
using GradientTape = std::vector<LayerGradient<Scalar>>;

template <typename Scalar>
GradientTape<Scalar> zero_tape(const Mlp<Scalar>& net) {
    GradientTape<Scalar> tape;
    tape.reserve(net.layers.size());
    for (const auto& l : net.layers)
        tape.push_back({Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()), Vector<Scalar>::Zero(l.bias.size())});
    return tape;
}

template <typename Scalar>
void zero(GradientTape<Scalar>& tape) {
    for (auto& g : tape) {
        g.weight.setZero();
        g.bias.setZero();
    }
}

// Stable log(1 + exp(x)).
template <typename Scalar>
Scalar softplus(Scalar x) {
    if (x > Scalar(30)) return x;
    if (x < Scalar(-30)) return std::exp(x);
    return std::log1p(std::exp(x));
}

/// d softplus / dx, the logistic function.
template <typename Scalar>
Scalar softplus_grad(Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// Builds a net with the given layer widths; hidden layers use `hidden`,
/// the output layer is linear. Glorot-uniform weights, zero biases.
template <typename Scalar, typename Rng>
Mlp<Scalar> make_mlp(const std::vector<Eigen::Index>& widths, Activation hidden, Rng& rng) {
    if (widths.size() < 2) throw Error("an MLP needs at least an input and an output width");
    Mlp<Scalar> net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const auto fan_in = widths[i];
        const auto fan_out = widths[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer<Scalar> layer;
        layer.weight.resize(fan_out, fan_in);
        for (Eigen::Index c = 0; c < fan_in; ++c)
            for (Eigen::Index r = 0; r < fan_out; ++r) layer.weight(r, c) = static_cast<Scalar>(dist(rng));
        layer.bias = Vector<Scalar>::Zero(fan_out);
        layer.activation = (i + 2 == widths.size()) ? Activation::identity : hidden;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

/// Forward pass over a batch stored one record per column.
template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& input,
                       ForwardCache<Scalar>* cache = nullptr) {
    if (input.rows() != net.in_dim())
        throw Error("MLP input has " + std::to_string(input.rows()) + " features, expected " +
                    std::to_string(net.in_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->pre_activations.clear();
    }
    Matrix<Scalar> x = input;
    for (const auto& layer : net.layers) {
        Matrix<Scalar> pre = layer.weight * x;
        pre.colwise() += layer.bias;
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->pre_activations.push_back(pre);
        }
        x = layer.activation == Activation::relu ? Matrix<Scalar>(pre.cwiseMax(Scalar(0))) : pre;
    }
    return x;
}

/// Backpropagates `output_grad` (same shape as the forward output), adding
/// parameter gradients into `tape` and returning the gradient wrt the input.
template <typename Scalar>
Matrix<Scalar> backward(const Mlp<Scalar>& net, const ForwardCache<Scalar>& cache, const Matrix<Scalar>& output_grad,
                        GradientTape<Scalar>& tape) {
    if (cache.inputs.size() != net.layers.size() || tape.size() != net.layers.size())
        throw Error("backward: cache or tape does not match the network");
    if (output_grad.rows() != net.out_dim() || output_grad.cols() != cache.inputs.front().cols())
        throw Error("backward: output gradient has the wrong shape");
    Matrix<Scalar> grad = output_grad;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& layer = net.layers[k];
        if (layer.activation == Activation::relu)
            grad = (cache.pre_activations[k].array() > Scalar(0)).select(grad, Scalar(0));
        tape[k].weight.noalias() += grad * cache.inputs[k].transpose();
        tape[k].bias += grad.rowwise().sum();
        grad = layer.weight.transpose() * grad;
    }
    return grad;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
    AdamConfig config;
    GradientTape<Scalar> m;
    GradientTape<Scalar> v;
    std::int64_t step = 0;
};

template <typename Scalar>
AdamState<Scalar> make_adam(const Mlp<Scalar>& net, AdamConfig config = {}) {
    return AdamState<Scalar>{config, zero_tape(net), zero_tape(net), 0};
}

/// One bias-corrected Adam update of `net` in place.
template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const GradientTape<Scalar>& grad, AdamState<Scalar>& state,
               const std::string& block_name = "mlp") {
    if (grad.size() != net.layers.size() || state.m.size() != net.layers.size())
        throw Error("adam_step: gradient/state do not match the network");
    for (std::size_t k = 0; k < grad.size(); ++k) {
        if (!grad[k].weight.allFinite() || !grad[k].bias.allFinite())
            throw Error("non-finite gradient in " + block_name + " layer " + std::to_string(k));
    }
    const auto& c = state.config;
    state.step += 1;
    const Scalar b1 = static_cast<Scalar>(c.beta1);
    const Scalar b2 = static_cast<Scalar>(c.beta2);
    const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta1, static_cast<double>(state.step)));
    const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta2, static_cast<double>(state.step)));
    const Scalar lr = static_cast<Scalar>(c.learning_rate);
    const Scalar eps = static_cast<Scalar>(c.epsilon);

    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < grad.size(); ++k) {
        update(net.layers[k].weight, grad[k].weight, state.m[k].weight, state.v[k].weight);
        update(net.layers[k].bias, grad[k].bias, state.m[k].bias, state.v[k].bias);
    }
}

}  // namespace distvae::nn
