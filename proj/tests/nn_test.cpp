#include "distvae/nn.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace distvae;
using namespace distvae::nn;

namespace {

Mlp<double> single(double w, double b, Activation act) {
    Mlp<double> net;
    DenseLayer<double> l;
    l.weight = Matrix<double>::Constant(1, 1, w);
    l.bias = Vector<double>::Constant(1, b);
    l.activation = act;
    net.layers.push_back(l);
    return net;
}

Matrix<double> scalar(double v) { return Matrix<double>::Constant(1, 1, v); }

// Sum of output * fixed weights, so the output gradient is `weights`.
double weighted_output(const Mlp<double>& net, const Matrix<double>& x, const Matrix<double>& weights) {
    return forward(net, x).cwiseProduct(weights).sum();
}

}  // namespace

TEST(Forward, AffineAndRelu) {
    EXPECT_EQ(forward(single(2, 1, Activation::identity), scalar(3))(0, 0), 7.0);
    EXPECT_EQ(forward(single(1, -2, Activation::relu), scalar(1))(0, 0), 0.0);
    Mlp<double> chain = single(1, 0, Activation::identity);
    chain.layers.push_back(chain.layers[0]);
    EXPECT_EQ(forward(chain, scalar(-4.25))(0, 0), -4.25);
}

TEST(Forward, ShapeMismatchThrows) {
    EXPECT_THROW(forward(single(1, 0, Activation::identity), Matrix<double>::Zero(2, 1)), Error);
}

TEST(Forward, BitwiseDeterministic) {
    std::mt19937_64 rng(1);
    const auto net = make_mlp<double>({4, 8, 3}, Activation::relu, rng);
    const Matrix<double> x = Matrix<double>::Random(4, 5);
    EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(Backward, LinearLayer) {
    const auto net = single(3, 0.5, Activation::identity);
    ForwardCache<double> cache;
    forward(net, scalar(2), &cache);
    auto tape = zero_tape(net);
    const auto gin = backward(net, cache, scalar(1), tape);
    EXPECT_EQ(tape[0].weight(0, 0), 2.0);
    EXPECT_EQ(tape[0].bias(0), 1.0);
    EXPECT_EQ(gin(0, 0), 3.0);
}

TEST(Backward, ReluBlocksNegativePreActivation) {
    const auto net = single(1, -5, Activation::relu);
    ForwardCache<double> cache;
    forward(net, scalar(1), &cache);
    auto tape = zero_tape(net);
    const auto gin = backward(net, cache, scalar(1), tape);
    EXPECT_EQ(tape[0].weight(0, 0), 0.0);
    EXPECT_EQ(tape[0].bias(0), 0.0);
    EXPECT_EQ(gin(0, 0), 0.0);
}

TEST(Backward, MatchesFiniteDifferencesOnRandomNets) {
    for (int trial = 0; trial < 100; ++trial) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(trial));
        auto net = make_mlp<double>({3, 5, 2}, Activation::relu, rng);
        for (auto& l : net.layers) l.bias = Vector<double>::Random(l.bias.size());
        std::normal_distribution<double> n(0, 1);
        Matrix<double> x(3, 4), w(2, 4);
        for (auto& v : x.reshaped()) v = n(rng);
        for (auto& v : w.reshaped()) v = n(rng);

        ForwardCache<double> cache;
        forward(net, x, &cache);
        auto tape = zero_tape(net);
        const Matrix<double> gin = backward(net, cache, w, tape);

        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            for (Eigen::Index i = 0; i < net.layers[k].weight.size(); ++i) {
                auto probe = net;
                const double base = net.layers[k].weight.reshaped()(i);
                const double num = oracle::central_difference(
                    [&](double v) {
                        probe.layers[k].weight.reshaped()(i) = v;
                        return weighted_output(probe, x, w);
                    },
                    base);
                EXPECT_LE(oracle::relative_error(tape[k].weight.reshaped()(i), num), 1e-4) << "trial " << trial;
            }
            for (Eigen::Index i = 0; i < net.layers[k].bias.size(); ++i) {
                auto probe = net;
                const double num = oracle::central_difference(
                    [&](double v) {
                        probe.layers[k].bias(i) = v;
                        return weighted_output(probe, x, w);
                    },
                    net.layers[k].bias(i));
                EXPECT_LE(oracle::relative_error(tape[k].bias(i), num), 1e-4) << "trial " << trial;
            }
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Matrix<double> probe = x;
            const double num = oracle::central_difference(
                [&](double v) {
                    probe.reshaped()(i) = v;
                    return weighted_output(net, probe, w);
                },
                x.reshaped()(i));
            EXPECT_LE(oracle::relative_error(gin.reshaped()(i), num), 1e-4);
        }
    }
}

TEST(Softplus, ValuesAndDerivative) {
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
    EXPECT_EQ(softplus(100.0), 100.0);
    EXPECT_GT(softplus(-100.0), 0.0);
    EXPECT_EQ(softplus_grad(0.0), 0.5);
    EXPECT_NEAR(softplus(0.5f), std::log1p(std::exp(0.5f)), 1e-6f);
}

TEST(Softplus, PositiveAndStrictlyIncreasing) {
    double prev = 0.0;
    for (double x = -40; x <= 40; x += 0.01) {
        const double v = softplus(x);
        EXPECT_GT(v, 0.0);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Softplus, DerivativeMatchesFiniteDifference) {
    for (double x = -10; x <= 10; x += 0.37)
        EXPECT_LE(oracle::relative_error(softplus_grad(x), oracle::central_difference(softplus<double>, x)), 1e-7);
}

TEST(Adam, ZeroGradientLeavesParametersButCountsStep) {
    std::mt19937_64 rng(2);
    auto net = make_mlp<double>({2, 3, 1}, Activation::relu, rng);
    const auto before = net;
    auto state = make_adam(net);
    adam_step(net, zero_tape(net), state);
    EXPECT_EQ(state.step, 1);
    for (std::size_t k = 0; k < net.layers.size(); ++k) EXPECT_EQ(net.layers[k].weight, before.layers[k].weight);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    auto net = single(1.0, 0.0, Activation::identity);
    auto state = make_adam(net, {0.01});
    auto grad = zero_tape(net);
    grad[0].weight(0, 0) = 3.7;
    grad[0].bias(0) = -0.2;
    adam_step(net, grad, state);
    EXPECT_NEAR(net.layers[0].weight(0, 0), 1.0 - 0.01, 1e-8);
    EXPECT_NEAR(net.layers[0].bias(0), 0.01, 1e-7);
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
    auto a = single(1.0, 0.0, Activation::identity);
    auto b = a;
    auto sa = make_adam(a);
    auto sb = make_adam(b);
    auto grad = zero_tape(a);
    grad[0].weight(0, 0) = 0.3;
    for (int i = 0; i < 5; ++i) {
        adam_step(a, grad, sa);
        adam_step(b, grad, sb);
    }
    EXPECT_EQ(a.layers[0].weight, b.layers[0].weight);

    grad[0].bias(0) = std::nan("");
    try {
        adam_step(a, grad, sa, "decoder");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("decoder layer 0"), std::string::npos);
    }
}

TEST(MakeMlp, GlorotBoundsAndZeroBias) {
    std::mt19937_64 rng(4);
    const auto net = make_mlp<double>({6, 32, 4}, Activation::relu, rng);
    EXPECT_EQ(net.parameter_count(), 6 * 32 + 32 + 32 * 4 + 4);
    EXPECT_LE(net.layers[0].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 38.0));
    EXPECT_EQ(net.layers[1].bias.cwiseAbs().sum(), 0.0);
    EXPECT_EQ(net.layers[0].activation, Activation::relu);
    EXPECT_EQ(net.layers[1].activation, Activation::identity);
}
