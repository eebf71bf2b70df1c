#pragma once

#include "distvae/model.hpp"

#include "oracles.hpp"

#include <random>

namespace oracle {

struct GradCheck {
    double max_relative_error = 0;
    long parameters = 0;
    long skipped = 0;  // probes whose +-h step moves a ReLU across zero
};

inline distvae::Schema mixed_schema() {
    using distvae::ColumnKind;
    return distvae::Schema({{"a", ColumnKind::continuous, {}},
                            {"d", ColumnKind::discrete, {"p", "q", "r"}},
                            {"o", ColumnKind::ordinal, {}},
                            {"b", ColumnKind::continuous, {}},
                            {"e", ColumnKind::discrete, {"u", "v"}}});
}

/// Sign of every hidden ReLU pre-activation in the forward pass of elbo_loss.
inline std::vector<bool> relu_pattern(const distvae::DistVae& model, const distvae::Table& batch,
                                      const Eigen::MatrixXd& noise) {
    std::vector<bool> signs;
    auto record = [&](const distvae::Mlp& net, const Eigen::VectorXd& input) {
        distvae::nn::ForwardCache<double> cache;
        const Eigen::VectorXd out = distvae::nn::forward(net, input, &cache);
        for (std::size_t k = 0; k < net.layers.size(); ++k)
            if (net.layers[k].activation == distvae::nn::Activation::relu)
                for (double v : cache.pre_activations[k].reshaped()) signs.push_back(v > 0);
        return out;
    };
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd enc = record(model.encoder, distvae::one_hot(model.schema, batch.rows.row(i)));
        const distvae::LatentGaussian latent{enc.head(model.latent_dim()), enc.tail(model.latent_dim())};
        record(model.decoder, distvae::reparameterize(latent, noise.col(i)));
    }
    return signs;
}

/// End-to-end check of elbo_loss gradients against central differences on a
/// 3-row batch with frozen reparameterization noise. Probes whose step crosses
/// a ReLU kink are counted and skipped.
inline GradCheck elbo_gradient_check(std::uint64_t seed, double beta = 0.5) {
    distvae::TrainConfig cfg;
    cfg.seed = seed;
    cfg.beta = beta;
    cfg.hidden_width = 16;
    auto model = distvae::make_model(mixed_schema(), cfg);
    std::mt19937_64 rng(seed + 1000);
    std::normal_distribution<double> n(0, 1);
    for (auto* net : {&model.encoder, &model.decoder})
        for (auto& l : net->layers)
            for (auto& v : l.bias) v = 0.3 * n(rng);

    distvae::Table batch{model.schema, distvae::RowMatrix(3, 5), distvae::ScalingStats::identity(3)};
    for (Eigen::Index i = 0; i < 3; ++i)
        batch.rows.row(i) << n(rng), static_cast<double>(i % 3), n(rng), n(rng), static_cast<double>((i + 1) % 2);
    Eigen::MatrixXd noise(cfg.latent_dim, 3);
    for (auto& v : noise.reshaped()) v = n(rng);

    distvae::ModelGradient grad;
    distvae::elbo_loss(model, batch, noise, &grad);

    GradCheck out;
    auto check_net = [&](distvae::Mlp distvae::DistVae::*member, const distvae::GradientTape& tape) {
        for (std::size_t k = 0; k < (model.*member).layers.size(); ++k) {
            auto visit = [&](auto param_of, auto grad_of) {
                const Eigen::Index size = param_of(model).size();
                for (Eigen::Index i = 0; i < size; ++i) {
                    auto probe = model;
                    const double at = param_of(model).reshaped()(i);
                    param_of(probe).reshaped()(i) = at + 1e-5;
                    const auto above = relu_pattern(probe, batch, noise);
                    param_of(probe).reshaped()(i) = at - 1e-5;
                    if (above != relu_pattern(probe, batch, noise)) {
                        ++out.skipped;
                        continue;
                    }
                    const double numeric = central_difference(
                        [&](double v) {
                            param_of(probe).reshaped()(i) = v;
                            return distvae::elbo_loss(probe, batch, noise).total;
                        },
                        param_of(model).reshaped()(i));
                    const double analytic = grad_of().reshaped()(i);
                    out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic, numeric));
                    ++out.parameters;
                }
            };
            visit([&](auto& m) -> auto& { return (m.*member).layers[k].weight; }, [&]() -> const auto& { return tape[k].weight; });
            visit([&](auto& m) -> auto& { return (m.*member).layers[k].bias; }, [&]() -> const auto& { return tape[k].bias; });
        }
    };
    check_net(&distvae::DistVae::encoder, grad.encoder);
    check_net(&distvae::DistVae::decoder, grad.decoder);
    return out;
}

}  // namespace oracle
