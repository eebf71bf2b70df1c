#pragma once

#include "distvae/data.hpp"
#include "distvae/nn.hpp"
#include "distvae/spline.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace distvae {

using Mlp = nn::Mlp<double>;
using GradientTape = nn::GradientTape<double>;
using SplineCoeffs = spline::SplineCoeffs<double>;

struct TrainConfig {
    int epochs = 100;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta = 0.5;
    int latent_dim = 2;
    int knot_count = 10;
    int hidden_width = 32;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct LatentGaussian {
    Eigen::VectorXd mu;
    Eigen::VectorXd log_var;
};

/// Splines for numeric columns and level probabilities for discrete
/// columns, both in schema order of their kind.
struct DecoderOutput {
    std::vector<SplineCoeffs> splines;
    std::vector<Eigen::VectorXd> probs;
};

struct LossBreakdown {
    double crps_recon = 0;
    double discrete_recon = 0;
    double kl = 0;
    double total = 0;
};

/// Encoder q(z|x) and decoder heads for one schema.
struct DistVae {
    Schema schema;
    TrainConfig config;
    Eigen::VectorXd knots;
    Mlp encoder;  // encoded row -> [mu; log_var]
    Mlp decoder;  // z -> per numeric column [gamma_raw, slope_raw(M+1)], per discrete column logits

    Eigen::Index latent_dim() const { return config.latent_dim; }
    /// Row offset of each column's head inside the decoder output.
    std::vector<Eigen::Index> head_offsets() const;
};

DistVae make_model(const Schema& schema, const TrainConfig& config);
/// Decoder output width for the given schema and knot count.
Eigen::Index decoder_width(const Schema& schema, int knot_count);

LatentGaussian encode(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& encoded_row);
Eigen::VectorXd reparameterize(const LatentGaussian& latent, const Eigen::Ref<const Eigen::VectorXd>& noise);
DecoderOutput decode(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& z);
/// Interprets a decoder output column (one record).
DecoderOutput decode_heads(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& raw);
double kl_divergence(const LatentGaussian& latent);

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

struct ModelGradient {
    GradientTape encoder;
    GradientTape decoder;
};

/// Batch-mean objective on standardized rows: CRPS integral per numeric
/// column, cross-entropy per discrete column, beta * KL. `noise` is
/// latent_dim x n, one standard-normal draw per row. Fills `grad` with the
/// exact gradient when non-null.
LossBreakdown elbo_loss(const DistVae& model, const Table& batch, const Eigen::Ref<const Eigen::MatrixXd>& noise,
                        ModelGradient* grad = nullptr);

struct EpochLoss {
    int epoch = 0;
    LossBreakdown loss;
};

struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    DistVae model;
    ScalingStats scaling;
    /// Observed values of each ordinal column (native units), by schema index.
    std::vector<std::vector<double>> ordinal_levels;
    /// 1% and 99% training quantiles of each numeric column (native units).
    std::vector<std::pair<double, double>> numeric_ranges;
    std::vector<EpochLoss> loss_trace;

    const Schema& schema() const { return model.schema; }
    const TrainConfig& config() const { return model.config; }
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Trains on a standardized table (its `scaling` must be set). Seeded
/// shuffling, one latent draw per row per step, Adam; deterministic.
Checkpoint train(const Table& standardized, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Standardizes raw data, records ordinal levels and ranges, then trains.
Checkpoint fit(const Table& raw, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace distvae
