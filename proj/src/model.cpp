#include "distvae/model.hpp"

#include "distvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace distvae {

void validate(const TrainConfig& c) {
    if (c.epochs <= 0 || c.batch_size <= 0 || c.latent_dim <= 0 || c.knot_count <= 0 || c.hidden_width <= 0)
        throw Error("training configuration values must be positive");
    if (!(c.learning_rate > 0) || !std::isfinite(c.learning_rate)) throw Error("learning rate must be positive");
    if (!(c.beta > 0) || !std::isfinite(c.beta)) throw Error("beta must be positive");
}

Eigen::Index decoder_width(const Schema& schema, int knot_count) {
    Eigen::Index width = 0;
    for (const auto& c : schema.columns()) width += c.is_discrete() ? c.levels() : knot_count + 2;
    return width;
}

std::vector<Eigen::Index> DistVae::head_offsets() const {
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& c : schema.columns()) {
        offsets.push_back(off);
        off += c.is_discrete() ? c.levels() : config.knot_count + 2;
    }
    return offsets;
}

DistVae make_model(const Schema& schema, const TrainConfig& config) {
    validate(config);
    if (schema.size() == 0) throw Error("schema has no columns");
    std::mt19937_64 rng(config.seed);
    DistVae model;
    model.schema = schema;
    model.config = config;
    model.knots = spline::uniform_knots<double>(config.knot_count);
    const auto in = static_cast<Eigen::Index>(schema.encoded_width());
    const Eigen::Index d = config.latent_dim;
    const Eigen::Index h = config.hidden_width;
    model.encoder = nn::make_mlp<double>({in, h, 2 * d}, nn::Activation::relu, rng);
    model.decoder = nn::make_mlp<double>({d, h, decoder_width(schema, config.knot_count)}, nn::Activation::relu, rng);
    return model;
}

LatentGaussian encode(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& encoded_row) {
    const Eigen::VectorXd out = nn::forward(model.encoder, encoded_row);
    const auto d = model.latent_dim();
    return {out.head(d), out.tail(d)};
}

Eigen::VectorXd reparameterize(const LatentGaussian& latent, const Eigen::Ref<const Eigen::VectorXd>& noise) {
    if (noise.size() != latent.mu.size()) throw Error("noise dimension does not match the latent dimension");
    return latent.mu + ((0.5 * latent.log_var.array()).exp() * noise.array()).matrix();
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
    const double top = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - top).exp().matrix();
    return p / p.sum();
}

DecoderOutput decode_heads(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& raw) {
    DecoderOutput out;
    const auto offsets = model.head_offsets();
    const Eigen::Index slopes = model.config.knot_count + 1;
    for (std::size_t j = 0; j < model.schema.size(); ++j) {
        const auto& col = model.schema[j];
        const auto off = offsets[j];
        if (col.is_discrete()) {
            out.probs.push_back(softmax(raw.segment(off, col.levels())));
        } else {
            const Eigen::VectorXd slope_raw = raw.segment(off + 1, slopes);
            out.splines.push_back(spline::build_spline<double>(raw(off), slope_raw, model.knots));
        }
    }
    return out;
}

DecoderOutput decode(const DistVae& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
    if (z.size() != model.latent_dim()) throw Error("latent vector has the wrong dimension");
    const Eigen::VectorXd raw = nn::forward(model.decoder, z);
    return decode_heads(model, raw);
}

double kl_divergence(const LatentGaussian& latent) {
    const auto& lv = latent.log_var.array();
    return 0.5 * (latent.mu.array().square() + lv.exp() - lv - 1.0).sum();
}

LossBreakdown elbo_loss(const DistVae& model, const Table& batch, const Eigen::Ref<const Eigen::MatrixXd>& noise,
                        ModelGradient* grad) {
    const Eigen::Index n = batch.size();
    const Eigen::Index d = model.latent_dim();
    if (n == 0) throw Error("elbo_loss needs a non-empty batch");
    if (noise.rows() != d || noise.cols() != n) throw Error("noise must be latent_dim x batch size");
    if (!(batch.schema == model.schema)) throw Error("batch schema does not match the model");

    const Eigen::MatrixXd x = one_hot_columns(batch);
    nn::ForwardCache<double> enc_cache;
    const Eigen::MatrixXd enc_out = nn::forward(model.encoder, x, &enc_cache);
    const Eigen::MatrixXd mu = enc_out.topRows(d);
    const Eigen::MatrixXd log_var = enc_out.bottomRows(d);
    const Eigen::ArrayXXd sigma = (0.5 * log_var.array()).exp();
    const Eigen::MatrixXd z = mu + (sigma * noise.array()).matrix();

    nn::ForwardCache<double> dec_cache;
    const Eigen::MatrixXd raw = nn::forward(model.decoder, z, &dec_cache);
    Eigen::MatrixXd d_raw = Eigen::MatrixXd::Zero(raw.rows(), raw.cols());

    const auto offsets = model.head_offsets();
    const Eigen::Index slopes = model.config.knot_count + 1;
    const double inv_n = 1.0 / static_cast<double>(n);
    LossBreakdown loss;

    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < model.schema.size(); ++j) {
            const auto& col = model.schema[j];
            const auto off = offsets[j];
            const double value = batch.rows(i, static_cast<Eigen::Index>(j));
            if (col.is_discrete()) {
                const auto logits = raw.col(i).segment(off, col.levels());
                const double top = logits.maxCoeff();
                const double log_norm = top + std::log((logits.array() - top).exp().sum());
                const auto level = static_cast<Eigen::Index>(value);
                loss.discrete_recon += log_norm - logits(level);
                if (grad) {
                    auto g = d_raw.col(i).segment(off, col.levels());
                    g = (logits.array() - log_norm).exp().matrix() * inv_n;
                    g(level) -= inv_n;
                }
            } else {
                const Eigen::VectorXd slope_raw = raw.col(i).segment(off + 1, slopes);
                const auto coeffs = spline::build_spline<double>(raw(off, i), slope_raw, model.knots);
                const auto crps = spline::crps_loss(coeffs, value);
                loss.crps_recon += 0.5 * crps.loss;
                if (grad) {
                    spline::CrpsGradient<double> g;
                    g.gamma = 1.0 - 2.0 * crps.alpha_tilde;
                    g.b.resize(coeffs.b.size());
                    for (Eigen::Index m = 0; m < coeffs.b.size(); ++m)
                        g.b(m) = spline::crps_b_term(crps.alpha_tilde, coeffs.knots(m));
                    const auto r = spline::chain_to_raw(g, slope_raw);
                    d_raw(off, i) = 0.5 * inv_n * r.gamma_raw;
                    d_raw.col(i).segment(off + 1, slopes) = (0.5 * inv_n) * r.slope_raw;
                }
            }
        }
    }
    loss.kl = 0.5 * (mu.array().square() + log_var.array().exp() - log_var.array() - 1.0).sum();

    loss.crps_recon *= inv_n;
    loss.discrete_recon *= inv_n;
    loss.kl *= inv_n;
    loss.total = loss.crps_recon + loss.discrete_recon + model.config.beta * loss.kl;

    if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss on a batch of " << n << " rows (crps " << loss.crps_recon << ", discrete "
            << loss.discrete_recon << ", kl " << loss.kl << ", max |mu| " << mu.cwiseAbs().maxCoeff()
            << ", max log_var " << log_var.maxCoeff() << ")";
        throw Error(msg.str());
    }

    if (grad) {
        if (grad->encoder.size() != model.encoder.layers.size()) grad->encoder = nn::zero_tape(model.encoder);
        if (grad->decoder.size() != model.decoder.layers.size()) grad->decoder = nn::zero_tape(model.decoder);
        const Eigen::MatrixXd d_z = nn::backward(model.decoder, dec_cache, d_raw, grad->decoder);
        const double beta = model.config.beta;
        Eigen::MatrixXd d_enc(2 * d, n);
        d_enc.topRows(d) = d_z + (beta * inv_n) * mu;
        d_enc.bottomRows(d) = (d_z.array() * sigma * noise.array() * 0.5 +
                               (0.5 * beta * inv_n) * (log_var.array().exp() - 1.0))
                                  .matrix();
        nn::backward(model.encoder, enc_cache, d_enc, grad->encoder);
    }
    return loss;
}

Checkpoint train(const Table& standardized, const TrainConfig& config, const EpochCallback& on_epoch) {
    validate(config);
    validate(standardized);
    if (!standardized.scaling) throw Error("train expects a standardized table (scaling statistics missing)");
    const Eigen::Index n = standardized.size();
    if (n == 0) throw Error("cannot train on an empty table");

    Checkpoint ckpt;
    ckpt.model = make_model(standardized.schema, config);
    ckpt.scaling = *standardized.scaling;
    ckpt.ordinal_levels.assign(standardized.schema.size(), {});
    auto& model = ckpt.model;

    // Separate stream from the initializer so the data order does not depend
    // on the parameter count.
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    nn::AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
    auto enc_state = nn::make_adam(model.encoder, adam);
    auto dec_state = nn::make_adam(model.decoder, adam);
    ModelGradient grad{nn::zero_tape(model.encoder), nn::zero_tape(model.decoder)};

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index d = config.latent_dim;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        LossBreakdown sum;
        int batch_index = 0;
        for (Eigen::Index start = 0; start < n; start += config.batch_size, ++batch_index) {
            const Eigen::Index stop = std::min<Eigen::Index>(start + config.batch_size, n);
            const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + stop);
            const Table batch = select_rows(standardized, idx);
            Eigen::MatrixXd noise(d, stop - start);
            for (Eigen::Index c = 0; c < noise.cols(); ++c)
                for (Eigen::Index r = 0; r < d; ++r) noise(r, c) = normal(rng);

            nn::zero(grad.encoder);
            nn::zero(grad.decoder);
            LossBreakdown loss;
            try {
                loss = elbo_loss(model, batch, noise, &grad);
                nn::adam_step(model.encoder, grad.encoder, enc_state, "encoder");
                nn::adam_step(model.decoder, grad.decoder, dec_state, "decoder");
            } catch (const Error& e) {
                throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + ": " + e.what());
            }
            const double w = static_cast<double>(stop - start);
            sum.crps_recon += w * loss.crps_recon;
            sum.discrete_recon += w * loss.discrete_recon;
            sum.kl += w * loss.kl;
        }
        const double inv = 1.0 / static_cast<double>(n);
        EpochLoss record{epoch, {sum.crps_recon * inv, sum.discrete_recon * inv, sum.kl * inv, 0.0}};
        record.loss.total = record.loss.crps_recon + record.loss.discrete_recon + config.beta * record.loss.kl;
        ckpt.loss_trace.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return ckpt;
}

Checkpoint fit(const Table& raw, const TrainConfig& config, const EpochCallback& on_epoch) {
    validate(raw);
    auto [standardized, stats] = standardize(raw);
    Checkpoint ckpt = train(standardized, config, on_epoch);
    const auto& schema = raw.schema;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].kind != ColumnKind::ordinal) continue;
        const auto col = raw.rows.col(static_cast<Eigen::Index>(j));
        std::vector<double> levels(col.begin(), col.end());
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        ckpt.ordinal_levels[j] = std::move(levels);
    }
    for (auto j : schema.numeric_columns()) {
        const auto col = raw.rows.col(static_cast<Eigen::Index>(j));
        std::vector<double> values(col.begin(), col.end());
        ckpt.numeric_ranges.emplace_back(quantile(values, 0.01), quantile(values, 0.99));
    }
    return ckpt;
}

}  // namespace distvae
