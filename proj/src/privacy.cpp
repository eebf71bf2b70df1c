#include "distvae/error.hpp"
#include "distvae/metrics.hpp"
#include "distvae/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

namespace distvae {

namespace {

// Posterior means of every record, one row per record.
Eigen::MatrixXd posterior_means(const Checkpoint& ckpt, const Table& native) {
    const Table scaled = apply_scaling(native, ckpt.scaling);
    const Eigen::MatrixXd encoded = one_hot_columns(scaled);
    Eigen::MatrixXd z(native.size(), ckpt.model.latent_dim());
    for (Eigen::Index i = 0; i < native.size(); ++i) z.row(i) = encode(ckpt.model, encoded.col(i)).mu.transpose();
    return z;
}

std::vector<Eigen::Index> rows_with_label(const Table& t, Eigen::Index column, Eigen::Index label) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < t.size(); ++i)
        if (static_cast<Eigen::Index>(t.rows(i, column)) == label) out.push_back(i);
    return out;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("roc_auc: score/label size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Mann-Whitney U from average ranks.
    double positive_rank_sum = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                positive_rank_sum += rank;
                positives += 1.0;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(scores.size()) - positives;
    if (positives == 0 || negatives == 0) throw Error("roc_auc needs both positive and negative labels");
    return (positive_rank_sum - positives * (positives + 1) / 2) / (positives * negatives);
}

MiaResult membership_inference(const Checkpoint& target, const Table& real_train, const Table& real_test,
                               const MiaConfig& config) {
    const auto& schema = target.schema();
    if (!(schema == real_train.schema) || !(schema == real_test.schema))
        throw Error("membership inference: tables do not match the checkpoint schema");
    if (config.classification_column >= schema.size() || !schema[config.classification_column].is_discrete())
        throw Error("membership inference needs a discrete classification column");
    if (real_train.size() < 2 || real_test.size() < 2)
        throw Error("membership inference needs at least 2 train and 2 test records");

    const auto label_col = static_cast<Eigen::Index>(config.classification_column);
    const Eigen::Index classes = schema[config.classification_column].levels();

    const Table shadow_in = generate(target, real_train.size(), config.seed ^ 0x5bd1e995u);
    const Table shadow_out = generate(target, real_train.size(), config.seed ^ 0x27d4eb2fu);
    const Checkpoint shadow = fit(shadow_in, target.config());
    const Eigen::MatrixXd z_in = posterior_means(shadow, shadow_in);
    const Eigen::MatrixXd z_out = posterior_means(shadow, shadow_out);

    std::vector<std::optional<LogisticModel>> attack(static_cast<std::size_t>(classes));
    MiaResult result;
    for (Eigen::Index c = 0; c < classes; ++c) {
        const auto in_rows = rows_with_label(shadow_in, label_col, c);
        const auto out_rows = rows_with_label(shadow_out, label_col, c);
        if (in_rows.empty() || out_rows.empty()) {
            warn("class '" + schema[config.classification_column].level_labels[static_cast<std::size_t>(c)] +
                 "' lacks shadow in/out records; attack model skipped");
            continue;
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(in_rows.size() + out_rows.size()), z_in.cols());
        std::vector<Eigen::Index> y;
        Eigen::Index r = 0;
        for (auto i : in_rows) {
            x.row(r++) = z_in.row(i);
            y.push_back(1);
        }
        for (auto i : out_rows) {
            x.row(r++) = z_out.row(i);
            y.push_back(0);
        }
        attack[static_cast<std::size_t>(c)] = fit_logistic(x, y, 2);
        ++result.attack_models;
    }

    const Eigen::Index n_eval = std::min(real_train.size(), real_test.size());
    std::mt19937_64 rng(config.seed);
    auto pick = [&](const Table& t) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(t.size()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(n_eval));
        std::sort(idx.begin(), idx.end());
        return select_rows(t, idx);
    };
    const Table eval_in = pick(real_train);
    const Table eval_out = pick(real_test);

    std::vector<double> scores;
    std::vector<int> labels;
    auto score_all = [&](const Table& t, int label) {
        const Eigen::MatrixXd z = posterior_means(target, t);
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const auto& model = attack[static_cast<std::size_t>(t.rows(i, label_col))];
            scores.push_back(model ? model->probabilities(z.row(i).transpose())(1) : 0.5);
            labels.push_back(label);
        }
    };
    score_all(eval_in, 1);
    score_all(eval_out, 0);

    double correct = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += static_cast<double>((scores[i] > 0.5) == (labels[i] == 1));
    result.accuracy = correct / static_cast<double>(scores.size());
    result.auc = roc_auc(scores, labels);
    return result;
}

double attribute_disclosure(const Table& real, const Table& synth, std::span<const std::size_t> known_columns,
                            std::span<const std::size_t> secret_columns, Eigen::Index k) {
    const auto& schema = real.schema;
    if (!(schema == synth.schema)) throw Error("attribute disclosure: tables have different schemas");
    if (k < 1) throw Error("neighbour count k must be at least 1");
    if (secret_columns.empty()) throw Error("attribute disclosure needs at least one secret column");
    if (real.size() == 0 || synth.size() == 0) throw Error("attribute disclosure needs non-empty tables");
    for (auto j : known_columns)
        if (j >= schema.size()) throw Error("known column index out of range");
    for (auto j : secret_columns)
        if (j >= schema.size() || !schema[j].is_discrete()) throw Error("secret columns must be discrete");
    if (k > synth.size()) {
        warn("k = " + std::to_string(k) + " exceeds the synthetic sample size; clamped to " +
             std::to_string(synth.size()));
        k = synth.size();
    }

    auto known_block = [&](const Table& t) {
        Eigen::MatrixXd out(t.size(), static_cast<Eigen::Index>(known_columns.size()));
        for (std::size_t c = 0; c < known_columns.size(); ++c)
            out.col(static_cast<Eigen::Index>(c)) = t.rows.col(static_cast<Eigen::Index>(known_columns[c]));
        return out;
    };
    const Eigen::MatrixXd r = known_block(real);
    const Eigen::MatrixXd s = known_block(synth);

    std::vector<std::vector<Eigen::Index>> truth(secret_columns.size());
    std::vector<std::vector<Eigen::Index>> pred(secret_columns.size());
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(s.rows()));
    const auto kk = static_cast<std::size_t>(k);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.rows(); ++j) dist[static_cast<std::size_t>(j)] = {(r.row(i) - s.row(j)).squaredNorm(), j};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        for (std::size_t c = 0; c < secret_columns.size(); ++c) {
            const auto col = static_cast<Eigen::Index>(secret_columns[c]);
            std::vector<int> votes(static_cast<std::size_t>(schema[secret_columns[c]].levels()), 0);
            for (std::size_t n = 0; n < kk; ++n) ++votes[static_cast<std::size_t>(synth.rows(dist[n].second, col))];
            const auto winner = std::max_element(votes.begin(), votes.end()) - votes.begin();
            pred[c].push_back(static_cast<Eigen::Index>(winner));
            truth[c].push_back(static_cast<Eigen::Index>(real.rows(i, col)));
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < secret_columns.size(); ++c) total += macro_f1(truth[c], pred[c]);
    return total / static_cast<double>(secret_columns.size());
}

}  // namespace distvae
