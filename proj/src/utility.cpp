#include "distvae/error.hpp"
#include "distvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace distvae {

Eigen::VectorXd LogisticModel::probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd logits = weight * x + bias;
    return softmax(logits);
}

Eigen::Index LogisticModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::Index best = 0;
    (weight * x + bias).maxCoeff(&best);
    return best;
}

LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const Eigen::Index> labels,
                           Eigen::Index classes, const LogisticOptions& options) {
    const Eigen::Index n = x.rows();
    if (n == 0) throw Error("logistic regression needs at least one record");
    if (static_cast<Eigen::Index>(labels.size()) != n) throw Error("logistic regression: label count mismatch");
    if (classes < 2) throw Error("logistic regression needs at least two classes");

    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto l = labels[static_cast<std::size_t>(i)];
        if (l < 0 || l >= classes) throw Error("logistic regression: label out of range");
        onehot(i, l) = 1.0;
    }

    LogisticModel model{Eigen::MatrixXd::Zero(classes, x.cols()), Eigen::VectorXd::Zero(classes)};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int it = 0; it < options.iterations; ++it) {
        Eigen::MatrixXd p = (x * model.weight.transpose()).rowwise() + model.bias.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = p.row(i).maxCoeff();
            p.row(i) = (p.row(i).array() - m).exp();
            p.row(i) /= p.row(i).sum();
        }
        const Eigen::MatrixXd residual = p - onehot;
        const Eigen::MatrixXd gw = residual.transpose() * x * inv_n + options.l2 * model.weight;
        const Eigen::VectorXd gb = residual.colwise().sum().transpose() * inv_n;
        model.weight -= options.step * gw;
        model.bias -= options.step * gb;
    }
    return model;
}

Eigen::VectorXd fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.rows() != y.size()) throw Error("least squares: row count mismatch");
    const Eigen::MatrixXd gram = x.transpose() * x;
    const Eigen::VectorXd rhs = x.transpose() * y;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.isInvertible()) return lu.solve(rhs);
    warn("singular normal equations; using ridge fallback (lambda 1e-6)");
    const Eigen::MatrixXd ridge = gram + 1e-6 * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
    return ridge.ldlt().solve(rhs);
}

double mean_absolute_relative_error(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.empty() || truth.size() != predicted.size()) throw Error("MARE needs equal-length non-empty inputs");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        sum += std::abs(truth[i] - predicted[i]) / std::max(std::abs(truth[i]), 1e-8);
    return sum / static_cast<double>(truth.size());
}

double macro_f1(std::span<const Eigen::Index> truth, std::span<const Eigen::Index> predicted) {
    if (truth.empty() || truth.size() != predicted.size()) throw Error("F1 needs equal-length non-empty inputs");
    std::set<Eigen::Index> labels(truth.begin(), truth.end());
    labels.insert(predicted.begin(), predicted.end());
    double total = 0.0;
    for (const auto label : labels) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool t = truth[i] == label;
            const bool p = predicted[i] == label;
            tp += static_cast<double>(t && p);
            fp += static_cast<double>(!t && p);
            fn += static_cast<double>(t && !p);
        }
        total += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    return total / static_cast<double>(labels.size());
}

Eigen::MatrixXd design_matrix(const Table& table, std::size_t target, const ScalingStats& stats) {
    const auto& schema = table.schema;
    if (target >= schema.size()) throw Error("target column index out of range");
    if (stats.mean.size() != schema.numeric_count()) throw Error("design_matrix: scaling stats do not match schema");
    Eigen::Index width = 0;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (j != target) width += schema[j].is_discrete() ? schema[j].levels() : 1;

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.size(), width);
    Eigen::Index offset = 0;
    std::size_t slot = 0;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto col = table.rows.col(static_cast<Eigen::Index>(j));
        if (schema[j].is_numeric()) {
            if (j != target) out.col(offset++) = (col.array() - stats.mean[slot]) / stats.stddev[slot];
            ++slot;
        } else if (j != target) {
            for (Eigen::Index i = 0; i < table.size(); ++i) out(i, offset + static_cast<Eigen::Index>(col(i))) = 1.0;
            offset += schema[j].levels();
        }
    }
    return out;
}

MluResult mlu(const Table& real_train, const Table& real_test, const Table& synth, std::size_t regression_target,
              std::size_t classification_target) {
    const auto& schema = real_train.schema;
    if (!(schema == real_test.schema) || !(schema == synth.schema)) throw Error("MLu: tables have different schemas");
    if (regression_target >= schema.size() || !schema[regression_target].is_numeric())
        throw Error("regression target must be a numeric column");
    if (classification_target >= schema.size() || !schema[classification_target].is_discrete())
        throw Error("classification target must be a discrete column");
    if (synth.size() == 0 || real_test.size() == 0) throw Error("MLu needs non-empty synthetic and test tables");

    const ScalingStats stats = standardize(real_train).second;
    MluResult out;

    {
        const auto rt = static_cast<Eigen::Index>(regression_target);
        const Eigen::MatrixXd xs = design_matrix(synth, regression_target, stats);
        const Eigen::VectorXd beta = fit_ols(xs, synth.rows.col(rt));
        const Eigen::VectorXd pred = design_matrix(real_test, regression_target, stats) * beta;
        const Eigen::VectorXd truth = real_test.rows.col(rt);
        out.mare = mean_absolute_relative_error(std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                                                std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
    }
    {
        const auto ct = static_cast<Eigen::Index>(classification_target);
        const Eigen::MatrixXd xs = design_matrix(synth, classification_target, stats);
        std::vector<Eigen::Index> labels(static_cast<std::size_t>(synth.size()));
        for (Eigen::Index i = 0; i < synth.size(); ++i)
            labels[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(synth.rows(i, ct));
        const auto model = fit_logistic(xs, labels, schema[classification_target].levels());
        const Eigen::MatrixXd xt = design_matrix(real_test, classification_target, stats);
        std::vector<Eigen::Index> truth(static_cast<std::size_t>(real_test.size()));
        std::vector<Eigen::Index> pred(truth.size());
        for (Eigen::Index i = 0; i < real_test.size(); ++i) {
            truth[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(real_test.rows(i, ct));
            pred[static_cast<std::size_t>(i)] = model.predict(xt.row(i).transpose());
        }
        out.f1 = macro_f1(truth, pred);
    }
    return out;
}

}  // namespace distvae
