#pragma once

#include "distvae/data.hpp"
#include "distvae/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace distvae {

// --- statistical similarity -------------------------------------------------

/// sup_x |F_a(x) - F_b(x)| over the empirical CDFs.
double ks_statistic(std::span<const double> a, std::span<const double> b);
/// Area between the two empirical CDF step functions.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Mixed-type association matrix: Pearson between numeric columns,
/// correlation ratio between numeric and discrete, bias-uncorrected
/// Cramer's V between discrete columns. Unit diagonal.
Eigen::MatrixXd association_matrix(const Table& table);
/// Frobenius distance between the two association matrices.
double correlation_distance(const Table& real, const Table& synth);

// --- distance to closest record -----------------------------------------------

struct DcrResult {
    double rs = 0;  // real -> nearest synthetic
    double rr = 0;  // real -> nearest other real
    double ss = 0;  // synthetic -> nearest other synthetic
};

/// 5th percentile (linear interpolation) of nearest-neighbour L2 distances
/// over the numeric columns, in the units the tables are given in.
DcrResult dcr(const Table& real, const Table& synth);

// --- machine-learning utility ---------------------------------------------------

struct MluResult {
    double mare = 0;
    double f1 = 0;
};

/// Multinomial logistic regression with an intercept, fitted by full-batch
/// gradient descent on the mean cross-entropy.
struct LogisticModel {
    Eigen::MatrixXd weight;  // classes x features
    Eigen::VectorXd bias;    // classes

    Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::Index predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct LogisticOptions {
    int iterations = 500;
    double step = 0.5;
    double l2 = 1e-4;
};

/// Rows of `x` are records; labels in [0, classes).
LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const Eigen::Index> labels,
                           Eigen::Index classes, const LogisticOptions& options = {});

/// Least squares without intercept via the normal equations; falls back to
/// ridge (lambda 1e-6) with a warning when X'X is singular.
Eigen::VectorXd fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// mean |y - yhat| / max(|y|, 1e-8)
double mean_absolute_relative_error(std::span<const double> truth, std::span<const double> predicted);
/// Macro F1 over every label present in either sequence.
double macro_f1(std::span<const Eigen::Index> truth, std::span<const Eigen::Index> predicted);

/// Model inputs for predicting `target`: every other column, numerics
/// standardized with `stats` (numeric-column order), discretes one-hot.
Eigen::MatrixXd design_matrix(const Table& table, std::size_t target, const ScalingStats& stats);

/// Fits OLS (regression target) and logistic regression (classification
/// target) on `synth` and scores them on `real_test`. Tables in native units;
/// features are standardized with `real_train` statistics.
MluResult mlu(const Table& real_train, const Table& real_test, const Table& synth, std::size_t regression_target,
              std::size_t classification_target);

// --- quantile coverage ------------------------------------------------------------

/// Fraction of `test` strictly below the empirical alpha-quantile of `synth`.
double vrate(std::span<const double> test, std::span<const double> synth, double alpha);

// --- privacy attacks ------------------------------------------------------------------

/// Area under the ROC curve (Mann-Whitney, ties count one half).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct MiaConfig {
    std::size_t classification_column = 0;
    std::uint64_t seed = 0;
};

struct MiaResult {
    double accuracy = 0;
    double auc = 0;
    int attack_models = 0;
};

/// Shadow-model membership inference against a trained model: shadow
/// in/out sets are sampled from the target, a shadow model is trained with
/// the target's configuration, one in/out classifier per class of the
/// classification column is fitted on shadow posterior means, and the
/// attack is scored on balanced real train (in) / test (out) records
/// encoded by the target. Tables in native units.
MiaResult membership_inference(const Checkpoint& target, const Table& real_train, const Table& real_test,
                               const MiaConfig& config);

/// Attacker holds `known_columns` of each real record, finds its k nearest
/// synthetic records on them and predicts each secret (discrete) column by
/// majority vote (ties to the lowest level). Returns the mean macro F1 over
/// secret columns.
double attribute_disclosure(const Table& real, const Table& synth, std::span<const std::size_t> known_columns,
                            std::span<const std::size_t> secret_columns, Eigen::Index k);

// --- full report -------------------------------------------------------------------

struct MetricReport {
    double mare = 0;
    double f1 = 0;
    double ks_cont = 0;
    double ks_disc = 0;
    double wd1_cont = 0;
    double wd1_disc = 0;
    double corr_dist = 0;
    double dcr_rs = 0;
    double dcr_rr = 0;
    double dcr_ss = 0;
    std::map<double, double> vrate;
    std::optional<double> mia_accuracy;
    std::optional<double> mia_auc;
    std::map<int, double> attr_disclosure_f1;
};

struct EvaluateOptions {
    std::size_t regression_target = 0;
    std::size_t classification_target = 0;
    std::vector<std::size_t> known_columns;   // empty: every numeric column
    std::vector<std::size_t> secret_columns;  // empty: every discrete column
    std::vector<int> neighbour_counts{1, 10, 100};
    std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
};

/// Every metric except membership inference. Tables in native units;
/// distance-based metrics use real-train standardization.
MetricReport evaluate(const Table& real_train, const Table& real_test, const Table& synth,
                      const EvaluateOptions& options);

std::string report_to_json(const MetricReport& report);

}  // namespace distvae
