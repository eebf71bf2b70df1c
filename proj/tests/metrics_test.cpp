#include "distvae/error.hpp"
#include "distvae/metrics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <numeric>
#include <random>

using namespace distvae;

namespace {

Table numeric_table(const std::vector<std::vector<double>>& rows) {
    std::vector<ColumnSpec> cols;
    for (std::size_t j = 0; j < rows.front().size(); ++j) cols.push_back({"c" + std::to_string(j), ColumnKind::continuous, {}});
    Table t{Schema(cols), RowMatrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size())),
            std::nullopt};
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

// x continuous, y = 2 x1 - x2 (+ noise), label discrete from the sign of x1.
Table regression_table(Eigen::Index n, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0, 1);
    Table t{Schema({{"x1", ColumnKind::continuous, {}},
                    {"x2", ColumnKind::continuous, {}},
                    {"y", ColumnKind::continuous, {}},
                    {"lab", ColumnKind::discrete, {"neg", "pos"}}}),
            RowMatrix(n, 4), std::nullopt};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = z(rng), b = z(rng);
        t.rows.row(i) << a, b, 2 * a - b + noise * z(rng), a > 0 ? 1.0 : 0.0;
    }
    return t;
}

}  // namespace

TEST(Ks, SpecFixtures) {
    EXPECT_EQ(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{3, 1, 2}), 0.0);
    EXPECT_EQ(ks_statistic(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
    EXPECT_EQ(ks_statistic(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 5}), 0.25);
    EXPECT_THROW(ks_statistic(std::vector<double>{}, std::vector<double>{1}), Error);
}

TEST(Wasserstein, SpecFixtures) {
    EXPECT_EQ(wasserstein1(std::vector<double>{4, 1, 2}, std::vector<double>{1, 2, 4}), 0.0);
    EXPECT_EQ(wasserstein1(std::vector<double>{0}, std::vector<double>{1}), 1.0);
    EXPECT_EQ(wasserstein1(std::vector<double>{0, 2}, std::vector<double>{1, 3}), 1.0);
    EXPECT_THROW(wasserstein1(std::vector<double>{1}, std::vector<double>{}), Error);
}

TEST(KsWasserstein, MatchBruteForceAndAreSymmetric) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> size(1, 50), small(0, 6);
    std::normal_distribution<double> n(0, 2);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
        const bool ties = t % 2 == 0;
        for (auto& v : a) v = ties ? small(rng) : n(rng);
        for (auto& v : b) v = ties ? small(rng) : n(rng) + 0.5;
        EXPECT_NEAR(ks_statistic(a, b), oracle::ks_brute(a, b), 1e-12);
        EXPECT_NEAR(wasserstein1(a, b), oracle::wd1_brute(a, b), 1e-9);
        EXPECT_EQ(ks_statistic(a, b), ks_statistic(b, a));
        EXPECT_NEAR(wasserstein1(a, b), wasserstein1(b, a), 1e-12);
        if (a.size() == b.size()) {
            auto sa = a, sb = b;
            std::sort(sa.begin(), sa.end());
            std::sort(sb.begin(), sb.end());
            double mean_abs = 0;
            for (std::size_t i = 0; i < sa.size(); ++i) mean_abs += std::abs(sa[i] - sb[i]);
            EXPECT_NEAR(wasserstein1(a, b), mean_abs / static_cast<double>(sa.size()), 1e-9);
        }
        std::shuffle(a.begin(), a.end(), rng);
        EXPECT_NEAR(ks_statistic(a, b), oracle::ks_brute(a, b), 1e-12);
    }
}

TEST(Association, IdenticalTablesHaveZeroDistance) {
    const auto t = regression_table(200, 0.1, 2);
    EXPECT_EQ(correlation_distance(t, t), 0.0);
    const auto m = association_matrix(t);
    for (Eigen::Index i = 0; i < m.rows(); ++i) EXPECT_EQ(m(i, i), 1.0);
    EXPECT_NEAR((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(Association, IndependentVersusPerfectlyCorrelatedPair) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    std::vector<std::vector<double>> indep, perfect;
    for (int i = 0; i < 20000; ++i) {
        const double a = n(rng);
        indep.push_back({a, n(rng)});
        perfect.push_back({a, a});
    }
    EXPECT_NEAR(correlation_distance(numeric_table(indep), numeric_table(perfect)), std::sqrt(2.0), 0.03);
}

TEST(Association, MixedTypesAndDegenerateColumns) {
    Table t{Schema({{"x", ColumnKind::continuous, {}},
                    {"d", ColumnKind::discrete, {"a", "b"}},
                    {"e", ColumnKind::discrete, {"a", "b"}},
                    {"k", ColumnKind::continuous, {}}}),
            RowMatrix(4, 4), std::nullopt};
    t.rows << 0, 0, 0, 1,  //
        0, 0, 0, 1,        //
        5, 1, 1, 1,        //
        5, 1, 1, 1;
    const auto m = association_matrix(t);
    EXPECT_NEAR(m(0, 1), 1.0, 1e-12);  // correlation ratio, x fully determined by d
    EXPECT_NEAR(m(1, 2), 1.0, 1e-12);  // Cramer's V of identical columns
    EXPECT_EQ(m(0, 3), 0.0);           // k has zero variance
    EXPECT_EQ(m(3, 3), 1.0);
}

TEST(Dcr, SpecFixtures) {
    const auto real = numeric_table({{0}, {10}});
    const auto synth = numeric_table({{1}, {12}});
    EXPECT_NEAR(dcr(real, synth).rs, 1.05, 1e-12);
    EXPECT_EQ(dcr(real, real).rs, 0.0);
    const auto dup = numeric_table({{1, 2}, {1, 2}, {1, 2}});
    EXPECT_EQ(dcr(dup, dup).ss, 0.0);
    EXPECT_EQ(dcr(dup, dup).rr, 0.0);
}

TEST(Dcr, MatchesBruteForceAndIgnoresDiscreteColumns) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    const auto real = regression_table(40, 1, 5);
    const auto synth = regression_table(30, 1, 6);
    std::vector<double> rs, rr, ss;
    auto dist = [](const Table& a, Eigen::Index i, const Table& b, Eigen::Index j) {
        return (a.rows.row(i).head(3) - b.rows.row(j).head(3)).norm();
    };
    for (Eigen::Index i = 0; i < 40; ++i) {
        double best = 1e300, best_r = 1e300;
        for (Eigen::Index j = 0; j < 30; ++j) best = std::min(best, dist(real, i, synth, j));
        for (Eigen::Index j = 0; j < 40; ++j)
            if (j != i) best_r = std::min(best_r, dist(real, i, real, j));
        rs.push_back(best);
        rr.push_back(best_r);
    }
    for (Eigen::Index i = 0; i < 30; ++i) {
        double best = 1e300;
        for (Eigen::Index j = 0; j < 30; ++j)
            if (j != i) best = std::min(best, dist(synth, i, synth, j));
        ss.push_back(best);
    }
    const auto d = dcr(real, synth);
    EXPECT_NEAR(d.rs, oracle::percentile_linear(rs, 0.05), 1e-12);
    EXPECT_NEAR(d.rr, oracle::percentile_linear(rr, 0.05), 1e-12);
    EXPECT_NEAR(d.ss, oracle::percentile_linear(ss, 0.05), 1e-12);

    Table discrete_only{Schema({{"d", ColumnKind::discrete, {"a", "b"}}}), RowMatrix(2, 1), std::nullopt};
    discrete_only.rows << 0, 1;
    EXPECT_THROW(dcr(discrete_only, discrete_only), Error);
}

TEST(Mlu, NoiselessLinearTargetIsRecovered) {
    const auto train = regression_table(300, 0, 7);
    const auto test = regression_table(200, 0, 8);
    const auto r = mlu(train, test, train, 2, 3);
    // a perfect fit has zero error; MARE within 2x of that baseline means ~0
    EXPECT_LT(r.mare, 1e-8);
    EXPECT_GT(r.f1, 0.95);
}

TEST(Mlu, RejectsBadTargets) {
    const auto t = regression_table(50, 0.1, 9);
    EXPECT_THROW(mlu(t, t, t, 3, 3), Error);
    EXPECT_THROW(mlu(t, t, t, 2, 2), Error);
}

TEST(Logistic, SeparableDataIsPerfectlyClassified) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd x(300, 2);
    std::vector<Eigen::Index> y;
    for (Eigen::Index i = 0; i < 300; ++i) {
        const Eigen::Index c = i % 3;
        x.row(i) << 4.0 * static_cast<double>(c) + 0.3 * n(rng), -3.0 * static_cast<double>(c == 1) + 0.3 * n(rng);
        y.push_back(c);
    }
    const auto model = fit_logistic(x, y, 3);
    std::vector<Eigen::Index> pred;
    for (Eigen::Index i = 0; i < 300; ++i) pred.push_back(model.predict(x.row(i).transpose()));
    EXPECT_EQ(macro_f1(y, pred), 1.0);
    EXPECT_NEAR(model.probabilities(x.row(0).transpose()).sum(), 1.0, 1e-12);
}

TEST(Ols, SingularFallsBackToRidge) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8;
    const Eigen::Vector4d y(1, 2, 3, 4);
    const Eigen::VectorXd beta = fit_ols(x, y);
    EXPECT_TRUE(beta.allFinite());
    EXPECT_NEAR((x * beta - y).norm(), 0.0, 1e-5);
}

TEST(Mare, FloorsDenominator) {
    EXPECT_DOUBLE_EQ(mean_absolute_relative_error(std::vector<double>{2, -4}, std::vector<double>{1, -2}), 0.5);
    EXPECT_DOUBLE_EQ(mean_absolute_relative_error(std::vector<double>{0}, std::vector<double>{1e-8}), 1.0);
}

TEST(MacroF1, ConstantPredictorOnBalancedBinaryLabels) {
    std::vector<Eigen::Index> truth, pred;
    for (int i = 0; i < 100; ++i) {
        truth.push_back(i % 2);
        pred.push_back(0);
    }
    EXPECT_NEAR(macro_f1(truth, pred), 1.0 / 3.0, 1e-12);
}

TEST(Vrate, FixturesAndMonotonicity) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> test(20000), synth(20000);
    for (auto& v : test) v = n(rng);
    for (auto& v : synth) v = n(rng);
    EXPECT_NEAR(vrate(test, test, 0.5), 0.5, 0.03);
    EXPECT_NEAR(vrate(test, synth, 0.5), 0.5, 0.03);
    const std::vector<double> low{-100, -99}, high{100, 101};
    EXPECT_EQ(vrate(test, low, 0.5), 0.0);
    EXPECT_EQ(vrate(test, high, 0.5), 1.0);
    double prev = 0;
    for (double a = 0.05; a < 1; a += 0.05) {
        const double v = vrate(test, synth, a);
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_THROW(vrate(test, synth, 0.0), Error);
}

TEST(RocAuc, PerfectRandomAndTies) {
    EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}), 0.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1}), 0.5);
    EXPECT_THROW(roc_auc(std::vector<double>{0.5}, std::vector<int>{1}), Error);
}

TEST(RocAuc, NullAttackIsAtChance) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 4000; ++i) {
        scores.push_back(u(rng));
        labels.push_back(i % 2);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    EXPECT_NEAR(roc_auc(scores, labels), 0.5, 0.05);
    double correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > 0.5) == (labels[i] == 1);
    EXPECT_NEAR(correct / 4000.0, 0.5, 0.05);
}

TEST(AttributeDisclosure, SelfNeighbourRecoversSecrets) {
    const auto t = regression_table(200, 0.5, 13);
    const std::vector<std::size_t> known{0, 1, 2}, secret{3};
    EXPECT_EQ(attribute_disclosure(t, t, known, secret, 1), 1.0);
}

TEST(AttributeDisclosure, RandomSecretsAreAtChance) {
    auto real = regression_table(2000, 0.5, 14);
    auto synth = regression_table(2000, 0.5, 15);
    std::mt19937_64 rng(16);
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < synth.size(); ++i) synth.rows(i, 3) = coin(rng);
    for (Eigen::Index i = 0; i < real.size(); ++i) real.rows(i, 3) = coin(rng);
    const std::vector<std::size_t> known{0, 1}, secret{3};
    EXPECT_NEAR(attribute_disclosure(real, synth, known, secret, 1), 0.5, 0.05);
}

TEST(AttributeDisclosure, EvenTieGoesToLowestLevelAndKIsClamped) {
    Table real{Schema({{"x", ColumnKind::continuous, {}}, {"s", ColumnKind::discrete, {"a", "b"}}}), RowMatrix(1, 2),
               std::nullopt};
    real.rows << 0, 1;
    Table synth = real;
    synth.rows.resize(2, 2);
    synth.rows << 0.1, 1, -0.1, 0;
    const std::vector<std::size_t> known{0}, secret{1};
    // two neighbours, one vote each: level 0 wins, truth is 1
    EXPECT_EQ(attribute_disclosure(real, synth, known, secret, 2), 0.0);
    EXPECT_EQ(attribute_disclosure(real, synth, known, secret, 50), 0.0);
    EXPECT_THROW(attribute_disclosure(real, synth, known, std::vector<std::size_t>{0}, 1), Error);
}

TEST(Evaluate, IdenticalDataDegeneracyAndFieldSet) {
    const auto train = regression_table(300, 0.3, 17);
    const auto test = regression_table(200, 0.3, 18);
    EvaluateOptions opts;
    opts.regression_target = 2;
    opts.classification_target = 3;
    const auto r = evaluate(train, test, train, opts);
    EXPECT_EQ(r.ks_cont, 0.0);
    EXPECT_EQ(r.ks_disc, 0.0);
    EXPECT_EQ(r.dcr_rs, 0.0);
    EXPECT_EQ(r.corr_dist, 0.0);
    EXPECT_EQ(r.attr_disclosure_f1.at(1), 1.0);

    const auto doc = nlohmann::json::parse(report_to_json(r));
    for (const char* key : {"mare", "f1", "ks_cont", "ks_disc", "wd1_cont", "wd1_disc", "corr_dist", "dcr_rs", "dcr_rr",
                            "dcr_ss", "vrate", "attr_disclosure_f1"})
        EXPECT_TRUE(doc.contains(key)) << key;
    EXPECT_FALSE(doc.contains("mia_accuracy"));
    EXPECT_EQ(doc.size(), 12u);
    EXPECT_EQ(doc["vrate"].size(), 5u);

    auto with = r;
    with.mia_accuracy = 0.5;
    with.mia_auc = 0.5;
    EXPECT_EQ(nlohmann::json::parse(report_to_json(with)).size(), 14u);
}

TEST(Evaluate, MetricsArePermutationInvariant) {
    const auto train = regression_table(150, 0.3, 19);
    const auto test = regression_table(100, 0.3, 20);
    const auto synth = regression_table(150, 0.6, 21);
    std::vector<Eigen::Index> order(150);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(22);
    std::shuffle(order.begin(), order.end(), rng);
    EvaluateOptions opts;
    opts.regression_target = 2;
    opts.classification_target = 3;
    opts.neighbour_counts = {1, 10};
    const auto a = evaluate(train, test, synth, opts);
    const auto b = evaluate(train, test, select_rows(synth, order), opts);
    EXPECT_EQ(a.ks_cont, b.ks_cont);
    EXPECT_NEAR(a.wd1_cont, b.wd1_cont, 1e-12);
    EXPECT_NEAR(a.corr_dist, b.corr_dist, 1e-12);
    EXPECT_EQ(a.dcr_rs, b.dcr_rs);
    EXPECT_NEAR(a.mare, b.mare, 1e-9);
}
