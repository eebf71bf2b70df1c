#include "distvae/error.hpp"
#include "distvae/metrics.hpp"

#include <json.hpp>

#include <charconv>

namespace distvae {

namespace {

std::vector<double> column(const Table& t, std::size_t j) {
    const auto c = t.rows.col(static_cast<Eigen::Index>(j));
    return {c.begin(), c.end()};
}

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

MetricReport evaluate(const Table& real_train, const Table& real_test, const Table& synth,
                      const EvaluateOptions& options) {
    const auto& schema = real_train.schema;
    if (!(schema == real_test.schema) || !(schema == synth.schema))
        throw Error("real-train, real-test and synthetic tables must share one schema");
    if (synth.size() == 0) throw Error("synthetic table is empty");

    const auto [train_std, stats] = standardize(real_train);
    const Table synth_std = apply_scaling(synth, stats);
    const auto numeric = schema.numeric_columns();
    const auto discrete = schema.discrete_columns();

    MetricReport report;
    const auto mlu_result = mlu(real_train, real_test, synth, options.regression_target, options.classification_target);
    report.mare = mlu_result.mare;
    report.f1 = mlu_result.f1;

    auto marginal_means = [&](const std::vector<std::size_t>& cols, double& ks, double& wd) {
        ks = wd = 0.0;
        if (cols.empty()) return;
        for (auto j : cols) {
            const auto a = column(train_std, j);
            const auto b = column(synth_std, j);
            ks += ks_statistic(a, b);
            wd += wasserstein1(a, b);
        }
        ks /= static_cast<double>(cols.size());
        wd /= static_cast<double>(cols.size());
    };
    marginal_means(numeric, report.ks_cont, report.wd1_cont);
    marginal_means(discrete, report.ks_disc, report.wd1_disc);

    report.corr_dist = correlation_distance(real_train, synth);

    const auto d = dcr(train_std, synth_std);
    report.dcr_rs = d.rs;
    report.dcr_rr = d.rr;
    report.dcr_ss = d.ss;

    for (double alpha : options.alphas) {
        double sum = 0.0;
        for (auto j : numeric) sum += vrate(column(real_test, j), column(synth, j), alpha);
        report.vrate[alpha] = sum / static_cast<double>(numeric.size());
    }

    const auto known = options.known_columns.empty() ? numeric : options.known_columns;
    const auto secret = options.secret_columns.empty() ? discrete : options.secret_columns;
    if (!secret.empty()) {
        for (int k : options.neighbour_counts)
            report.attr_disclosure_f1[k] = attribute_disclosure(train_std, synth_std, known, secret, k);
    }
    return report;
}

std::string report_to_json(const MetricReport& r) {
    nlohmann::ordered_json doc;
    doc["mare"] = r.mare;
    doc["f1"] = r.f1;
    doc["ks_cont"] = r.ks_cont;
    doc["ks_disc"] = r.ks_disc;
    doc["wd1_cont"] = r.wd1_cont;
    doc["wd1_disc"] = r.wd1_disc;
    doc["corr_dist"] = r.corr_dist;
    doc["dcr_rs"] = r.dcr_rs;
    doc["dcr_rr"] = r.dcr_rr;
    doc["dcr_ss"] = r.dcr_ss;
    auto& vr = doc["vrate"] = nlohmann::ordered_json::object();
    for (const auto& [alpha, v] : r.vrate) vr[shortest(alpha)] = v;
    if (r.mia_accuracy) doc["mia_accuracy"] = *r.mia_accuracy;
    if (r.mia_auc) doc["mia_auc"] = *r.mia_auc;
    auto& ad = doc["attr_disclosure_f1"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.attr_disclosure_f1) ad[std::to_string(k)] = v;
    return doc.dump(2) + "\n";
}

}  // namespace distvae
