#include "distvae/cli.hpp"

#include "distvae/checkpoint.hpp"
#include "distvae/error.hpp"
#include "distvae/metrics.hpp"
#include "distvae/synthesis.hpp"
#include "distvae/toy.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace distvae {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("write to '" + path + "' failed");
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-")
        out << text;
    else
        write_file(path, text);
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

TrainConfig config_from_file(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("config '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw Error("config '" + path + "' must be a JSON object");
    static const std::vector<std::string> known{"epochs",     "batch_size", "learning_rate", "beta",
                                                "latent_dim", "knot_count", "hidden_width",  "seed"};
    for (const auto& [key, _] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error("config '" + path + "': unknown key '" + key + "'");
    TrainConfig c;
    try {
        c.epochs = doc.value("epochs", c.epochs);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        c.beta = doc.value("beta", c.beta);
        c.latent_dim = doc.value("latent_dim", c.latent_dim);
        c.knot_count = doc.value("knot_count", c.knot_count);
        c.hidden_width = doc.value("hidden_width", c.hidden_width);
        c.seed = doc.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config '" + path + "': " + e.what());
    }
    return c;
}

std::vector<std::size_t> column_indices(const Schema& schema, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(schema.index_of(n));
    return out;
}

struct TrainArgs {
    std::string data, schema, out, config;
    int epochs = 0, batch_size = 0, latent_dim = 0, knots = 0, hidden = 0;
    double lr = 0, beta = 0;
    std::uint64_t seed = 0;
    bool clip = false;
};

struct GenerateArgs {
    std::string model, out, rounding = "level";
    Eigen::Index n = 0;
    std::uint64_t seed = 0;
};

struct CdfArgs {
    std::string model, column, out;
    Eigen::Index mc = 5000;
    int points = 201;
    std::uint64_t seed = 0;
    bool discretize = false;
};

struct EvaluateArgs {
    std::string real_train, real_test, synth, schema, out, model;
    std::string regression_target, classification_target;
    std::vector<std::string> known, secret;
    std::vector<int> neighbours{1, 10, 100};
    bool with_mia = false;
    std::uint64_t seed = 0;
};

struct ToyArgs {
    std::string out, schema_out;
    Eigen::Index n = 5000;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
    TrainConfig config = a.config.empty() ? TrainConfig{} : config_from_file(a.config);
    if (sub.count("--epochs")) config.epochs = a.epochs;
    if (sub.count("--batch-size")) config.batch_size = a.batch_size;
    if (sub.count("--lr")) config.learning_rate = a.lr;
    if (sub.count("--beta")) config.beta = a.beta;
    if (sub.count("--latent-dim")) config.latent_dim = a.latent_dim;
    if (sub.count("--knots")) config.knot_count = a.knots;
    if (sub.count("--hidden")) config.hidden_width = a.hidden;
    config.seed = a.seed;
    validate(config);

    const Schema schema = load_schema(a.schema);
    Table data = load_csv(a.data, schema);
    if (a.clip) data = clip_to_quantiles(data);
    const Checkpoint ckpt = fit(data, config, [&](const EpochLoss& e) {
        out << "epoch " << e.epoch << " crps " << fmt(e.loss.crps_recon) << " discrete " << fmt(e.loss.discrete_recon)
            << " kl " << fmt(e.loss.kl) << " total " << fmt(e.loss.total) << '\n';
    });
    save_checkpoint(a.out, ckpt);
    return 0;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.model);
    GenerateOptions opts;
    opts.ordinal_rounding = a.rounding == "decimal" ? OrdinalRounding::first_decimal : OrdinalRounding::nearest_level;
    const Table t = generate(ckpt, a.n, a.seed, opts);
    std::ostringstream csv;
    write_csv(csv, t);
    emit(a.out, csv.str(), out);
    return 0;
}

int cmd_cdf(const CdfArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.model);
    const auto& schema = ckpt.schema();
    const std::size_t column = schema.index_of(a.column);
    if (schema[column].is_discrete())
        throw Error("column '" + a.column + "' is discrete; a CDF needs a numeric column");
    std::ostringstream csv;
    if (a.discretize) {
        const auto d = discretize_ordinal_cdf(ckpt, column, a.mc, a.seed);
        csv << "level,cdf\n";
        for (std::size_t i = 0; i < d.levels.size(); ++i) csv << fmt(d.levels[i]) << ',' << fmt(d.cum_probs[i]) << '\n';
        emit(a.out, csv.str(), out);
        return 0;
    }
    const auto numeric = schema.numeric_columns();
    const auto slot = static_cast<std::size_t>(std::find(numeric.begin(), numeric.end(), column) - numeric.begin());
    if (slot >= ckpt.numeric_ranges.size()) throw Error("checkpoint records no training range for '" + a.column + "'");
    const auto [lo, hi] = ckpt.numeric_ranges[slot];
    const double mean = ckpt.scaling.mean.at(slot);
    const double sd = ckpt.scaling.stddev.at(slot);
    std::vector<double> native(static_cast<std::size_t>(a.points));
    std::vector<double> grid(native.size());
    for (std::size_t i = 0; i < native.size(); ++i) {
        native[i] = a.points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(a.points - 1);
        grid[i] = (native[i] - mean) / sd;
    }
    const auto curve = estimate_cdf(ckpt, column, grid, a.mc, a.seed);
    csv << "x,cdf\n";
    for (std::size_t i = 0; i < native.size(); ++i) csv << fmt(native[i]) << ',' << fmt(curve.values[i]) << '\n';
    emit(a.out, csv.str(), out);
    return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const Schema schema = load_schema(a.schema);
    const Table train = load_csv(a.real_train, schema);
    const Table test = load_csv(a.real_test, schema);
    const Table synth = load_csv(a.synth, schema);

    EvaluateOptions opts;
    opts.regression_target = schema.index_of(a.regression_target);
    opts.classification_target = schema.index_of(a.classification_target);
    opts.known_columns = column_indices(schema, a.known);
    opts.secret_columns = column_indices(schema, a.secret);
    opts.neighbour_counts = a.neighbours;
    MetricReport report = evaluate(train, test, synth, opts);

    if (a.with_mia) {
        const Checkpoint ckpt = load_checkpoint(a.model);
        if (!(ckpt.schema() == schema)) throw Error("checkpoint schema does not match --schema");
        const auto mia = membership_inference(ckpt, train, test, {opts.classification_target, a.seed});
        report.mia_accuracy = mia.accuracy;
        report.mia_auc = mia.auc;
    }
    emit(a.out, report_to_json(report), out);
    return 0;
}

int cmd_toy(const ToyArgs& a, std::ostream& out) {
    const Table t = toy_table(a.n, a.seed);
    std::ostringstream csv;
    write_csv(csv, t);
    emit(a.out, csv.str(), out);
    if (!a.schema_out.empty()) write_file(a.schema_out, schema_to_json(t.schema));
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distributional VAE for synthetic tabular data"};
    app.name("distvae");
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "fit a model and write a checkpoint");
    t->add_option("--data", train.data, "training CSV")->required();
    t->add_option("--schema", train.schema, "schema JSON")->required();
    t->add_option("--out", train.out, "checkpoint path")->required();
    t->add_option("--config", train.config, "JSON file overriding default hyperparameters");
    t->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
    t->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
    t->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
    t->add_option("--beta", train.beta)->check(CLI::PositiveNumber);
    t->add_option("--latent-dim", train.latent_dim)->check(CLI::PositiveNumber);
    t->add_option("--knots", train.knots)->check(CLI::PositiveNumber);
    t->add_option("--hidden", train.hidden)->check(CLI::PositiveNumber);
    t->add_option("--seed", train.seed)->required();
    t->add_flag("--clip", train.clip, "clip numeric columns to their 1%-99% range before training");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "sample synthetic records");
    g->add_option("--model", gen.model)->required();
    g->add_option("--n", gen.n)->required()->check(CLI::NonNegativeNumber);
    g->add_option("--seed", gen.seed)->required();
    g->add_option("--out", gen.out, "CSV path (default stdout)");
    g->add_option("--ordinal-rounding", gen.rounding)->check(CLI::IsMember({"level", "decimal"}));

    CdfArgs cdf;
    auto* c = app.add_subcommand("cdf", "export the estimated marginal CDF of a numeric column");
    c->add_option("--model", cdf.model)->required();
    c->add_option("--column", cdf.column)->required();
    c->add_option("--mc", cdf.mc, "Monte-Carlo prior draws")->check(CLI::PositiveNumber);
    c->add_option("--points", cdf.points, "grid size")->check(CLI::PositiveNumber);
    c->add_option("--seed", cdf.seed);
    c->add_option("--out", cdf.out, "CSV path (default stdout)");
    c->add_flag("--discretize", cdf.discretize, "cumulative level probabilities of an ordinal column");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score synthetic data against real train/test data");
    e->add_option("--real-train", ev.real_train)->required();
    e->add_option("--real-test", ev.real_test)->required();
    e->add_option("--synth", ev.synth)->required();
    e->add_option("--schema", ev.schema)->required();
    e->add_option("--regression-target", ev.regression_target)->required();
    e->add_option("--classification-target", ev.classification_target)->required();
    e->add_option("--known", ev.known, "attribute-disclosure known columns (default: numeric)");
    e->add_option("--secret", ev.secret, "attribute-disclosure secret columns (default: discrete)");
    e->add_option("--neighbours", ev.neighbours)->check(CLI::PositiveNumber);
    auto* mia_model = e->add_option("--model", ev.model, "checkpoint attacked by --with-mia");
    e->add_flag("--with-mia", ev.with_mia, "run the membership-inference attack")->needs(mia_model);
    e->add_option("--seed", ev.seed);
    e->add_option("--out", ev.out, "report path (default stdout)");

    ToyArgs toy;
    auto* y = app.add_subcommand("toy", "write the two-continuous, one-discrete toy dataset");
    y->add_option("--n", toy.n)->check(CLI::NonNegativeNumber);
    y->add_option("--seed", toy.seed);
    y->add_option("--out", toy.out, "CSV path (default stdout)");
    y->add_option("--schema-out", toy.schema_out, "where to write the matching schema");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return 2;
    }

    try {
        if (*t) return cmd_train(train, *t, out);
        if (*g) return cmd_generate(gen, out);
        if (*c) return cmd_cdf(cdf, out);
        if (*e) return cmd_evaluate(ev, out);
        if (*y) return cmd_toy(toy, out);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace distvae
