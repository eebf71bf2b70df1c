#include "distvae/checkpoint.hpp"

#include "distvae/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace distvae {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "distvae-checkpoint";

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        std::vector<double> weight;
        weight.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) weight.push_back(l.weight(r, c));
        layers.push_back({{"in", l.in_dim()},
                          {"out", l.out_dim()},
                          {"activation", l.activation == nn::Activation::relu ? "relu" : "identity"},
                          {"weight", weight},
                          {"bias", std::vector<double>(l.bias.begin(), l.bias.end())}});
    }
    return layers;
}

Mlp mlp_from_json(const json& doc, const char* name) {
    Mlp net;
    for (const auto& entry : doc) {
        const auto in = entry.at("in").get<Eigen::Index>();
        const auto out = entry.at("out").get<Eigen::Index>();
        const auto weight = entry.at("weight").get<std::vector<double>>();
        const auto bias = entry.at("bias").get<std::vector<double>>();
        if (in <= 0 || out <= 0 || weight.size() != static_cast<std::size_t>(in * out) ||
            bias.size() != static_cast<std::size_t>(out))
            throw Error(std::string("checkpoint ") + name + " layer has inconsistent shapes");
        nn::DenseLayer<double> layer;
        layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            weight.data(), out, in);
        layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
        const auto act = entry.at("activation").get<std::string>();
        if (act == "relu")
            layer.activation = nn::Activation::relu;
        else if (act == "identity")
            layer.activation = nn::Activation::identity;
        else
            throw Error("checkpoint has unknown activation '" + act + "'");
        if (!net.layers.empty() && net.layers.back().out_dim() != in)
            throw Error(std::string("checkpoint ") + name + " layers do not compose");
        net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw Error(std::string("checkpoint ") + name + " has no layers");
    return net;
}

json config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
            {"beta", c.beta},             {"latent_dim", c.latent_dim}, {"knot_count", c.knot_count},
            {"hidden_width", c.hidden_width}, {"seed", c.seed}};
}

TrainConfig config_from_json(const json& doc) {
    TrainConfig c;
    c.epochs = doc.at("epochs").get<int>();
    c.batch_size = doc.at("batch_size").get<int>();
    c.learning_rate = doc.at("learning_rate").get<double>();
    c.beta = doc.at("beta").get<double>();
    c.latent_dim = doc.at("latent_dim").get<int>();
    c.knot_count = doc.at("knot_count").get<int>();
    c.hidden_width = doc.at("hidden_width").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    json trace = json::array();
    for (const auto& e : ckpt.loss_trace)
        trace.push_back({{"epoch", e.epoch},
                         {"crps_recon", e.loss.crps_recon},
                         {"discrete_recon", e.loss.discrete_recon},
                         {"kl", e.loss.kl},
                         {"total", e.loss.total}});
    json ranges = json::array();
    for (const auto& [lo, hi] : ckpt.numeric_ranges) ranges.push_back({lo, hi});

    json doc;
    doc["format"] = kFormatTag;
    doc["format_version"] = ckpt.format_version;
    doc["schema"] = json::parse(schema_to_json(ckpt.schema()));
    doc["scaling"] = {{"mean", ckpt.scaling.mean}, {"stddev", ckpt.scaling.stddev}};
    doc["ordinal_levels"] = ckpt.ordinal_levels;
    doc["numeric_ranges"] = ranges;
    doc["config"] = config_to_json(ckpt.config());
    doc["encoder"] = mlp_to_json(ckpt.model.encoder);
    doc["decoder"] = mlp_to_json(ckpt.model.decoder);
    doc["loss_trace"] = trace;
    return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != kFormatTag) throw Error("not a distvae checkpoint");
    const int version = doc.value("format_version", -1);
    if (version != Checkpoint::kFormatVersion)
        throw Error("unsupported checkpoint format_version " + std::to_string(version) + " (expected " +
                    std::to_string(Checkpoint::kFormatVersion) + ")");
    try {
        Checkpoint ckpt;
        ckpt.format_version = version;
        const Schema schema = parse_schema(doc.at("schema").dump());
        const TrainConfig config = config_from_json(doc.at("config"));
        validate(config);
        ckpt.model.schema = schema;
        ckpt.model.config = config;
        ckpt.model.knots = spline::uniform_knots<double>(config.knot_count);
        ckpt.model.encoder = mlp_from_json(doc.at("encoder"), "encoder");
        ckpt.model.decoder = mlp_from_json(doc.at("decoder"), "decoder");
        const auto d = static_cast<Eigen::Index>(config.latent_dim);
        if (ckpt.model.encoder.in_dim() != static_cast<Eigen::Index>(schema.encoded_width()) ||
            ckpt.model.encoder.out_dim() != 2 * d || ckpt.model.decoder.in_dim() != d ||
            ckpt.model.decoder.out_dim() != decoder_width(schema, config.knot_count))
            throw Error("checkpoint weight shapes are inconsistent with its schema and config");

        ckpt.scaling.mean = doc.at("scaling").at("mean").get<std::vector<double>>();
        ckpt.scaling.stddev = doc.at("scaling").at("stddev").get<std::vector<double>>();
        if (ckpt.scaling.mean.size() != schema.numeric_count() || ckpt.scaling.stddev.size() != schema.numeric_count())
            throw Error("checkpoint scaling statistics do not match its schema");
        ckpt.ordinal_levels = doc.at("ordinal_levels").get<std::vector<std::vector<double>>>();
        if (ckpt.ordinal_levels.size() != schema.size()) throw Error("checkpoint ordinal_levels has the wrong length");
        for (const auto& r : doc.at("numeric_ranges")) ckpt.numeric_ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
        for (const auto& e : doc.at("loss_trace")) {
            EpochLoss rec;
            rec.epoch = e.at("epoch").get<int>();
            rec.loss = {e.at("crps_recon").get<double>(), e.at("discrete_recon").get<double>(),
                        e.at("kl").get<double>(), e.at("total").get<double>()};
            ckpt.loss_trace.push_back(rec);
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw Error(std::string("corrupt checkpoint (format_version 1): ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    out << serialize_checkpoint(ckpt);
    if (!out) throw Error("failed while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_checkpoint(buffer.str());
}

}  // namespace distvae
