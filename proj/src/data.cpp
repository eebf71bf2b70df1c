#include "distvae/data.hpp"

#include "distvae/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace distvae {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace

const char* to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::ordinal: return "ordinal";
        case ColumnKind::discrete: return "discrete";
    }
    return "?";
}

ColumnKind column_kind_from_string(const std::string& text) {
    if (text == "continuous") return ColumnKind::continuous;
    if (text == "ordinal") return ColumnKind::ordinal;
    if (text == "discrete") return ColumnKind::discrete;
    throw Error("unknown column kind '" + text + "'");
}

bool operator==(const ColumnSpec& a, const ColumnSpec& b) {
    return a.name == b.name && a.kind == b.kind && a.level_labels == b.level_labels;
}

bool operator==(const Schema& a, const Schema& b) { return a.columns_ == b.columns_; }

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const auto& col = columns_[i];
        if (col.name.empty()) throw Error("column " + std::to_string(i) + " has an empty name");
        for (std::size_t j = 0; j < i; ++j) {
            if (columns_[j].name == col.name) throw Error("duplicate column name '" + col.name + "'");
        }
        if (col.is_discrete()) {
            if (col.levels() < 2) throw Error("discrete column '" + col.name + "' needs at least 2 levels");
            auto labels = col.level_labels;
            std::sort(labels.begin(), labels.end());
            if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
                throw Error("discrete column '" + col.name + "' has duplicate level labels");
        } else if (!col.level_labels.empty()) {
            throw Error("column '" + col.name + "' is " + to_string(col.kind) + " but declares levels");
        }
    }
}

std::size_t Schema::numeric_count() const {
    return static_cast<std::size_t>(std::count_if(columns_.begin(), columns_.end(),
                                                  [](const ColumnSpec& c) { return c.is_numeric(); }));
}

std::size_t Schema::discrete_count() const { return columns_.size() - numeric_count(); }

std::size_t Schema::encoded_width() const {
    std::size_t width = 0;
    for (const auto& c : columns_) width += c.is_discrete() ? static_cast<std::size_t>(c.levels()) : 1;
    return width;
}

std::vector<std::size_t> Schema::numeric_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].is_numeric()) out.push_back(i);
    return out;
}

std::vector<std::size_t> Schema::discrete_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].is_discrete()) out.push_back(i);
    return out;
}

std::size_t Schema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw Error("no column named '" + name + "'");
}

Schema parse_schema(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("schema is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
        throw Error("schema must be an object with a 'columns' array");
    std::vector<ColumnSpec> columns;
    for (const auto& entry : doc["columns"]) {
        if (!entry.contains("name") || !entry.contains("kind"))
            throw Error("every schema column needs 'name' and 'kind'");
        ColumnSpec spec;
        spec.name = entry["name"].get<std::string>();
        spec.kind = column_kind_from_string(entry["kind"].get<std::string>());
        if (entry.contains("levels")) {
            for (const auto& label : entry["levels"]) spec.level_labels.push_back(label.get<std::string>());
        } else if (spec.is_discrete()) {
            throw Error("discrete column '" + spec.name + "' is missing 'levels'");
        }
        columns.push_back(std::move(spec));
    }
    return Schema(std::move(columns));
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_schema(buffer.str());
}

std::string schema_to_json(const Schema& schema) {
    nlohmann::json columns = nlohmann::json::array();
    for (const auto& c : schema.columns()) {
        nlohmann::json entry{{"name", c.name}, {"kind", to_string(c.kind)}};
        if (c.is_discrete()) entry["levels"] = c.level_labels;
        columns.push_back(std::move(entry));
    }
    return nlohmann::json{{"columns", columns}}.dump(2);
}

ScalingStats ScalingStats::identity(std::size_t numeric_count) {
    return ScalingStats{std::vector<double>(numeric_count, 0.0), std::vector<double>(numeric_count, 1.0)};
}

void validate(const Table& table) {
    const auto& schema = table.schema;
    if (static_cast<std::size_t>(table.rows.cols()) != schema.size())
        throw Error("table has " + std::to_string(table.rows.cols()) + " columns, schema has " +
                    std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& col = schema[j];
        for (Eigen::Index i = 0; i < table.rows.rows(); ++i) {
            const double v = table.rows(i, static_cast<Eigen::Index>(j));
            if (!std::isfinite(v))
                throw Error("non-finite value in column '" + col.name + "' at row " + std::to_string(i + 1));
            if (col.is_discrete() && (v != std::floor(v) || v < 0 || v >= col.levels()))
                throw Error("invalid level index in column '" + col.name + "' at row " + std::to_string(i + 1));
        }
    }
    if (table.scaling) {
        const auto& s = *table.scaling;
        if (s.mean.size() != schema.numeric_count() || s.stddev.size() != schema.numeric_count())
            throw Error("scaling statistics do not match the schema");
        for (double sd : s.stddev)
            if (!(sd > 0)) throw Error("scaling stddev must be positive");
    }
}

Table read_csv(std::istream& in, const Schema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw Error("CSV input is empty (missing header row)");
    const auto header = split_line(line);
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (j >= header.size()) throw Error("missing column '" + schema[j].name + "' in CSV header");
        if (header[j] != schema[j].name)
            throw Error("CSV header column " + std::to_string(j + 1) + " is '" + header[j] + "', expected '" +
                        schema[j].name + "'");
    }
    if (header.size() != schema.size())
        throw Error("CSV header has unexpected extra column '" + header[schema.size()] + "'");

    std::vector<double> cells;
    Eigen::Index n = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++n;
        const auto fields = split_line(line);
        if (fields.size() != schema.size())
            throw Error("row " + std::to_string(n) + " has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(schema.size()));
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto& col = schema[j];
            const auto& field = fields[j];
            if (field.empty())
                throw Error("missing value in column '" + col.name + "' at row " + std::to_string(n));
            if (col.is_discrete()) {
                auto it = std::find(col.level_labels.begin(), col.level_labels.end(), field);
                if (it == col.level_labels.end())
                    throw Error("unknown level " + field + " at row " + std::to_string(n) + " in column '" +
                                col.name + "'");
                cells.push_back(static_cast<double>(it - col.level_labels.begin()));
            } else {
                double value = 0;
                auto res = std::from_chars(field.data(), field.data() + field.size(), value);
                if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(value))
                    throw Error("unparseable value '" + field + "' in column '" + col.name + "' at row " +
                                std::to_string(n));
                cells.push_back(value);
            }
        }
    }
    Table table{schema, RowMatrix(n, static_cast<Eigen::Index>(schema.size())), std::nullopt};
    if (n > 0) table.rows = Eigen::Map<RowMatrix>(cells.data(), n, static_cast<Eigen::Index>(schema.size()));
    return table;
}

Table load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV file " + path);
    return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Table& table) {
    const auto& schema = table.schema;
    for (std::size_t j = 0; j < schema.size(); ++j) out << (j ? "," : "") << schema[j].name;
    out << '\n';
    for (Eigen::Index i = 0; i < table.rows.rows(); ++i) {
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (j) out << ',';
            const double v = table.rows(i, static_cast<Eigen::Index>(j));
            if (schema[j].is_discrete())
                out << schema[j].level_labels.at(static_cast<std::size_t>(v));
            else
                out << format_double(v);
        }
        out << '\n';
    }
}

void save_csv(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write CSV file " + path);
    write_csv(out, table);
    if (!out) throw Error("failed while writing " + path);
}

std::pair<Table, ScalingStats> standardize(const Table& table) {
    if (table.size() < 2) throw Error("standardize needs at least 2 rows");
    const auto numeric = table.schema.numeric_columns();
    ScalingStats stats;
    const double n = static_cast<double>(table.size());
    for (auto j : numeric) {
        const auto col = table.rows.col(static_cast<Eigen::Index>(j));
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / (n - 1.0);
        const double sd = std::sqrt(var);
        if (!(sd > 0) || !std::isfinite(sd))
            throw Error("column '" + table.schema[j].name + "' has zero variance");
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    return {apply_scaling(table, stats), stats};
}

Table apply_scaling(const Table& table, const ScalingStats& stats) {
    const auto numeric = table.schema.numeric_columns();
    if (stats.mean.size() != numeric.size() || stats.stddev.size() != numeric.size())
        throw Error("scaling statistics do not match the schema's numeric columns");
    Table out = table;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
        auto col = out.rows.col(static_cast<Eigen::Index>(numeric[k]));
        col = (col.array() - stats.mean[k]) / stats.stddev[k];
    }
    out.scaling = stats;
    return out;
}

Table destandardize(const Table& table, const ScalingStats& stats) {
    const auto numeric = table.schema.numeric_columns();
    if (stats.mean.size() != numeric.size() || stats.stddev.size() != numeric.size())
        throw Error("scaling statistics do not match the schema's numeric columns");
    Table out = table;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
        auto col = out.rows.col(static_cast<Eigen::Index>(numeric[k]));
        col = col.array() * stats.stddev[k] + stats.mean[k];
    }
    out.scaling.reset();
    return out;
}

Eigen::VectorXd one_hot(const Schema& schema, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema.encoded_width()));
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const double v = row(static_cast<Eigen::Index>(j));
        if (schema[j].is_discrete()) {
            out(k + static_cast<Eigen::Index>(v)) = 1.0;
            k += schema[j].levels();
        } else {
            out(k++) = v;
        }
    }
    return out;
}

Eigen::MatrixXd one_hot_columns(const Table& table) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.schema.encoded_width()), table.size());
    for (Eigen::Index i = 0; i < table.size(); ++i) out.col(i) = one_hot(table.schema, table.rows.row(i));
    return out;
}

Table select_rows(const Table& table, const std::vector<Eigen::Index>& indices) {
    Table out{table.schema, RowMatrix(static_cast<Eigen::Index>(indices.size()), table.rows.cols()), table.scaling};
    for (std::size_t i = 0; i < indices.size(); ++i) out.rows.row(static_cast<Eigen::Index>(i)) = table.rows.row(indices[i]);
    return out;
}

std::pair<Table, Table> train_test_split(const Table& table, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test fraction must lie in (0, 1)");
    if (table.size() < 2) throw Error("train/test split needs at least 2 rows");
    const auto n = table.size();
    auto n_test = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<Eigen::Index>(n_test, 1, n - 1);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::Index> test(order.begin(), order.begin() + n_test);
    std::vector<Eigen::Index> train(order.begin() + n_test, order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {select_rows(table, train), select_rows(table, test)};
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Table clip_to_quantiles(const Table& table, double lower, double upper) {
    const auto numeric = table.schema.numeric_columns();
    std::vector<std::pair<double, double>> bounds;
    for (auto j : numeric) {
        const auto col = table.rows.col(static_cast<Eigen::Index>(j));
        std::vector<double> values(col.begin(), col.end());
        const double lo = quantile(values, lower);
        bounds.emplace_back(lo, quantile(std::move(values), upper));
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < table.size(); ++i) {
        bool inside = true;
        for (std::size_t k = 0; k < numeric.size() && inside; ++k) {
            const double v = table.rows(i, static_cast<Eigen::Index>(numeric[k]));
            inside = v >= bounds[k].first && v <= bounds[k].second;
        }
        if (inside) keep.push_back(i);
    }
    return select_rows(table, keep);
}

}  // namespace distvae
