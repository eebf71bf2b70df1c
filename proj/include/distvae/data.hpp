#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace distvae {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ColumnKind { continuous, ordinal, discrete };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<std::string> level_labels;  // discrete only

    bool is_discrete() const { return kind == ColumnKind::discrete; }
    bool is_numeric() const { return kind != ColumnKind::discrete; }
    int levels() const { return static_cast<int>(level_labels.size()); }
};

/// Ordered column list. Continuous and ordinal columns are "numeric"; the
/// model treats them identically, ordinal ones are only post-processed.
class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<ColumnSpec> columns);

    const std::vector<ColumnSpec>& columns() const { return columns_; }
    const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
    std::size_t size() const { return columns_.size(); }

    std::size_t numeric_count() const;
    std::size_t discrete_count() const;
    /// Width of the one-hot encoded row: p + sum of level counts.
    std::size_t encoded_width() const;
    /// Column positions of numeric (continuous/ordinal) columns, in order.
    std::vector<std::size_t> numeric_columns() const;
    std::vector<std::size_t> discrete_columns() const;
    /// Index of `name` or throws.
    std::size_t index_of(const std::string& name) const;

    friend bool operator==(const Schema&, const Schema&);

private:
    std::vector<ColumnSpec> columns_;
};

bool operator==(const ColumnSpec& a, const ColumnSpec& b);

/// Parse the JSON schema document:
///   {"columns": [{"name": "age", "kind": "continuous"},
///                {"name": "sex", "kind": "discrete", "levels": ["M", "F"]}]}
Schema parse_schema(const std::string& text);
Schema load_schema(const std::string& path);
std::string schema_to_json(const Schema& schema);

/// Mean and sample standard deviation for each numeric column, in
/// `Schema::numeric_columns()` order.
struct ScalingStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    static ScalingStats identity(std::size_t numeric_count);
};

struct Table {
    Schema schema;
    RowMatrix rows;  // discrete cells hold level indices
    std::optional<ScalingStats> scaling;

    Eigen::Index size() const { return rows.rows(); }
};

/// Checks cell-level invariants; throws Error on violation.
void validate(const Table& table);

Table read_csv(std::istream& in, const Schema& schema);
Table load_csv(const std::string& path, const Schema& schema);
/// Discrete columns are emitted as labels; numerics in shortest round-trip form.
void write_csv(std::ostream& out, const Table& table);
void save_csv(const std::string& path, const Table& table);

std::pair<Table, ScalingStats> standardize(const Table& table);
/// Applies existing statistics (e.g. training stats to a test split).
Table apply_scaling(const Table& table, const ScalingStats& stats);
Table destandardize(const Table& table, const ScalingStats& stats);

/// Numeric values pass through; each discrete column expands to indicators.
Eigen::VectorXd one_hot(const Schema& schema, const Eigen::Ref<const Eigen::RowVectorXd>& row);
/// Column-per-record encoding of every row (encoded_width x n).
Eigen::MatrixXd one_hot_columns(const Table& table);

std::pair<Table, Table> train_test_split(const Table& table, double test_fraction, std::uint64_t seed);

/// Drops rows with any numeric value outside its [lower, upper] empirical
/// quantile range.
Table clip_to_quantiles(const Table& table, double lower = 0.01, double upper = 0.99);

Table select_rows(const Table& table, const std::vector<Eigen::Index>& indices);

/// Linear-interpolated empirical quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

}  // namespace distvae
