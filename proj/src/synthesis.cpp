#include "distvae/synthesis.hpp"

#include "distvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace distvae {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double standard_gumbel(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double u = uniform(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    return -std::log(-std::log(u));
}

std::size_t numeric_slot(const Schema& schema, std::size_t column) {
    std::size_t slot = 0;
    for (std::size_t j = 0; j < column; ++j)
        if (schema[j].is_numeric()) ++slot;
    return slot;
}

// Splines of one column decoded at a fixed set of prior draws.
class MonteCarloCdf {
public:
    MonteCarloCdf(const Checkpoint& ckpt, std::size_t column, Eigen::Index n_mc, std::uint64_t seed) {
        const auto& schema = ckpt.schema();
        if (column >= schema.size()) throw Error("column index out of range");
        if (schema[column].is_discrete())
            throw Error("column '" + schema[column].name + "' is discrete; a CDF needs a numeric column");
        if (n_mc < 1) throw Error("Monte-Carlo sample count must be positive");
        const auto slot = numeric_slot(schema, column);
        const Eigen::MatrixXd z = sample_prior(n_mc, ckpt.model.latent_dim(), seed);
        splines_.reserve(static_cast<std::size_t>(n_mc));
        for (Eigen::Index i = 0; i < n_mc; ++i) {
            const Eigen::VectorXd zi = z.row(i).transpose();
            splines_.push_back(std::move(decode(ckpt.model, zi).splines[slot]));
        }
    }

    double operator()(double x) const {
        double sum = 0.0;
        for (const auto& s : splines_) sum += spline::spline_inverse(s, x).alpha_tilde;
        return std::clamp(sum / static_cast<double>(splines_.size()), 0.0, 1.0);
    }

private:
    std::vector<SplineCoeffs> splines_;
};

}  // namespace

std::mt19937_64 row_stream(std::uint64_t seed, std::uint64_t row) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32)};
    return std::mt19937_64(seq);
}

Eigen::MatrixXd sample_prior(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    if (n < 0 || d < 1) throw Error("sample_prior needs n >= 0 and d >= 1");
    Eigen::MatrixXd z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto rng = row_stream(seed, static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index k = 0; k < d; ++k) z(i, k) = normal(rng);
    }
    return z;
}

Eigen::Index gumbel_max(std::span<const double> pi, std::span<const double> gumbel_noise) {
    if (pi.empty() || pi.size() != gumbel_noise.size()) throw Error("gumbel_max: probability/noise size mismatch");
    Eigen::Index best = -1;
    double best_score = kNegInf;
    for (std::size_t l = 0; l < pi.size(); ++l) {
        const double score = pi[l] > 0.0 ? std::log(pi[l]) + gumbel_noise[l] : kNegInf;
        if (best < 0 || score > best_score) {
            best = static_cast<Eigen::Index>(l);
            best_score = score;
        }
    }
    return best;
}

double round_ordinal(double value, std::span<const double> observed_levels, OrdinalRounding mode) {
    if (mode == OrdinalRounding::first_decimal) return std::round(value * 10.0) / 10.0;
    if (observed_levels.empty()) return std::round(value);
    auto it = std::lower_bound(observed_levels.begin(), observed_levels.end(), value);
    if (it == observed_levels.end()) return observed_levels.back();
    if (it == observed_levels.begin()) return *it;
    const double hi = *it;
    const double lo = *(it - 1);
    return (value - lo <= hi - value) ? lo : hi;
}

Table generate(const Checkpoint& ckpt, Eigen::Index n, std::uint64_t seed, const GenerateOptions& options) {
    if (n < 0) throw Error("sample count must be non-negative");
    const auto& model = ckpt.model;
    const auto& schema = model.schema;
    const Eigen::Index d = model.latent_dim();
    Table out{schema, RowMatrix(n, static_cast<Eigen::Index>(schema.size())), std::nullopt};

    for (Eigen::Index i = 0; i < n; ++i) {
        auto rng = row_stream(seed, static_cast<std::uint64_t>(i));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        Eigen::VectorXd z(d);
        for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
        const auto decoded = decode(model, z);
        std::size_t numeric = 0;
        std::size_t discrete = 0;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto col = static_cast<Eigen::Index>(j);
            if (schema[j].is_discrete()) {
                const auto& pi = decoded.probs[discrete++];
                std::vector<double> noise(static_cast<std::size_t>(pi.size()));
                for (auto& g : noise) g = standard_gumbel(rng);
                out.rows(i, col) = static_cast<double>(
                    gumbel_max(std::span<const double>(pi.data(), static_cast<std::size_t>(pi.size())), noise));
            } else {
                const double u = uniform(rng);
                out.rows(i, col) = spline::spline_eval(decoded.splines[numeric++], u);
            }
        }
    }

    out = destandardize(out, ckpt.scaling);
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].kind != ColumnKind::ordinal) continue;
        const std::vector<double>& levels =
            j < ckpt.ordinal_levels.size() ? ckpt.ordinal_levels[j] : std::vector<double>{};
        auto col = out.rows.col(static_cast<Eigen::Index>(j));
        for (Eigen::Index i = 0; i < n; ++i) col(i) = round_ordinal(col(i), levels, options.ordinal_rounding);
    }
    return out;
}

CdfCurve estimate_cdf(const Checkpoint& ckpt, std::size_t column, std::span<const double> grid, Eigen::Index n_mc,
                      std::uint64_t seed) {
    const MonteCarloCdf cdf(ckpt, column, n_mc, seed);
    CdfCurve curve;
    curve.grid.assign(grid.begin(), grid.end());
    if (!std::is_sorted(curve.grid.begin(), curve.grid.end())) throw Error("CDF grid must be ascending");
    curve.values.reserve(grid.size());
    for (double x : grid) curve.values.push_back(cdf(x));
    return curve;
}

DiscretizedCdf discretize_cdf(const std::function<double(double)>& cdf, std::span<const double> levels) {
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1])) throw Error("ordinal levels must be strictly increasing");
    DiscretizedCdf out;
    out.levels.assign(levels.begin(), levels.end());
    double running = 0.0;
    for (double x : levels) {
        running += cdf(x + 0.5) - cdf(x - 0.5);
        out.cum_probs.push_back(running);
    }
    for (std::size_t i = 0; i + 1 < out.cum_probs.size(); ++i)
        if (out.cum_probs[i] > out.cum_probs[i + 1]) out.cum_probs[i + 1] = out.cum_probs[i];
    return out;
}

DiscretizedCdf discretize_ordinal_cdf(const Checkpoint& ckpt, std::size_t column, Eigen::Index n_mc,
                                      std::uint64_t seed) {
    const auto& schema = ckpt.schema();
    if (column >= schema.size() || schema[column].kind != ColumnKind::ordinal)
        throw Error("discretization needs an ordinal column");
    const auto& levels = ckpt.ordinal_levels.at(column);
    if (levels.empty()) throw Error("checkpoint records no observed levels for '" + schema[column].name + "'");
    const auto slot = numeric_slot(schema, column);
    const double mean = ckpt.scaling.mean.at(slot);
    const double sd = ckpt.scaling.stddev.at(slot);
    const MonteCarloCdf cdf(ckpt, column, n_mc, seed);
    return discretize_cdf([&](double x) { return cdf((x - mean) / sd); }, levels);
}

}  // namespace distvae
