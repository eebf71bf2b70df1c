#pragma once

#include "distvae/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace distvae {

enum class OrdinalRounding {
    nearest_level,  // snap to the closest observed level (integer fallback)
    first_decimal,  // round to one decimal place
};

struct GenerateOptions {
    OrdinalRounding ordinal_rounding = OrdinalRounding::nearest_level;
};

/// Independent random stream for record `row` under `seed`; generation is
/// order-independent because every row draws from its own stream.
std::mt19937_64 row_stream(std::uint64_t seed, std::uint64_t row);

/// n x d matrix of standard-normal prior draws (row i from row_stream(seed, i)).
Eigen::MatrixXd sample_prior(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

/// argmax_l log pi_l + G_l; zero probabilities never win, ties go to the
/// lowest index.
Eigen::Index gumbel_max(std::span<const double> pi, std::span<const double> gumbel_noise);

double round_ordinal(double value, std::span<const double> observed_levels, OrdinalRounding mode);

/// Prior draw -> decode -> inverse-transform sampling for numeric columns and
/// Gumbel-Max for discrete ones; returned in native units.
Table generate(const Checkpoint& ckpt, Eigen::Index n, std::uint64_t seed, const GenerateOptions& options = {});

struct CdfCurve {
    std::vector<double> grid;    // standardized units, ascending
    std::vector<double> values;  // in [0, 1], non-decreasing
};

/// Monte-Carlo estimate of the marginal CDF of a numeric column, averaging
/// the inverse spline over prior draws.
CdfCurve estimate_cdf(const Checkpoint& ckpt, std::size_t column, std::span<const double> grid, Eigen::Index n_mc,
                      std::uint64_t seed);

struct DiscretizedCdf {
    std::vector<double> levels;
    std::vector<double> cum_probs;
};

/// Accumulates F(x + 0.5) - F(x - 0.5) over the levels, then forces the
/// result to be non-decreasing.
DiscretizedCdf discretize_cdf(const std::function<double(double)>& cdf, std::span<const double> levels);

/// Discretized CDF of an ordinal column: the +-0.5 windows are taken in
/// native units and mapped into standardized units with the column stddev.
DiscretizedCdf discretize_ordinal_cdf(const Checkpoint& ckpt, std::size_t column, Eigen::Index n_mc,
                                      std::uint64_t seed);

}  // namespace distvae
