#include "distvae/error.hpp"
#include "distvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace distvae {

namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

// Walks the merged breakpoints of two sorted samples, calling
// f(x, next_x, Fa(x), Fb(x)) at each distinct value; next_x is +inf at the end.
template <typename F>
void walk_ecdfs(const std::vector<double>& a, const std::vector<double>& b, F&& f) {
    std::size_t i = 0;
    std::size_t j = 0;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    while (i < a.size() || j < b.size()) {
        const double x = std::min(i < a.size() ? a[i] : std::numeric_limits<double>::infinity(),
                                  j < b.size() ? b[j] : std::numeric_limits<double>::infinity());
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        const double next = std::min(i < a.size() ? a[i] : std::numeric_limits<double>::infinity(),
                                     j < b.size() ? b[j] : std::numeric_limits<double>::infinity());
        f(x, next, static_cast<double>(i) / na, static_cast<double>(j) / nb);
    }
}


double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::ArrayXd dx = x.array() - x.mean();
    const Eigen::ArrayXd dy = y.array() - y.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (!(sxx > 0) || !(syy > 0)) return std::numeric_limits<double>::quiet_NaN();
    return (dx * dy).sum() / std::sqrt(sxx * syy);
}

double correlation_ratio(const Eigen::VectorXd& levels, Eigen::Index level_count, const Eigen::VectorXd& y) {
    const double mean = y.mean();
    const double total = (y.array() - mean).square().sum();
    if (!(total > 0)) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(level_count);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(level_count);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const auto l = static_cast<Eigen::Index>(levels(i));
        sums(l) += y(i);
        counts(l) += 1;
    }
    int observed = 0;
    double between = 0.0;
    for (Eigen::Index l = 0; l < level_count; ++l) {
        if (counts(l) == 0) continue;
        ++observed;
        const double m = sums(l) / counts(l);
        between += counts(l) * (m - mean) * (m - mean);
    }
    if (observed < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(between / total);
}

double cramers_v(const Eigen::VectorXd& a, Eigen::Index ta, const Eigen::VectorXd& b, Eigen::Index tb) {
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ta, tb);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        table(static_cast<Eigen::Index>(a(i)), static_cast<Eigen::Index>(b(i))) += 1;
    const Eigen::VectorXd row = table.rowwise().sum();
    const Eigen::RowVectorXd col = table.colwise().sum();
    const double n = table.sum();
    const auto r = (row.array() > 0).count();
    const auto k = (col.array() > 0).count();
    if (r < 2 || k < 2) return std::numeric_limits<double>::quiet_NaN();
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < ta; ++i) {
        for (Eigen::Index j = 0; j < tb; ++j) {
            const double expected = row(i) * col(j) / n;
            if (expected > 0) chi2 += (table(i, j) - expected) * (table(i, j) - expected) / expected;
        }
    }
    return std::sqrt(chi2 / n / static_cast<double>(std::min(r, k) - 1));
}

// Nearest-neighbour distance of every row of `from` to the rows of `to`;
// with `exclude_self` the pair (i, i) is skipped.
std::vector<double> nearest_distances(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, bool exclude_self) {
    std::vector<double> out(static_cast<std::size_t>(from.rows()));
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < to.rows(); ++j) {
            if (exclude_self && i == j) continue;
            best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(best);
    }
    return out;
}

Eigen::MatrixXd numeric_block(const Table& t) {
    const auto cols = t.schema.numeric_columns();
    Eigen::MatrixXd out(t.size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = t.rows.col(static_cast<Eigen::Index>(cols[k]));
    return out;
}

}  // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error("ks_statistic needs two non-empty samples");
    const auto sa = sorted_copy(a);
    const auto sb = sorted_copy(b);
    double sup = 0.0;
    walk_ecdfs(sa, sb, [&](double, double, double fa, double fb) { sup = std::max(sup, std::abs(fa - fb)); });
    return sup;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error("wasserstein1 needs two non-empty samples");
    const auto sa = sorted_copy(a);
    const auto sb = sorted_copy(b);
    double area = 0.0;
    walk_ecdfs(sa, sb, [&](double x, double next, double fa, double fb) {
        if (std::isfinite(next)) area += std::abs(fa - fb) * (next - x);
    });
    return area;
}

Eigen::MatrixXd association_matrix(const Table& table) {
    const auto& schema = table.schema;
    const auto p = static_cast<Eigen::Index>(schema.size());
    Eigen::MatrixXd assoc = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const auto& ci = schema[static_cast<std::size_t>(i)];
            const auto& cj = schema[static_cast<std::size_t>(j)];
            const Eigen::VectorXd xi = table.rows.col(i);
            const Eigen::VectorXd xj = table.rows.col(j);
            double value;
            if (ci.is_numeric() && cj.is_numeric())
                value = pearson(xi, xj);
            else if (ci.is_discrete() && cj.is_discrete())
                value = cramers_v(xi, ci.levels(), xj, cj.levels());
            else if (ci.is_discrete())
                value = correlation_ratio(xi, ci.levels(), xj);
            else
                value = correlation_ratio(xj, cj.levels(), xi);
            if (!std::isfinite(value)) {
                warn("degenerate column pair (" + ci.name + ", " + cj.name + "); association set to 0");
                value = 0.0;
            }
            assoc(i, j) = assoc(j, i) = value;
        }
    }
    return assoc;
}

double correlation_distance(const Table& real, const Table& synth) {
    if (!(real.schema == synth.schema)) throw Error("correlation_distance: tables have different schemas");
    return (association_matrix(real) - association_matrix(synth)).norm();
}

DcrResult dcr(const Table& real, const Table& synth) {
    if (real.schema.numeric_count() == 0) throw Error("DCR needs at least one continuous column");
    if (real.size() == 0 || synth.size() == 0) throw Error("DCR needs non-empty tables");
    if (!(real.schema == synth.schema)) throw Error("DCR: tables have different schemas");
    const Eigen::MatrixXd r = numeric_block(real);
    const Eigen::MatrixXd s = numeric_block(synth);
    DcrResult out;
    out.rs = quantile(nearest_distances(r, s, false), 0.05);
    out.rr = r.rows() > 1 ? quantile(nearest_distances(r, r, true), 0.05) : 0.0;
    out.ss = s.rows() > 1 ? quantile(nearest_distances(s, s, true), 0.05) : 0.0;
    return out;
}

double vrate(std::span<const double> test, std::span<const double> synth, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("Vrate alpha must lie in (0, 1)");
    if (test.empty() || synth.empty()) throw Error("Vrate needs non-empty samples");
    const double q = quantile(std::vector<double>(synth.begin(), synth.end()), alpha);
    const auto below = std::count_if(test.begin(), test.end(), [q](double x) { return x < q; });
    return static_cast<double>(below) / static_cast<double>(test.size());
}

}  // namespace distvae
