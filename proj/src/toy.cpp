#include "distvae/toy.hpp"

#include "distvae/error.hpp"

#include <random>

namespace distvae {

Schema toy_schema() {
    return Schema({{"x1", ColumnKind::continuous, {}},
                   {"x2", ColumnKind::continuous, {}},
                   {"c", ColumnKind::discrete, {"c0", "c1", "c2"}}});
}

Table toy_table(Eigen::Index n, std::uint64_t seed) {
    if (n < 0) throw Error("row count must be non-negative");
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> category({0.5, 0.3, 0.2});
    std::normal_distribution<double> normal(0.0, 1.0);
    Table t{toy_schema(), RowMatrix(n, 3), std::nullopt};
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = category(rng);
        const double x1 = (c == 0 ? -2.0 : 2.0) + 0.6 * normal(rng);
        t.rows(i, 0) = x1;
        t.rows(i, 1) = 0.5 * x1 + normal(rng);
        t.rows(i, 2) = c;
    }
    return t;
}

}  // namespace distvae
