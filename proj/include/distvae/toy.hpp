#pragma once

#include "distvae/data.hpp"

#include <cstdint>

namespace distvae {

/// Two continuous columns and one three-level discrete column:
/// c ~ Cat(0.5, 0.3, 0.2); x1 | c=0 ~ N(-2, 0.6^2), otherwise N(2, 0.6^2);
/// x2 = 0.5 x1 + N(0, 1).
Schema toy_schema();
Table toy_table(Eigen::Index n, std::uint64_t seed);

}  // namespace distvae
