#pragma once

#include <optional>
#include <span>
#include <vector>

namespace maglab {

// Pearson correlation; nullopt when either side has zero variance.
// Throws StatisticsError for fewer than 3 pairs or mismatched lengths.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation (Pearson on average ranks, ties share their mean rank).
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// 1-based average ranks.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace maglab
