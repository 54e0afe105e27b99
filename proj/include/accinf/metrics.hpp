#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace accinf {

double rmse(std::span<const double> truth, std::span<const double> est);

/// Kendall's tau-b over all pairs. nullopt when either list is constant
/// (tau-b is undefined there).
std::optional<double> kendall_tau(std::span<const double> truth, std::span<const double> est);

enum class RankBy { absolute, signed_value };

/// Indices of the ceil(p*n/100) largest scores (by |score| or signed score),
/// ties broken by ascending index.
std::vector<std::size_t> top_indices(std::span<const double> scores, double p_percent,
                                     RankBy rank_by = RankBy::absolute);

/// |A & B| / |A | B| of the two top-p% sets.
double jaccard_top(std::span<const double> truth, std::span<const double> est, double p_percent,
                   RankBy rank_by = RankBy::absolute);

}  // namespace accinf
