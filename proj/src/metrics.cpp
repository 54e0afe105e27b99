#include "accinf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <string>

#include "accinf/errors.hpp"

namespace accinf {

namespace {

void require_equal_lengths(std::span<const double> a, std::span<const double> b,
                           std::size_t min_len, const char* what) {
  if (a.size() != b.size()) throw ContractError(std::string(what) + ": length mismatch");
  if (a.size() < min_len) {
    throw ContractError(std::string(what) + ": needs at least " + std::to_string(min_len) +
                        " values");
  }
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

double rmse(std::span<const double> truth, std::span<const double> est) {
  require_equal_lengths(truth, est, 1, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - est[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

std::optional<double> kendall_tau(std::span<const double> truth, std::span<const double> est) {
  require_equal_lengths(truth, est, 2, "kendall_tau");
  const std::size_t n = truth.size();
  // O(n^2) pair enumeration; n is the number of tracked samples.
  long long concordant = 0, discordant = 0, ties_truth = 0, ties_est = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int a = sign(truth[i] - truth[j]);
      const int b = sign(est[i] - est[j]);
      if (a == 0) ++ties_truth;
      if (b == 0) ++ties_est;
      if (a == 0 || b == 0) continue;
      if (a == b) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const auto pairs = static_cast<long long>(n * (n - 1) / 2);
  if (ties_truth == pairs || ties_est == pairs) return std::nullopt;
  const double denom = std::sqrt(static_cast<double>(pairs - ties_truth) *
                                 static_cast<double>(pairs - ties_est));
  return static_cast<double>(concordant - discordant) / denom;
}

std::vector<std::size_t> top_indices(std::span<const double> scores, double p_percent,
                                     RankBy rank_by) {
  if (!(p_percent > 0.0 && p_percent <= 100.0)) {
    throw ContractError("top_indices: p must lie in (0, 100]");
  }
  const std::size_t n = scores.size();
  // ceil(p*n/100) with a guard against p*n/100 landing a hair above an integer
  const double exact = p_percent * static_cast<double>(n) / 100.0;
  auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  count = std::min(count, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return rank_by == RankBy::absolute ? std::abs(scores[i]) : scores[i];
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

double jaccard_top(std::span<const double> truth, std::span<const double> est, double p_percent,
                   RankBy rank_by) {
  require_equal_lengths(truth, est, 1, "jaccard_top");
  const auto a = top_indices(truth, p_percent, rank_by);
  const auto b = top_indices(est, p_percent, rank_by);
  std::vector<std::size_t> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

}  // namespace accinf
