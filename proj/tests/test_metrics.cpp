#include <doctest.h>

#include <cmath>

#include "accinf/errors.hpp"
#include "accinf/metrics.hpp"

using namespace accinf;

using V = std::vector<double>;

TEST_CASE("rmse") {
  CHECK(rmse(V{1, 2, 3}, V{1, 2, 3}) == 0.0);
  CHECK(rmse(V{0, 0}, V{3, 4}) == std::sqrt(12.5));
  CHECK(rmse(V{0.5, -2}, V{1, 1}) * 3.0 == doctest::Approx(rmse(V{1.5, -6}, V{3, 3})));
  CHECK(rmse(V{0.5, -2}, V{1, 1}) == doctest::Approx(rmse(V{-0.5, 2}, V{-1, -1})));
  CHECK_THROWS_AS(rmse(V{1}, V{1, 2}), ContractError);
  CHECK_THROWS_AS(rmse(V{}, V{}), ContractError);
}

TEST_CASE("kendall tau") {
  CHECK(kendall_tau(V{1, 2, 3}, V{1, 2, 3}) == 1.0);
  CHECK(kendall_tau(V{1, 2, 3}, V{3, 2, 1}) == -1.0);
  CHECK(*kendall_tau(V{1, 2, 3}, V{1, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_FALSE(kendall_tau(V{1, 1, 1}, V{1, 2, 3}).has_value());
  CHECK_FALSE(kendall_tau(V{1, 2, 3}, V{4, 4, 4}).has_value());
  // Ties: tau-b = (C - D) / sqrt((n0 - n1)(n0 - n2)); pairs (1,2)(1,3)(2,3):
  // x = [1,1,2], y = [1,2,3]: C = 2, D = 0, n0 = 3, n1 = 1, n2 = 0 -> 2/sqrt(6).
  CHECK(*kendall_tau(V{1, 1, 2}, V{1, 2, 3}) == doctest::Approx(2.0 / std::sqrt(6.0)));
  CHECK(*kendall_tau(V{1, 5, 2, 9}, V{std::exp(1.0), std::exp(5.0), std::exp(2.0), std::exp(9.0)}) ==
        1.0);
  CHECK_THROWS_AS(kendall_tau(V{1}, V{1}), ContractError);
}

TEST_CASE("top indices and jaccard") {
  CHECK(top_indices(V{0.1, -5, 3, 0.2}, 50) == std::vector<std::size_t>{1, 2});
  CHECK(top_indices(V{0.1, -5, 3, 0.2}, 50, RankBy::signed_value) ==
        std::vector<std::size_t>{2, 3});
  // ceil(10 * 4 / 100) = 1; ties resolved towards the lower index.
  CHECK(top_indices(V{1, 1, 1, 1}, 10) == std::vector<std::size_t>{0});

  const V a{5, 4, 3, 2, 1, 0};
  CHECK(jaccard_top(a, a, 30) == 1.0);
  CHECK(jaccard_top(a, V{0, 1, 2, 3, 4, 5}, 30) == 0.0);
  // top-2 of truth = {1,2}, top-2 of est = {2,3}.
  CHECK(jaccard_top(V{0, 9, 8, 0}, V{0, 0, 8, 9}, 50) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(jaccard_top(V{0, 0, 8, 9}, V{0, 9, 8, 0}, 50) == jaccard_top(V{0, 9, 8, 0}, V{0, 0, 8, 9}, 50));
  CHECK(jaccard_top(V{0, 9, 8, 0}, V{0, 0, 80, 90}, 50) == jaccard_top(V{0, 9, 8, 0}, V{0, 0, 8, 9}, 50));
  CHECK_THROWS_AS(jaccard_top(a, V{1}, 10), ContractError);
  CHECK_THROWS_AS(jaccard_top(a, a, 0), ContractError);
}
