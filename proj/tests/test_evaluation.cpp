#include <doctest.h>

#include <cmath>

#include "accinf/evaluation.hpp"
#include "helpers.hpp"

using namespace accinf;
using namespace testing;

TEST_CASE("true loss change") {
  const auto train = random_dataset(8, 2, 1);
  const auto val = random_dataset(6, 2, 2);
  const auto cfg = train_config(ModelKind::logistic_regression, 2, 2, 4, 0.3);
  const auto t = sgd_train(train, cfg);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto cf = counterfactual_sgd(train, cfg, t.schedule, k);
    const auto pi = *t.schedule.first_occurrence(k);
    for (std::size_t i = 0; i <= pi; ++i) CHECK(loss_change_true(val, cfg.model, t, cf, i) == 0.0);
  }
  CHECK(loss_change_true(val, cfg.model, t, t, t.steps()) == 0.0);
}

TEST_CASE("two-sample quadratic toy loss change") {
  // theta0 = [1]; train (1,0), (2,1); alpha = 0.5; one step.
  // theta = 0.25, theta_0 = 0.5 (sample 0 removed). Validation (x=1, y=1):
  // L(0.5) - L(0.25) = 0.5*0.25 - 0.5*0.5625 = -0.15625.
  const auto train = make_dataset({make_sample({1}, 0), make_sample({2}, 1)});
  const auto val = make_dataset({make_sample({1}, 1)});
  auto cfg = train_config(ModelKind::quadratic_regression, 1, 1, 2, 0.5);
  cfg.init = ParamVector{1.0};
  const auto t = sgd_train(train, cfg);
  const auto cf = counterfactual_sgd(train, cfg, t.schedule, 0);
  CHECK(loss_change_true(val, cfg.model, t, cf, 1) == -0.15625);
}

TEST_CASE("linear loss change") {
  const auto val = make_dataset({make_sample({1, 0}, 1), make_sample({0, 1}, 0)});
  ModelSpec quad;
  quad.kind = ModelKind::quadratic_regression;
  quad.input_dim = 2;
  const ParamVector theta{0.5, 0.5};
  CHECK(loss_change_linear(val, quad, theta, ParamVector{0, 0}) == 0.0);
  // mean gradient = ((0.5-1)*[1,0] + 0.5*[0,1]) / 2 = [-0.25, 0.25]
  CHECK(loss_change_linear(val, quad, theta, ParamVector{1, 1}) == 0.0);
  CHECK(loss_change_linear(val, quad, theta, ParamVector{1, 0}) == -0.25);

  // Taylor remainder: |dl_lin - dl_true| <= 0.5 * lambda_max(H_val) * |delta|^2,
  // with H_val = mean x x^T = diag(0.5, 0.5).
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto delta = random_vector(2, rng, 0.1);
    auto moved = theta;
    axpy(1.0, delta, moved);
    const double exact = dataset_loss(quad, moved, val) - dataset_loss(quad, theta, val);
    const double lin = loss_change_linear(val, quad, theta, delta);
    const double d2 = dot(delta, delta);
    CHECK(std::abs(lin - exact) <= 0.5 * 0.5 * d2 + 1e-15);
  }
}

TEST_CASE("score table") {
  LossChangeTable t;
  t.epoch = 3;
  t.rows = {{0, 0.0, 3.0, 0.0}, {1, 0.0, 4.0, 0.0}};
  const auto sgd = score_table(t, Estimator::sgd_ie);
  CHECK(sgd.rmse == std::sqrt(12.5));
  CHECK(sgd.epoch == 3);
  CHECK_FALSE(sgd.kendall_tau.has_value());
  const auto acc = score_table(t, Estimator::acc_sgd_ie);
  CHECK(acc.rmse == 0.0);
  for (double j : acc.jaccard) CHECK(j == 1.0);
}

TEST_CASE("evaluate_seed structure and determinism") {
  const auto train = random_dataset(16, 3, 4);
  const auto val = random_dataset(8, 3, 5);
  const auto cfg = train_config(ModelKind::logistic_regression, 3, 2, 4, 0.2);
  const std::vector<std::size_t> rec{2};
  const auto a = evaluate_seed(train, val, cfg, rec);
  REQUIRE(a.reports.size() == 2);
  CHECK(a.reports[0].estimator == Estimator::sgd_ie);
  CHECK(a.reports[1].estimator == Estimator::acc_sgd_ie);
  CHECK(a.tables.size() == 1);
  CHECK(a.tables[0].rows.size() == 16);
  EvalOptions par;
  par.workers = 3;
  const auto b = evaluate_seed(train, val, cfg, rec, par);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.reports[i].rmse == b.reports[i].rmse);
    CHECK(a.reports[i].jaccard == b.reports[i].jaccard);
  }
  for (std::size_t r = 0; r < 16; ++r) {
    CHECK(a.tables[0].rows[r].dl_true == b.tables[0].rows[r].dl_true);
    CHECK(a.tables[0].rows[r].dl_acc == b.tables[0].rows[r].dl_acc);
  }
  const std::vector<std::size_t> late{3};
  CHECK_THROWS(evaluate_seed(train, val, cfg, late));
}

TEST_CASE("quadratic model: estimate error is exactly the second-order loss term") {
  // With exact parameter deviations, dl_true - dl_acc = 0.5 * D^T H_val D for
  // a quadratic validation loss.
  const auto train = random_dataset(12, 3, 6);
  const auto val = random_dataset(10, 3, 7);
  const auto cfg = train_config(ModelKind::quadratic_regression, 3, 3, 4, 0.1);
  const std::vector<std::size_t> rec{1, 2, 3};
  const auto ev = evaluate_seed(train, val, cfg, rec);
  const auto t = sgd_train(train, cfg);
  for (const auto& table : ev.tables) {
    for (const auto& row : table.rows) {
      const auto cf = counterfactual_sgd(train, cfg, t.schedule, row.k);
      const auto d = true_influence(t, cf, table.step);
      double quad = 0.0;
      for (const auto& z : val.samples) {
        const double s = dot(z.x, d);
        quad += 0.5 * s * s;
      }
      quad /= static_cast<double>(val.size());
      CHECK(std::abs(row.dl_true - row.dl_acc - quad) <= 1e-8 * std::abs(row.dl_true) + 1e-15);
    }
  }
}

TEST_CASE("averaging over seeds") {
  const auto train = random_dataset(12, 2, 8);
  const auto val = random_dataset(6, 2, 9);
  auto cfg = train_config(ModelKind::logistic_regression, 2, 2, 4, 0.2);
  const std::vector<std::size_t> rec{2};
  std::vector<SeedEvaluation> runs;
  for (std::uint64_t s : {1u, 2u}) {
    cfg.seed = s;
    runs.push_back(evaluate_seed(train, val, cfg, rec));
  }
  const auto avg = average_reports(runs);
  REQUIRE(avg.size() == 2);
  CHECK(avg[0].seed == 2);
  CHECK(avg[0].rmse == doctest::Approx((runs[0].reports[0].rmse + runs[1].reports[0].rmse) / 2));
  const std::vector<std::uint64_t> seeds{1, 2};
  cfg.seed = 0;
  const auto sweep = cross_epoch_sweep(train, val, cfg, rec, seeds);
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].rmse == avg[0].rmse);
  CHECK(sweep[1].rmse == avg[1].rmse);
}
