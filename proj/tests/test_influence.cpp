#include <doctest.h>

#include <cmath>

#include "accinf/errors.hpp"
#include "accinf/influence.hpp"
#include "helpers.hpp"

using namespace accinf;
using namespace testing;

namespace {

/// Dense U_j = I - a_j H(Z_j) and V_j = U_j + [k in Z_j] (a_j/|Z_j|) H(z_k)
/// built from the closed-form linear-model Hessians.
Matrix dense_transition(const Trajectory& t, const Dataset& data, std::size_t j,
                        std::optional<std::size_t> k) {
  const auto& spec = t.config.model;
  const auto& batch = t.schedule.batches[j];
  const std::size_t p = spec.param_dim();
  const double m = static_cast<double>(batch.size());
  Matrix u = identity(p);
  for (auto i : batch) {
    const auto h = linear_hessian(spec, t.thetas[j], data[i]);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) u[r][c] -= t.lrs[j] / m * h[r][c];
  }
  if (k && t.schedule.contains(j, *k)) {
    const auto h = linear_hessian(spec, t.thetas[j], data[*k]);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) u[r][c] += t.lrs[j] / m * h[r][c];
  }
  return u;
}

/// Sum over occurrences before `upto` of (product of transitions after the
/// occurrence) times the injected gradient, with each product materialized.
ParamVector dense_estimate(const Trajectory& t, const Dataset& data, std::size_t k,
                           std::size_t upto, bool accumulate) {
  const std::size_t p = t.config.model.param_dim();
  ParamVector total(p, 0.0);
  for (std::size_t occ = 0; occ < upto; ++occ) {
    if (!t.schedule.contains(occ, k)) continue;
    Matrix prod = identity(p);
    for (std::size_t j = occ + 1; j < upto; ++j) {
      const auto step = dense_transition(t, data, j, accumulate ? std::optional(k) : std::nullopt);
      prod = matmul(step, prod);
    }
    auto g = linear_grad(t.config.model, t.thetas[occ], data[k]);
    const double scale = t.lrs[occ] / static_cast<double>(t.schedule.batches[occ].size());
    for (auto& x : g) x *= scale;
    const auto contrib = matvec(prod, g);
    for (std::size_t i = 0; i < p; ++i) total[i] += contrib[i];
  }
  return total;
}

std::uint64_t closed_form_batch(const BatchSchedule& s, std::size_t upto) {
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < s.n; ++k) {
    const auto pi = s.first_occurrence(k);
    if (pi && *pi + 1 < upto) total += upto - *pi - 1;
  }
  return total;
}

std::uint64_t closed_form_sample(const BatchSchedule& s, std::size_t upto) {
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < s.n; ++k) {
    const auto pi = s.first_occurrence(k);
    if (!pi) continue;
    for (std::size_t i = *pi + 1; i < upto; ++i) total += s.contains(i, k);
  }
  return total;
}

}  // namespace

TEST_CASE("apply_U examples") {
  const auto data = make_dataset({make_sample({1, 0}, 1)});
  auto cfg = train_config(ModelKind::logistic_regression, 2, 1, 1, 0.1);
  cfg.init = ParamVector{0, 0};
  const auto t = sgd_train(data, cfg);
  HvpLedger ledger;
  const auto u = apply_U(t, data, 0, ParamVector{1, 0}, ledger);
  CHECK(u[0] == doctest::Approx(0.975).epsilon(1e-15));
  CHECK(u[1] == 0.0);
  const auto z = apply_U(t, data, 0, ParamVector{0, 0}, ledger);
  CHECK(z == ParamVector{0, 0});

  auto frozen = cfg;
  frozen.lr.value = 0.0;
  const auto t0 = sgd_train(data, frozen);
  const ParamVector v{0.3, -2.0};
  CHECK(apply_U(t0, data, 0, v, ledger) == v);
}

TEST_CASE("apply_V examples") {
  Rng rng(3);
  const auto data = random_dataset(6, 3, 4);
  const auto cfg = train_config(ModelKind::logistic_regression, 3, 2, 3, 0.4);
  const auto t = sgd_train(data, cfg);
  HvpLedger ledger;
  const auto v = random_vector(3, rng);
  for (std::size_t k = 0; k < 6; ++k) {
    if (!t.schedule.contains(0, k)) CHECK(apply_V(t, data, 0, k, v, ledger) == apply_U(t, data, 0, v, ledger));
    CHECK(apply_V(t, data, 0, k, ParamVector(3, 0.0), ledger) == ParamVector(3, 0.0));
  }

  const auto single = make_dataset({make_sample({0.5, -1.0, 2.0}, 1)});
  const auto one = train_config(ModelKind::mlp2, 3, 2, 1, 0.7, 1, 2);
  const auto t1 = sgd_train(single, one);
  const auto w = random_vector(one.model.param_dim(), rng);
  CHECK(apply_V(t1, single, 0, 0, w, ledger) == w);
}

TEST_CASE("estimate examples") {
  const auto data = random_dataset(8, 3, 5);
  const auto cfg = train_config(ModelKind::logistic_regression, 3, 1, 2, 0.3);
  const auto t = sgd_train(data, cfg);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto pi = *t.schedule.first_occurrence(k);
    for (std::size_t upto = 0; upto <= pi; ++upto) {
      for (auto e : kEstimators) {
        for (double x : estimate(t, data, k, upto, e).v) CHECK(x == 0.0);
      }
    }
    if (pi == t.steps() - 1) {
      const auto g = grad(cfg.model, t.thetas[pi], data[k]);
      const auto est = estimate_sgd_ie(t, data, k, t.steps()).v;
      for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(est[i] == doctest::Approx(t.lrs[pi] / 2.0 * g[i]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("forward recursion matches the dense product oracle") {
  for (auto kind : {ModelKind::logistic_regression, ModelKind::quadratic_regression}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto data = random_dataset(10, 4, 20 + seed);
      // N = 5 steps/epoch * 4 epochs = 20 steps, p = 4.
      const auto cfg = train_config(kind, 4, 4, 2, 0.2, seed);
      const auto t = sgd_train(data, cfg);
      for (std::size_t k = 0; k < data.size(); ++k) {
        for (std::size_t upto : {t.steps() / 2, t.steps()}) {
          const auto sgd = estimate_sgd_ie(t, data, k, upto).v;
          const auto acc = estimate_acc_sgd_ie(t, data, k, upto).v;
          CHECK(rel_err(sgd, dense_estimate(t, data, k, upto, false)) <= 1e-12);
          CHECK(rel_err(acc, dense_estimate(t, data, k, upto, true)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("one epoch: estimators coincide and vanish before the first occurrence") {
  const auto data = random_dataset(16, 3, 6);
  for (auto kind : {ModelKind::logistic_regression, ModelKind::mlp2}) {
    const auto cfg = train_config(kind, 3, 1, 4, 0.5, 3, 3);
    const auto t = sgd_train(data, cfg);
    for (std::size_t k = 0; k < 16; ++k) {
      const auto a = trace_estimates(t, data, k, Estimator::sgd_ie);
      const auto b = trace_estimates(t, data, k, Estimator::acc_sgd_ie);
      REQUIRE(a.size() == t.steps() + 1);
      const auto pi = *t.schedule.first_occurrence(k);
      for (std::size_t i = 0; i <= t.steps(); ++i) {
        CHECK(a[i] == b[i]);
        if (i <= pi) {
          for (double x : a[i]) CHECK(x == 0.0);
        }
      }
    }
  }
}

TEST_CASE("quadratic loss: the accumulative estimator is exact") {
  const auto data = random_dataset(12, 3, 7);
  auto cfg = train_config(ModelKind::quadratic_regression, 3, 4, 3, 0.1, 5);
  const auto t = sgd_train(data, cfg);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto cf = counterfactual_sgd(data, cfg, t.schedule, k);
    const auto acc = trace_estimates(t, data, k, Estimator::acc_sgd_ie);
    for (std::size_t i = 0; i <= t.steps(); ++i) {
      const auto truth = true_influence(t, cf, i);
      CHECK(dist(acc[i], truth) <= 1e-8 * norm2(truth) + 1e-15);
    }
    const auto probe = error_recursion_probe(t, cf, data, k);
    REQUIRE(probe.acc_sgd_ie.size() == t.steps() + 1);
    REQUIRE(probe.sgd_ie.size() == t.steps() + 1);
    double sgd_max = 0.0;
    for (std::size_t i = 0; i <= t.steps(); ++i) {
      CHECK(probe.acc_sgd_ie[i] <= 1e-8);
      sgd_max = std::max(sgd_max, probe.sgd_ie[i]);
    }
    CHECK(sgd_max > 0.0);
    const auto pi = *t.schedule.first_occurrence(k);
    for (std::size_t i = 0; i <= pi; ++i) {
      CHECK(probe.sgd_ie[i] == 0.0);
      CHECK(probe.acc_sgd_ie[i] == 0.0);
    }
  }
}

TEST_CASE("probe requires the matching counterfactual run") {
  const auto data = random_dataset(6, 2, 8);
  const auto cfg = train_config(ModelKind::logistic_regression, 2, 2, 3, 0.1);
  const auto t = sgd_train(data, cfg);
  const auto cf = counterfactual_sgd(data, cfg, t.schedule, 1);
  CHECK_THROWS_AS(error_recursion_probe(t, cf, data, 2), ContractError);
}

TEST_CASE("sample seen at steps 1 and 3 of 5: accumulation reduces the error") {
  // Logistic regression, 5 handcrafted steps of two samples; sample 0 is
  // present in steps 1 and 3 only.
  const auto data = make_dataset({make_sample({2.0, 1.0}, 0), make_sample({1.0, 2.0}, 1),
                                  make_sample({-1.5, 0.5}, 0), make_sample({0.5, -2.0}, 1),
                                  make_sample({2.5, -0.5}, 1), make_sample({-1.0, -1.0}, 0)});
  auto cfg = train_config(ModelKind::logistic_regression, 2, 1, 2, 1.5);
  cfg.init = ParamVector{0.5, -0.5};
  BatchSchedule s{6, 5, {{1, 2}, {0, 3}, {4, 5}, {0, 1}, {2, 3}}};
  const auto t = sgd_train(data, cfg, s);
  const auto cf = counterfactual_sgd(data, cfg, s, 0);
  const auto truth = true_influence(t, cf, 5);
  const double e_sgd = dist(estimate_sgd_ie(t, data, 0, 5).v, truth);
  const double e_acc = dist(estimate_acc_sgd_ie(t, data, 0, 5).v, truth);
  CHECK(e_acc < e_sgd);
}

TEST_CASE("snapshot sweep agrees with the single-sample recursion") {
  const auto data = random_dataset(12, 3, 9);
  const auto cfg = train_config(ModelKind::mlp2, 3, 3, 4, 0.3, 2, 3);
  const auto t = sgd_train(data, cfg);
  const std::vector<std::size_t> cps{0, 3, 6, 9};
  for (auto e : kEstimators) {
    for (std::size_t workers : {1u, 3u}) {
      SweepOptions o;
      o.workers = workers;
      o.tracked = {5, 0, 11};
      const auto snap = estimate_snapshots(t, data, e, cps, o);
      REQUIRE(snap.snapshots.size() == cps.size());
      for (std::size_t c = 0; c < cps.size(); ++c) {
        REQUIRE(snap.snapshots[c].size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
          const auto& st = snap.snapshots[c][i];
          CHECK(st.k == o.tracked[i]);
          CHECK(st.step == cps[c]);
          CHECK(st.v == estimate(t, data, st.k, cps[c], e).v);
        }
      }
    }
  }
}

TEST_CASE("hvp ledger matches the closed-form counts") {
  SUBCASE("handcrafted n=4, M=2, T=2") {
    const auto data = random_dataset(4, 2, 10);
    const auto cfg = train_config(ModelKind::logistic_regression, 2, 2, 2, 0.1);
    BatchSchedule s{4, 2, {{0, 1}, {2, 3}, {1, 3}, {0, 2}}};
    const auto t = sgd_train(data, cfg, s);
    const auto sgd = estimate_all(t, data, Estimator::sgd_ie, 4);
    const auto acc = estimate_all(t, data, Estimator::acc_sgd_ie, 4);
    // pi_1 = {0, 0, 1, 1}: (4-0-1)*2 + (4-1-1)*2 = 10 batch HVPs each.
    CHECK(sgd.ledger.batch_hvps == 10);
    CHECK(sgd.ledger.sample_hvps == 0);
    CHECK(acc.ledger.batch_hvps == 10);
    // Every sample reappears once after its first occurrence.
    CHECK(acc.ledger.sample_hvps == 4);
  }
  SUBCASE("seeded schedules") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto data = random_dataset(8, 2, 30 + seed);
      const auto cfg = train_config(ModelKind::logistic_regression, 2, 3, 2, 0.1, seed);
      const auto t = sgd_train(data, cfg);
      for (std::size_t upto : {std::size_t{0}, std::size_t{5}, t.steps()}) {
        for (std::size_t workers : {1u, 4u}) {
          SweepOptions o;
          o.workers = workers;
          const auto sgd = estimate_all(t, data, Estimator::sgd_ie, upto, o);
          const auto acc = estimate_all(t, data, Estimator::acc_sgd_ie, upto, o);
          CHECK(sgd.ledger.batch_hvps == closed_form_batch(t.schedule, upto));
          CHECK(sgd.ledger.sample_hvps == 0);
          CHECK(acc.ledger.batch_hvps == closed_form_batch(t.schedule, upto));
          CHECK(acc.ledger.sample_hvps == closed_form_sample(t.schedule, upto));
        }
      }
      // Every first occurrence lies in epoch 1, so each sample adds T-1.
      CHECK(estimate_all(t, data, Estimator::acc_sgd_ie, t.steps()).ledger.sample_hvps == 8 * 2);
    }
  }
  SUBCASE("single step") {
    const auto data = random_dataset(2, 2, 11);
    const auto cfg = train_config(ModelKind::logistic_regression, 2, 1, 2, 0.1);
    const auto t = sgd_train(data, cfg);
    REQUIRE(t.steps() == 1);
    for (auto e : kEstimators) {
      const auto r = estimate_all(t, data, e, 1);
      CHECK(r.ledger == HvpLedger{});
    }
  }
}

TEST_CASE("estimator names round trip") {
  for (auto e : kEstimators) CHECK(parse_estimator(to_string(e)) == e);
  CHECK_THROWS_AS(parse_estimator("nope"), ContractError);
}
