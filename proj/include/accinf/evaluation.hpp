#pragma once

// Loss-change tables and estimator scoring against leave-one-out retraining.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/influence.hpp"
#include "accinf/metrics.hpp"
#include "accinf/model.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

inline constexpr std::array<double, 4> kJaccardLevels = {10.0, 30.0, 50.0, 70.0};

struct LossChangeRow {
  std::size_t k = 0;
  double dl_true = 0.0;
  double dl_sgd_ie = 0.0;
  double dl_acc = 0.0;
};

struct LossChangeTable {
  std::size_t step = 0;  // checkpoint index
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<LossChangeRow> rows;

  std::vector<double> truth() const;
  std::vector<double> estimates(Estimator estimator) const;
};

struct MetricsReport {
  Estimator estimator = Estimator::sgd_ie;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  std::optional<double> kendall_tau;
  std::array<double, 4> jaccard{};  // at kJaccardLevels
};

/// L(D_val, theta_k[i]) - L(D_val, theta[i]).
double loss_change_true(const Dataset& val, const ModelSpec& spec, const Trajectory& traj,
                        const Trajectory& counterfactual, std::size_t checkpoint);

/// g(D_val, theta) . delta, the first-order loss change.
double loss_change_linear(const Dataset& val, const ModelSpec& spec,
                          std::span<const double> theta, std::span<const double> delta);

MetricsReport score_table(const LossChangeTable& table, Estimator estimator,
                          RankBy rank_by = RankBy::absolute);

struct EvalOptions {
  std::vector<std::size_t> tracked;  // all training samples when empty
  std::size_t workers = 1;
  RankBy rank_by = RankBy::absolute;
};

struct SeedEvaluation {
  std::uint64_t seed = 0;
  std::vector<LossChangeTable> tables;  // one per recorded epoch
  std::vector<MetricsReport> reports;   // per epoch: sgd_ie then acc_sgd_ie
  HvpLedger sgd_ie_ledger;
  HvpLedger acc_ledger;
};

/// Trains once with config.seed, runs both estimators and the retraining
/// oracle for all tracked samples, and scores them at the end of each
/// recorded epoch.
SeedEvaluation evaluate_seed(const Dataset& train, const Dataset& val, const TrainConfig& config,
                             std::span<const std::size_t> record_epochs,
                             const EvalOptions& options = {});

/// Mean over seeds per (epoch, estimator); the seed field holds the number of
/// seeds averaged. Kendall's tau averages over seeds where it is defined.
std::vector<MetricsReport> average_reports(std::span<const SeedEvaluation> runs);

/// evaluate_seed for each training seed on fixed data, then averaged.
std::vector<MetricsReport> cross_epoch_sweep(const Dataset& train, const Dataset& val,
                                             const TrainConfig& config,
                                             std::span<const std::size_t> record_epochs,
                                             std::span<const std::uint64_t> seeds,
                                             const EvalOptions& options = {});

}  // namespace accinf
