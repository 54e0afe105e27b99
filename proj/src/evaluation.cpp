#include "accinf/evaluation.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "accinf/errors.hpp"
#include "accinf/parallel.hpp"

namespace accinf {

std::vector<double> LossChangeTable::truth() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.dl_true);
  return out;
}

std::vector<double> LossChangeTable::estimates(Estimator estimator) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(estimator == Estimator::sgd_ie ? r.dl_sgd_ie : r.dl_acc);
  return out;
}

double loss_change_true(const Dataset& val, const ModelSpec& spec, const Trajectory& traj,
                        const Trajectory& counterfactual, std::size_t checkpoint) {
  require_paired(traj, counterfactual);
  if (checkpoint >= traj.thetas.size()) {
    throw ContractError("loss_change_true: checkpoint out of range");
  }
  return dataset_loss(spec, counterfactual.thetas[checkpoint], val) -
         dataset_loss(spec, traj.thetas[checkpoint], val);
}

double loss_change_linear(const Dataset& val, const ModelSpec& spec,
                          std::span<const double> theta, std::span<const double> delta) {
  require_same_dim(theta.size(), delta.size(), "loss_change_linear");
  return dot(dataset_grad(spec, theta, val), delta);
}

MetricsReport score_table(const LossChangeTable& table, Estimator estimator, RankBy rank_by) {
  const auto truth = table.truth();
  const auto est = table.estimates(estimator);
  MetricsReport report;
  report.estimator = estimator;
  report.epoch = table.epoch;
  report.seed = table.seed;
  report.rmse = rmse(truth, est);
  report.kendall_tau = truth.size() >= 2 ? kendall_tau(truth, est) : std::nullopt;
  for (std::size_t i = 0; i < kJaccardLevels.size(); ++i) {
    report.jaccard[i] = jaccard_top(truth, est, kJaccardLevels[i], rank_by);
  }
  return report;
}

SeedEvaluation evaluate_seed(const Dataset& train, const Dataset& val, const TrainConfig& config,
                             std::span<const std::size_t> record_epochs,
                             const EvalOptions& options) {
  if (record_epochs.empty()) throw ContractError("no epochs to record");
  for (auto e : record_epochs) {
    if (e == 0 || e > config.epochs) {
      throw ContractError("record epoch " + std::to_string(e) + " outside 1.." +
                          std::to_string(config.epochs));
    }
  }
  if (!std::is_sorted(record_epochs.begin(), record_epochs.end())) {
    throw ContractError("record epochs must be ascending");
  }

  const Trajectory traj = sgd_train(train, config);
  const std::size_t per_epoch = traj.schedule.steps_per_epoch;
  std::vector<std::size_t> checkpoints;
  for (auto e : record_epochs) checkpoints.push_back(e * per_epoch);

  std::vector<std::size_t> tracked = options.tracked;
  if (tracked.empty()) {
    tracked.resize(train.size());
    for (std::size_t k = 0; k < tracked.size(); ++k) tracked[k] = k;
  }

  SweepOptions sweep{tracked, options.workers};
  const auto sgd = estimate_snapshots(traj, train, Estimator::sgd_ie, checkpoints, sweep);
  const auto acc = estimate_snapshots(traj, train, Estimator::acc_sgd_ie, checkpoints, sweep);

  const auto& spec = config.model;
  std::vector<double> base_loss;
  std::vector<ParamVector> val_grad;
  for (auto c : checkpoints) {
    base_loss.push_back(dataset_loss(spec, traj.thetas[c], val));
    val_grad.push_back(dataset_grad(spec, traj.thetas[c], val));
  }

  // truth[c][t]
  std::vector<std::vector<double>> truth(checkpoints.size(), std::vector<double>(tracked.size()));
  parallel_chunks(tracked.size(), options.workers,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t t = begin; t < end; ++t) {
                      const auto cf =
                          counterfactual_sgd(train, config, traj.schedule, tracked[t]);
                      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
                        truth[c][t] =
                            dataset_loss(spec, cf.thetas[checkpoints[c]], val) - base_loss[c];
                      }
                    }
                  });

  SeedEvaluation out;
  out.seed = config.seed;
  out.sgd_ie_ledger = sgd.ledger;
  out.acc_ledger = acc.ledger;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    LossChangeTable table;
    table.step = checkpoints[c];
    table.epoch = record_epochs[c];
    table.seed = config.seed;
    for (std::size_t t = 0; t < tracked.size(); ++t) {
      table.rows.push_back({tracked[t], truth[c][t], dot(val_grad[c], sgd.snapshots[c][t].v),
                            dot(val_grad[c], acc.snapshots[c][t].v)});
    }
    for (auto e : kEstimators) out.reports.push_back(score_table(table, e, options.rank_by));
    out.tables.push_back(std::move(table));
  }
  return out;
}

std::vector<MetricsReport> average_reports(std::span<const SeedEvaluation> runs) {
  struct Acc {
    MetricsReport sum;
    std::size_t count = 0;
    std::size_t tau_count = 0;
    double tau_sum = 0.0;
  };
  std::map<std::pair<std::size_t, int>, Acc> groups;
  for (const auto& run : runs) {
    for (const auto& r : run.reports) {
      auto& g = groups[{r.epoch, static_cast<int>(r.estimator)}];
      g.sum.estimator = r.estimator;
      g.sum.epoch = r.epoch;
      g.sum.rmse += r.rmse;
      for (std::size_t i = 0; i < r.jaccard.size(); ++i) g.sum.jaccard[i] += r.jaccard[i];
      if (r.kendall_tau) {
        g.tau_sum += *r.kendall_tau;
        ++g.tau_count;
      }
      ++g.count;
    }
  }
  std::vector<MetricsReport> out;
  for (auto& [key, g] : groups) {
    MetricsReport r = g.sum;
    const auto n = static_cast<double>(g.count);
    r.seed = g.count;
    r.rmse /= n;
    for (auto& j : r.jaccard) j /= n;
    if (g.tau_count > 0) r.kendall_tau = g.tau_sum / static_cast<double>(g.tau_count);
    out.push_back(r);
  }
  return out;
}

std::vector<MetricsReport> cross_epoch_sweep(const Dataset& train, const Dataset& val,
                                             const TrainConfig& config,
                                             std::span<const std::size_t> record_epochs,
                                             std::span<const std::uint64_t> seeds,
                                             const EvalOptions& options) {
  std::vector<SeedEvaluation> runs;
  for (auto seed : seeds) {
    TrainConfig cfg = config;
    cfg.seed = seed;
    runs.push_back(evaluate_seed(train, val, cfg, record_epochs, options));
  }
  return average_reports(runs);
}

}  // namespace accinf
