#include "accinf/cleansing.hpp"

#include <algorithm>
#include <numeric>

#include "accinf/data_io.hpp"
#include "accinf/errors.hpp"
#include "accinf/rng.hpp"

namespace accinf {

InfluenceWindow parse_influence_window(const std::string& name) {
  if (name == "final" || name == "final_step") return InfluenceWindow::final_step;
  if (name == "first_epoch") return InfluenceWindow::first_epoch;
  throw ContractError("unknown influence window '" + name + "'");
}

std::vector<std::size_t> rank_for_cleansing(std::span<const double> loss_changes) {
  std::vector<std::size_t> order(loss_changes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return loss_changes[a] < loss_changes[b];
  });
  return order;
}

std::vector<double> cleansing_scores(const Trajectory& traj, const Dataset& train,
                                     const Dataset& val, Estimator estimator,
                                     InfluenceWindow window, std::size_t workers) {
  const std::size_t upto =
      window == InfluenceWindow::final_step
          ? traj.steps()
          : std::min(traj.steps(), traj.schedule.steps_per_epoch);
  SweepOptions options;
  options.workers = workers;
  const auto all = estimate_all(traj, train, estimator, upto, options);
  const auto val_grad = dataset_grad(traj.config.model, traj.thetas[upto], val);
  std::vector<double> scores;
  scores.reserve(all.states.size());
  for (const auto& s : all.states) scores.push_back(dot(val_grad, s.v));
  return scores;
}

TrainConfig cleanse_config(const TrainConfig& config) {
  TrainConfig out = config;
  out.seed = derive_seed(config.seed, "cleanse");
  return out;
}

double baseline_mcr(const Dataset& train, const Dataset& test, const TrainConfig& config) {
  const auto cfg = cleanse_config(config);
  return predict_misclassified(cfg.model, sgd_train(train, cfg).final_params(), test);
}

CleanseResult cleanse_and_retrain(const Dataset& train, const Dataset& test,
                                  const TrainConfig& config, std::span<const double> scores,
                                  std::size_t m, const std::string& estimator_tag,
                                  double mcr_before) {
  const std::size_t n = train.size();
  if (m >= n) throw ContractError("cleanse: m must be smaller than the training set");
  if (scores.size() != n) throw ContractError("cleanse: need one score per training sample");
  const auto order = rank_for_cleansing(scores);

  CleanseResult result;
  result.m = m;
  result.estimator = estimator_tag;
  result.seed = config.seed;
  result.mcr_before = mcr_before;
  result.removed.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(result.removed.begin(), result.removed.end());

  if (m == 0) {
    result.mcr_after = mcr_before;
    return result;
  }
  std::vector<std::size_t> kept;
  kept.reserve(n - m);
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r < result.removed.size() && result.removed[r] == i) {
      ++r;
      continue;
    }
    kept.push_back(i);
  }
  const auto cfg = cleanse_config(config);
  if (cfg.batch_size > kept.size()) {
    throw ContractError("cleanse: fewer remaining samples than the batch size");
  }
  const Dataset cleansed = take(train, kept);
  result.mcr_after =
      predict_misclassified(cfg.model, sgd_train(cleansed, cfg).final_params(), test);
  return result;
}

CleanseResult cleanse_and_retrain(const Dataset& train, const Dataset& test,
                                  const TrainConfig& config, std::span<const double> scores,
                                  std::size_t m, const std::string& estimator_tag) {
  return cleanse_and_retrain(train, test, config, scores, m, estimator_tag,
                             baseline_mcr(train, test, config));
}

}  // namespace accinf
