#include "accinf/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "accinf/errors.hpp"
#include "accinf/rng.hpp"

namespace accinf {

double LrSchedule::rate(std::size_t total_steps) const {
  if (kind == LrKind::constant) return value;
  if (total_steps == 0) return value;
  return value / std::sqrt(static_cast<double>(total_steps));
}

std::string_view to_string(LrKind kind) {
  return kind == LrKind::constant ? "constant" : "sqrt_decay";
}

LrKind parse_lr_kind(std::string_view name) {
  if (name == "constant") return LrKind::constant;
  if (name == "sqrt_decay") return LrKind::sqrt_decay;
  throw ContractError("unknown lr schedule '" + std::string(name) + "'");
}

std::vector<std::vector<std::size_t>> BatchSchedule::occurrence_steps() const {
  std::vector<std::vector<std::size_t>> occ(n);
  for (std::size_t step = 0; step < batches.size(); ++step) {
    for (auto k : batches[step]) occ[k].push_back(step);
  }
  return occ;
}

std::optional<std::size_t> BatchSchedule::first_occurrence(std::size_t k) const {
  for (std::size_t step = 0; step < batches.size(); ++step) {
    if (contains(step, k)) return step;
  }
  return std::nullopt;
}

bool BatchSchedule::contains(std::size_t step, std::size_t k) const {
  const auto& b = batches.at(step);
  return std::find(b.begin(), b.end(), k) != b.end();
}

BatchSchedule build_schedule(std::size_t n, const TrainConfig& config) {
  const std::size_t m = config.batch_size;
  if (m == 0) throw ContractError("batch size must be positive");
  if (m > n) {
    throw ContractError("batch size " + std::to_string(m) + " exceeds dataset size " +
                        std::to_string(n));
  }
  if (config.epochs == 0) throw ContractError("epochs must be positive");
  BatchSchedule schedule;
  schedule.n = n;
  schedule.steps_per_epoch = (n + m - 1) / m;
  const auto base = derive_seed(config.seed, "schedule");
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(epoch)));
    const auto perm = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += m) {
      const auto end = std::min(n, start + m);
      schedule.batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                    perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return schedule;
}

ParamVector initial_params(const TrainConfig& config) {
  if (config.init) {
    require_same_dim(config.init->size(), config.model.param_dim(), "initial parameters");
    return *config.init;
  }
  Rng rng(derive_seed(config.seed, "init"));
  return init_params(config.model, rng);
}

ParamVector sgd_step(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                     std::span<const std::size_t> batch, double lr,
                     std::optional<std::size_t> exclude) {
  if (batch.empty()) throw ContractError("sgd_step: empty batch");
  ParamVector sum(theta.size(), 0.0);
  for (auto idx : batch) {
    if (exclude && idx == *exclude) continue;
    accumulate_grad(spec, theta, data.samples.at(idx), 1.0, sum);
  }
  const double coef = lr / static_cast<double>(batch.size());
  ParamVector next(theta.begin(), theta.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] -= coef * sum[i];
  return next;
}

namespace {

Trajectory run(const Dataset& data, const TrainConfig& config, const BatchSchedule& schedule,
               std::optional<std::size_t> exclude) {
  config.model.validate();
  if (data.d != config.model.input_dim) {
    throw ContractError("dataset dimension " + std::to_string(data.d) +
                        " does not match model input_dim " +
                        std::to_string(config.model.input_dim));
  }
  if (schedule.n != data.size()) throw ContractError("schedule built for a different dataset");

  Trajectory traj;
  traj.config = config;
  traj.schedule = schedule;
  traj.excluded = exclude;
  const std::size_t steps = schedule.steps();
  traj.lrs.assign(steps, config.lr.rate(steps));
  traj.thetas.reserve(steps + 1);
  traj.thetas.push_back(initial_params(config));
  for (std::size_t j = 0; j < steps; ++j) {
    auto next =
        sgd_step(config.model, traj.thetas.back(), data, schedule.batches[j], traj.lrs[j], exclude);
    if (!all_finite(next)) {
      throw NumericError("non-finite parameters after step " + std::to_string(j), j);
    }
    traj.thetas.push_back(std::move(next));
  }
  return traj;
}

}  // namespace

Trajectory sgd_train(const Dataset& data, const TrainConfig& config) {
  return run(data, config, build_schedule(data.size(), config), std::nullopt);
}

Trajectory sgd_train(const Dataset& data, const TrainConfig& config,
                     const BatchSchedule& schedule) {
  return run(data, config, schedule, std::nullopt);
}

Trajectory counterfactual_sgd(const Dataset& data, const TrainConfig& config,
                              const BatchSchedule& schedule, std::size_t k) {
  if (k >= data.size()) {
    throw ContractError("counterfactual_sgd: sample " + std::to_string(k) + " out of range");
  }
  return run(data, config, schedule, k);
}

void require_paired(const Trajectory& ordinary, const Trajectory& counterfactual) {
  if (ordinary.schedule.batches != counterfactual.schedule.batches ||
      ordinary.lrs != counterfactual.lrs || ordinary.thetas.empty() ||
      counterfactual.thetas.empty() || ordinary.thetas.front() != counterfactual.thetas.front()) {
    throw ContractError("trajectories are not paired (schedule, lrs or init differ)");
  }
}

ParamVector true_influence(const Trajectory& ordinary, const Trajectory& counterfactual,
                           std::size_t checkpoint) {
  require_paired(ordinary, counterfactual);
  if (checkpoint >= ordinary.thetas.size()) {
    throw ContractError("true_influence: checkpoint out of range");
  }
  return subtract(counterfactual.thetas[checkpoint], ordinary.thetas[checkpoint]);
}

}  // namespace accinf
