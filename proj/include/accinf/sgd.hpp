#pragma once

// Deterministic mini-batch SGD with full checkpointing, plus the
// leave-one-out (counterfactual) run that shares its initialization,
// schedule and learning rates.
//
// Indexing: checkpoint 0 is the initial parameter vector; step j (0-based)
// consumes checkpoint j, batch j and lr j, and produces checkpoint j + 1.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/linalg.hpp"
#include "accinf/model.hpp"

namespace accinf {

enum class LrKind { constant, sqrt_decay };

struct LrSchedule {
  LrKind kind = LrKind::constant;
  double value = 0.1;  // alpha for constant, gamma for sqrt_decay

  /// Learning rate used at every step of a run with `total_steps` steps
  /// (gamma / sqrt(N) under sqrt_decay).
  double rate(std::size_t total_steps) const;
};

std::string_view to_string(LrKind kind);
LrKind parse_lr_kind(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  LrSchedule lr;
  std::uint64_t seed = 0;
  ModelSpec model;
  // Overrides the seeded initialization when set.
  std::optional<ParamVector> init;
};

struct BatchSchedule {
  std::size_t n = 0;
  std::size_t steps_per_epoch = 0;
  std::vector<std::vector<std::size_t>> batches;

  std::size_t steps() const { return batches.size(); }
  /// Ascending list of steps whose batch contains each sample.
  std::vector<std::vector<std::size_t>> occurrence_steps() const;
  std::optional<std::size_t> first_occurrence(std::size_t k) const;
  bool contains(std::size_t step, std::size_t k) const;
};

struct Trajectory {
  std::vector<ParamVector> thetas;  // steps() + 1 checkpoints
  std::vector<double> lrs;
  BatchSchedule schedule;
  TrainConfig config;
  std::optional<std::size_t> excluded;  // set for counterfactual runs

  std::size_t steps() const { return lrs.size(); }
  const ParamVector& final_params() const { return thetas.back(); }
};

/// Per epoch, a fresh seeded permutation of 0..n-1 cut into consecutive
/// batches of batch_size (the last one is shorter when batch_size does not
/// divide n).
BatchSchedule build_schedule(std::size_t n, const TrainConfig& config);

ParamVector initial_params(const TrainConfig& config);

/// theta - (alpha / |batch|) * sum of gradients over batch \ {exclude}.
ParamVector sgd_step(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                     std::span<const std::size_t> batch, double lr,
                     std::optional<std::size_t> exclude = std::nullopt);

Trajectory sgd_train(const Dataset& data, const TrainConfig& config);
Trajectory sgd_train(const Dataset& data, const TrainConfig& config,
                     const BatchSchedule& schedule);

/// Same init, schedule and lrs, with sample k dropped from every batch while
/// the divisor stays |batch|.
Trajectory counterfactual_sgd(const Dataset& data, const TrainConfig& config,
                              const BatchSchedule& schedule, std::size_t k);

/// theta_k[i] - theta[i] at checkpoint i.
ParamVector true_influence(const Trajectory& ordinary, const Trajectory& counterfactual,
                           std::size_t checkpoint);

/// Throws ContractError unless both runs share schedule, lrs and init.
void require_paired(const Trajectory& ordinary, const Trajectory& counterfactual);

}  // namespace accinf
