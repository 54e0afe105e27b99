#pragma once

// Dataset cleansing: rank training samples by estimated validation-loss
// change, drop the most harmful ones, retrain from scratch and compare test
// misclassification rates.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/influence.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

enum class InfluenceWindow {
  final_step,  // accumulate from each sample's first occurrence to the end
  first_epoch  // stop at the end of epoch 1
};

InfluenceWindow parse_influence_window(const std::string& name);

/// Ascending by signed score (most negative first), ties by ascending index.
std::vector<std::size_t> rank_for_cleansing(std::span<const double> loss_changes);

/// Linear loss-change estimate for every training sample.
std::vector<double> cleansing_scores(const Trajectory& traj, const Dataset& train,
                                     const Dataset& val, Estimator estimator,
                                     InfluenceWindow window = InfluenceWindow::final_step,
                                     std::size_t workers = 1);

struct CleanseResult {
  std::size_t m = 0;
  std::vector<std::size_t> removed;  // ascending
  double mcr_before = 0.0;
  double mcr_after = 0.0;
  std::string estimator;
  std::uint64_t seed = 0;
};

/// Retraining config used for both the baseline and the cleansed model.
TrainConfig cleanse_config(const TrainConfig& config);

/// Removes the m lowest-ranked samples and retrains. Both the full-data
/// baseline and the cleansed model use cleanse_config(config).
CleanseResult cleanse_and_retrain(const Dataset& train, const Dataset& test,
                                  const TrainConfig& config, std::span<const double> scores,
                                  std::size_t m, const std::string& estimator_tag);

/// Same as above with a precomputed baseline MCR (saves one training run per
/// cell of an m sweep).
CleanseResult cleanse_and_retrain(const Dataset& train, const Dataset& test,
                                  const TrainConfig& config, std::span<const double> scores,
                                  std::size_t m, const std::string& estimator_tag,
                                  double mcr_before);

double baseline_mcr(const Dataset& train, const Dataset& test, const TrainConfig& config);

}  // namespace accinf
