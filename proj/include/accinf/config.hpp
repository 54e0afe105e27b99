#pragma once

// Experiment configuration: a sectioned key = value text format.
//
//   # comment              (also allowed after a value)
//   [section]
//   key = value
//
// Lists are comma separated; integer lists accept ranges "a-b" and stepped
// ranges "a-b:s" (e.g. "2-38:4" -> 2,6,...,38). Relative paths are resolved
// against the directory of the config file. Unknown sections or keys are
// errors. See README.md for every key.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accinf/cleansing.hpp"
#include "accinf/dataset.hpp"
#include "accinf/metrics.hpp"
#include "accinf/model.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

enum class DataSource { synthetic, idx, csv };

struct DatasetSection {
  DataSource source = DataSource::synthetic;
  std::size_t synthetic_dim = 10;
  std::filesystem::path images;
  std::filesystem::path labels;
  int digit_negative = 1;
  int digit_positive = 7;
  std::filesystem::path csv;
  std::string label_column = "y";
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  bool standardize = false;
  std::optional<NoiseKind> noise;
  double noise_sigma = 0.0;
  double noise_rho = 0.0;
};

struct EvalSection {
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::size_t> record_epochs;  // defaults to {epochs}
  std::optional<std::size_t> track_samples;
  RankBy rank_by = RankBy::absolute;
};

struct CleanseSection {
  bool present = false;
  std::vector<std::size_t> m_values;
  InfluenceWindow window = InfluenceWindow::final_step;
};

struct ExperimentConfig {
  DatasetSection dataset;
  TrainConfig train;  // model.input_dim is filled in once data is loaded; seed is per run
  EvalSection eval;
  CleanseSection cleanse;
  std::filesystem::path output_dir;
  std::string text;  // verbatim source, for manifests
};

/// Parses and validates. Throws ConfigError with the offending line.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::size_t> parse_index_list(std::string_view text);

}  // namespace accinf
