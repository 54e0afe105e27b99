#pragma once

// Experiment orchestration behind the command-line tool. Each command writes
// its files into the output directory and finishes by writing manifest.json,
// which lists every file with its SHA-256 digest.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "accinf/config.hpp"
#include "accinf/dataset.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides [output] dir
  std::size_t workers = 1;
  std::optional<std::size_t> track_samples;  // overrides [eval] track_samples
};

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct FailedSeed {
  std::uint64_t seed = 0;
  std::size_t step = 0;
  std::string message;
};

struct RunManifest {
  std::string command;
  std::filesystem::path dir;
  double wall_clock_seconds = 0.0;
  std::vector<OutputFile> outputs;
  std::vector<FailedSeed> failed_seeds;
};

struct SeedData {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Loads the IDX / CSV source once (empty dataset for synthetic sources).
Dataset load_pool(const ExperimentConfig& cfg);

/// Draws the per-seed splits: synthetic generation (stream "data"), the
/// train/val/test split ("split") and training-set noise ("noise").
SeedData prepare_seed_data(const ExperimentConfig& cfg, const Dataset& pool, std::uint64_t seed);

/// Training config for one run seed; the trainer seed is derived as "train".
TrainConfig train_config_for_seed(const ExperimentConfig& cfg, std::size_t input_dim,
                                  std::uint64_t seed);

RunManifest run_train(const ExperimentConfig& cfg, const RunOptions& options);
RunManifest run_estimate(const ExperimentConfig& cfg, const RunOptions& options);
RunManifest run_sweep(const ExperimentConfig& cfg, const RunOptions& options);
RunManifest run_cleanse(const ExperimentConfig& cfg, const RunOptions& options);

struct VerifyReport {
  bool ok = true;
  std::size_t checked = 0;
  std::vector<std::string> problems;
};

/// Accepts manifest.json or the directory holding it.
VerifyReport verify_manifest(const std::filesystem::path& manifest_or_dir);

/// "%.17g" formatting used by every CSV output.
std::string format_double(double value);

}  // namespace accinf
