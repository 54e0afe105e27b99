#pragma once

// On-disk spill format: a JSON manifest (config, lrs, schedule) next to a
// little-endian float64 blob of concatenated vectors. Round trips are
// bit-exact.

#include <filesystem>
#include <span>
#include <vector>

#include "accinf/linalg.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

void write_float64_blob(const std::filesystem::path& path, std::span<const ParamVector> vectors);
std::vector<ParamVector> read_float64_blob(const std::filesystem::path& path, std::size_t count,
                                           std::size_t dim);

/// Writes `<stem>.json` and `<stem>.bin` inside `dir`; returns both paths.
std::vector<std::filesystem::path> save_trajectory(const Trajectory& traj,
                                                   const std::filesystem::path& dir,
                                                   const std::string& stem);
Trajectory load_trajectory(const std::filesystem::path& manifest);

}  // namespace accinf
