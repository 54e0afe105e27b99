#include "accinf/trajectory_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <json.hpp>

#include "accinf/data_io.hpp"
#include "accinf/errors.hpp"

namespace accinf {

using nlohmann::json;

void write_float64_blob(const std::filesystem::path& path, std::span<const ParamVector> vectors) {
  std::vector<char> bytes;
  for (const auto& v : vectors) {
    for (double x : v) {
      const auto bits = std::bit_cast<std::uint64_t>(x);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<ParamVector> read_float64_blob(const std::filesystem::path& path, std::size_t count,
                                           std::size_t dim) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() != count * dim * 8) {
    throw ParseError(path.string() + ": expected " + std::to_string(count * dim * 8) +
                     " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<ParamVector> out(count, ParamVector(dim));
  std::size_t offset = 0;
  for (auto& v : out) {
    for (auto& x : v) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[offset + b]} << (8 * b);
      x = std::bit_cast<double>(bits);
      offset += 8;
    }
  }
  return out;
}

std::vector<std::filesystem::path> save_trajectory(const Trajectory& traj,
                                                   const std::filesystem::path& dir,
                                                   const std::string& stem) {
  const auto blob = dir / (stem + ".bin");
  const auto manifest = dir / (stem + ".json");
  const auto& cfg = traj.config;
  json j;
  j["format"] = "accinf-trajectory";
  j["version"] = 1;
  j["config"] = {{"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"lr_schedule", std::string(to_string(cfg.lr.kind))},
                 {"lr", cfg.lr.value},
                 {"seed", cfg.seed},
                 {"model",
                  {{"kind", std::string(to_string(cfg.model.kind))},
                   {"input_dim", cfg.model.input_dim},
                   {"hidden_dim", cfg.model.hidden_dim}}}};
  j["n"] = traj.schedule.n;
  j["steps_per_epoch"] = traj.schedule.steps_per_epoch;
  j["lrs"] = traj.lrs;
  j["schedule"] = traj.schedule.batches;
  j["excluded"] = traj.excluded ? json(*traj.excluded) : json(nullptr);
  j["checkpoints"] = traj.thetas.size();
  j["dim"] = traj.thetas.empty() ? 0 : traj.thetas.front().size();
  j["blob"] = blob.filename().string();

  write_float64_blob(blob, traj.thetas);
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + manifest.string());
  out << j.dump(1) << '\n';
  return {manifest, blob};
}

Trajectory load_trajectory(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ParseError("cannot open " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  if (j.value("format", "") != "accinf-trajectory") {
    throw ParseError(manifest.string() + ": not a trajectory manifest");
  }
  Trajectory traj;
  try {
    const auto& c = j.at("config");
    traj.config.epochs = c.at("epochs").get<std::size_t>();
    traj.config.batch_size = c.at("batch_size").get<std::size_t>();
    traj.config.lr.kind = parse_lr_kind(c.at("lr_schedule").get<std::string>());
    traj.config.lr.value = c.at("lr").get<double>();
    traj.config.seed = c.at("seed").get<std::uint64_t>();
    const auto& m = c.at("model");
    traj.config.model.kind = parse_model_kind(m.at("kind").get<std::string>());
    traj.config.model.input_dim = m.at("input_dim").get<std::size_t>();
    traj.config.model.hidden_dim = m.at("hidden_dim").get<std::size_t>();
    traj.schedule.n = j.at("n").get<std::size_t>();
    traj.schedule.steps_per_epoch = j.at("steps_per_epoch").get<std::size_t>();
    traj.schedule.batches = j.at("schedule").get<std::vector<std::vector<std::size_t>>>();
    traj.lrs = j.at("lrs").get<std::vector<double>>();
    if (!j.at("excluded").is_null()) traj.excluded = j.at("excluded").get<std::size_t>();
    const auto count = j.at("checkpoints").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    traj.thetas = read_float64_blob(manifest.parent_path() / j.at("blob").get<std::string>(),
                                    count, dim);
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  // The seeded init is reproducible from the config, but a stored run may
  // have used an explicit one.
  traj.config.init = traj.thetas.empty() ? std::nullopt
                                         : std::optional<ParamVector>(traj.thetas.front());
  return traj;
}

}  // namespace accinf
