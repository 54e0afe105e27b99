#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "accinf/config.hpp"
#include "accinf/errors.hpp"
#include "accinf/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int report(const accinf::RunManifest& m) {
  std::cout << m.command << ": wrote " << m.outputs.size() << " files to " << m.dir.string()
            << " in " << m.wall_clock_seconds << " s\n";
  for (const auto& f : m.failed_seeds) {
    std::cerr << "seed " << f.seed << " failed at step " << f.step << ": " << f.message << '\n';
  }
  return m.failed_seeds.empty() ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data attribution along SGD trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", accinf::kToolVersion);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::size_t workers = 1;
  std::optional<std::size_t> track;

  const auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--track-samples", track, "track only the first K training samples");
  };
  auto* train = app.add_subcommand("train", "train and spill trajectories");
  auto* estimate = app.add_subcommand("estimate", "loss-change tables and metrics per seed");
  auto* sweep = app.add_subcommand("sweep", "cross-epoch metrics averaged over seeds");
  auto* cleanse = app.add_subcommand("cleanse", "remove harmful samples and retrain");
  for (auto* sub : {train, estimate, sweep, cleanse}) add_run_flags(sub);

  std::string manifest;
  auto* verify = app.add_subcommand("verify", "re-check the digests of a run manifest");
  verify->add_option("manifest", manifest, "manifest.json or its directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      const auto r = accinf::verify_manifest(manifest);
      for (const auto& p : r.problems) std::cerr << p << '\n';
      std::cout << (r.ok ? "OK" : "MISMATCH") << " (" << r.checked << " files)\n";
      return r.ok ? kExitOk : kExitFailure;
    }

    const auto cfg = accinf::load_config(config_path);
    accinf::RunOptions options;
    if (out_dir) options.out_dir = *out_dir;
    options.workers = workers;
    options.track_samples = track;

    if (train->parsed()) return report(accinf::run_train(cfg, options));
    if (estimate->parsed()) return report(accinf::run_estimate(cfg, options));
    if (sweep->parsed()) return report(accinf::run_sweep(cfg, options));
    if (cleanse->parsed()) return report(accinf::run_cleanse(cfg, options));
  } catch (const accinf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const accinf::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
