#include "accinf/runner.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "accinf/cleansing.hpp"
#include "accinf/data_io.hpp"
#include "accinf/digest.hpp"
#include "accinf/errors.hpp"
#include "accinf/evaluation.hpp"
#include "accinf/influence.hpp"
#include "accinf/metrics.hpp"
#include "accinf/rng.hpp"
#include "accinf/trajectory_io.hpp"

namespace accinf {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

class OutputSink {
 public:
  OutputSink(fs::path dir, std::string command) {
    manifest_.dir = std::move(dir);
    manifest_.command = std::move(command);
    fs::create_directories(manifest_.dir);
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = manifest_.dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    record(name);
  }

  void record(const std::string& name) {
    const fs::path path = manifest_.dir / name;
    manifest_.outputs.push_back({name, sha256_file(path), fs::file_size(path)});
  }

  RunManifest& manifest() { return manifest_; }

 private:
  RunManifest manifest_;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string source_name(DataSource s) {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::idx: return "idx";
    case DataSource::csv: return "csv";
  }
  return "?";
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"source", source_name(cfg.dataset.source)},
                  {"n_train", cfg.dataset.n_train},
                  {"n_val", cfg.dataset.n_val},
                  {"n_test", cfg.dataset.n_test}};
  j["model"] = {{"kind", std::string(to_string(cfg.train.model.kind))},
                {"hidden_dim", cfg.train.model.hidden_dim}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr_schedule", std::string(to_string(cfg.train.lr.kind))},
                {"lr", cfg.train.lr.value}};
  j["eval"] = {{"seeds", cfg.eval.seeds}, {"record_epochs", cfg.eval.record_epochs}};
  return j;
}

void write_manifest(OutputSink& sink, const ExperimentConfig& cfg, const Timer& timer) {
  auto& m = sink.manifest();
  m.wall_clock_seconds = timer.seconds();
  json j;
  j["format"] = "accinf-run";
  j["tool_version"] = kToolVersion;
  j["command"] = m.command;
  j["config"] = config_json(cfg);
  j["config_text"] = cfg.text;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  j["outputs"] = json::array();
  for (const auto& o : m.outputs) {
    j["outputs"].push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  }
  j["failed_seeds"] = json::array();
  for (const auto& f : m.failed_seeds) {
    j["failed_seeds"].push_back({{"seed", f.seed}, {"step", f.step}, {"message", f.message}});
  }
  std::ofstream out(m.dir / "manifest.json", std::ios::trunc);
  out << j.dump(2) << '\n';
}

fs::path output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  if (options.out_dir) return *options.out_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "out";
}

std::vector<std::size_t> tracked_samples(const ExperimentConfig& cfg, const RunOptions& options,
                                         std::size_t n) {
  auto k = options.track_samples ? options.track_samples : cfg.eval.track_samples;
  if (!k || *k >= n) return {};
  std::vector<std::size_t> out(*k);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

std::string dataset_label(const ExperimentConfig& cfg) {
  switch (cfg.dataset.source) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::idx:
      return "mnist" + std::to_string(cfg.dataset.digit_negative) +
             std::to_string(cfg.dataset.digit_positive);
    case DataSource::csv: return cfg.dataset.csv.stem().string();
  }
  return "?";
}

std::string tau_cell(const std::optional<double>& tau) {
  return tau ? format_double(*tau) : "NA";
}

constexpr const char* kMetricsHeader =
    "dataset,model,estimator,seed,epoch,rmse,kendall_tau,jacc10,jacc30,jacc50,jacc70\n";

void append_metrics_row(std::string& out, const std::string& dataset, const std::string& model,
                        const MetricsReport& r) {
  out += dataset + ',' + model + ',' + std::string(to_string(r.estimator)) + ',' +
         std::to_string(r.seed) + ',' + std::to_string(r.epoch) + ',' + format_double(r.rmse) +
         ',' + tau_cell(r.kendall_tau);
  for (double j : r.jaccard) out += ',' + format_double(j);
  out += '\n';
}

std::string ledger_rows(std::uint64_t seed, const SeedEvaluation& ev) {
  std::string out;
  out += std::to_string(seed) + ",sgd_ie," + std::to_string(ev.sgd_ie_ledger.batch_hvps) + ',' +
         std::to_string(ev.sgd_ie_ledger.sample_hvps) + '\n';
  out += std::to_string(seed) + ",acc_sgd_ie," + std::to_string(ev.acc_ledger.batch_hvps) + ',' +
         std::to_string(ev.acc_ledger.sample_hvps) + '\n';
  return out;
}

std::vector<std::size_t> record_epochs(const ExperimentConfig& cfg) {
  if (!cfg.eval.record_epochs.empty()) return cfg.eval.record_epochs;
  return {cfg.train.epochs};
}

}  // namespace

Dataset load_pool(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  Dataset pool;
  switch (ds.source) {
    case DataSource::synthetic: return pool;
    case DataSource::idx: {
      const auto images = read_file_bytes(ds.images);
      const auto labels = read_file_bytes(ds.labels);
      pool = select_binary_digits(parse_idx(images, labels), ds.digit_negative,
                                  ds.digit_positive);
      break;
    }
    case DataSource::csv: {
      const auto bytes = read_file_bytes(ds.csv);
      pool = load_csv_numeric(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                               bytes.size()),
                              ds.label_column);
      break;
    }
  }
  const std::size_t need = ds.n_train + ds.n_val + ds.n_test;
  if (pool.size() < need) {
    throw ConfigError("dataset has " + std::to_string(pool.size()) + " samples, config needs " +
                      std::to_string(need));
  }
  if (ds.standardize) pool = standardize(pool);
  return pool;
}

SeedData prepare_seed_data(const ExperimentConfig& cfg, const Dataset& pool, std::uint64_t seed) {
  const auto& ds = cfg.dataset;
  const std::size_t need = ds.n_train + ds.n_val + ds.n_test;
  Dataset source;
  if (ds.source == DataSource::synthetic) {
    const std::size_t n = need + (need % 2);
    source = make_synthetic(n, ds.synthetic_dim, derive_seed(seed, "data"));
    if (ds.standardize) source = standardize(source);
  }
  const Dataset& from = ds.source == DataSource::synthetic ? source : pool;

  Rng rng(derive_seed(seed, "split"));
  const auto perm = rng.permutation(from.size());
  const auto slice = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> pos(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                                 perm.begin() + static_cast<std::ptrdiff_t>(begin + count));
    Dataset out = take(from, pos);
    out.name = from.name;
    return out;
  };
  SeedData data{slice(0, ds.n_train), slice(ds.n_train, ds.n_val),
                slice(ds.n_train + ds.n_val, ds.n_test)};
  if (ds.noise) {
    NoiseSpec spec;
    spec.kind = *ds.noise;
    spec.sigma = ds.noise_sigma;
    spec.rho = ds.noise_rho;
    spec.seed = derive_seed(seed, "noise");
    data.train = inject_noise(data.train, spec);
  }
  return data;
}

TrainConfig train_config_for_seed(const ExperimentConfig& cfg, std::size_t input_dim,
                                  std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.model.input_dim = input_dim;
  t.seed = derive_seed(seed, "train");
  t.init.reset();
  return t;
}

RunManifest run_train(const ExperimentConfig& cfg, const RunOptions& options) {
  Timer timer;
  OutputSink sink(output_dir(cfg, options), "train");
  const Dataset pool = load_pool(cfg);
  std::string summary = "seed,steps,train_loss,val_loss,test_mcr\n";
  for (const auto seed : cfg.eval.seeds) {
    const auto data = prepare_seed_data(cfg, pool, seed);
    const auto tcfg = train_config_for_seed(cfg, data.train.d, seed);
    try {
      const auto traj = sgd_train(data.train, tcfg);
      const auto stem = "trajectory_seed" + std::to_string(seed);
      save_trajectory(traj, sink.manifest().dir, stem);
      sink.record(stem + ".json");
      sink.record(stem + ".bin");
      const auto& theta = traj.final_params();
      summary += std::to_string(seed) + ',' + std::to_string(traj.steps()) + ',' +
                 format_double(dataset_loss(tcfg.model, theta, data.train)) + ',' +
                 (data.val.empty() ? "NA" : format_double(dataset_loss(tcfg.model, theta, data.val))) +
                 ',' +
                 (data.test.empty() || !tcfg.model.is_classifier()
                      ? "NA"
                      : format_double(predict_misclassified(tcfg.model, theta, data.test))) +
                 '\n';
    } catch (const NumericError& e) {
      sink.manifest().failed_seeds.push_back({seed, e.step(), e.what()});
    }
  }
  sink.write("train_summary.csv", summary);
  write_manifest(sink, cfg, timer);
  return sink.manifest();
}

RunManifest run_estimate(const ExperimentConfig& cfg, const RunOptions& options) {
  Timer timer;
  OutputSink sink(output_dir(cfg, options), "estimate");
  const Dataset pool = load_pool(cfg);
  const auto epochs = record_epochs(cfg);
  const auto dataset = dataset_label(cfg);
  const std::string model(to_string(cfg.train.model.kind));

  std::string metrics = kMetricsHeader;
  std::string influence = "seed,sample_index,estimator,step,l2_norm,dl_linear\n";
  std::string ledger = "seed,estimator,batch_hvps,sample_hvps\n";
  for (const auto seed : cfg.eval.seeds) {
    const auto data = prepare_seed_data(cfg, pool, seed);
    const auto tcfg = train_config_for_seed(cfg, data.train.d, seed);
    EvalOptions eo;
    eo.tracked = tracked_samples(cfg, options, data.train.size());
    eo.workers = options.workers;
    eo.rank_by = cfg.eval.rank_by;
    try {
      const auto ev = evaluate_seed(data.train, data.val, tcfg, epochs, eo);
      for (auto r : ev.reports) {
        r.seed = seed;
        append_metrics_row(metrics, dataset, model, r);
      }
      ledger += ledger_rows(seed, ev);

      std::string table = "k,epoch,step,dl_true,dl_sgd_ie,dl_acc_sgd_ie\n";
      std::string scatter = "k,epoch,dl_true,dl_est,estimator\n";
      for (const auto& t : ev.tables) {
        for (const auto& row : t.rows) {
          table += std::to_string(row.k) + ',' + std::to_string(t.epoch) + ',' +
                   std::to_string(t.step) + ',' + format_double(row.dl_true) + ',' +
                   format_double(row.dl_sgd_ie) + ',' + format_double(row.dl_acc) + '\n';
        }
        for (const auto e : kEstimators) {
          for (const auto& row : t.rows) {
            scatter += std::to_string(row.k) + ',' + std::to_string(t.epoch) + ',' +
                       format_double(row.dl_true) + ',' +
                       format_double(e == Estimator::sgd_ie ? row.dl_sgd_ie : row.dl_acc) + ',' +
                       std::string(to_string(e)) + '\n';
          }
        }
      }
      sink.write("losschange_seed" + std::to_string(seed) + ".csv", table);
      sink.write("scatter_seed" + std::to_string(seed) + ".csv", scatter);

      // Influence of every training sample at the final step.
      const auto traj = sgd_train(data.train, tcfg);
      const std::size_t last = traj.steps();
      const auto val_grad = data.val.empty() ? ParamVector{}
                                             : dataset_grad(tcfg.model, traj.thetas[last], data.val);
      for (const auto e : kEstimators) {
        SweepOptions so;
        so.workers = options.workers;
        const auto all = estimate_all(traj, data.train, e, last, so);
        for (const auto& s : all.states) {
          influence += std::to_string(seed) + ',' + std::to_string(s.k) + ',' +
                       std::string(to_string(e)) + ',' + std::to_string(s.step) + ',' +
                       format_double(norm2(s.v)) + ',' +
                       (val_grad.empty() ? "NA" : format_double(dot(val_grad, s.v))) + '\n';
        }
      }
    } catch (const NumericError& e) {
      sink.manifest().failed_seeds.push_back({seed, e.step(), e.what()});
    }
  }
  sink.write("metrics.csv", metrics);
  sink.write("influence.csv", influence);
  sink.write("ledger.csv", ledger);
  write_manifest(sink, cfg, timer);
  return sink.manifest();
}

RunManifest run_sweep(const ExperimentConfig& cfg, const RunOptions& options) {
  Timer timer;
  OutputSink sink(output_dir(cfg, options), "sweep");
  const Dataset pool = load_pool(cfg);
  const auto epochs = record_epochs(cfg);
  const auto dataset = dataset_label(cfg);
  const std::string model(to_string(cfg.train.model.kind));

  std::string raw = kMetricsHeader;
  std::vector<SeedEvaluation> runs;
  for (const auto seed : cfg.eval.seeds) {
    const auto data = prepare_seed_data(cfg, pool, seed);
    const auto tcfg = train_config_for_seed(cfg, data.train.d, seed);
    EvalOptions eo;
    eo.tracked = tracked_samples(cfg, options, data.train.size());
    eo.workers = options.workers;
    eo.rank_by = cfg.eval.rank_by;
    try {
      auto ev = evaluate_seed(data.train, data.val, tcfg, epochs, eo);
      ev.seed = seed;
      for (auto& r : ev.reports) {
        r.seed = seed;
        append_metrics_row(raw, dataset, model, r);
      }
      runs.push_back(std::move(ev));
    } catch (const NumericError& e) {
      sink.manifest().failed_seeds.push_back({seed, e.step(), e.what()});
    }
  }
  std::string averaged =
      "dataset,model,estimator,seeds,epoch,rmse,kendall_tau,jacc10,jacc30,jacc50,jacc70\n";
  for (const auto& r : average_reports(runs)) append_metrics_row(averaged, dataset, model, r);
  sink.write("sweep_raw.csv", raw);
  sink.write("sweep.csv", averaged);
  write_manifest(sink, cfg, timer);
  return sink.manifest();
}

RunManifest run_cleanse(const ExperimentConfig& cfg, const RunOptions& options) {
  if (!cfg.cleanse.present) throw ConfigError("cleanse: config has no [cleanse] section");
  Timer timer;
  OutputSink sink(output_dir(cfg, options), "cleanse");
  const Dataset pool = load_pool(cfg);

  struct Cell {
    double sum = 0.0;
    double before_sum = 0.0;
    std::size_t count = 0;
  };
  std::vector<std::vector<Cell>> cells(std::size(kEstimators),
                                       std::vector<Cell>(cfg.cleanse.m_values.size()));
  std::string rows = "estimator,seed,m,mcr_before,mcr_after,flipped_removed,removed_indices\n";
  for (const auto seed : cfg.eval.seeds) {
    const auto data = prepare_seed_data(cfg, pool, seed);
    const auto tcfg = train_config_for_seed(cfg, data.train.d, seed);
    try {
      const auto traj = sgd_train(data.train, tcfg);
      const double before = baseline_mcr(data.train, data.test, tcfg);
      for (std::size_t e = 0; e < std::size(kEstimators); ++e) {
        const auto est = kEstimators[e];
        const auto scores =
            cleansing_scores(traj, data.train, data.val, est, cfg.cleanse.window, options.workers);
        for (std::size_t mi = 0; mi < cfg.cleanse.m_values.size(); ++mi) {
          const auto res = cleanse_and_retrain(data.train, data.test, tcfg, scores,
                                               cfg.cleanse.m_values[mi],
                                               std::string(to_string(est)), before);
          std::size_t hits = 0;
          for (const auto i : res.removed) {
            hits += std::binary_search(data.train.flipped.begin(), data.train.flipped.end(), i);
          }
          std::string removed;
          for (std::size_t i = 0; i < res.removed.size(); ++i) {
            if (i) removed += ';';
            removed += std::to_string(res.removed[i]);
          }
          rows += res.estimator + ',' + std::to_string(seed) + ',' + std::to_string(res.m) + ',' +
                  format_double(res.mcr_before) + ',' + format_double(res.mcr_after) + ',' +
                  std::to_string(hits) + ',' + removed + '\n';
          auto& c = cells[e][mi];
          c.sum += res.mcr_after;
          c.before_sum += res.mcr_before;
          ++c.count;
        }
      }
    } catch (const NumericError& e) {
      sink.manifest().failed_seeds.push_back({seed, e.step(), e.what()});
    }
  }
  std::string summary = "estimator,m,seeds,mean_mcr_before,mean_mcr_after\n";
  for (std::size_t e = 0; e < std::size(kEstimators); ++e) {
    for (std::size_t mi = 0; mi < cfg.cleanse.m_values.size(); ++mi) {
      const auto& c = cells[e][mi];
      const double n = c.count ? static_cast<double>(c.count) : 1.0;
      summary += std::string(to_string(kEstimators[e])) + ',' +
                 std::to_string(cfg.cleanse.m_values[mi]) + ',' + std::to_string(c.count) + ',' +
                 format_double(c.before_sum / n) + ',' + format_double(c.sum / n) + '\n';
    }
  }
  sink.write("cleanse.csv", rows);
  sink.write("cleanse_summary.csv", summary);
  write_manifest(sink, cfg, timer);
  return sink.manifest();
}

VerifyReport verify_manifest(const fs::path& manifest_or_dir) {
  VerifyReport report;
  const fs::path manifest =
      fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.json" : manifest_or_dir;
  const fs::path dir = manifest.parent_path();
  std::ifstream in(manifest);
  if (!in) {
    report.ok = false;
    report.problems.push_back("cannot open " + manifest.string());
    return report;
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    report.ok = false;
    report.problems.push_back(std::string("malformed manifest: ") + e.what());
    return report;
  }
  if (!j.contains("outputs") || !j["outputs"].is_array()) {
    report.ok = false;
    report.problems.push_back("manifest has no outputs list");
    return report;
  }
  for (const auto& o : j["outputs"]) {
    const auto rel = o.value("path", std::string{});
    const auto expected = o.value("sha256", std::string{});
    const fs::path path = dir / rel;
    ++report.checked;
    if (!fs::exists(path)) {
      report.ok = false;
      report.problems.push_back(rel + ": missing");
      continue;
    }
    const auto actual = sha256_file(path);
    if (actual != expected) {
      report.ok = false;
      report.problems.push_back(rel + ": digest mismatch");
    }
  }
  return report;
}

}  // namespace accinf
