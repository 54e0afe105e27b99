#include "accinf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "accinf/errors.hpp"

namespace accinf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

class Sections {
 public:
  void add(const std::string& section, const std::string& key, std::string value,
           std::size_t line) {
    auto& keys = data_[section];
    if (keys.count(key)) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    keys[key] = Entry{std::move(value), line, false};
  }

  bool has_section(const std::string& section) const { return data_.count(section) > 0; }
  void touch_section(const std::string& section) { data_[section]; }

  Entry* find(const std::string& section, const std::string& key) {
    auto s = data_.find(section);
    if (s == data_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  void reject_unused() const {
    for (const auto& [section, keys] : data_) {
      for (const auto& [key, entry] : keys) {
        if (!entry.used) {
          throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key +
                            "' in [" + section + "]");
        }
      }
    }
  }

 private:
  std::map<std::string, std::map<std::string, Entry>> data_;
};

[[noreturn]] void bad_value(const Entry& e, const std::string& key, const std::string& why) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + " = '" + e.value + "': " +
                    why);
}

template <typename T>
T to_number(std::string_view text, bool* ok) {
  T value{};
  text = trim(text);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  *ok = !text.empty() && ec == std::errc{} && ptr == text.data() + text.size();
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

class Reader {
 public:
  Reader(Sections& sections, std::string section) : s_(sections), section_(std::move(section)) {}

  std::optional<std::string> str(const std::string& key) {
    if (auto* e = s_.find(section_, key)) return e->value;
    return std::nullopt;
  }

  std::string required_str(const std::string& key) {
    auto v = str(key);
    if (!v) throw ConfigError("missing key '" + key + "' in [" + section_ + "]");
    return *v;
  }

  template <typename T>
  std::optional<T> number(const std::string& key) {
    auto* e = s_.find(section_, key);
    if (!e) return std::nullopt;
    bool ok = false;
    const T v = to_number<T>(e->value, &ok);
    if (!ok) bad_value(*e, key, "not a valid number");
    return v;
  }

  template <typename T>
  T required_number(const std::string& key) {
    auto v = number<T>(key);
    if (!v) throw ConfigError("missing key '" + key + "' in [" + section_ + "]");
    return *v;
  }

  std::optional<bool> boolean(const std::string& key) {
    auto* e = s_.find(section_, key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0") return false;
    bad_value(*e, key, "expected true or false");
  }

  std::optional<std::vector<std::size_t>> index_list(const std::string& key) {
    auto* e = s_.find(section_, key);
    if (!e) return std::nullopt;
    try {
      return parse_index_list(e->value);
    } catch (const ConfigError& err) {
      bad_value(*e, key, err.what());
    }
  }

  // Converts a parse failure of an enum-like value into a located error.
  template <typename Fn>
  auto parsed(const std::string& key, Fn&& fn) -> std::optional<decltype(fn(std::string{}))> {
    auto* e = s_.find(section_, key);
    if (!e) return std::nullopt;
    try {
      return fn(e->value);
    } catch (const ContractError& err) {
      bad_value(*e, key, err.what());
    }
  }

 private:
  Sections& s_;
  std::string section_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::size_t> parse_index_list(std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : split(text, ',')) {
    if (item.empty()) throw ConfigError("empty list item");
    std::size_t step = 1;
    auto colon = item.find(':');
    if (colon != std::string_view::npos) {
      bool ok = false;
      step = to_number<std::size_t>(item.substr(colon + 1), &ok);
      if (!ok || step == 0) throw ConfigError("bad range step in '" + std::string(item) + "'");
      item = item.substr(0, colon);
    }
    const auto dash = item.find('-');
    bool ok_a = false, ok_b = true;
    const auto a = to_number<std::size_t>(item.substr(0, dash), &ok_a);
    auto b = a;
    if (dash != std::string_view::npos) b = to_number<std::size_t>(item.substr(dash + 1), &ok_b);
    if (!ok_a || !ok_b || b < a) throw ConfigError("bad list item '" + std::string(item) + "'");
    for (auto v = a; v <= b; v += step) out.push_back(v);
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  Sections sections;
  std::string current;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      current = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known = {"dataset", "model", "train",
                                                  "eval",    "cleanse", "output"};
      if (!known.count(current)) {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + current +
                          "]");
      }
      sections.touch_section(current);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    if (current.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside of any section");
    }
    sections.add(current, std::string(trim(line.substr(0, eq))),
                 std::string(trim(line.substr(eq + 1))), line_no);
  }

  for (const char* required : {"dataset", "model", "train"}) {
    if (!sections.has_section(required)) {
      throw ConfigError(std::string("missing section [") + required + "]");
    }
  }

  ExperimentConfig cfg;
  cfg.text = std::string(text);

  // [dataset]
  {
    Reader r(sections, "dataset");
    auto& d = cfg.dataset;
    const auto source = r.required_str("source");
    if (source == "synthetic") {
      d.source = DataSource::synthetic;
      d.synthetic_dim = r.number<std::size_t>("synthetic_dim").value_or(10);
      if (d.synthetic_dim == 0) throw ConfigError("synthetic_dim must be positive");
    } else if (source == "idx") {
      d.source = DataSource::idx;
      d.images = resolve(base_dir, r.required_str("images"));
      d.labels = resolve(base_dir, r.required_str("labels"));
      if (auto digits = r.index_list("digits")) {
        if (digits->size() != 2 || (*digits)[0] == (*digits)[1]) {
          throw ConfigError("digits must name two distinct classes");
        }
        d.digit_negative = static_cast<int>((*digits)[0]);
        d.digit_positive = static_cast<int>((*digits)[1]);
      }
    } else if (source == "csv") {
      d.source = DataSource::csv;
      d.csv = resolve(base_dir, r.required_str("csv"));
      d.label_column = r.str("label_column").value_or("y");
    } else {
      throw ConfigError("unknown dataset source '" + source + "'");
    }
    d.n_train = r.required_number<std::size_t>("n_train");
    d.n_val = r.required_number<std::size_t>("n_val");
    d.n_test = r.number<std::size_t>("n_test").value_or(0);
    d.standardize = r.boolean("standardize").value_or(false);
    const auto noise = r.str("noise").value_or("none");
    if (noise == "none") {
      d.noise.reset();
    } else if (noise == "feature_gaussian") {
      d.noise = NoiseKind::feature_gaussian;
      d.noise_sigma = r.required_number<double>("noise_sigma");
      if (!(d.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be nonnegative");
    } else if (noise == "label_flip") {
      d.noise = NoiseKind::label_flip;
      d.noise_rho = r.required_number<double>("noise_rho");
      if (!(d.noise_rho >= 0.0 && d.noise_rho <= 1.0)) {
        throw ConfigError("noise_rho must lie in [0,1]");
      }
    } else {
      throw ConfigError("unknown noise kind '" + noise + "'");
    }
    if (d.n_train == 0) throw ConfigError("n_train must be positive");
    if (d.n_val == 0) throw ConfigError("n_val must be positive");
  }

  // [model]
  {
    Reader r(sections, "model");
    auto& m = cfg.train.model;
    const auto kind = r.parsed("kind", [](const std::string& v) { return parse_model_kind(v); });
    if (!kind) throw ConfigError("missing key 'kind' in [model]");
    m.kind = *kind;
    m.hidden_dim = r.number<std::size_t>("hidden_dim").value_or(0);
    if (m.kind == ModelKind::mlp2 && m.hidden_dim == 0) {
      throw ConfigError("mlp2 requires hidden_dim >= 1");
    }
  }

  // [train]
  {
    Reader r(sections, "train");
    auto& t = cfg.train;
    t.epochs = r.required_number<std::size_t>("epochs");
    t.batch_size = r.required_number<std::size_t>("batch_size");
    t.lr.kind = r.parsed("lr_schedule", [](const std::string& v) { return parse_lr_kind(v); })
                    .value_or(LrKind::constant);
    t.lr.value = r.required_number<double>("lr");
    if (t.epochs == 0) throw ConfigError("epochs must be positive");
    if (t.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(t.lr.value >= 0.0)) throw ConfigError("lr must be nonnegative");
    if (t.batch_size > cfg.dataset.n_train || cfg.dataset.n_train % t.batch_size != 0) {
      throw ConfigError("batch_size must divide n_train (" + std::to_string(cfg.dataset.n_train) +
                        ")");
    }
  }

  // [eval]
  {
    Reader r(sections, "eval");
    auto& e = cfg.eval;
    if (auto seeds = r.index_list("seeds")) {
      e.seeds.assign(seeds->begin(), seeds->end());
    }
    if (e.seeds.empty()) throw ConfigError("seeds must be nonempty");
    e.record_epochs = r.index_list("record_epochs").value_or(std::vector<std::size_t>{});
    if (e.record_epochs.empty()) e.record_epochs = {cfg.train.epochs};
    std::sort(e.record_epochs.begin(), e.record_epochs.end());
    e.record_epochs.erase(std::unique(e.record_epochs.begin(), e.record_epochs.end()),
                          e.record_epochs.end());
    for (auto ep : e.record_epochs) {
      if (ep == 0 || ep > cfg.train.epochs) {
        throw ConfigError("record_epochs must lie in 1.." + std::to_string(cfg.train.epochs));
      }
    }
    if (auto track = r.str("track_samples"); track && *track != "all") {
      bool ok = false;
      const auto k = to_number<std::size_t>(*track, &ok);
      if (!ok || k == 0) throw ConfigError("track_samples must be 'all' or a positive count");
      e.track_samples = k;
    }
    const auto rank = r.str("jaccard_rank").value_or("absolute");
    if (rank == "absolute") {
      e.rank_by = RankBy::absolute;
    } else if (rank == "signed") {
      e.rank_by = RankBy::signed_value;
    } else {
      throw ConfigError("jaccard_rank must be 'absolute' or 'signed'");
    }
  }

  // [cleanse]
  if (sections.has_section("cleanse")) {
    Reader r(sections, "cleanse");
    auto& c = cfg.cleanse;
    c.present = true;
    c.m_values = r.index_list("m").value_or(std::vector<std::size_t>{});
    if (c.m_values.empty()) throw ConfigError("[cleanse] needs a nonempty m list");
    c.window = r.parsed("window", [](const std::string& v) { return parse_influence_window(v); })
                   .value_or(InfluenceWindow::final_step);
    for (auto m : c.m_values) {
      if (m >= cfg.dataset.n_train) throw ConfigError("cleanse m must be smaller than n_train");
    }
    if (cfg.dataset.n_test == 0) throw ConfigError("cleansing needs n_test > 0");
  }

  // [output]
  {
    Reader r(sections, "output");
    cfg.output_dir = resolve(base_dir, r.str("dir").value_or("out"));
  }

  sections.reject_unused();

  if (cfg.dataset.source == DataSource::idx) {
    for (const auto& p : {cfg.dataset.images, cfg.dataset.labels}) {
      if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p.string());
    }
  }
  if (cfg.dataset.source == DataSource::csv && !std::filesystem::exists(cfg.dataset.csv)) {
    throw ConfigError("file not found: " + cfg.dataset.csv.string());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace accinf
