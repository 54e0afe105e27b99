#include "accinf/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "accinf/errors.hpp"
#include "accinf/rng.hpp"

namespace accinf {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (bytes.size() < offset + 4) {
    throw ParseError(std::string("truncated ") + what + " header at offset " +
                     std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (read_be32(images, 0, "image") != kIdxImageMagic) {
    throw ParseError("bad magic at offset 0 (images)");
  }
  if (read_be32(labels, 0, "label") != kIdxLabelMagic) {
    throw ParseError("bad magic at offset 0 (labels)");
  }
  const std::size_t count = read_be32(images, 4, "image");
  const std::size_t rows = read_be32(images, 8, "image");
  const std::size_t cols = read_be32(images, 12, "image");
  const std::size_t label_count = read_be32(labels, 4, "label");
  if (label_count != count) {
    throw ParseError("count mismatch at offset 4: " + std::to_string(count) + " images vs " +
                     std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  constexpr std::size_t kImageHeader = 16;
  constexpr std::size_t kLabelHeader = 8;
  if (images.size() < kImageHeader + count * pixels) {
    throw ParseError("truncated image payload at offset " + std::to_string(images.size()));
  }
  if (labels.size() < kLabelHeader + count) {
    throw ParseError("truncated label payload at offset " + std::to_string(labels.size()));
  }

  Dataset out;
  out.d = pixels;
  out.name = "idx";
  out.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.index = i;
    s.y = labels[kLabelHeader + i];
    s.x.resize(pixels);
    const auto* px = images.data() + kImageHeader + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) s.x[j] = static_cast<double>(px[j]) / 255.0;
    out.samples.push_back(std::move(s));
  }
  return out;
}

IdxBytes serialize_idx(const Dataset& data, std::uint32_t rows, std::uint32_t cols) {
  if (static_cast<std::size_t>(rows) * cols != data.d) {
    throw ContractError("serialize_idx: rows*cols does not match feature dimension");
  }
  IdxBytes out;
  write_be32(out.images, kIdxImageMagic);
  write_be32(out.images, static_cast<std::uint32_t>(data.size()));
  write_be32(out.images, rows);
  write_be32(out.images, cols);
  write_be32(out.labels, kIdxLabelMagic);
  write_be32(out.labels, static_cast<std::uint32_t>(data.size()));
  for (const auto& s : data.samples) {
    for (double v : s.x) {
      const double scaled = std::round(v * 255.0);
      if (scaled < 0.0 || scaled > 255.0) {
        throw ContractError("serialize_idx: feature outside [0,1]");
      }
      out.images.push_back(static_cast<std::uint8_t>(scaled));
    }
    if (s.y < 0 || s.y > 255) throw ContractError("serialize_idx: label outside byte range");
    out.labels.push_back(static_cast<std::uint8_t>(s.y));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset select_binary_digits(const Dataset& data, int negative, int positive) {
  Dataset out;
  out.d = data.d;
  out.name = data.name + "{" + std::to_string(negative) + "," + std::to_string(positive) + "}";
  for (const auto& s : data.samples) {
    if (s.y != negative && s.y != positive) continue;
    Sample t = s;
    t.y = s.y == positive ? 1 : 0;
    t.index = out.samples.size();
    out.samples.push_back(std::move(t));
  }
  return out;
}

Dataset load_csv_numeric(std::string_view text, std::string_view label_column) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError("line 1: missing CSV header");

  const auto header = split_commas(lines[0]);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw ParseError("line 1: label column '" + std::string(label_column) + "' not in header");
  }
  const auto label_pos = static_cast<std::size_t>(label_it - header.begin());

  Dataset out;
  out.d = header.size() - 1;
  out.name = "csv";
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_commas(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns, found " +
                       std::to_string(cells.size()));
    }
    Sample s;
    s.index = out.samples.size();
    s.x.reserve(out.d);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double value = 0.0;
      const auto cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() ||
          !std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                         std::string(cell) + "' in column '" + std::string(header[c]) + "'");
      }
      if (c == label_pos) {
        if (value != 0.0 && value != 1.0) {
          throw ParseError("line " + std::to_string(line_no) + ": label value '" +
                           std::string(cell) + "' is not 0 or 1");
        }
        s.y = static_cast<int>(value);
      } else {
        s.x.push_back(value);
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

Dataset make_synthetic(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n % 2 != 0) throw ContractError("make_synthetic: n must be even");
  if (d == 0) throw ContractError("make_synthetic: d must be positive");
  Rng rng(seed);
  const double mu = 1.0 / std::sqrt(static_cast<double>(d));
  Dataset out;
  out.d = d;
  out.name = "synthetic";
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.index = i;
    s.y = static_cast<int>(i % 2);
    const double center = s.y == 1 ? mu : -mu;
    s.x.resize(d);
    for (auto& v : s.x) v = center + rng.normal();
    out.samples.push_back(std::move(s));
  }
  return out;
}

Dataset take(const Dataset& data, std::span<const std::size_t> positions) {
  Dataset out;
  out.d = data.d;
  out.name = data.name;
  out.noise_record = data.noise_record;
  out.samples.reserve(positions.size());
  std::vector<std::size_t> new_pos(data.size(), data.size());
  for (auto p : positions) {
    if (p >= data.size()) throw ContractError("take: position out of range");
    Sample s = data[p];
    new_pos[p] = out.samples.size();
    s.index = out.samples.size();
    out.samples.push_back(std::move(s));
  }
  for (auto f : data.flipped) {
    if (new_pos[f] != data.size()) out.flipped.push_back(new_pos[f]);
  }
  std::sort(out.flipped.begin(), out.flipped.end());
  return out;
}

std::pair<Dataset, Dataset> subsample(const Dataset& data, std::size_t n_train, std::size_t n_val,
                                      std::uint64_t seed) {
  if (n_train + n_val > data.size()) {
    throw ContractError("subsample: requested " + std::to_string(n_train + n_val) +
                        " samples from a dataset of " + std::to_string(data.size()));
  }
  Rng rng(seed);
  const auto perm = rng.permutation(data.size());
  const std::span<const std::size_t> all(perm);
  return {take(data, all.subspan(0, n_train)), take(data, all.subspan(n_train, n_val))};
}

Dataset standardize(const Dataset& data) {
  Dataset out = data;
  if (data.empty()) return out;
  const double n = static_cast<double>(data.size());
  for (std::size_t j = 0; j < data.d; ++j) {
    double mean = 0.0;
    for (const auto& s : data.samples) mean += s.x[j];
    mean /= n;
    double var = 0.0;
    for (const auto& s : data.samples) var += (s.x[j] - mean) * (s.x[j] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& s : out.samples) s.x[j] = sd > 0.0 ? (s.x[j] - mean) / sd : 0.0;
  }
  return out;
}

Dataset inject_noise(const Dataset& data, const NoiseSpec& spec) {
  Dataset out = data;
  out.noise_record = spec;
  Rng rng(spec.seed);
  switch (spec.kind) {
    case NoiseKind::feature_gaussian:
      if (!(spec.sigma >= 0.0)) throw ContractError("inject_noise: sigma must be nonnegative");
      if (spec.sigma == 0.0) return out;
      for (auto& s : out.samples) {
        for (auto& v : s.x) v += spec.sigma * rng.normal();
      }
      return out;
    case NoiseKind::label_flip: {
      if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) {
        throw ContractError("inject_noise: rho must lie in [0,1]");
      }
      const auto flips = static_cast<std::size_t>(
          std::floor(spec.rho * static_cast<double>(data.size())));
      auto perm = rng.permutation(data.size());
      perm.resize(flips);
      std::sort(perm.begin(), perm.end());
      for (auto idx : perm) out.samples[idx].y = 1 - out.samples[idx].y;
      // Flipping twice cancels; track the symmetric difference.
      std::vector<std::size_t> merged;
      std::set_symmetric_difference(data.flipped.begin(), data.flipped.end(), perm.begin(),
                                    perm.end(), std::back_inserter(merged));
      out.flipped = std::move(merged);
      return out;
    }
  }
  return out;
}

}  // namespace accinf
