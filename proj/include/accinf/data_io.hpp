#pragma once

// Dataset construction: IDX/CSV ingestion, synthetic generators, splits,
// standardization and noise injection. Every function returns a new Dataset
// and leaves its inputs untouched.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "accinf/dataset.hpp"

namespace accinf {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parses an IDX image file and its label file. Pixels are scaled by 1/255
/// and flattened row-major; labels are passed through unchanged.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

struct IdxBytes {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

/// Inverse of parse_idx for datasets whose features are k/255 multiples.
IdxBytes serialize_idx(const Dataset& data, std::uint32_t rows, std::uint32_t cols);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Keeps only samples labelled `negative` or `positive` and relabels them 0/1.
Dataset select_binary_digits(const Dataset& data, int negative, int positive);

/// Numeric CSV with a header row. `label_column` names the {0,1} label
/// column; all other columns become features in header order.
Dataset load_csv_numeric(std::string_view text, std::string_view label_column);

/// Two unit-variance Gaussian clusters at -mu (label 0) and +mu (label 1),
/// mu = 1/sqrt(d) per coordinate, n/2 samples each, interleaved by label.
Dataset make_synthetic(std::size_t n, std::size_t d, std::uint64_t seed);

/// Disjoint seeded uniform subsets, renumbered 0..n-1 within each split.
std::pair<Dataset, Dataset> subsample(const Dataset& data, std::size_t n_train, std::size_t n_val,
                                      std::uint64_t seed);

/// Per-feature zero mean / unit std; zero-variance features become 0.
Dataset standardize(const Dataset& data);

/// feature_gaussian: x += N(0, sigma^2) per coordinate.
/// label_flip: exactly floor(rho * n) distinct seeded indices get y <- 1 - y.
Dataset inject_noise(const Dataset& data, const NoiseSpec& spec);

/// Subset by positions, renumbering indices 0..k-1 in the given order.
Dataset take(const Dataset& data, std::span<const std::size_t> positions);

}  // namespace accinf
