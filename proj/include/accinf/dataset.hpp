#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace accinf {

struct Sample {
  std::vector<double> x;
  int y = 0;  // {0,1}
  std::size_t index = 0;
};

enum class NoiseKind { feature_gaussian, label_flip };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::label_flip;
  double sigma = 0.0;  // feature_gaussian
  double rho = 0.0;    // label_flip
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t d = 0;
  std::string name;
  std::optional<NoiseSpec> noise_record;
  // Indices flipped by label noise, in ascending order (empty otherwise).
  std::vector<std::size_t> flipped;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  const Sample& operator[](std::size_t i) const { return samples[i]; }
};

}  // namespace accinf
