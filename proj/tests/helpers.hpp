#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/linalg.hpp"
#include "accinf/model.hpp"
#include "accinf/rng.hpp"
#include "accinf/sgd.hpp"

namespace testing {

using accinf::Dataset;
using accinf::ParamVector;
using accinf::Sample;

inline Sample make_sample(std::vector<double> x, int y, std::size_t index = 0) {
  Sample s;
  s.x = std::move(x);
  s.y = y;
  s.index = index;
  return s;
}

inline Dataset make_dataset(std::vector<Sample> samples) {
  Dataset d;
  d.d = samples.empty() ? 0 : samples.front().x.size();
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].index = i;
  d.samples = std::move(samples);
  return d;
}

/// Gaussian features, labels from a random linear rule (with some overlap).
inline Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                              double scale = 1.0) {
  accinf::Rng rng(seed);
  std::vector<double> w(d);
  for (auto& v : w) v = rng.normal();
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = scale * rng.normal();
      s += x[j] * w[j];
    }
    out.push_back(make_sample(std::move(x), s + 0.5 * rng.normal() > 0 ? 1 : 0));
  }
  return make_dataset(std::move(out));
}

inline ParamVector random_vector(std::size_t p, accinf::Rng& rng, double scale = 1.0) {
  ParamVector v(p);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix identity(std::size_t p) {
  Matrix m(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i) m[i][i] = 1.0;
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t p = a.size();
  Matrix c(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < p; ++k)
      for (std::size_t j = 0; j < p; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline ParamVector matvec(const Matrix& a, std::span<const double> v) {
  ParamVector out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += a[i][j] * v[j];
  return out;
}

/// Closed-form per-sample Hessian of the linear models: c(x) x x^T with
/// c = 1 (quadratic) or sigma(s)(1 - sigma(s)) (logistic).
inline Matrix linear_hessian(const accinf::ModelSpec& spec, std::span<const double> theta,
                             const Sample& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.x.size(); ++i) s += z.x[i] * theta[i];
  double c = 1.0;
  if (spec.kind == accinf::ModelKind::logistic_regression) {
    const double p = 1.0 / (1.0 + std::exp(-s));
    c = p * (1.0 - p);
  }
  const std::size_t d = z.x.size();
  Matrix h(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) h[i][j] = c * z.x[i] * z.x[j];
  return h;
}

/// Closed-form per-sample gradient of the linear models.
inline ParamVector linear_grad(const accinf::ModelSpec& spec, std::span<const double> theta,
                               const Sample& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.x.size(); ++i) s += z.x[i] * theta[i];
  const double r = spec.kind == accinf::ModelKind::logistic_regression
                       ? 1.0 / (1.0 + std::exp(-s)) - z.y
                       : s - z.y;
  ParamVector g(z.x.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = r * z.x[i];
  return g;
}

inline accinf::TrainConfig train_config(accinf::ModelKind kind, std::size_t d, std::size_t epochs,
                                        std::size_t batch, double lr, std::uint64_t seed = 1,
                                        std::size_t hidden = 0) {
  accinf::TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.lr.value = lr;
  c.seed = seed;
  c.model.kind = kind;
  c.model.input_dim = d;
  c.model.hidden_dim = hidden;
  return c;
}

}  // namespace testing
