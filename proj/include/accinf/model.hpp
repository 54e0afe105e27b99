#pragma once

// Model families with analytic losses, gradients and Hessian-vector products.
//
// Parameter layouts:
//   quadratic_regression, logistic_regression: theta in R^d, score = x . theta
//   mlp2: [W1 (hidden x d, row-major) | b1 (hidden) | w2 (hidden) | b2],
//         score = w2 . sigmoid(W1 x + b1) + b2
//
// Classifiers use binary cross-entropy on sigmoid(score); regression uses
// 0.5 * (score - y)^2.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/linalg.hpp"
#include "accinf/rng.hpp"

namespace accinf {

enum class ModelKind { quadratic_regression, logistic_regression, mlp2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;  // mlp2 only

  std::size_t param_dim() const;
  bool is_classifier() const { return kind != ModelKind::quadratic_regression; }
  void validate() const;
};

double sigmoid(double t);

/// Raw model output (regression value or classifier logit).
double score(const ModelSpec& spec, std::span<const double> theta, const Sample& z);

double loss(const ModelSpec& spec, std::span<const double> theta, const Sample& z);
double dataset_loss(const ModelSpec& spec, std::span<const double> theta, const Dataset& data);

ParamVector grad(const ModelSpec& spec, std::span<const double> theta, const Sample& z);
/// out += scale * grad(theta, z)
void accumulate_grad(const ModelSpec& spec, std::span<const double> theta, const Sample& z,
                     double scale, std::span<double> out);
/// Mean gradient over a dataset.
ParamVector dataset_grad(const ModelSpec& spec, std::span<const double> theta,
                         const Dataset& data);

/// Per-sample Hessian H(z, theta) captured at a fixed theta, applied lazily.
class SampleCurvature {
 public:
  SampleCurvature(const ModelSpec& spec, std::span<const double> theta, const Sample& z);

  /// out += scale * H v
  void apply(std::span<const double> v, double scale, std::span<double> out) const;

 private:
  const ModelSpec* spec_;
  std::span<const double> theta_;
  const Sample* z_;
  // logistic / quadratic: d2L/dscore2
  double curvature_ = 0.0;
  // mlp2 forward quantities
  double residual_ = 0.0;  // p - y
  std::vector<double> act_, dact_, ddact_;
};

/// Mean Hessian over a mini-batch, H(Z, theta) = (1/|Z|) sum_z H(z, theta).
class BatchCurvature {
 public:
  BatchCurvature(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                 std::span<const std::size_t> batch);
  BatchCurvature(const ModelSpec& spec, std::span<const double> theta,
                 std::span<const Sample> batch);

  ParamVector apply(std::span<const double> v) const;
  const SampleCurvature& member(std::size_t pos) const { return members_[pos]; }
  std::size_t size() const { return members_.size(); }

 private:
  std::size_t dim_;
  std::vector<SampleCurvature> members_;
};

ParamVector hvp_sample(const ModelSpec& spec, std::span<const double> theta, const Sample& z,
                       std::span<const double> v);
ParamVector hvp_batch(const ModelSpec& spec, std::span<const double> theta,
                      std::span<const Sample> batch, std::span<const double> v);

/// Fraction of samples whose thresholded prediction (score >= 0 -> class 1)
/// disagrees with the label. Classifiers only.
double predict_misclassified(const ModelSpec& spec, std::span<const double> theta,
                             const Dataset& data);

/// Zeros for linear models; uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for mlp2.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

}  // namespace accinf
