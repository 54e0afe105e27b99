#include "accinf/model.hpp"

#include <algorithm>
#include <cmath>

namespace accinf {

namespace {

void check_sample(const ModelSpec& spec, std::span<const double> theta, const Sample& z) {
  require_same_dim(theta.size(), spec.param_dim(), "parameter vector");
  require_same_dim(z.x.size(), spec.input_dim, "sample features");
}

struct MlpView {
  std::size_t d, h;
  std::span<const double> w1, b1, w2;
  double b2;

  MlpView(const ModelSpec& spec, std::span<const double> theta)
      : d(spec.input_dim),
        h(spec.hidden_dim),
        w1(theta.subspan(0, h * d)),
        b1(theta.subspan(h * d, h)),
        w2(theta.subspan(h * d + h, h)),
        b2(theta[h * d + 2 * h]) {}

  // Hidden pre-activation for unit j.
  double pre(std::size_t j, std::span<const double> x) const {
    double a = b1[j];
    const double* row = w1.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) a += row[i] * x[i];
    return a;
  }
};

double bce_from_logit(double f, int y) {
  // log(1 + e^f) - y f, computed without overflow.
  return std::log1p(std::exp(-std::abs(f))) + std::max(f, 0.0) - static_cast<double>(y) * f;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::quadratic_regression: return "quadratic_regression";
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::mlp2: return "mlp2";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "quadratic_regression" || name == "quadratic") return ModelKind::quadratic_regression;
  if (name == "logistic_regression" || name == "logistic") return ModelKind::logistic_regression;
  if (name == "mlp2") return ModelKind::mlp2;
  throw ContractError("unknown model kind '" + std::string(name) + "'");
}

std::size_t ModelSpec::param_dim() const {
  if (kind == ModelKind::mlp2) return hidden_dim * (input_dim + 2) + 1;
  return input_dim;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ContractError("model input_dim must be positive");
  if (kind == ModelKind::mlp2 && hidden_dim == 0) {
    throw ContractError("mlp2 hidden_dim must be positive");
  }
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double score(const ModelSpec& spec, std::span<const double> theta, const Sample& z) {
  check_sample(spec, theta, z);
  if (spec.kind != ModelKind::mlp2) return dot(z.x, theta);
  const MlpView net(spec, theta);
  double f = net.b2;
  for (std::size_t j = 0; j < net.h; ++j) f += net.w2[j] * sigmoid(net.pre(j, z.x));
  return f;
}

double loss(const ModelSpec& spec, std::span<const double> theta, const Sample& z) {
  const double f = score(spec, theta, z);
  if (spec.kind == ModelKind::quadratic_regression) {
    const double r = f - static_cast<double>(z.y);
    return 0.5 * r * r;
  }
  return bce_from_logit(f, z.y);
}

double dataset_loss(const ModelSpec& spec, std::span<const double> theta, const Dataset& data) {
  if (data.empty()) throw ContractError("dataset_loss: empty dataset");
  double acc = 0.0;
  for (const auto& z : data.samples) acc += loss(spec, theta, z);
  return acc / static_cast<double>(data.size());
}

void accumulate_grad(const ModelSpec& spec, std::span<const double> theta, const Sample& z,
                     double scale, std::span<double> out) {
  check_sample(spec, theta, z);
  require_same_dim(out.size(), theta.size(), "gradient output");
  if (spec.kind != ModelKind::mlp2) {
    const double f = dot(z.x, theta);
    const double r = spec.kind == ModelKind::quadratic_regression
                         ? f - static_cast<double>(z.y)
                         : sigmoid(f) - static_cast<double>(z.y);
    axpy(scale * r, z.x, out);
    return;
  }
  const MlpView net(spec, theta);
  const std::size_t d = net.d, h = net.h;
  std::vector<double> act(h);
  double f = net.b2;
  for (std::size_t j = 0; j < h; ++j) {
    act[j] = sigmoid(net.pre(j, z.x));
    f += net.w2[j] * act[j];
  }
  const double r = scale * (sigmoid(f) - static_cast<double>(z.y));
  for (std::size_t j = 0; j < h; ++j) {
    const double delta = r * net.w2[j] * act[j] * (1.0 - act[j]);
    double* row = out.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) row[i] += delta * z.x[i];
    out[h * d + j] += delta;
    out[h * d + h + j] += r * act[j];
  }
  out[h * d + 2 * h] += r;
}

ParamVector grad(const ModelSpec& spec, std::span<const double> theta, const Sample& z) {
  ParamVector g(theta.size(), 0.0);
  accumulate_grad(spec, theta, z, 1.0, g);
  return g;
}

ParamVector dataset_grad(const ModelSpec& spec, std::span<const double> theta,
                         const Dataset& data) {
  if (data.empty()) throw ContractError("dataset_grad: empty dataset");
  ParamVector g(theta.size(), 0.0);
  for (const auto& z : data.samples) accumulate_grad(spec, theta, z, 1.0, g);
  const double n = static_cast<double>(data.size());
  for (auto& gi : g) gi /= n;
  return g;
}

SampleCurvature::SampleCurvature(const ModelSpec& spec, std::span<const double> theta,
                                 const Sample& z)
    : spec_(&spec), theta_(theta), z_(&z) {
  check_sample(spec, theta, z);
  switch (spec.kind) {
    case ModelKind::quadratic_regression:
      curvature_ = 1.0;
      return;
    case ModelKind::logistic_regression: {
      const double p = sigmoid(dot(z.x, theta));
      curvature_ = p * (1.0 - p);
      return;
    }
    case ModelKind::mlp2: break;
  }
  const MlpView net(spec, theta);
  act_.resize(net.h);
  dact_.resize(net.h);
  ddact_.resize(net.h);
  double f = net.b2;
  for (std::size_t j = 0; j < net.h; ++j) {
    const double s = sigmoid(net.pre(j, z.x));
    act_[j] = s;
    dact_[j] = s * (1.0 - s);
    ddact_[j] = dact_[j] * (1.0 - 2.0 * s);
    f += net.w2[j] * s;
  }
  const double p = sigmoid(f);
  residual_ = p - static_cast<double>(z.y);
  curvature_ = p * (1.0 - p);
}

void SampleCurvature::apply(std::span<const double> v, double scale,
                            std::span<double> out) const {
  require_same_dim(v.size(), theta_.size(), "hvp direction");
  require_same_dim(out.size(), theta_.size(), "hvp output");
  const auto& x = z_->x;
  if (spec_->kind != ModelKind::mlp2) {
    axpy(scale * curvature_ * dot(x, v), x, out);
    return;
  }
  // Directional derivative of the backpropagated gradient along v.
  const MlpView net(*spec_, theta_);
  const MlpView dir(*spec_, v);
  const std::size_t d = net.d, h = net.h;
  std::vector<double> r_pre(h);
  double r_score = dir.b2;
  for (std::size_t j = 0; j < h; ++j) {
    r_pre[j] = dir.pre(j, x);
    r_score += dir.w2[j] * act_[j] + net.w2[j] * dact_[j] * r_pre[j];
  }
  const double r_resid = curvature_ * r_score;
  for (std::size_t j = 0; j < h; ++j) {
    const double r_act = dact_[j] * r_pre[j];
    const double r_delta = r_resid * net.w2[j] * dact_[j] + residual_ * dir.w2[j] * dact_[j] +
                           residual_ * net.w2[j] * ddact_[j] * r_pre[j];
    const double sd = scale * r_delta;
    double* row = out.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) row[i] += sd * x[i];
    out[h * d + j] += sd;
    out[h * d + h + j] += scale * (r_resid * act_[j] + residual_ * r_act);
  }
  out[h * d + 2 * h] += scale * r_resid;
}

BatchCurvature::BatchCurvature(const ModelSpec& spec, std::span<const double> theta,
                               const Dataset& data, std::span<const std::size_t> batch)
    : dim_(theta.size()) {
  if (batch.empty()) throw ContractError("hvp_batch: empty batch");
  members_.reserve(batch.size());
  for (auto idx : batch) {
    if (idx >= data.size()) throw ContractError("hvp_batch: sample index out of range");
    members_.emplace_back(spec, theta, data[idx]);
  }
}

BatchCurvature::BatchCurvature(const ModelSpec& spec, std::span<const double> theta,
                               std::span<const Sample> batch)
    : dim_(theta.size()) {
  if (batch.empty()) throw ContractError("hvp_batch: empty batch");
  members_.reserve(batch.size());
  for (const auto& z : batch) members_.emplace_back(spec, theta, z);
}

ParamVector BatchCurvature::apply(std::span<const double> v) const {
  ParamVector out(dim_, 0.0);
  for (const auto& m : members_) m.apply(v, 1.0, out);
  const double count = static_cast<double>(members_.size());
  for (auto& o : out) o /= count;
  return out;
}

ParamVector hvp_sample(const ModelSpec& spec, std::span<const double> theta, const Sample& z,
                       std::span<const double> v) {
  ParamVector out(theta.size(), 0.0);
  SampleCurvature(spec, theta, z).apply(v, 1.0, out);
  return out;
}

ParamVector hvp_batch(const ModelSpec& spec, std::span<const double> theta,
                      std::span<const Sample> batch, std::span<const double> v) {
  return BatchCurvature(spec, theta, batch).apply(v);
}

double predict_misclassified(const ModelSpec& spec, std::span<const double> theta,
                             const Dataset& data) {
  if (!spec.is_classifier()) {
    throw ContractError("predict_misclassified: regression model has no class prediction");
  }
  if (data.empty()) throw ContractError("predict_misclassified: empty dataset");
  std::size_t wrong = 0;
  for (const auto& z : data.samples) {
    const int predicted = score(spec, theta, z) >= 0.0 ? 1 : 0;
    if (predicted != z.y) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector theta(spec.param_dim(), 0.0);
  if (spec.kind != ModelKind::mlp2) return theta;
  const std::size_t d = spec.input_dim, h = spec.hidden_dim;
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(d));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t i = 0; i < h * d + h; ++i) theta[i] = rng.uniform(-hidden_bound, hidden_bound);
  for (std::size_t i = h * d + h; i < theta.size(); ++i) {
    theta[i] = rng.uniform(-out_bound, out_bound);
  }
  return theta;
}

}  // namespace accinf
