#include "accinf/influence.hpp"

#include <algorithm>
#include <string>

#include "accinf/errors.hpp"
#include "accinf/model.hpp"
#include "accinf/parallel.hpp"

namespace accinf {

std::string_view to_string(Estimator e) {
  return e == Estimator::sgd_ie ? "sgd_ie" : "acc_sgd_ie";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "sgd_ie") return Estimator::sgd_ie;
  if (name == "acc_sgd_ie") return Estimator::acc_sgd_ie;
  throw ContractError("unknown estimator '" + std::string(name) + "'");
}

namespace {

// Everything one step of either recursion needs, built once per step and
// shared across tracked samples.
struct StepOperator {
  const ModelSpec& spec;
  const Dataset& data;
  std::span<const double> theta;
  std::span<const std::size_t> batch;
  double lr;
  double batch_size;
  BatchCurvature curvature;

  StepOperator(const Trajectory& traj, const Dataset& data, std::size_t step)
      : spec(traj.config.model),
        data(data),
        theta(traj.thetas[step]),
        batch(traj.schedule.batches[step]),
        lr(traj.lrs[step]),
        batch_size(static_cast<double>(traj.schedule.batches[step].size())),
        curvature(traj.config.model, traj.thetas[step], data, traj.schedule.batches[step]) {}

  std::optional<std::size_t> position_of(std::size_t k) const {
    const auto it = std::find(batch.begin(), batch.end(), k);
    if (it == batch.end()) return std::nullopt;
    return static_cast<std::size_t>(it - batch.begin());
  }
};

void transition(const StepOperator& op, Estimator estimator, std::optional<std::size_t> pos,
                ParamVector& v, HvpLedger& ledger) {
  ParamVector hv = op.curvature.apply(v);
  ++ledger.batch_hvps;
  if (estimator == Estimator::acc_sgd_ie && pos) {
    // The counterfactual batch lacks z_k, so its curvature is removed from
    // the mean Hessian: H(Z) - H(z_k)/|Z|.
    ParamVector hk(v.size(), 0.0);
    op.curvature.member(*pos).apply(v, 1.0, hk);
    ++ledger.sample_hvps;
    for (std::size_t i = 0; i < hv.size(); ++i) hv[i] -= hk[i] / op.batch_size;
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= op.lr * hv[i];
}

void inject(const StepOperator& op, std::size_t k, ParamVector& v) {
  accumulate_grad(op.spec, op.theta, op.data[k], op.lr / op.batch_size, v);
}

void advance(const StepOperator& op, Estimator estimator, std::size_t k,
             std::optional<std::size_t> pos, ParamVector& v, bool& active, HvpLedger& ledger) {
  if (active) transition(op, estimator, pos, v, ledger);
  if (pos) {
    inject(op, k, v);
    active = true;
  }
}

void check_step(const Trajectory& traj, std::size_t step) {
  if (step >= traj.steps()) {
    throw ContractError("step " + std::to_string(step) + " out of range (N=" +
                        std::to_string(traj.steps()) + ")");
  }
}

void check_sample_index(const Trajectory& traj, const Dataset& data, std::size_t k) {
  if (k >= data.size() || k >= traj.schedule.n) {
    throw ContractError("sample " + std::to_string(k) + " out of range");
  }
}

}  // namespace

ParamVector apply_U(const Trajectory& traj, const Dataset& data, std::size_t step,
                    std::span<const double> v, HvpLedger& ledger) {
  check_step(traj, step);
  const StepOperator op(traj, data, step);
  ParamVector out(v.begin(), v.end());
  transition(op, Estimator::sgd_ie, std::nullopt, out, ledger);
  return out;
}

ParamVector apply_V(const Trajectory& traj, const Dataset& data, std::size_t step, std::size_t k,
                    std::span<const double> v, HvpLedger& ledger) {
  check_step(traj, step);
  check_sample_index(traj, data, k);
  const StepOperator op(traj, data, step);
  ParamVector out(v.begin(), v.end());
  transition(op, Estimator::acc_sgd_ie, op.position_of(k), out, ledger);
  return out;
}

InfluenceState estimate(const Trajectory& traj, const Dataset& data, std::size_t k,
                        std::size_t upto, Estimator estimator, HvpLedger* ledger) {
  check_sample_index(traj, data, k);
  if (upto > traj.steps()) throw ContractError("upto exceeds the number of steps");
  HvpLedger local;
  InfluenceState state{k, ParamVector(traj.config.model.param_dim(), 0.0), estimator, upto};
  bool active = false;
  for (std::size_t j = 0; j < upto; ++j) {
    const bool member = traj.schedule.contains(j, k);
    if (!active && !member) continue;
    const StepOperator op(traj, data, j);
    advance(op, estimator, k, op.position_of(k), state.v, active, local);
  }
  if (ledger) *ledger += local;
  return state;
}

InfluenceState estimate_sgd_ie(const Trajectory& traj, const Dataset& data, std::size_t k,
                               std::size_t upto, HvpLedger* ledger) {
  return estimate(traj, data, k, upto, Estimator::sgd_ie, ledger);
}

InfluenceState estimate_acc_sgd_ie(const Trajectory& traj, const Dataset& data, std::size_t k,
                                   std::size_t upto, HvpLedger* ledger) {
  return estimate(traj, data, k, upto, Estimator::acc_sgd_ie, ledger);
}

std::vector<ParamVector> trace_estimates(const Trajectory& traj, const Dataset& data,
                                         std::size_t k, Estimator estimator) {
  check_sample_index(traj, data, k);
  HvpLedger ledger;
  ParamVector v(traj.config.model.param_dim(), 0.0);
  std::vector<ParamVector> trace;
  trace.reserve(traj.steps() + 1);
  trace.push_back(v);
  bool active = false;
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    if (active || traj.schedule.contains(j, k)) {
      const StepOperator op(traj, data, j);
      advance(op, estimator, k, op.position_of(k), v, active, ledger);
    }
    trace.push_back(v);
  }
  return trace;
}

SnapshotEstimates estimate_snapshots(const Trajectory& traj, const Dataset& data,
                                     Estimator estimator, std::span<const std::size_t> checkpoints,
                                     const SweepOptions& options) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw ContractError("snapshot checkpoints must be ascending");
  }
  if (!checkpoints.empty() && checkpoints.back() > traj.steps()) {
    throw ContractError("snapshot checkpoint exceeds the number of steps");
  }
  std::vector<std::size_t> tracked = options.tracked;
  if (tracked.empty()) {
    tracked.resize(data.size());
    for (std::size_t k = 0; k < tracked.size(); ++k) tracked[k] = k;
  }
  for (auto k : tracked) check_sample_index(traj, data, k);

  SnapshotEstimates result;
  result.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  result.snapshots.assign(checkpoints.size(), std::vector<InfluenceState>(tracked.size()));
  const std::size_t last = checkpoints.empty() ? 0 : checkpoints.back();
  const std::size_t dim = traj.config.model.param_dim();
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<HvpLedger> ledgers(workers);

  parallel_chunks(tracked.size(), workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    const std::size_t count = end - begin;
    std::vector<ParamVector> states(count, ParamVector(dim, 0.0));
    std::vector<char> active(count, 0);
    // position of each dataset sample inside the current batch, or -1
    std::vector<std::ptrdiff_t> slot(data.size(), -1);
    std::size_t next_cp = 0;
    auto record = [&](std::size_t checkpoint) {
      while (next_cp < checkpoints.size() && checkpoints[next_cp] == checkpoint) {
        for (std::size_t t = 0; t < count; ++t) {
          result.snapshots[next_cp][begin + t] =
              InfluenceState{tracked[begin + t], states[t], estimator, checkpoint};
        }
        ++next_cp;
      }
    };
    for (std::size_t j = 0; j < last; ++j) {
      record(j);
      const auto& batch = traj.schedule.batches[j];
      for (std::size_t p = 0; p < batch.size(); ++p) slot[batch[p]] = static_cast<std::ptrdiff_t>(p);
      const StepOperator op(traj, data, j);
      for (std::size_t t = 0; t < count; ++t) {
        const std::size_t k = tracked[begin + t];
        const auto s = slot[k];
        const auto pos = s >= 0 ? std::optional<std::size_t>(static_cast<std::size_t>(s))
                                : std::nullopt;
        if (!active[t] && !pos) continue;
        bool is_active = active[t] != 0;
        advance(op, estimator, k, pos, states[t], is_active, ledgers[w]);
        active[t] = is_active ? 1 : 0;
      }
      for (auto idx : batch) slot[idx] = -1;
    }
    record(last);
  });

  for (const auto& l : ledgers) result.ledger += l;
  return result;
}

AllEstimates estimate_all(const Trajectory& traj, const Dataset& data, Estimator estimator,
                          std::size_t upto, const SweepOptions& options) {
  if (upto > traj.steps()) throw ContractError("upto exceeds the number of steps");
  const std::size_t cp[] = {upto};
  auto snaps = estimate_snapshots(traj, data, estimator, cp, options);
  return {std::move(snaps.snapshots.front()), snaps.ledger};
}

ErrorSeries error_recursion_probe(const Trajectory& traj, const Trajectory& counterfactual,
                                  const Dataset& data, std::size_t k) {
  if (!counterfactual.excluded || *counterfactual.excluded != k) {
    throw ContractError("missing counterfactual run for sample " + std::to_string(k));
  }
  require_paired(traj, counterfactual);
  const auto sgd = trace_estimates(traj, data, k, Estimator::sgd_ie);
  const auto acc = trace_estimates(traj, data, k, Estimator::acc_sgd_ie);
  ErrorSeries series;
  for (std::size_t i = 0; i < traj.thetas.size(); ++i) {
    const auto truth = subtract(counterfactual.thetas[i], traj.thetas[i]);
    series.sgd_ie.push_back(norm2(subtract(truth, sgd[i])));
    series.acc_sgd_ie.push_back(norm2(subtract(truth, acc[i])));
  }
  return series;
}

}  // namespace accinf
