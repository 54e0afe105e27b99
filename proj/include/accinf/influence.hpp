#pragma once

// SGD-IE and ACC-SGD-IE as forward recursions over a stored trajectory.
//
// For a tracked sample k, the state v estimates theta_k - theta at each
// checkpoint. At step j:
//   SGD-IE:      v <- U_j v,             U_j   = I - a_j H(Z_j, theta_j)
//   ACC-SGD-IE:  v <- V_j v,             V_j   = U_j + [k in Z_j] (a_j/|Z_j|) H(z_k, theta_j)
// and, when k is in Z_j, the injection v += (a_j/|Z_j|) g(z_k, theta_j) is
// added after the transition. Before the first occurrence the state is zero
// and no transition is applied.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "accinf/dataset.hpp"
#include "accinf/linalg.hpp"
#include "accinf/sgd.hpp"

namespace accinf {

enum class Estimator { sgd_ie, acc_sgd_ie };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);
inline constexpr Estimator kEstimators[] = {Estimator::sgd_ie, Estimator::acc_sgd_ie};

struct HvpLedger {
  std::uint64_t batch_hvps = 0;
  std::uint64_t sample_hvps = 0;

  HvpLedger& operator+=(const HvpLedger& other) {
    batch_hvps += other.batch_hvps;
    sample_hvps += other.sample_hvps;
    return *this;
  }
  bool operator==(const HvpLedger&) const = default;
};

struct InfluenceState {
  std::size_t k = 0;
  ParamVector v;
  Estimator estimator = Estimator::sgd_ie;
  std::size_t step = 0;  // checkpoint the estimate refers to
};

/// v - a_i H(Z_i, theta_i) v.
ParamVector apply_U(const Trajectory& traj, const Dataset& data, std::size_t step,
                    std::span<const double> v, HvpLedger& ledger);
/// apply_U plus, when k is in Z_i, (a_i/|Z_i|) H(z_k, theta_i) v.
ParamVector apply_V(const Trajectory& traj, const Dataset& data, std::size_t step, std::size_t k,
                    std::span<const double> v, HvpLedger& ledger);

InfluenceState estimate(const Trajectory& traj, const Dataset& data, std::size_t k,
                        std::size_t upto, Estimator estimator, HvpLedger* ledger = nullptr);
InfluenceState estimate_sgd_ie(const Trajectory& traj, const Dataset& data, std::size_t k,
                               std::size_t upto, HvpLedger* ledger = nullptr);
InfluenceState estimate_acc_sgd_ie(const Trajectory& traj, const Dataset& data, std::size_t k,
                                   std::size_t upto, HvpLedger* ledger = nullptr);

/// Estimates at every checkpoint 0..N for one sample.
std::vector<ParamVector> trace_estimates(const Trajectory& traj, const Dataset& data,
                                         std::size_t k, Estimator estimator);

struct SweepOptions {
  // Samples to track, in output order; all samples when empty.
  std::vector<std::size_t> tracked;
  std::size_t workers = 1;
};

struct SnapshotEstimates {
  std::vector<std::size_t> checkpoints;
  // snapshots[c][t]: state of tracked sample t at checkpoints[c].
  std::vector<std::vector<InfluenceState>> snapshots;
  HvpLedger ledger;
};

/// One sweep over the trajectory for all tracked samples, recording their
/// states at each requested checkpoint (ascending, each <= N).
SnapshotEstimates estimate_snapshots(const Trajectory& traj, const Dataset& data,
                                     Estimator estimator, std::span<const std::size_t> checkpoints,
                                     const SweepOptions& options = {});

struct AllEstimates {
  std::vector<InfluenceState> states;
  HvpLedger ledger;
};

AllEstimates estimate_all(const Trajectory& traj, const Dataset& data, Estimator estimator,
                          std::size_t upto, const SweepOptions& options = {});

struct ErrorSeries {
  std::vector<double> sgd_ie;      // ||true - SGD-IE|| per checkpoint
  std::vector<double> acc_sgd_ie;  // ||true - ACC-SGD-IE|| per checkpoint
};

ErrorSeries error_recursion_probe(const Trajectory& traj, const Trajectory& counterfactual,
                                  const Dataset& data, std::size_t k);

}  // namespace accinf
