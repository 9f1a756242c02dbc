#pragma once

// Rollout metrics: L2 error of the ensemble mean, one-step Jacobian
// determinants, energy statistics, quadratic-invariant drift and
// per-step uncertainty bands.

#include "gpdyn/models.hpp"

namespace gpdyn {

/// Rollouts of one model on a common time grid.
struct RolloutEnsemble {
  std::vector<Trajectory> rollouts;

  std::size_t count() const { return rollouts.size(); }
  /// Throws std::invalid_argument if empty or the grids differ.
  void validate() const;
  /// Pointwise mean over the rollouts (N x d).
  Mat mean() const;
};

struct L2Report {
  Vec series;    // ||X_i - X_bar_i|| per step
  double total = 0.0;  // sqrt(mean_i ||X_i - X_bar_i||^2)
};

L2Report l2_error(const RolloutEnsemble& ensemble, const Trajectory& truth);

/// det(d psi / dx) at every state of the trajectory.
Vec determinant_series(const std::function<Vec(const Vec&)>& step, const Trajectory& trajectory);

/// Same for a model draw; Runge-Kutta stages are re-solved cold at each
/// perturbed point.
Vec determinant_series(const SampledModel& model, const Trajectory& trajectory);

struct EnergyReport {
  Vec series;          // E_n: mean over rollouts of energy(X_n^i)
  double mean = 0.0;   // E_hat = mean over n of E_n
  double error = 0.0;  // |E - E_hat|
  double std = 0.0;    // sqrt(sum_n (E_n - E)^2 / (n - 1))
};

EnergyReport energy_stats(const RolloutEnsemble& ensemble, const std::function<double(const Vec&)>& energy,
                          double true_energy);

struct UncertaintyReport {
  Mat mean;  // N x d
  Mat std;   // N x d, (count - 1)-normalised
};

UncertaintyReport uncertainty_stats(const RolloutEnsemble& ensemble);

/// max_n |x_n^T x_n - radius_sq|.
double invariant_drift(const Trajectory& trajectory, double radius_sq = 1.0);

}  // namespace gpdyn
