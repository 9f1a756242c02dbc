#pragma once

// Reverse-mode gradients of model rollouts. Implicit Runge-Kutta stages are
// differentiated through the root form F(g; x, theta) = g - f(x + h A g) = 0
// via the implicit function theorem; explicit stages take the same path
// (their IFT matrix is unit lower triangular).

#include <functional>

#include "gpdyn/models.hpp"

namespace gpdyn {

class IftSingular : public NumericalError {
 public:
  IftSingular(double rcond, int step_index = -1);
  double rcond;
  int step_index;
};

struct StageSensitivities {
  Mat d_stages_d_x;      // s*d x d
  Mat d_stages_d_theta;  // s*d x |theta|
  double rcond = 0.0;    // reciprocal condition estimate of the IFT matrix
};

/// dg*/dx_n and dg*/dtheta at a converged stage vector.
StageSensitivities ift_stage_sensitivities(const ParametricField& field, const ButcherTableau& tableau,
                                           const Vec& x, double h, const Vec& stages);

/// Reverse step through x_{n+1} = x_n + h sum_j b_j g_j. Parameter cotangents
/// accumulate into `adj`; returns x_bar_n. `rcond` receives the reciprocal
/// condition estimate of the IFT matrix when non-null.
Vec rk_step_pullback(const Stepper& stepper, const ParametricField& field, const Vec& x, const Vec& stages,
                     const Vec& x_bar_next, FieldAdjoint& adj, double* rcond = nullptr);

/// Reverse step of a model step (symplectic Euler or Runge-Kutta).
Vec model_step_pullback(const SampledModel& model, const Vec& x, const Vec& stages, const Vec& x_bar_next,
                        FieldAdjoint& adj, double* rcond = nullptr);

/// Per-state loss: returns l_k(x_k) and writes dl_k/dx_k into `grad`.
using LossTerms = std::function<double(int k, const Vec& x, Eigen::Ref<Vec> grad)>;

struct GradientReport {
  double loss = 0.0;
  Vec gradient;                  // model parameter layout
  Vec initial_state_gradient;    // dL/dx_0
  std::vector<double> ift_rcond; // per step, Runge-Kutta schemes only
  Trajectory trajectory;
};

/// Rolls the frozen draw forward n_steps from x0, sums loss_terms over
/// k = 0..n_steps, and back-propagates through time.
GradientReport rollout_gradient(const SampledModel& model, const Vec& x0, int n_steps, const LossTerms& loss_terms);

struct GradientCheckEntry {
  Eigen::Index coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool ok = true;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_rel_err = 0.0;
  bool ok() const;
};

/// Loss with optional analytic gradient output.
using DifferentiableLoss = std::function<double(const Vec& theta, Vec* grad)>;

/// Central differences at the chosen coordinates, with
/// rel_err = |a - n| / (max(|a|, |n|) + floor), floor = 1e-6 * ||analytic||_inf.
GradientCheckReport check_gradient(const DifferentiableLoss& loss, const Vec& theta,
                                   const std::vector<Eigen::Index>& coords, double eps = 1e-6,
                                   double threshold = 1e-3);

}  // namespace gpdyn
