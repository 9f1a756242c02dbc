#pragma once

// Runge-Kutta stepping over arbitrary vector fields: Butcher tableaux,
// implicit stage solves by Levenberg-Marquardt, the partitioned symplectic
// Euler method, implicit midpoint for Hamiltonian fields and step-doubling
// adaptive integration.

#include <stdexcept>
#include <string>
#include <utility>

#include "gpdyn/field.hpp"
#include "gpdyn/trajectory.hpp"

namespace gpdyn {

struct ButcherTableau {
  std::string name;
  Mat stage_matrix;  // A, s x s
  Vec weights;       // b
  int order = 1;     // classical order p

  /// Validates the shape and consistency (sum b = 1).
  ButcherTableau(std::string name, Mat A, Vec b, int order);

  int stages() const { return static_cast<int>(weights.size()); }
  bool is_explicit() const;

  static ButcherTableau explicit_euler();
  static ButcherTableau heun();
  static ButcherTableau implicit_midpoint();
  static ButcherTableau radau_ia();
  static ButcherTableau from_name(const std::string& name);
};

struct SolverSettings {
  double residual_tolerance = 1e-10;
  int max_iterations = 100;
  double damping_init = 1e-3;
  bool warm_start = true;
  /// Use the least-squares solver even for explicit tableaux.
  bool force_iterative = false;

  void validate() const;
};

struct Stepper {
  ButcherTableau tableau;
  double step_size;
  SolverSettings solver;

  Stepper(ButcherTableau tableau, double step_size, SolverSettings solver = {});
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(double residual, int iterations, int step_index = -1);
  double residual;
  int iterations;
  int step_index;
};

class StepSizeUnderflow : public std::runtime_error {
 public:
  StepSizeUnderflow(double t, double h);
  double time;
  double step;
};

struct StageSolution {
  Vec stages;  // s*d, stage j in segment [j*d, (j+1)*d)
  double residual = 0.0;
  int iterations = 0;
};

/// Stage residual g_j - f(x + h sum_l a_jl g_l), stacked.
Vec stage_residual(const ButcherTableau& tableau, double h, const VectorField& field, const Vec& x,
                   const Vec& stages);

/// Stage abscissae u_j = x + h sum_l a_jl g_l, one per column.
Mat stage_points(const ButcherTableau& tableau, double h, const Vec& x, const Vec& stages);

/// Explicit tableaux: forward recursion. Implicit: Levenberg-Marquardt on the
/// stage residual, accepted once its infinity norm is below tolerance.
/// `initial` (s*d) warm-starts the iteration; otherwise every stage starts at f(x).
StageSolution solve_stages(const Stepper& stepper, const VectorField& field, const Vec& x,
                           const Vec* initial = nullptr);

Vec rk_step(const Stepper& stepper, const VectorField& field, const Vec& x,
            const Vec* initial = nullptr, StageSolution* solution = nullptr);

/// p' = p - h V'(q), q' = q + h T'(p').
std::pair<Vec, Vec> symplectic_euler_step(const std::function<Vec(const Vec&)>& v_prime,
                                          const std::function<Vec(const Vec&)>& t_prime,
                                          const Vec& p, const Vec& q, double h);

/// Field J^-1 grad H for x = (p, q): p' = -H_q, q' = H_p.
Vec hamiltonian_field(const Vec& grad_h);

/// Implicit midpoint x' = x + h J^-1 grad H((x + x') / 2).
Vec implicit_midpoint_hamiltonian_step(const std::function<Vec(const Vec&)>& grad_h, const Vec& x,
                                       double h, const SolverSettings& solver = {},
                                       const std::function<Mat(const Vec&)>& hess_h = {});

/// n_steps + 1 states on t_k = k h. NonConvergence carries the failing step.
Trajectory integrate(const Stepper& stepper, const VectorField& field, const Vec& x0, int n_steps);

struct AdaptiveOptions {
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double min_step = 1e-12;
  double initial_step = 0.0;  // <= 0: the whole span
  /// Advance with the Richardson-extrapolated value (order p + 1) instead of
  /// the two half steps; the error estimate is unchanged.
  bool local_extrapolation = false;
  SolverSettings solver;
};

/// Step doubling: one step of size h against two of size h/2; accepted when
/// every component satisfies err_i <= atol + rtol |x_i|. Returns the accepted
/// points (non-uniform grid).
Trajectory integrate_adaptive(const ButcherTableau& tableau, const VectorField& field, const Vec& x0,
                              double t0, double t1, double rtol, double atol,
                              const AdaptiveOptions& options = {});

/// Adaptive integration sampled on a prescribed increasing grid by
/// integrating gap by gap (the step size carries over between gaps).
Trajectory integrate_adaptive_on_grid(const ButcherTableau& tableau, const VectorField& field,
                                      const Vec& x0, const Vec& times, double rtol, double atol,
                                      const AdaptiveOptions& options = {});

/// d x_{n+1} / d x_n by fourth-order central differences, eps_i = 1e-4 (1 + |x_i|).
Mat step_jacobian(const Stepper& stepper, const VectorField& field, const Vec& x);

/// Same for an arbitrary one-step map.
Mat step_jacobian(const std::function<Vec(const Vec&)>& step, const Vec& x);

}  // namespace gpdyn
