#pragma once

// Ground-truth benchmark systems, their reference solutions, noisy
// observations and the default experiment configurations.

#include <functional>
#include <string>
#include <vector>

#include "gpdyn/models.hpp"
#include "gpdyn/train_config.hpp"

namespace gpdyn {

/// State layouts: pendulum (p, q); two_body (p1, p2, q1, q2) in the plane;
/// non_separable (p, q); rigid_body (x1, x2, x3).
struct SystemSpec {
  std::string name;
  int state_dim = 0;
  std::function<Vec(const Vec&)> field;
  std::function<Mat(const Vec&)> jacobian;
  std::function<double(const Vec&)> energy;
};

/// Throws std::invalid_argument for unknown names.
const SystemSpec& system_spec(const std::string& name);
std::vector<std::string> system_names();

/// The analytic field as a VectorField (with its analytic Jacobian).
FunctionField system_field(const SystemSpec& spec);

/// n_steps + 1 states on t_k = k dt, by adaptive Radau IA
/// (rtol 1e-10, atol 1e-12) integrated gap by gap.
Trajectory reference_trajectory(const SystemSpec& spec, const Vec& x0, double dt, int n_steps);

/// Adds N(0, variances_i) to every entry of column i and records the variances.
Trajectory add_noise(const Trajectory& traj, const Vec& variances, Rng& rng);

enum class Method { sgpd, euler, heun };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Inducing-input placement for one GP: a tensor grid (lower == upper pins a
/// dimension) or independent Gaussian draws per dimension.
struct InducingInit {
  enum class Kind { grid, gaussian };
  Kind kind = Kind::grid;
  Vec lower, upper;              // grid
  Eigen::VectorXi points;        // grid, per dimension
  Vec mean, stddev;              // gaussian
  int count = 0;                 // gaussian

  int inducing_count() const;
  int dim() const;
  Mat place(Rng& rng) const;

  static InducingInit grid(Vec lower, Vec upper, Eigen::VectorXi points);
  static InducingInit gaussian(Vec mean, Vec stddev, int count);
};

struct GpInit {
  ArdKernelParams kernel;
  double mean_stddev = 0.05;   // mu ~ N(0, mean_stddev^2)
  double variance = 1e-8;      // Sigma = variance * I
  InducingInit inducing;
};

struct ExperimentConfig {
  std::string system;
  Method method = Method::sgpd;
  Vec x0;
  double dt = 0.1;
  double train_horizon = 10.0;
  double predict_horizon = 40.0;
  Vec noise_variances;
  std::vector<GpInit> gps;
  std::string tableau;  // unstructured models; empty for structured ones
  SolverSettings solver;
  TrainConfig train;

  const ElboFactors& elbo_factors() const { return train.elbo; }
  const ArdKernelParams& hyper_init() const { return gps.front().kernel; }

  int train_points() const;    // train_horizon / dt + 1
  int predict_steps() const;   // predict_horizon / dt
  void validate() const;
};

ExperimentConfig default_experiment(const std::string& system, Method method = Method::sgpd);

/// Fresh model with inducing inputs and variational means drawn from `rng`.
DynamicsModel build_model(const ExperimentConfig& config, Rng& rng);

}  // namespace gpdyn
