#pragma once

// Structured dynamics models: sparse GPs wired into a vector field (separable
// or non-separable Hamiltonian, tangent rigid-body field, unstructured) and
// paired with the integrator that preserves the structure.

#include <string>

#include "gpdyn/integrators.hpp"

namespace gpdyn {

enum class ModelStructure { separable_hamiltonian, non_separable_hamiltonian, constrained_rigid_body, generic };

enum class StepScheme { symplectic_euler, runge_kutta };

std::string to_string(ModelStructure s);
ModelStructure structure_from_string(const std::string& s);

/// Raised when the rigid-body constraint cannot be solved for x3.
class SingularConstraint : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// GP order per structure:
///   separable      [V'_1..V'_d (inputs q), T'_1..T'_d (inputs p)], state (p, q)
///   non-separable  [H (inputs (p, q))]
///   rigid body     [f1, f2 (inputs x in R^3)]
///   generic        [f_1..f_D]
/// The flattened parameter vector concatenates the GPs in this order.
struct DynamicsModel {
  ModelStructure structure = ModelStructure::generic;
  StepScheme scheme = StepScheme::runge_kutta;
  int state_dim = 0;
  std::vector<SparseGp> gps;
  Stepper stepper;
  double x3_floor = 1e-3;

  DynamicsModel(ModelStructure structure, StepScheme scheme, int state_dim, std::vector<SparseGp> gps,
                Stepper stepper);

  static DynamicsModel separable_hamiltonian(std::vector<SparseGp> v_prime, std::vector<SparseGp> t_prime,
                                             double h);
  static DynamicsModel non_separable_hamiltonian(SparseGp hamiltonian, double h, SolverSettings solver = {});
  static DynamicsModel constrained_rigid_body(SparseGp f1, SparseGp f2, double h, SolverSettings solver = {});
  static DynamicsModel generic(std::vector<SparseGp> components, const ButcherTableau& tableau, double h,
                               SolverSettings solver = {});

  void validate() const;

  std::size_t parameter_count() const;
  std::vector<std::size_t> parameter_offsets() const;  // one per GP, plus the total
  Vec parameters() const;
  void set_parameters(const Vec& theta);

  /// Sum of KL(q || p) over all GPs and its gradient in the flattened layout.
  double kl() const;
  Vec kl_gradient() const;
};

/// Frozen randomness for one draw of every GP in a model.
struct ModelNoise {
  std::vector<DrawNoise> draws;
};

ModelNoise sample_model_noise(const DynamicsModel& model, int feature_count, Rng& rng);

/// One sampled dynamics function with its integrator. Immutable.
class SampledModel final : public ParametricField {
 public:
  SampledModel(const DynamicsModel& model, std::vector<SampledFunction> functions);

  int dim() const override { return state_dim_; }
  Vec eval(const Vec& x) const override { return field_eval(x); }
  Mat jacobian(const Vec& x) const override;

  std::size_t parameter_count() const override { return offsets_.back(); }
  FieldAdjoint zero_adjoint() const override;
  Vec pullback(const Vec& x, const Vec& cot, FieldAdjoint& adj) const override;
  Vec parameter_gradient(const FieldAdjoint& adj) const override;

  Vec field_eval(const Vec& x) const;

  /// One model step. For Runge-Kutta schemes `initial` warm-starts the stage
  /// solve and `solution` receives the stages.
  Vec step(const Vec& x, const Vec* initial = nullptr, StageSolution* solution = nullptr) const;

  /// n_steps + 1 states; NonConvergence carries the failing step.
  Trajectory rollout(const Vec& x0, int n_steps) const;

  /// Same draw with a different step size or tableau (prediction overrides).
  SampledModel with_stepper(const Stepper& stepper) const;

  ModelStructure structure() const { return structure_; }
  StepScheme scheme() const { return scheme_; }
  const Stepper& stepper() const { return stepper_; }
  const std::vector<SampledFunction>& functions() const { return functions_; }
  double x3_floor() const { return x3_floor_; }

 private:
  ModelStructure structure_;
  StepScheme scheme_;
  int state_dim_;
  Stepper stepper_;
  double x3_floor_;
  std::vector<SampledFunction> functions_;
  std::vector<std::size_t> offsets_;

  double rigid_x3(const Vec& x) const;
};

SampledModel materialize(const DynamicsModel& model, const ModelNoise& noise);

SampledModel sample_model(const DynamicsModel& model, int feature_count, Rng& rng);

/// Deterministic model built from the GP posterior means.
SampledModel mean_model(const DynamicsModel& model);

}  // namespace gpdyn
