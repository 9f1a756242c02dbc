#include "gpdyn/models.hpp"

#include <cmath>

namespace gpdyn {

std::string to_string(ModelStructure s) {
  switch (s) {
    case ModelStructure::separable_hamiltonian: return "separable_hamiltonian";
    case ModelStructure::non_separable_hamiltonian: return "non_separable_hamiltonian";
    case ModelStructure::constrained_rigid_body: return "constrained_rigid_body";
    case ModelStructure::generic: return "generic";
  }
  return "generic";
}

ModelStructure structure_from_string(const std::string& s) {
  for (auto m : {ModelStructure::separable_hamiltonian, ModelStructure::non_separable_hamiltonian,
                 ModelStructure::constrained_rigid_body, ModelStructure::generic})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown model structure '" + s + "'");
}

DynamicsModel::DynamicsModel(ModelStructure structure_, StepScheme scheme_, int state_dim_,
                             std::vector<SparseGp> gps_, Stepper stepper_)
    : structure(structure_), scheme(scheme_), state_dim(state_dim_), gps(std::move(gps_)),
      stepper(std::move(stepper_)) {
  validate();
}

DynamicsModel DynamicsModel::separable_hamiltonian(std::vector<SparseGp> v_prime,
                                                   std::vector<SparseGp> t_prime, double h) {
  const int d = static_cast<int>(v_prime.size());
  std::vector<SparseGp> gps = std::move(v_prime);
  for (auto& g : t_prime) gps.push_back(std::move(g));
  return DynamicsModel(ModelStructure::separable_hamiltonian, StepScheme::symplectic_euler, 2 * d,
                       std::move(gps), Stepper(ButcherTableau::explicit_euler(), h));
}

DynamicsModel DynamicsModel::non_separable_hamiltonian(SparseGp hamiltonian, double h, SolverSettings solver) {
  const int D = hamiltonian.input_dim();
  return DynamicsModel(ModelStructure::non_separable_hamiltonian, StepScheme::runge_kutta, D,
                       {std::move(hamiltonian)}, Stepper(ButcherTableau::implicit_midpoint(), h, solver));
}

DynamicsModel DynamicsModel::constrained_rigid_body(SparseGp f1, SparseGp f2, double h, SolverSettings solver) {
  return DynamicsModel(ModelStructure::constrained_rigid_body, StepScheme::runge_kutta, 3,
                       {std::move(f1), std::move(f2)},
                       Stepper(ButcherTableau::implicit_midpoint(), h, solver));
}

DynamicsModel DynamicsModel::generic(std::vector<SparseGp> components, const ButcherTableau& tableau, double h,
                                     SolverSettings solver) {
  const int D = static_cast<int>(components.size());
  return DynamicsModel(ModelStructure::generic, StepScheme::runge_kutta, D, std::move(components),
                       Stepper(tableau, h, solver));
}

void DynamicsModel::validate() const {
  if (gps.empty()) throw std::invalid_argument("DynamicsModel: no GPs");
  for (const auto& g : gps) g.validate();
  auto require_inputs = [&](std::size_t i, int d) {
    if (gps[i].input_dim() != d)
      throw std::invalid_argument("DynamicsModel: GP " + std::to_string(i) + " expects " +
                                  std::to_string(gps[i].input_dim()) + " inputs, structure needs " +
                                  std::to_string(d));
  };
  switch (structure) {
    case ModelStructure::separable_hamiltonian: {
      if (state_dim % 2 != 0 || static_cast<int>(gps.size()) != state_dim)
        throw std::invalid_argument("separable model: needs d V' GPs and d T' GPs");
      for (std::size_t i = 0; i < gps.size(); ++i) require_inputs(i, state_dim / 2);
      if (scheme != StepScheme::symplectic_euler)
        throw std::invalid_argument("separable model: steps with symplectic Euler");
      break;
    }
    case ModelStructure::non_separable_hamiltonian:
      if (state_dim % 2 != 0 || gps.size() != 1)
        throw std::invalid_argument("non-separable model: one Hamiltonian GP over an even-dimensional state");
      require_inputs(0, state_dim);
      break;
    case ModelStructure::constrained_rigid_body:
      if (state_dim != 3 || gps.size() != 2)
        throw std::invalid_argument("rigid-body model: two GPs over R^3");
      require_inputs(0, 3);
      require_inputs(1, 3);
      break;
    case ModelStructure::generic:
      if (static_cast<int>(gps.size()) != state_dim)
        throw std::invalid_argument("generic model: one GP per state dimension");
      for (std::size_t i = 0; i < gps.size(); ++i) require_inputs(i, state_dim);
      break;
  }
  if (scheme == StepScheme::symplectic_euler && structure != ModelStructure::separable_hamiltonian)
    throw std::invalid_argument("symplectic Euler needs a separable Hamiltonian model");
  if (!(x3_floor > 0.0)) throw std::invalid_argument("DynamicsModel: x3_floor must be positive");
}

std::size_t DynamicsModel::parameter_count() const { return parameter_offsets().back(); }

std::vector<std::size_t> DynamicsModel::parameter_offsets() const {
  std::vector<std::size_t> off{0};
  for (const auto& g : gps) off.push_back(off.back() + g.parameter_count());
  return off;
}

Vec DynamicsModel::parameters() const {
  const auto off = parameter_offsets();
  Vec theta(off.back());
  for (std::size_t i = 0; i < gps.size(); ++i)
    gps[i].write_parameters(theta.segment(off[i], off[i + 1] - off[i]));
  return theta;
}

void DynamicsModel::set_parameters(const Vec& theta) {
  const auto off = parameter_offsets();
  if (static_cast<std::size_t>(theta.size()) != off.back())
    throw std::invalid_argument("DynamicsModel::set_parameters: size mismatch");
  for (std::size_t i = 0; i < gps.size(); ++i)
    gps[i].read_parameters(theta.segment(off[i], off[i + 1] - off[i]));
}

double DynamicsModel::kl() const {
  double total = 0.0;
  for (const auto& g : gps) total += kl_to_prior(g);
  return total;
}

Vec DynamicsModel::kl_gradient() const {
  const auto off = parameter_offsets();
  Vec grad(off.back());
  for (std::size_t i = 0; i < gps.size(); ++i) grad.segment(off[i], off[i + 1] - off[i]) = kl_to_prior_gradient(gps[i]);
  return grad;
}

ModelNoise sample_model_noise(const DynamicsModel& model, int feature_count, Rng& rng) {
  ModelNoise noise;
  for (const auto& g : model.gps) noise.draws.push_back(sample_draw_noise(g, feature_count, rng));
  return noise;
}

SampledModel::SampledModel(const DynamicsModel& model, std::vector<SampledFunction> functions)
    : structure_(model.structure),
      scheme_(model.scheme),
      state_dim_(model.state_dim),
      stepper_(model.stepper),
      x3_floor_(model.x3_floor),
      functions_(std::move(functions)),
      offsets_(model.parameter_offsets()) {
  if (functions_.size() != model.gps.size())
    throw std::invalid_argument("SampledModel: one sampled function per GP required");
}

double SampledModel::rigid_x3(const Vec& x) const {
  if (std::abs(x[2]) < x3_floor_)
    throw SingularConstraint("rigid-body constraint is singular: |x3| = " + std::to_string(std::abs(x[2])) +
                             " < " + std::to_string(x3_floor_));
  return x[2];
}

Vec SampledModel::field_eval(const Vec& x) const {
  if (x.size() != state_dim_) throw std::invalid_argument("SampledModel: state dimension mismatch");
  Vec f(state_dim_);
  switch (structure_) {
    case ModelStructure::separable_hamiltonian: {
      const int d = state_dim_ / 2;
      const Vec p = x.head(d), q = x.tail(d);
      for (int i = 0; i < d; ++i) {
        f[i] = -functions_[i].value(q);
        f[d + i] = functions_[d + i].value(p);
      }
      break;
    }
    case ModelStructure::non_separable_hamiltonian:
      f = hamiltonian_field(functions_[0].gradient(x));
      break;
    case ModelStructure::constrained_rigid_body: {
      const double x3 = rigid_x3(x);
      f[0] = functions_[0].value(x);
      f[1] = functions_[1].value(x);
      f[2] = -(f[0] * x[0] + f[1] * x[1]) / x3;
      break;
    }
    case ModelStructure::generic:
      for (int i = 0; i < state_dim_; ++i) f[i] = functions_[i].value(x);
      break;
  }
  return f;
}

Mat SampledModel::jacobian(const Vec& x) const {
  if (x.size() != state_dim_) throw std::invalid_argument("SampledModel: state dimension mismatch");
  Mat J = Mat::Zero(state_dim_, state_dim_);
  switch (structure_) {
    case ModelStructure::separable_hamiltonian: {
      const int d = state_dim_ / 2;
      const Vec p = x.head(d), q = x.tail(d);
      for (int i = 0; i < d; ++i) {
        J.block(i, d, 1, d) = -functions_[i].gradient(q).transpose();
        J.block(d + i, 0, 1, d) = functions_[d + i].gradient(p).transpose();
      }
      break;
    }
    case ModelStructure::non_separable_hamiltonian: {
      const int d = state_dim_ / 2;
      const Mat H = functions_[0].hessian(x);
      J.topRows(d) = -H.bottomRows(d);
      J.bottomRows(d) = H.topRows(d);
      break;
    }
    case ModelStructure::constrained_rigid_body: {
      const double x3 = rigid_x3(x);
      const FunctionEval e1 = functions_[0].evaluate(x, 1), e2 = functions_[1].evaluate(x, 1);
      J.row(0) = e1.gradient.transpose();
      J.row(1) = e2.gradient.transpose();
      Vec g3 = -(x[0] * e1.gradient + x[1] * e2.gradient) / x3;
      g3[0] -= e1.value / x3;
      g3[1] -= e2.value / x3;
      g3[2] += (e1.value * x[0] + e2.value * x[1]) / (x3 * x3);
      J.row(2) = g3.transpose();
      break;
    }
    case ModelStructure::generic:
      for (int i = 0; i < state_dim_; ++i) J.row(i) = functions_[i].gradient(x).transpose();
      break;
  }
  return J;
}

FieldAdjoint SampledModel::zero_adjoint() const {
  FieldAdjoint adj;
  for (const auto& f : functions_) adj.functions.push_back(f.zero_adjoint());
  return adj;
}

Vec SampledModel::pullback(const Vec& x, const Vec& cot, FieldAdjoint& adj) const {
  Vec xbar = Vec::Zero(state_dim_);
  switch (structure_) {
    case ModelStructure::separable_hamiltonian: {
      const int d = state_dim_ / 2;
      const Vec p = x.head(d), q = x.tail(d);
      for (int i = 0; i < d; ++i) {
        functions_[i].pullback_value(q, -cot[i], adj.functions[i], xbar.tail(d));
        functions_[d + i].pullback_value(p, cot[d + i], adj.functions[d + i], xbar.head(d));
      }
      break;
    }
    case ModelStructure::non_separable_hamiltonian: {
      // f = J^-1 g with g = grad H, so g_bar = J^-T cot = (cot_q, -cot_p).
      const int d = state_dim_ / 2;
      Vec gbar(state_dim_);
      gbar.head(d) = cot.tail(d);
      gbar.tail(d) = -cot.head(d);
      functions_[0].pullback_gradient(x, gbar, adj.functions[0], xbar);
      break;
    }
    case ModelStructure::constrained_rigid_body: {
      const double x3 = rigid_x3(x);
      const double f1 = functions_[0].value(x), f2 = functions_[1].value(x);
      functions_[0].pullback_value(x, cot[0] - cot[2] * x[0] / x3, adj.functions[0], xbar);
      functions_[1].pullback_value(x, cot[1] - cot[2] * x[1] / x3, adj.functions[1], xbar);
      xbar[0] -= cot[2] * f1 / x3;
      xbar[1] -= cot[2] * f2 / x3;
      xbar[2] += cot[2] * (f1 * x[0] + f2 * x[1]) / (x3 * x3);
      break;
    }
    case ModelStructure::generic:
      for (int i = 0; i < state_dim_; ++i) functions_[i].pullback_value(x, cot[i], adj.functions[i], xbar);
      break;
  }
  return xbar;
}

Vec SampledModel::parameter_gradient(const FieldAdjoint& adj) const {
  Vec grad(offsets_.back());
  for (std::size_t i = 0; i < functions_.size(); ++i)
    grad.segment(offsets_[i], offsets_[i + 1] - offsets_[i]) = functions_[i].parameter_gradient(adj.functions[i]);
  return grad;
}

Vec SampledModel::step(const Vec& x, const Vec* initial, StageSolution* solution) const {
  if (scheme_ == StepScheme::symplectic_euler) {
    const int d = state_dim_ / 2;
    Vec next(state_dim_);
    const double h = stepper_.step_size;
    for (int i = 0; i < d; ++i) next[i] = x[i] - h * functions_[i].value(x.tail(d));
    for (int i = 0; i < d; ++i) next[d + i] = x[d + i] + h * functions_[d + i].value(next.head(d));
    return next;
  }
  return rk_step(stepper_, *this, x, initial, solution);
}

Trajectory SampledModel::rollout(const Vec& x0, int n_steps) const {
  if (n_steps < 0) throw std::invalid_argument("rollout: negative step count");
  if (scheme_ == StepScheme::runge_kutta) return integrate(stepper_, *this, x0, n_steps);
  Trajectory traj = Trajectory::uniform(n_steps + 1, state_dim_, stepper_.step_size);
  traj.states.row(0) = x0.transpose();
  Vec x = x0;
  for (int k = 0; k < n_steps; ++k) {
    x = step(x);
    traj.states.row(k + 1) = x.transpose();
  }
  return traj;
}

SampledModel SampledModel::with_stepper(const Stepper& stepper) const {
  SampledModel copy = *this;
  copy.stepper_ = stepper;
  return copy;
}

SampledModel materialize(const DynamicsModel& model, const ModelNoise& noise) {
  if (noise.draws.size() != model.gps.size())
    throw std::invalid_argument("materialize: one noise block per GP required");
  std::vector<SampledFunction> fns;
  fns.reserve(model.gps.size());
  for (std::size_t i = 0; i < model.gps.size(); ++i) fns.emplace_back(model.gps[i], noise.draws[i]);
  return SampledModel(model, std::move(fns));
}

SampledModel sample_model(const DynamicsModel& model, int feature_count, Rng& rng) {
  return materialize(model, sample_model_noise(model, feature_count, rng));
}

SampledModel mean_model(const DynamicsModel& model) {
  std::vector<SampledFunction> fns;
  for (const auto& g : model.gps) fns.push_back(SampledFunction::mean_of(g));
  return SampledModel(model, std::move(fns));
}

}  // namespace gpdyn
