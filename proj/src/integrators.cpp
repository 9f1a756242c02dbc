#include "gpdyn/integrators.hpp"

#include <algorithm>
#include <cmath>

namespace gpdyn {

Mat forward_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double eps = 1e-7 * (1.0 + std::abs(x[i]));
    Vec xp = x;
    xp[i] += eps;
    J.col(i) = (f(xp) - f0) / eps;
  }
  return J;
}

Mat VectorField::jacobian(const Vec& x) const {
  return forward_difference_jacobian([this](const Vec& y) { return eval(y); }, x);
}

ButcherTableau::ButcherTableau(std::string name_, Mat A, Vec b, int order_)
    : name(std::move(name_)), stage_matrix(std::move(A)), weights(std::move(b)), order(order_) {
  const Eigen::Index s = weights.size();
  if (s < 1 || stage_matrix.rows() != s || stage_matrix.cols() != s)
    throw std::invalid_argument("ButcherTableau '" + name + "': A must be s x s with s = len(b) >= 1");
  if (std::abs(weights.sum() - 1.0) > 1e-14)
    throw std::invalid_argument("ButcherTableau '" + name + "': weights must sum to one");
  if (order < 1) throw std::invalid_argument("ButcherTableau '" + name + "': order must be positive");
}

bool ButcherTableau::is_explicit() const {
  for (Eigen::Index j = 0; j < stage_matrix.rows(); ++j)
    for (Eigen::Index l = j; l < stage_matrix.cols(); ++l)
      if (stage_matrix(j, l) != 0.0) return false;
  return true;
}

ButcherTableau ButcherTableau::explicit_euler() {
  return ButcherTableau("explicit_euler", Mat::Zero(1, 1), Vec::Ones(1), 1);
}

ButcherTableau ButcherTableau::heun() {
  Mat A(2, 2);
  A << 0.0, 0.0, 1.0, 0.0;
  Vec b(2);
  b << 0.5, 0.5;
  return ButcherTableau("heun", A, b, 2);
}

ButcherTableau ButcherTableau::implicit_midpoint() {
  return ButcherTableau("implicit_midpoint", Mat::Constant(1, 1, 0.5), Vec::Ones(1), 2);
}

ButcherTableau ButcherTableau::radau_ia() {
  Mat A(2, 2);
  A << 0.25, -0.25, 0.25, 5.0 / 12.0;
  Vec b(2);
  b << 0.25, 0.75;
  return ButcherTableau("radau_ia", A, b, 3);
}

ButcherTableau ButcherTableau::from_name(const std::string& name) {
  if (name == "explicit_euler") return explicit_euler();
  if (name == "heun") return heun();
  if (name == "implicit_midpoint") return implicit_midpoint();
  if (name == "radau_ia") return radau_ia();
  throw std::invalid_argument("unknown tableau '" + name + "'");
}

void SolverSettings::validate() const {
  if (!(residual_tolerance > 0.0)) throw std::invalid_argument("solver: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("solver: max_iterations must be at least 1");
  if (!(damping_init > 0.0)) throw std::invalid_argument("solver: damping must be positive");
}

Stepper::Stepper(ButcherTableau tableau_, double step_size_, SolverSettings solver_)
    : tableau(std::move(tableau_)), step_size(step_size_), solver(solver_) {
  if (!(step_size > 0.0)) throw std::invalid_argument("Stepper: step size must be positive");
  solver.validate();
}

NonConvergence::NonConvergence(double residual_, int iterations_, int step_index_)
    : std::runtime_error("implicit stage solve did not converge: residual " + std::to_string(residual_) +
                         " after " + std::to_string(iterations_) + " iterations" +
                         (step_index_ >= 0 ? " at step " + std::to_string(step_index_) : "")),
      residual(residual_),
      iterations(iterations_),
      step_index(step_index_) {}

StepSizeUnderflow::StepSizeUnderflow(double t, double h)
    : std::runtime_error("adaptive step size underflow at t = " + std::to_string(t) +
                         " (h = " + std::to_string(h) + ")"),
      time(t),
      step(h) {}

Mat stage_points(const ButcherTableau& tableau, double h, const Vec& x, const Vec& stages) {
  const int s = tableau.stages();
  const Eigen::Index d = x.size();
  const Eigen::Map<const Mat> G(stages.data(), d, s);  // column j = stage j
  Mat U = (h * G * tableau.stage_matrix.transpose()).eval();
  U.colwise() += x;
  return U;
}

Vec stage_residual(const ButcherTableau& tableau, double h, const VectorField& field, const Vec& x,
                   const Vec& stages) {
  const int s = tableau.stages();
  const Eigen::Index d = x.size();
  const Mat U = stage_points(tableau, h, x, stages);
  Vec R = stages;
  for (int j = 0; j < s; ++j) R.segment(j * d, d) -= field.eval(U.col(j));
  return R;
}

namespace {

/// d residual / d stages = I - h (A_jl J(u_j)) blockwise.
Mat stage_residual_jacobian(const ButcherTableau& tableau, double h, const VectorField& field,
                            const Mat& U) {
  const int s = tableau.stages();
  const Eigen::Index d = U.rows();
  Mat M = Mat::Identity(s * d, s * d);
  for (int j = 0; j < s; ++j) {
    const Mat J = field.jacobian(U.col(j));
    for (int l = 0; l < s; ++l) {
      const double a = tableau.stage_matrix(j, l);
      if (a != 0.0) M.block(j * d, l * d, d, d) -= h * a * J;
    }
  }
  return M;
}

StageSolution solve_explicit(const ButcherTableau& tableau, double h, const VectorField& field,
                             const Vec& x) {
  const int s = tableau.stages();
  const Eigen::Index d = x.size();
  StageSolution sol;
  sol.stages = Vec::Zero(s * d);
  for (int j = 0; j < s; ++j) {
    Vec u = x;
    for (int l = 0; l < j; ++l) {
      const double a = tableau.stage_matrix(j, l);
      if (a != 0.0) u += h * a * sol.stages.segment(l * d, d);
    }
    sol.stages.segment(j * d, d) = field.eval(u);
  }
  return sol;
}

StageSolution solve_levenberg_marquardt(const Stepper& stepper, const VectorField& field,
                                        const Vec& x, const Vec* initial) {
  const ButcherTableau& tab = stepper.tableau;
  const SolverSettings& opt = stepper.solver;
  const double h = stepper.step_size;
  const int s = tab.stages();
  const Eigen::Index d = x.size();
  const Eigen::Index n = s * d;

  Vec G(n);
  if (initial && initial->size() == n) {
    G = *initial;
  } else {
    const Vec f0 = field.eval(x);
    for (int j = 0; j < s; ++j) G.segment(j * d, d) = f0;
  }
  Vec R = stage_residual(tab, h, field, x, G);
  double cost = R.squaredNorm();
  double lambda = opt.damping_init;

  for (int it = 0;; ++it) {
    const double res = R.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) throw NonConvergence(res, it);
    if (res <= opt.residual_tolerance) return {G, res, it};
    if (it >= opt.max_iterations) throw NonConvergence(res, it);

    const Mat M = stage_residual_jacobian(tab, h, field, stage_points(tab, h, x, G));
    const Mat JtJ = M.transpose() * M;
    const Vec g = M.transpose() * R;
    const Vec scale = JtJ.diagonal().cwiseMax(1e-12);
    bool accepted = false;
    while (!accepted) {
      Mat A = JtJ;
      A.diagonal() += lambda * scale;
      const Vec delta = -A.ldlt().solve(g);
      const Vec G_new = G + delta;
      const Vec R_new = stage_residual(tab, h, field, x, G_new);
      const double cost_new = R_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        G = G_new;
        R = R_new;
        cost = cost_new;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) throw NonConvergence(R.lpNorm<Eigen::Infinity>(), it + 1);
      }
    }
  }
}

}  // namespace

StageSolution solve_stages(const Stepper& stepper, const VectorField& field, const Vec& x,
                           const Vec* initial) {
  if (x.size() != field.dim()) throw std::invalid_argument("solve_stages: state dimension mismatch");
  if (stepper.tableau.is_explicit() && !stepper.solver.force_iterative)
    return solve_explicit(stepper.tableau, stepper.step_size, field, x);
  return solve_levenberg_marquardt(stepper, field, x, initial);
}

Vec rk_step(const Stepper& stepper, const VectorField& field, const Vec& x, const Vec* initial,
            StageSolution* solution) {
  StageSolution sol = solve_stages(stepper, field, x, initial);
  const Eigen::Index d = x.size();
  Vec next = x;
  for (int j = 0; j < stepper.tableau.stages(); ++j)
    next += stepper.step_size * stepper.tableau.weights[j] * sol.stages.segment(j * d, d);
  if (solution) *solution = std::move(sol);
  return next;
}

std::pair<Vec, Vec> symplectic_euler_step(const std::function<Vec(const Vec&)>& v_prime,
                                          const std::function<Vec(const Vec&)>& t_prime,
                                          const Vec& p, const Vec& q, double h) {
  if (p.size() != q.size()) throw std::invalid_argument("symplectic_euler_step: p and q differ in size");
  Vec p_next = p - h * v_prime(q);
  Vec q_next = q + h * t_prime(p_next);
  return {std::move(p_next), std::move(q_next)};
}

Vec hamiltonian_field(const Vec& grad_h) {
  if (grad_h.size() % 2 != 0) throw std::invalid_argument("hamiltonian_field: odd state dimension");
  const Eigen::Index d = grad_h.size() / 2;
  Vec f(grad_h.size());
  f.head(d) = -grad_h.tail(d);
  f.tail(d) = grad_h.head(d);
  return f;
}

Vec implicit_midpoint_hamiltonian_step(const std::function<Vec(const Vec&)>& grad_h, const Vec& x,
                                       double h, const SolverSettings& solver,
                                       const std::function<Mat(const Vec&)>& hess_h) {
  if (x.size() % 2 != 0)
    throw std::invalid_argument("implicit_midpoint_hamiltonian_step: odd state dimension");
  const Eigen::Index d = x.size() / 2;
  FunctionField::JacFn jac;
  if (hess_h) {
    jac = [&hess_h, d](const Vec& y) {
      const Mat Hs = hess_h(y);
      Mat J(2 * d, 2 * d);
      J.topRows(d) = -Hs.bottomRows(d);
      J.bottomRows(d) = Hs.topRows(d);
      return J;
    };
  }
  const FunctionField field(static_cast<int>(x.size()),
                            [&grad_h](const Vec& y) { return hamiltonian_field(grad_h(y)); }, jac);
  return rk_step(Stepper(ButcherTableau::implicit_midpoint(), h, solver), field, x);
}

Trajectory integrate(const Stepper& stepper, const VectorField& field, const Vec& x0, int n_steps) {
  if (n_steps < 0) throw std::invalid_argument("integrate: negative step count");
  Trajectory traj = Trajectory::uniform(n_steps + 1, x0.size(), stepper.step_size);
  traj.states.row(0) = x0.transpose();
  Vec x = x0;
  StageSolution sol;
  bool have_stages = false;
  for (int k = 0; k < n_steps; ++k) {
    const Vec* warm = (stepper.solver.warm_start && have_stages) ? &sol.stages : nullptr;
    try {
      x = rk_step(stepper, field, x, warm, &sol);
    } catch (const NonConvergence& e) {
      throw NonConvergence(e.residual, e.iterations, k);
    }
    have_stages = true;
    traj.states.row(k + 1) = x.transpose();
  }
  return traj;
}

namespace {

struct AdaptiveState {
  Vec x;
  double t;
  double h;
};

/// Advances `st` to t_end; accepted points are appended when `record` is set.
void adaptive_advance(const ButcherTableau& tableau, const VectorField& field, AdaptiveState& st,
                      double t_end, double rtol, double atol, const AdaptiveOptions& opt,
                      std::vector<std::pair<double, Vec>>* record) {
  const double err_scale = 1.0 / (std::pow(2.0, tableau.order) - 1.0);
  const double exponent = -1.0 / (tableau.order + 1.0);
  const double span_eps = 1e-14 * std::max(1.0, std::abs(t_end));
  while (t_end - st.t > span_eps) {
    const bool last = st.h >= t_end - st.t;
    const double h = last ? t_end - st.t : st.h;
    if (h < opt.min_step) throw StepSizeUnderflow(st.t, h);
    double ratio;
    Vec candidate;
    try {
      const Vec full = rk_step(Stepper(tableau, h, opt.solver), field, st.x);
      const Stepper half(tableau, 0.5 * h, opt.solver);
      candidate = rk_step(half, field, rk_step(half, field, st.x));
      ratio = 0.0;
      for (Eigen::Index i = 0; i < st.x.size(); ++i) {
        const double err = err_scale * std::abs(candidate[i] - full[i]);
        const double sc = atol + rtol * std::max(std::abs(st.x[i]), std::abs(candidate[i]));
        ratio = std::max(ratio, err / sc);
      }
      if (!std::isfinite(ratio)) ratio = 1e300;
      if (opt.local_extrapolation) candidate += err_scale * (candidate - full);
    } catch (const NonConvergence&) {
      st.h = h * opt.min_factor;
      continue;
    }
    const double factor =
        ratio == 0.0 ? opt.max_factor
                     : std::clamp(opt.safety * std::pow(ratio, exponent), opt.min_factor, opt.max_factor);
    if (ratio <= 1.0) {
      st.x = candidate;
      st.t = last ? t_end : st.t + h;
      if (record) record->emplace_back(st.t, st.x);
      // A truncated final step says nothing about the step size to carry on with.
      if (!last) st.h = h * factor;
      else st.h = std::max(st.h, h * factor);
    } else {
      st.h = h * factor;
    }
  }
}

}  // namespace

Trajectory integrate_adaptive(const ButcherTableau& tableau, const VectorField& field, const Vec& x0,
                              double t0, double t1, double rtol, double atol,
                              const AdaptiveOptions& options) {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("integrate_adaptive: tolerances must be positive");
  if (!(t1 >= t0)) throw std::invalid_argument("integrate_adaptive: t1 < t0");
  AdaptiveState st{x0, t0, options.initial_step > 0.0 ? options.initial_step : t1 - t0};
  std::vector<std::pair<double, Vec>> points{{t0, x0}};
  if (t1 > t0) adaptive_advance(tableau, field, st, t1, rtol, atol, options, &points);
  Trajectory traj;
  traj.times.resize(static_cast<Eigen::Index>(points.size()));
  traj.states.resize(static_cast<Eigen::Index>(points.size()), x0.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    traj.times[static_cast<Eigen::Index>(k)] = points[k].first;
    traj.states.row(static_cast<Eigen::Index>(k)) = points[k].second.transpose();
  }
  return traj;
}

Trajectory integrate_adaptive_on_grid(const ButcherTableau& tableau, const VectorField& field,
                                      const Vec& x0, const Vec& times, double rtol, double atol,
                                      const AdaptiveOptions& options) {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("integrate_adaptive: tolerances must be positive");
  Trajectory traj;
  traj.times = times;
  traj.states.resize(times.size(), x0.size());
  if (times.size() == 0) return traj;
  traj.states.row(0) = x0.transpose();
  double h0 = options.initial_step;
  if (h0 <= 0.0) h0 = times.size() > 1 ? times[1] - times[0] : 1.0;
  AdaptiveState st{x0, times[0], h0};
  for (Eigen::Index k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw std::invalid_argument("integrate_adaptive_on_grid: grid not increasing");
    adaptive_advance(tableau, field, st, times[k], rtol, atol, options, nullptr);
    traj.states.row(k) = st.x.transpose();
  }
  return traj;
}

Mat step_jacobian(const std::function<Vec(const Vec&)>& step, const Vec& x) {
  const Eigen::Index d = x.size();
  Mat J(d, d);
  // Fourth-order central stencil.
  for (Eigen::Index i = 0; i < d; ++i) {
    const double eps = 1e-4 * (1.0 + std::abs(x[i]));
    auto at = [&](double delta) {
      Vec y = x;
      y[i] += delta;
      return step(y);
    };
    J.col(i) = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
  }
  return J;
}

Mat step_jacobian(const Stepper& stepper, const VectorField& field, const Vec& x) {
  // Re-solve cold at each perturbed point so that the map is well defined.
  Stepper cold = stepper;
  cold.solver.warm_start = false;
  return step_jacobian([&](const Vec& y) { return rk_step(cold, field, y); }, x);
}

}  // namespace gpdyn
