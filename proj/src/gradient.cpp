#include "gpdyn/gradient.hpp"

#include <cmath>

namespace gpdyn {

IftSingular::IftSingular(double rcond_, int step_index_)
    : NumericalError("singular IFT matrix (reciprocal condition " + std::to_string(rcond_) + ")" +
                     (step_index_ >= 0 ? " at step " + std::to_string(step_index_) : "")),
      rcond(rcond_),
      step_index(step_index_) {}

namespace {

constexpr double kMinRcond = 1e-14;

struct IftSystem {
  Mat U;                      // stage abscissae, one per column
  std::vector<Mat> jacobians; // field Jacobian at each stage point
  Eigen::PartialPivLU<Mat> lu;
  double rcond = 0.0;
};

IftSystem build_ift(const ParametricField& field, const ButcherTableau& tab, const Vec& x, double h,
                    const Vec& stages) {
  const int s = tab.stages();
  const Eigen::Index d = x.size();
  IftSystem sys;
  sys.U = stage_points(tab, h, x, stages);
  Mat M = Mat::Identity(s * d, s * d);
  for (int j = 0; j < s; ++j) {
    sys.jacobians.push_back(field.jacobian(sys.U.col(j)));
    for (int l = 0; l < s; ++l)
      if (tab.stage_matrix(j, l) != 0.0) M.block(j * d, l * d, d, d) -= h * tab.stage_matrix(j, l) * sys.jacobians[j];
  }
  sys.lu.compute(M);
  sys.rcond = sys.lu.rcond();
  if (!(sys.rcond > kMinRcond)) throw IftSingular(sys.rcond);
  return sys;
}

}  // namespace

StageSensitivities ift_stage_sensitivities(const ParametricField& field, const ButcherTableau& tableau,
                                           const Vec& x, double h, const Vec& stages) {
  const int s = tableau.stages();
  const Eigen::Index d = x.size();
  const IftSystem sys = build_ift(field, tableau, x, h, stages);
  const auto P = static_cast<Eigen::Index>(field.parameter_count());

  // Right-hand sides: partials of f(u_j) with respect to x_n and theta.
  Mat rhs_x(s * d, d), rhs_t(s * d, P);
  for (int j = 0; j < s; ++j) {
    rhs_x.middleRows(j * d, d) = sys.jacobians[j];
    for (Eigen::Index i = 0; i < d; ++i) {
      FieldAdjoint adj = field.zero_adjoint();
      field.pullback(sys.U.col(j), Vec::Unit(d, i), adj);
      rhs_t.row(j * d + i) = field.parameter_gradient(adj).transpose();
    }
  }
  return {sys.lu.solve(rhs_x), sys.lu.solve(rhs_t), sys.rcond};
}

Vec rk_step_pullback(const Stepper& stepper, const ParametricField& field, const Vec& x, const Vec& stages,
                     const Vec& x_bar_next, FieldAdjoint& adj, double* rcond) {
  const ButcherTableau& tab = stepper.tableau;
  const double h = stepper.step_size;
  const int s = tab.stages();
  const Eigen::Index d = x.size();
  const IftSystem sys = build_ift(field, tab, x, h, stages);
  if (rcond) *rcond = sys.rcond;

  Vec g_bar(s * d);
  for (int j = 0; j < s; ++j) g_bar.segment(j * d, d) = h * tab.weights[j] * x_bar_next;
  const Vec lambda = sys.lu.transpose().solve(g_bar);

  Vec x_bar = x_bar_next;
  for (int j = 0; j < s; ++j) x_bar += field.pullback(sys.U.col(j), lambda.segment(j * d, d), adj);
  return x_bar;
}

Vec model_step_pullback(const SampledModel& model, const Vec& x, const Vec& stages, const Vec& x_bar_next,
                        FieldAdjoint& adj, double* rcond) {
  if (model.scheme() == StepScheme::runge_kutta)
    return rk_step_pullback(model.stepper(), model, x, stages, x_bar_next, adj, rcond);

  // p1 = p - h V'(q), q1 = q + h T'(p1).
  const int d = model.dim() / 2;
  const double h = model.stepper().step_size;
  const auto& fns = model.functions();
  const Vec q = x.tail(d);
  Vec p1(d);
  for (int i = 0; i < d; ++i) p1[i] = x[i] - h * fns[i].value(q);

  Vec x_bar(2 * d);
  x_bar.tail(d) = x_bar_next.tail(d);
  Vec p1_bar = x_bar_next.head(d);
  for (int i = 0; i < d; ++i) fns[d + i].pullback_value(p1, h * x_bar_next[d + i], adj.functions[d + i], p1_bar);
  x_bar.head(d) = p1_bar;
  Vec q_bar = Vec::Zero(d);
  for (int i = 0; i < d; ++i) fns[i].pullback_value(q, -h * p1_bar[i], adj.functions[i], q_bar);
  x_bar.tail(d) += q_bar;
  return x_bar;
}

GradientReport rollout_gradient(const SampledModel& model, const Vec& x0, int n_steps, const LossTerms& loss_terms) {
  if (n_steps < 0) throw std::invalid_argument("rollout_gradient: negative step count");
  const Eigen::Index d = model.dim();
  GradientReport rep;
  rep.trajectory = Trajectory::uniform(n_steps + 1, d, model.stepper().step_size);
  rep.trajectory.states.row(0) = x0.transpose();

  std::vector<Vec> stages(n_steps);
  Vec x = x0;
  const bool rk = model.scheme() == StepScheme::runge_kutta;
  for (int k = 0; k < n_steps; ++k) {
    if (rk) {
      StageSolution sol;
      const Vec* warm = (k > 0 && model.stepper().solver.warm_start) ? &stages[k - 1] : nullptr;
      try {
        x = model.step(x, warm, &sol);
      } catch (const NonConvergence& e) {
        throw NonConvergence(e.residual, e.iterations, k);
      }
      stages[k] = std::move(sol.stages);
    } else {
      x = model.step(x);
    }
    rep.trajectory.states.row(k + 1) = x.transpose();
  }

  // Loss terms, then the reverse sweep.
  std::vector<Vec> grads(n_steps + 1, Vec::Zero(d));
  for (int k = 0; k <= n_steps; ++k) rep.loss += loss_terms(k, rep.trajectory.state(k), grads[k]);

  FieldAdjoint adj = model.zero_adjoint();
  Vec x_bar = grads[n_steps];
  if (rk) rep.ift_rcond.assign(n_steps, 0.0);
  for (int k = n_steps - 1; k >= 0; --k) {
    try {
      x_bar = model_step_pullback(model, rep.trajectory.state(k), rk ? stages[k] : Vec(), x_bar, adj,
                                  rk ? &rep.ift_rcond[k] : nullptr);
    } catch (const IftSingular& e) {
      throw IftSingular(e.rcond, k);
    }
    x_bar += grads[k];
  }
  rep.gradient = model.parameter_gradient(adj);
  rep.initial_state_gradient = x_bar;
  return rep;
}

bool GradientCheckReport::ok() const {
  for (const auto& e : entries)
    if (!e.ok) return false;
  return true;
}

GradientCheckReport check_gradient(const DifferentiableLoss& loss, const Vec& theta,
                                   const std::vector<Eigen::Index>& coords, double eps, double threshold) {
  if (!(eps > 0.0)) throw std::invalid_argument("check_gradient: eps must be positive");
  Vec analytic(theta.size());
  loss(theta, &analytic);
  const double floor = 1e-6 * analytic.cwiseAbs().maxCoeff();
  GradientCheckReport rep;
  for (Eigen::Index c : coords) {
    if (c < 0 || c >= theta.size()) throw std::out_of_range("check_gradient: coordinate out of range");
    Vec tp = theta, tm = theta;
    tp[c] += eps;
    tm[c] -= eps;
    GradientCheckEntry e;
    e.coordinate = c;
    e.analytic = analytic[c];
    e.numeric = (loss(tp, nullptr) - loss(tm, nullptr)) / (2.0 * eps);
    const double denom = std::max(std::abs(e.analytic), std::abs(e.numeric)) + floor;
    e.rel_err = denom > 0.0 ? std::abs(e.analytic - e.numeric) / denom : 0.0;
    e.ok = e.rel_err <= threshold;
    rep.max_rel_err = std::max(rep.max_rel_err, e.rel_err);
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace gpdyn
