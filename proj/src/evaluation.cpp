#include "gpdyn/evaluation.hpp"

#include <cmath>

namespace gpdyn {

void RolloutEnsemble::validate() const {
  if (rollouts.empty()) throw std::invalid_argument("ensemble: no rollouts");
  const Trajectory& first = rollouts.front();
  for (const auto& r : rollouts) {
    if (r.size() != first.size() || r.dim() != first.dim())
      throw std::invalid_argument("ensemble: rollouts have different shapes");
    if (r.times.size() != r.size() || (r.times - first.times).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + first.times.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("ensemble: rollouts are on different time grids");
  }
}

Mat RolloutEnsemble::mean() const {
  validate();
  Mat m = Mat::Zero(rollouts.front().size(), rollouts.front().dim());
  for (const auto& r : rollouts) m += r.states;
  return m / static_cast<double>(rollouts.size());
}

L2Report l2_error(const RolloutEnsemble& ensemble, const Trajectory& truth) {
  const Mat mean = ensemble.mean();
  const Trajectory& ref = ensemble.rollouts.front();
  if (truth.size() != ref.size() || truth.dim() != ref.dim())
    throw std::invalid_argument("l2_error: ground truth grid does not match the ensemble");
  if (truth.times.size() == truth.size() &&
      (truth.times - ref.times).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + ref.times.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("l2_error: ground truth grid does not match the ensemble");
  L2Report rep;
  rep.series = (truth.states - mean).rowwise().norm();
  rep.total = std::sqrt(rep.series.squaredNorm() / static_cast<double>(rep.series.size()));
  return rep;
}

Vec determinant_series(const std::function<Vec(const Vec&)>& step, const Trajectory& trajectory) {
  Vec out(trajectory.size());
  for (Eigen::Index k = 0; k < trajectory.size(); ++k) out[k] = step_jacobian(step, trajectory.state(k)).determinant();
  return out;
}

Vec determinant_series(const SampledModel& model, const Trajectory& trajectory) {
  if (model.scheme() == StepScheme::runge_kutta) {
    Vec out(trajectory.size());
    for (Eigen::Index k = 0; k < trajectory.size(); ++k)
      out[k] = step_jacobian(model.stepper(), model, trajectory.state(k)).determinant();
    return out;
  }
  return determinant_series([&](const Vec& x) { return model.step(x); }, trajectory);
}

EnergyReport energy_stats(const RolloutEnsemble& ensemble, const std::function<double(const Vec&)>& energy,
                          double true_energy) {
  ensemble.validate();
  const Eigen::Index N = ensemble.rollouts.front().size();
  EnergyReport rep;
  rep.series = Vec::Zero(N);
  for (const auto& r : ensemble.rollouts)
    for (Eigen::Index n = 0; n < N; ++n) rep.series[n] += energy(r.state(n));
  rep.series /= static_cast<double>(ensemble.count());
  rep.mean = rep.series.mean();
  rep.error = std::abs(true_energy - rep.mean);
  rep.std = N > 1 ? std::sqrt((rep.series.array() - true_energy).square().sum() / static_cast<double>(N - 1)) : 0.0;
  return rep;
}

UncertaintyReport uncertainty_stats(const RolloutEnsemble& ensemble) {
  if (ensemble.count() < 2) throw std::invalid_argument("uncertainty_stats: at least two rollouts required");
  UncertaintyReport rep;
  rep.mean = ensemble.mean();
  rep.std = Mat::Zero(rep.mean.rows(), rep.mean.cols());
  for (const auto& r : ensemble.rollouts) rep.std.array() += (r.states - rep.mean).array().square();
  rep.std = (rep.std / static_cast<double>(ensemble.count() - 1)).cwiseSqrt();
  return rep;
}

double invariant_drift(const Trajectory& trajectory, double radius_sq) {
  if (trajectory.size() == 0) return 0.0;
  return (trajectory.states.rowwise().squaredNorm().array() - radius_sq).abs().maxCoeff();
}

}  // namespace gpdyn
