#include "gpdyn/trajectory.hpp"

#include <stdexcept>

namespace gpdyn {

Trajectory Trajectory::uniform(Eigen::Index n_points, Eigen::Index dim, double h, double t0) {
  Trajectory traj;
  traj.times.resize(n_points);
  for (Eigen::Index k = 0; k < n_points; ++k) traj.times[k] = t0 + static_cast<double>(k) * h;
  traj.states.resize(n_points, dim);
  return traj;
}

Trajectory Trajectory::slice(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > size())
    throw std::out_of_range("Trajectory::slice: range outside the trajectory");
  Trajectory out;
  out.times = times.segment(first, count);
  out.states = states.middleRows(first, count);
  out.noise_variances = noise_variances;
  return out;
}

void Trajectory::validate() const {
  if (times.size() != states.rows())
    throw std::invalid_argument("Trajectory: times and states disagree in length");
  for (Eigen::Index k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("Trajectory: times must be strictly increasing");
  if (noise_variances && noise_variances->size() != states.cols())
    throw std::invalid_argument("Trajectory: noise variances must have one entry per dimension");
}

}  // namespace gpdyn
