#pragma once

#include <optional>

#include "gpdyn/types.hpp"

namespace gpdyn {

/// Time grid plus one state per row.
struct Trajectory {
  Vec times;
  Mat states;  // n x d
  std::optional<Vec> noise_variances;

  Eigen::Index size() const { return states.rows(); }
  Eigen::Index dim() const { return states.cols(); }
  Vec state(Eigen::Index k) const { return states.row(k).transpose(); }

  /// Uniform grid t_k = t0 + k h for k = 0..n_points-1, states left uninitialised.
  static Trajectory uniform(Eigen::Index n_points, Eigen::Index dim, double h, double t0 = 0.0);

  /// Rows [first, first + count).
  Trajectory slice(Eigen::Index first, Eigen::Index count) const;

  /// Throws std::invalid_argument unless times are strictly increasing and sizes agree.
  void validate() const;
};

}  // namespace gpdyn
