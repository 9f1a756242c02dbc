#pragma once

// ARD squared-exponential kernel, random Fourier feature bases and the
// Gaussian helpers (KL divergence, scalar log density) used by the ELBO.

#include <stdexcept>
#include <string>

#include "gpdyn/rng.hpp"
#include "gpdyn/types.hpp"

namespace gpdyn {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// k(x, y) = signal_variance * exp(-sum_i (x_i - y_i)^2 / (2 l_i^2)).
struct ArdKernelParams {
  double signal_variance = 1.0;
  Vec lengthscales_sq;  // l_i^2, one per input dimension

  ArdKernelParams() = default;
  ArdKernelParams(double signal_variance, Vec lengthscales_sq);

  /// Same squared lengthscale in every one of `dim` input dimensions.
  static ArdKernelParams isotropic(double signal_variance, double lengthscale_sq, int dim);

  int dim() const { return static_cast<int>(lengthscales_sq.size()); }
  void validate() const;
};

double kernel_eval(const ArdKernelParams& params, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& y);

/// Rows of X against rows of Y.
Mat kernel_matrix(const ArdKernelParams& params, const Eigen::Ref<const Mat>& X,
                  const Eigen::Ref<const Mat>& Y);

/// Random Fourier features of the ARD kernel. Row i of `frequencies` is
/// omega_i ~ N(0, diag(1 / l^2)).
struct FeatureBasis {
  Mat frequencies;  // S x d
  double signal_variance = 1.0;

  int count() const { return static_cast<int>(frequencies.rows()); }
  int dim() const { return static_cast<int>(frequencies.cols()); }
};

FeatureBasis sample_feature_basis(const ArdKernelParams& params, int count, Rng& rng);

/// Deterministic construction from standard-normal draws: omega = normals / l.
FeatureBasis make_feature_basis(const ArdKernelParams& params, const Mat& standard_normals);

/// phi(x) in R^{2S}, pairs sqrt(sf2/S) * (cos(x.omega_i), sin(x.omega_i)).
Vec feature_map(const FeatureBasis& basis, const Eigen::Ref<const Vec>& x);

struct GaussianMoments {
  Vec mean;
  Mat covariance;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// KL(q || p) between multivariate Gaussians. `jitter` is added to p's
/// diagonal (relative to its mean diagonal) before factorization.
double gaussian_kl(const GaussianMoments& q, const GaussianMoments& p, double jitter = 0.0);

/// log N(x | mean, variance).
double gaussian_log_density(double x, double mean, double variance);

}  // namespace gpdyn
