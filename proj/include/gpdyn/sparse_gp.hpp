#pragma once

// Variational sparse GP with inducing points, decoupled (Matheron) posterior
// function draws built on random Fourier features, and reverse-mode
// pullbacks of sampled functions with respect to the GP parameters.

#include <vector>

#include "gpdyn/kernel.hpp"

namespace gpdyn {

/// Sparse GP with a diagonal variational distribution q(z) = N(mu, diag(s)).
/// Positive quantities are stored as logarithms so that optimizer steps are
/// unconstrained.
///
/// Flattened parameter layout (see write_parameters):
///   [ inducing inputs (P x d, row-major) | mean (P) | log variance (P) |
///     log signal variance (1) | log squared lengthscales (d) ]
struct SparseGp {
  Mat inducing_inputs;       // P x d
  Vec variational_mean;      // P
  Vec variational_log_var;   // P
  double log_signal_variance = 0.0;
  Vec log_lengthscales_sq;   // d
  double jitter = 1e-8;      // relative to the signal variance

  SparseGp() = default;
  SparseGp(Mat inducing_inputs, Vec mean, Vec variances, const ArdKernelParams& kernel,
           double jitter = 1e-8);

  int input_dim() const { return static_cast<int>(log_lengthscales_sq.size()); }
  int inducing_count() const { return static_cast<int>(inducing_inputs.rows()); }

  ArdKernelParams kernel() const;
  Vec variational_variance() const { return variational_log_var.array().exp(); }
  GaussianMoments variational() const;

  /// k(xi, xi) + jitter * sf2 * I.
  Mat gram() const;

  void validate() const;

  std::size_t parameter_count() const;
  void write_parameters(Eigen::Ref<Vec> out) const;
  void read_parameters(const Eigen::Ref<const Vec>& in);
};

/// Offsets into one GP's flattened parameter block.
struct GpLayout {
  int P = 0;
  int d = 0;
  int inducing() const { return 0; }
  int mean() const { return P * d; }
  int log_var() const { return P * d + P; }
  int log_signal_variance() const { return P * d + 2 * P; }
  int log_lengthscales_sq() const { return P * d + 2 * P + 1; }
  int size() const { return P * d + 2 * P + 1 + d; }
};

inline GpLayout layout_of(const SparseGp& gp) { return {gp.inducing_count(), gp.input_dim()}; }

/// Independent scalar GPs, one per output dimension.
struct MultiGp {
  std::vector<SparseGp> components;
};

/// Prior-conditioned moments at test inputs: mean k*K^-1 mu and covariance
/// k** - k*K^-1 k*^T (independent of the variational covariance).
GaussianMoments posterior_moments(const SparseGp& gp, const Eigen::Ref<const Mat>& Xstar);

/// Moments of f(x*) with z ~ q(z) marginalised, i.e. the posterior_moments
/// covariance plus k*K^-1 Sigma K^-1 k*^T.
GaussianMoments predictive_moments(const SparseGp& gp, const Eigen::Ref<const Mat>& Xstar);

/// KL(q(z) || N(0, k(xi, xi) + jitter)).
double kl_to_prior(const SparseGp& gp);

/// Gradient of kl_to_prior in the flattened parameter layout.
Vec kl_to_prior_gradient(const SparseGp& gp);

/// The standard-normal randomness behind one function draw. Holding it fixed
/// while the parameters move is the reparameterization used for gradients.
struct DrawNoise {
  Mat frequency_normals;  // S x d
  Vec weights;            // 2S, pairs (cos, sin)
  Vec target_normals;     // P
};

DrawNoise sample_draw_noise(const SparseGp& gp, int feature_count, Rng& rng);

/// Cotangents accumulated against one sampled function during a reverse
/// sweep. Only "direct" dependencies are stored here; the dependency of the
/// update coefficients on the parameters is resolved in parameter_gradient.
struct FunctionAdjoint {
  Mat inducing;         // P x d
  Vec update_coeffs;    // P
  double log_signal_variance = 0.0;
  Vec log_lengthscales_sq;  // d

  void set_zero(int P, int d);
};

struct FunctionEval {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// One globally consistent posterior draw
///   f(x) = phi(x)^T w + k(x, xi) v,   v = K^-1 (z - Phi_xi w).
/// Immutable after construction.
class SampledFunction {
 public:
  SampledFunction(const SparseGp& gp, const DrawNoise& noise);

  /// Deterministic draw of the posterior mean k(x, xi) K^-1 mu.
  static SampledFunction mean_of(const SparseGp& gp);

  /// Assembles a draw from explicit parts. Such a function can be evaluated
  /// but has no parameter gradient.
  static SampledFunction from_parts(FeatureBasis basis, Vec weights, Mat inducing_inputs,
                                    Vec update_coeffs, const ArdKernelParams& kernel);

  int input_dim() const { return static_cast<int>(kernel_.lengthscales_sq.size()); }
  int inducing_count() const { return static_cast<int>(inducing_.rows()); }

  double value(const Eigen::Ref<const Vec>& x) const;
  Vec gradient(const Eigen::Ref<const Vec>& x) const;
  Mat hessian(const Eigen::Ref<const Vec>& x) const;

  /// order 0: value; 1: + gradient; 2: + hessian.
  FunctionEval evaluate(const Eigen::Ref<const Vec>& x, int order) const;

  /// Reverse step for y = f(x) with cotangent c: parameter cotangents go to
  /// `adj`, c * grad f(x) is added to x_bar.
  void pullback_value(const Eigen::Ref<const Vec>& x, double c, FunctionAdjoint& adj,
                      Eigen::Ref<Vec> x_bar) const;

  /// Reverse step for y = grad f(x) with cotangent u: parameter cotangents
  /// go to `adj`, hess f(x) u is added to x_bar.
  void pullback_gradient(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
                         FunctionAdjoint& adj, Eigen::Ref<Vec> x_bar) const;

  FunctionAdjoint zero_adjoint() const;

  /// Total parameter gradient in the SparseGp layout, resolving the update
  /// coefficients through the Gram solve, the prior at the inducing inputs
  /// and the reparameterised targets.
  Vec parameter_gradient(const FunctionAdjoint& adj) const;

  bool differentiable() const { return differentiable_; }
  const FeatureBasis& basis() const { return basis_; }
  const Vec& weights() const { return weights_; }
  const Vec& targets() const { return targets_; }
  const Vec& update_coeffs() const { return update_; }
  const Mat& inducing_inputs() const { return inducing_; }
  const ArdKernelParams& kernel() const { return kernel_; }

 private:
  SampledFunction() = default;
  void split_weights();
  void prior_eval(const Eigen::Ref<const Vec>& x, int order, FunctionEval& out) const;

  FeatureBasis basis_;
  Vec weights_;
  Vec w_cos_, w_sin_;
  double amp_ = 0.0;
  Mat inducing_;
  ArdKernelParams kernel_;
  Eigen::ArrayXd inv_l2_;
  Vec update_;

  bool differentiable_ = false;
  Vec targets_;
  Vec target_normals_;
  Vec log_var_;
  Mat gram_;
  Eigen::LLT<Mat> gram_llt_;
  Vec prior_at_inducing_;
  Mat prior_grad_at_inducing_;  // P x d
};

/// Draws z ~ q(z), w ~ N(0, I), frequencies per the spectral density.
SampledFunction draw_function(const SparseGp& gp, int feature_count, Rng& rng);

inline double eval_function(const SampledFunction& f, const Eigen::Ref<const Vec>& x) {
  return f.value(x);
}

inline Vec eval_gradient(const SampledFunction& f, const Eigen::Ref<const Vec>& x) {
  return f.gradient(x);
}

/// Pulls a cotangent on the Gram matrix back to the GP parameters
/// (inducing inputs, log signal variance, log squared lengthscales).
/// `gram` is k(xi, xi) + jitter * sf2 * I evaluated at the same parameters;
/// `grad` is a block in the SparseGp layout.
void accumulate_gram_pullback(const Mat& inducing_inputs, const ArdKernelParams& kernel,
                              const Mat& gram, const Mat& gram_bar, Eigen::Ref<Vec> grad);

}  // namespace gpdyn
