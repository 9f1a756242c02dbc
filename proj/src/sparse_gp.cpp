#include "gpdyn/sparse_gp.hpp"

#include <cmath>

namespace gpdyn {

SparseGp::SparseGp(Mat inducing, Vec mean, Vec variances, const ArdKernelParams& kernel,
                   double jitter_)
    : inducing_inputs(std::move(inducing)),
      variational_mean(std::move(mean)),
      log_signal_variance(std::log(kernel.signal_variance)),
      log_lengthscales_sq(kernel.lengthscales_sq.array().log()),
      jitter(jitter_) {
  kernel.validate();
  if ((variances.array() <= 0.0).any())
    throw std::invalid_argument("SparseGp: variational variances must be positive");
  variational_log_var = variances.array().log();
  validate();
}

ArdKernelParams SparseGp::kernel() const {
  ArdKernelParams k;
  k.signal_variance = std::exp(log_signal_variance);
  k.lengthscales_sq = log_lengthscales_sq.array().exp();
  return k;
}

GaussianMoments SparseGp::variational() const {
  return {variational_mean, Mat(variational_variance().asDiagonal())};
}

Mat SparseGp::gram() const {
  const ArdKernelParams k = kernel();
  Mat K = kernel_matrix(k, inducing_inputs, inducing_inputs);
  K.diagonal().array() += jitter * k.signal_variance;
  return K;
}

void SparseGp::validate() const {
  const int P = inducing_count();
  if (inducing_inputs.cols() != input_dim())
    throw std::invalid_argument("SparseGp: inducing inputs have the wrong dimension");
  if (variational_mean.size() != P || variational_log_var.size() != P)
    throw std::invalid_argument("SparseGp: variational parameters must have one entry per inducing input");
  if (!inducing_inputs.allFinite() || !variational_mean.allFinite() ||
      !variational_log_var.allFinite() || !log_lengthscales_sq.allFinite() ||
      !std::isfinite(log_signal_variance))
    throw std::invalid_argument("SparseGp: non-finite parameters");
  if (!(jitter > 0.0)) throw std::invalid_argument("SparseGp: jitter must be positive");
}

std::size_t SparseGp::parameter_count() const {
  return static_cast<std::size_t>(layout_of(*this).size());
}

void SparseGp::write_parameters(Eigen::Ref<Vec> out) const {
  const GpLayout L = layout_of(*this);
  if (out.size() != L.size()) throw std::invalid_argument("SparseGp: parameter block size mismatch");
  for (int j = 0; j < L.P; ++j)
    for (int k = 0; k < L.d; ++k) out[L.inducing() + j * L.d + k] = inducing_inputs(j, k);
  out.segment(L.mean(), L.P) = variational_mean;
  out.segment(L.log_var(), L.P) = variational_log_var;
  out[L.log_signal_variance()] = log_signal_variance;
  out.segment(L.log_lengthscales_sq(), L.d) = log_lengthscales_sq;
}

void SparseGp::read_parameters(const Eigen::Ref<const Vec>& in) {
  const GpLayout L = layout_of(*this);
  if (in.size() != L.size()) throw std::invalid_argument("SparseGp: parameter block size mismatch");
  for (int j = 0; j < L.P; ++j)
    for (int k = 0; k < L.d; ++k) inducing_inputs(j, k) = in[L.inducing() + j * L.d + k];
  variational_mean = in.segment(L.mean(), L.P);
  variational_log_var = in.segment(L.log_var(), L.P);
  log_signal_variance = in[L.log_signal_variance()];
  log_lengthscales_sq = in.segment(L.log_lengthscales_sq(), L.d);
}

namespace {

Eigen::LLT<Mat> factor_gram(const Mat& K, const char* where) {
  Eigen::LLT<Mat> llt(K);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(where) + ": inducing Gram matrix is not positive definite");
  return llt;
}

GaussianMoments conditioned_moments(const SparseGp& gp, const Eigen::Ref<const Mat>& Xstar,
                                    bool with_variational_cov) {
  if (Xstar.cols() != gp.input_dim())
    throw std::invalid_argument("posterior_moments: dimension mismatch");
  const ArdKernelParams k = gp.kernel();
  GaussianMoments out;
  out.covariance = kernel_matrix(k, Xstar, Xstar);
  if (gp.inducing_count() == 0) {
    out.mean = Vec::Zero(Xstar.rows());
    return out;
  }
  const Eigen::LLT<Mat> llt = factor_gram(gp.gram(), "posterior_moments");
  const Mat Kx = kernel_matrix(k, Xstar, gp.inducing_inputs);  // n x P
  const Mat A = llt.solve(Kx.transpose());                      // P x n
  out.mean = A.transpose() * gp.variational_mean;
  out.covariance -= Kx * A;
  if (with_variational_cov)
    out.covariance += A.transpose() * gp.variational_variance().asDiagonal() * A;
  return out;
}

}  // namespace

GaussianMoments posterior_moments(const SparseGp& gp, const Eigen::Ref<const Mat>& Xstar) {
  return conditioned_moments(gp, Xstar, false);
}

GaussianMoments predictive_moments(const SparseGp& gp, const Eigen::Ref<const Mat>& Xstar) {
  return conditioned_moments(gp, Xstar, true);
}

double kl_to_prior(const SparseGp& gp) {
  const int P = gp.inducing_count();
  if (P == 0) return 0.0;
  const Mat K = gp.gram();
  const Eigen::LLT<Mat> llt = factor_gram(K, "kl_to_prior");
  const Mat Kinv = llt.solve(Mat::Identity(P, P));
  const Vec s = gp.variational_variance();
  const Vec alpha = llt.solve(gp.variational_mean);
  const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  return 0.5 * (Kinv.diagonal().dot(s) + gp.variational_mean.dot(alpha) - P + logdet -
                gp.variational_log_var.sum());
}

Vec kl_to_prior_gradient(const SparseGp& gp) {
  const GpLayout L = layout_of(gp);
  Vec grad = Vec::Zero(L.size());
  if (L.P == 0) return grad;
  const Mat K = gp.gram();
  const Eigen::LLT<Mat> llt = factor_gram(K, "kl_to_prior_gradient");
  const Mat Kinv = llt.solve(Mat::Identity(L.P, L.P));
  const Vec s = gp.variational_variance();
  const Vec alpha = llt.solve(gp.variational_mean);

  grad.segment(L.mean(), L.P) = alpha;
  grad.segment(L.log_var(), L.P) = 0.5 * (Kinv.diagonal().array() * s.array() - 1.0);
  const Mat K_bar = 0.5 * (Kinv - Kinv * s.asDiagonal() * Kinv - alpha * alpha.transpose());
  accumulate_gram_pullback(gp.inducing_inputs, gp.kernel(), K, K_bar, grad);
  return grad;
}

void accumulate_gram_pullback(const Mat& xi, const ArdKernelParams& kernel, const Mat& gram,
                              const Mat& gram_bar, Eigen::Ref<Vec> grad) {
  const GpLayout L{static_cast<int>(xi.rows()), static_cast<int>(xi.cols())};
  const Eigen::ArrayXd inv_l2 = kernel.lengthscales_sq.array().inverse();
  double sf2_bar = 0.0;
  Eigen::ArrayXd l2_bar = Eigen::ArrayXd::Zero(L.d);
  for (int i = 0; i < L.P; ++i) {
    for (int j = 0; j < L.P; ++j) {
      const double wij = gram_bar(i, j) * gram(i, j);
      sf2_bar += wij;  // the jittered diagonal scales with sf2 as well
      if (i == j) continue;
      const Eigen::ArrayXd diff = (xi.row(i) - xi.row(j)).transpose().array();
      l2_bar += wij * diff.square() * inv_l2 * 0.5;
      const Eigen::ArrayXd dxi = wij * diff * inv_l2;  // d K_ij / d xi_j, times the cotangent
      for (int k = 0; k < L.d; ++k) {
        grad[L.inducing() + i * L.d + k] -= dxi[k];
        grad[L.inducing() + j * L.d + k] += dxi[k];
      }
    }
  }
  grad[L.log_signal_variance()] += sf2_bar;
  grad.segment(L.log_lengthscales_sq(), L.d) += l2_bar.matrix();
}

DrawNoise sample_draw_noise(const SparseGp& gp, int feature_count, Rng& rng) {
  if (feature_count < 1) throw std::invalid_argument("draw_function: S must be at least 1");
  DrawNoise noise;
  noise.frequency_normals = standard_normal_matrix(rng, feature_count, gp.input_dim());
  noise.weights = standard_normal_vector(rng, 2 * feature_count);
  noise.target_normals = standard_normal_vector(rng, gp.inducing_count());
  return noise;
}

void FunctionAdjoint::set_zero(int P, int d) {
  inducing = Mat::Zero(P, d);
  update_coeffs = Vec::Zero(P);
  log_signal_variance = 0.0;
  log_lengthscales_sq = Vec::Zero(d);
}

void SampledFunction::split_weights() {
  const Eigen::Index S = basis_.frequencies.rows();
  if (weights_.size() != 2 * S)
    throw std::invalid_argument("SampledFunction: weight vector must have 2S entries");
  w_cos_.resize(S);
  w_sin_.resize(S);
  for (Eigen::Index i = 0; i < S; ++i) {
    w_cos_[i] = weights_[2 * i];
    w_sin_[i] = weights_[2 * i + 1];
  }
  amp_ = S > 0 ? std::sqrt(basis_.signal_variance / static_cast<double>(S)) : 0.0;
}

SampledFunction::SampledFunction(const SparseGp& gp, const DrawNoise& noise) {
  gp.validate();
  kernel_ = gp.kernel();
  basis_ = make_feature_basis(kernel_, noise.frequency_normals);
  weights_ = noise.weights;
  split_weights();
  inducing_ = gp.inducing_inputs;
  inv_l2_ = kernel_.lengthscales_sq.array().inverse();
  differentiable_ = true;
  log_var_ = gp.variational_log_var;

  const int P = gp.inducing_count();
  const int d = gp.input_dim();
  if (noise.target_normals.size() != P)
    throw std::invalid_argument("SampledFunction: target noise size mismatch");
  target_normals_ = noise.target_normals;
  targets_ = gp.variational_mean.array() + (0.5 * log_var_.array()).exp() * target_normals_.array();
  prior_at_inducing_.resize(P);
  prior_grad_at_inducing_.resize(P, d);
  update_ = Vec::Zero(P);
  if (P == 0) return;
  gram_ = gp.gram();
  gram_llt_ = factor_gram(gram_, "draw_function");
  FunctionEval e;
  for (int j = 0; j < P; ++j) {
    prior_eval(inducing_.row(j).transpose(), 1, e);
    prior_at_inducing_[j] = e.value;
    prior_grad_at_inducing_.row(j) = e.gradient.transpose();
  }
  update_ = gram_llt_.solve(targets_ - prior_at_inducing_);
}

SampledFunction SampledFunction::mean_of(const SparseGp& gp) {
  gp.validate();
  SampledFunction f;
  f.kernel_ = gp.kernel();
  f.basis_.frequencies = Mat(0, gp.input_dim());
  f.basis_.signal_variance = f.kernel_.signal_variance;
  f.weights_ = Vec(0);
  f.split_weights();
  f.inducing_ = gp.inducing_inputs;
  f.inv_l2_ = f.kernel_.lengthscales_sq.array().inverse();
  f.targets_ = gp.variational_mean;
  f.update_ = Vec::Zero(gp.inducing_count());
  if (gp.inducing_count() > 0)
    f.update_ = factor_gram(gp.gram(), "mean_of").solve(gp.variational_mean);
  return f;
}

SampledFunction SampledFunction::from_parts(FeatureBasis basis, Vec weights, Mat inducing,
                                            Vec update_coeffs, const ArdKernelParams& kernel) {
  kernel.validate();
  if (basis.frequencies.cols() != kernel.dim() || inducing.cols() != kernel.dim() ||
      update_coeffs.size() != inducing.rows())
    throw std::invalid_argument("SampledFunction::from_parts: inconsistent sizes");
  SampledFunction f;
  f.kernel_ = kernel;
  f.basis_ = std::move(basis);
  f.weights_ = std::move(weights);
  f.split_weights();
  f.inducing_ = std::move(inducing);
  f.inv_l2_ = kernel.lengthscales_sq.array().inverse();
  f.update_ = std::move(update_coeffs);
  return f;
}

void SampledFunction::prior_eval(const Eigen::Ref<const Vec>& x, int order, FunctionEval& out) const {
  const Eigen::Index S = basis_.frequencies.rows();
  const Eigen::Index d = basis_.frequencies.cols();
  out.value = 0.0;
  if (order >= 1) out.gradient = Vec::Zero(d);
  if (order >= 2) out.hessian = Mat::Zero(d, d);
  if (S == 0) return;
  const Vec t = basis_.frequencies * x;
  Vec gcoef(order >= 1 ? S : 0);
  Vec hcoef(order >= 2 ? S : 0);
  double value = 0.0;
  for (Eigen::Index i = 0; i < S; ++i) {
    double s, c;
    ::sincos(t[i], &s, &c);
    const double term = w_cos_[i] * c + w_sin_[i] * s;
    value += term;
    if (order >= 1) gcoef[i] = amp_ * (w_sin_[i] * c - w_cos_[i] * s);
    if (order >= 2) hcoef[i] = -amp_ * term;
  }
  out.value = amp_ * value;
  if (order >= 1) out.gradient.noalias() = basis_.frequencies.transpose() * gcoef;
  if (order >= 2)
    out.hessian.noalias() = basis_.frequencies.transpose() * hcoef.asDiagonal() * basis_.frequencies;
}

FunctionEval SampledFunction::evaluate(const Eigen::Ref<const Vec>& x, int order) const {
  if (x.size() != input_dim()) throw std::invalid_argument("SampledFunction: dimension mismatch");
  FunctionEval out;
  prior_eval(x, order, out);
  const double sf2 = kernel_.signal_variance;
  for (Eigen::Index j = 0; j < inducing_.rows(); ++j) {
    const Eigen::ArrayXd diff = x.array() - inducing_.row(j).transpose().array();
    const Eigen::ArrayXd dd = diff * inv_l2_;
    const double kj = sf2 * std::exp(-0.5 * (diff * dd).sum());
    const double vk = update_[j] * kj;
    out.value += vk;
    if (order >= 1) out.gradient.array() -= vk * dd;
    if (order >= 2) {
      out.hessian.noalias() += vk * (dd.matrix() * dd.matrix().transpose());
      out.hessian.diagonal().array() -= vk * inv_l2_;
    }
  }
  return out;
}

double SampledFunction::value(const Eigen::Ref<const Vec>& x) const { return evaluate(x, 0).value; }

Vec SampledFunction::gradient(const Eigen::Ref<const Vec>& x) const {
  return evaluate(x, 1).gradient;
}

Mat SampledFunction::hessian(const Eigen::Ref<const Vec>& x) const { return evaluate(x, 2).hessian; }

FunctionAdjoint SampledFunction::zero_adjoint() const {
  FunctionAdjoint adj;
  adj.set_zero(inducing_count(), input_dim());
  return adj;
}

void SampledFunction::pullback_value(const Eigen::Ref<const Vec>& x, double c, FunctionAdjoint& adj,
                                     Eigen::Ref<Vec> x_bar) const {
  if (c == 0.0) return;
  FunctionEval prior;
  prior_eval(x, 1, prior);
  // The prior amplitude scales with sqrt(sf2); frequencies scale with 1/l,
  // so d/dlog(l_k^2) of the prior equals -x_k/2 times its x_k-derivative.
  adj.log_signal_variance += 0.5 * c * prior.value;
  adj.log_lengthscales_sq.array() -= 0.5 * c * x.array() * prior.gradient.array();
  x_bar += c * prior.gradient;

  const double sf2 = kernel_.signal_variance;
  for (Eigen::Index j = 0; j < inducing_.rows(); ++j) {
    const Eigen::ArrayXd diff = x.array() - inducing_.row(j).transpose().array();
    const Eigen::ArrayXd dd = diff * inv_l2_;
    const double kj = sf2 * std::exp(-0.5 * (diff * dd).sum());
    adj.update_coeffs[j] += c * kj;
    const double t = c * update_[j] * kj;
    adj.inducing.row(j).array() += t * dd.transpose();
    x_bar.array() -= t * dd;
    adj.log_signal_variance += t;
    adj.log_lengthscales_sq.array() += 0.5 * t * diff * dd;
  }
}

void SampledFunction::pullback_gradient(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u,
                                        FunctionAdjoint& adj, Eigen::Ref<Vec> x_bar) const {
  const Eigen::Index S = basis_.frequencies.rows();
  if (S > 0) {
    const Vec t = basis_.frequencies * x;
    const Vec wu = basis_.frequencies * u;
    Vec gcoef(S), hw(S);
    for (Eigen::Index i = 0; i < S; ++i) {
      double s, c;
      ::sincos(t[i], &s, &c);
      gcoef[i] = amp_ * (w_sin_[i] * c - w_cos_[i] * s);
      hw[i] = -amp_ * (w_cos_[i] * c + w_sin_[i] * s) * wu[i];
    }
    const Vec grad = basis_.frequencies.transpose() * gcoef;
    const Vec hess_u = basis_.frequencies.transpose() * hw;
    x_bar += hess_u;
    adj.log_signal_variance += 0.5 * gcoef.dot(wu);
    adj.log_lengthscales_sq.array() -= 0.5 * (x.array() * hess_u.array() + u.array() * grad.array());
  }

  const double sf2 = kernel_.signal_variance;
  const Eigen::ArrayXd u_l2 = u.array() * inv_l2_;
  for (Eigen::Index j = 0; j < inducing_.rows(); ++j) {
    const Eigen::ArrayXd diff = x.array() - inducing_.row(j).transpose().array();
    const Eigen::ArrayXd dd = diff * inv_l2_;
    const double kj = sf2 * std::exp(-0.5 * (diff * dd).sum());
    const double a = -(u.array() * dd).sum();  // u . grad k_j / k_j
    const double vk = update_[j] * kj;
    const Eigen::ArrayXd gx = vk * (-dd * a - u_l2);
    x_bar.array() += gx;
    adj.inducing.row(j).array() -= gx.transpose();
    adj.update_coeffs[j] += kj * a;
    adj.log_signal_variance += vk * a;
    adj.log_lengthscales_sq.array() += vk * (0.5 * a * diff * dd + u.array() * dd);
  }
}

Vec SampledFunction::parameter_gradient(const FunctionAdjoint& adj) const {
  if (!differentiable_)
    throw std::logic_error("SampledFunction: draw was not built from a SparseGp; no parameter gradient");
  const GpLayout L{inducing_count(), input_dim()};
  Vec grad = Vec::Zero(L.size());
  for (int j = 0; j < L.P; ++j)
    for (int k = 0; k < L.d; ++k) grad[L.inducing() + j * L.d + k] = adj.inducing(j, k);
  grad[L.log_signal_variance()] = adj.log_signal_variance;
  grad.segment(L.log_lengthscales_sq(), L.d) = adj.log_lengthscales_sq;
  if (L.P == 0) return grad;

  // v = K^-1 r with r = z - prior(xi).
  const Vec r_bar = gram_llt_.solve(adj.update_coeffs);
  const Mat K_bar = -r_bar * update_.transpose();
  accumulate_gram_pullback(inducing_, kernel_, gram_, K_bar, grad);

  for (int j = 0; j < L.P; ++j) {
    const double c = -r_bar[j];
    for (int k = 0; k < L.d; ++k) grad[L.inducing() + j * L.d + k] += c * prior_grad_at_inducing_(j, k);
    grad[L.log_signal_variance()] += 0.5 * c * prior_at_inducing_[j];
    grad.segment(L.log_lengthscales_sq(), L.d).array() -=
        0.5 * c * inducing_.row(j).transpose().array() * prior_grad_at_inducing_.row(j).transpose().array();
  }

  // z = mu + exp(log_var / 2) * eps.
  grad.segment(L.mean(), L.P) += r_bar;
  grad.segment(L.log_var(), L.P).array() +=
      r_bar.array() * target_normals_.array() * 0.5 * (0.5 * log_var_.array()).exp();
  return grad;
}

SampledFunction draw_function(const SparseGp& gp, int feature_count, Rng& rng) {
  return SampledFunction(gp, sample_draw_noise(gp, feature_count, rng));
}

}  // namespace gpdyn
