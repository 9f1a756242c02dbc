#include "gpdyn/kernel.hpp"

#include <cmath>
#include <numbers>

namespace gpdyn {

ArdKernelParams::ArdKernelParams(double signal_variance_, Vec lengthscales_sq_)
    : signal_variance(signal_variance_), lengthscales_sq(std::move(lengthscales_sq_)) {
  validate();
}

ArdKernelParams ArdKernelParams::isotropic(double signal_variance, double lengthscale_sq, int dim) {
  return ArdKernelParams(signal_variance, Vec::Constant(dim, lengthscale_sq));
}

void ArdKernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw std::invalid_argument("ARD kernel: signal variance must be positive");
  if (lengthscales_sq.size() == 0)
    throw std::invalid_argument("ARD kernel: need at least one input dimension");
  for (Eigen::Index i = 0; i < lengthscales_sq.size(); ++i)
    if (!(lengthscales_sq[i] > 0.0) || !std::isfinite(lengthscales_sq[i]))
      throw std::invalid_argument("ARD kernel: squared lengthscales must be positive");
}

namespace {

void check_dim(const ArdKernelParams& params, Eigen::Index n, const char* what) {
  if (n != params.lengthscales_sq.size())
    throw std::invalid_argument(std::string("ARD kernel: dimension mismatch in ") + what +
                                " (got " + std::to_string(n) + ", expected " +
                                std::to_string(params.lengthscales_sq.size()) + ")");
}

}  // namespace

double kernel_eval(const ArdKernelParams& params, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& y) {
  check_dim(params, x.size(), "x");
  check_dim(params, y.size(), "y");
  const double r2 = ((x - y).array().square() / params.lengthscales_sq.array()).sum();
  return params.signal_variance * std::exp(-0.5 * r2);
}

Mat kernel_matrix(const ArdKernelParams& params, const Eigen::Ref<const Mat>& X,
                  const Eigen::Ref<const Mat>& Y) {
  check_dim(params, X.cols(), "X");
  check_dim(params, Y.cols(), "Y");
  const Eigen::ArrayXd inv_l2 = params.lengthscales_sq.array().inverse();
  Mat K(X.rows(), Y.rows());
  for (Eigen::Index j = 0; j < Y.rows(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double r2 = ((X.row(i) - Y.row(j)).array().square().transpose() * inv_l2).sum();
      K(i, j) = params.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return K;
}

FeatureBasis make_feature_basis(const ArdKernelParams& params, const Mat& standard_normals) {
  check_dim(params, standard_normals.cols(), "feature normals");
  if (standard_normals.rows() < 1)
    throw std::invalid_argument("feature basis: need at least one frequency");
  FeatureBasis basis;
  const Eigen::RowVectorXd inv_l = params.lengthscales_sq.array().sqrt().inverse().matrix().transpose();
  basis.frequencies = standard_normals.array().rowwise() * inv_l.array();
  basis.signal_variance = params.signal_variance;
  return basis;
}

FeatureBasis sample_feature_basis(const ArdKernelParams& params, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("feature basis: S must be at least 1");
  params.validate();
  return make_feature_basis(params, standard_normal_matrix(rng, count, params.dim()));
}

Vec feature_map(const FeatureBasis& basis, const Eigen::Ref<const Vec>& x) {
  if (x.size() != basis.dim())
    throw std::invalid_argument("feature_map: dimension mismatch");
  const int S = basis.count();
  const double amp = std::sqrt(basis.signal_variance / S);
  const Vec t = basis.frequencies * x;
  Vec phi(2 * S);
  for (int i = 0; i < S; ++i) {
    phi[2 * i] = amp * std::cos(t[i]);
    phi[2 * i + 1] = amp * std::sin(t[i]);
  }
  return phi;
}

double gaussian_kl(const GaussianMoments& q, const GaussianMoments& p, double jitter) {
  const Eigen::Index n = q.mean.size();
  if (p.mean.size() != n || q.covariance.rows() != n || q.covariance.cols() != n ||
      p.covariance.rows() != n || p.covariance.cols() != n)
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  Mat Kp = p.covariance;
  if (jitter > 0.0) Kp.diagonal().array() += jitter * Kp.diagonal().mean();
  Eigen::LLT<Mat> llt(Kp);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian_kl: covariance of p is not positive definite after jitter " +
                         std::to_string(jitter));
  Eigen::LLT<Mat> lq(q.covariance);
  if (lq.info() != Eigen::Success)
    throw NumericalError("gaussian_kl: covariance of q is not positive definite");
  const Vec diff = p.mean - q.mean;
  const double trace = llt.solve(q.covariance).trace();
  const double maha = diff.dot(llt.solve(diff));
  const double logdet_p = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  const double logdet_q = 2.0 * Mat(lq.matrixL()).diagonal().array().log().sum();
  return 0.5 * (trace + maha - static_cast<double>(n) + logdet_p - logdet_q);
}

double gaussian_log_density(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_log_density: variance must be positive");
  const double r = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - r * r / (2.0 * variance);
}

}  // namespace gpdyn
