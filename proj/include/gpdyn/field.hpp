#pragma once

#include <functional>
#include <vector>

#include "gpdyn/sparse_gp.hpp"

namespace gpdyn {

/// Autonomous vector field x -> f(x) on R^d.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual int dim() const = 0;
  virtual Vec eval(const Vec& x) const = 0;
  /// Defaults to forward differences.
  virtual Mat jacobian(const Vec& x) const;
};

/// Adapter for plain callables; without a Jacobian callable the forward
/// difference default applies.
class FunctionField final : public VectorField {
 public:
  using Fn = std::function<Vec(const Vec&)>;
  using JacFn = std::function<Mat(const Vec&)>;

  FunctionField(int dim, Fn f, JacFn jac = {}) : dim_(dim), f_(std::move(f)), jac_(std::move(jac)) {}

  int dim() const override { return dim_; }
  Vec eval(const Vec& x) const override { return f_(x); }
  Mat jacobian(const Vec& x) const override {
    return jac_ ? jac_(x) : VectorField::jacobian(x);
  }

 private:
  int dim_;
  Fn f_;
  JacFn jac_;
};

Mat forward_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x);

/// Cotangent storage for a parametric field: one block per sampled function
/// plus free-form storage for fields with direct parameters.
struct FieldAdjoint {
  std::vector<FunctionAdjoint> functions;
  Vec direct;
};

/// A vector field depending on trainable parameters theta, with a reverse
/// mode product for both x and theta.
class ParametricField : public VectorField {
 public:
  virtual std::size_t parameter_count() const = 0;
  virtual FieldAdjoint zero_adjoint() const = 0;
  /// Adds cot^T df/dtheta (at x) into adj and returns (df/dx)^T cot.
  virtual Vec pullback(const Vec& x, const Vec& cot, FieldAdjoint& adj) const = 0;
  /// Flattened d(accumulated objective)/d theta.
  virtual Vec parameter_gradient(const FieldAdjoint& adj) const = 0;
};

}  // namespace gpdyn
