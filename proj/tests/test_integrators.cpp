#include <cmath>

#include "doctest.h"
#include "gpdyn/integrators.hpp"

using namespace gpdyn;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

FunctionField linear_field(const Mat& J) {
  return FunctionField(static_cast<int>(J.rows()), [J](const Vec& x) { return Vec(J * x); },
                       [J](const Vec&) { return J; });
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Pendulum-like separable field, state (p, q).
const FunctionField pendulum(2, [](const Vec& x) { return vec2(-6.0 * std::sin(x[1]), x[0]); });

}  // namespace

TEST_CASE("tableaux") {
  for (const auto& t : {ButcherTableau::explicit_euler(), ButcherTableau::heun(),
                        ButcherTableau::implicit_midpoint(), ButcherTableau::radau_ia()})
    CHECK(t.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ButcherTableau::explicit_euler().is_explicit());
  CHECK(ButcherTableau::heun().is_explicit());
  CHECK_FALSE(ButcherTableau::implicit_midpoint().is_explicit());
  CHECK_FALSE(ButcherTableau::radau_ia().is_explicit());
  CHECK(ButcherTableau::from_name("radau_ia").order == 3);
  CHECK_THROWS_AS(ButcherTableau::from_name("rk45"), std::invalid_argument);
  CHECK_THROWS_AS(ButcherTableau("bad", Mat::Zero(1, 1), scalar(0.9), 1), std::invalid_argument);
  CHECK_THROWS_AS(Stepper(ButcherTableau::heun(), 0.0), std::invalid_argument);
  SolverSettings s;
  s.max_iterations = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("stage solutions") {
  const FunctionField decay = linear_field(-Mat::Identity(1, 1));
  Rng rng(1);
  const Vec x3 = standard_normal_vector(rng, 2);
  const StageSolution e = solve_stages(Stepper(ButcherTableau::explicit_euler(), 0.3), pendulum, x3);
  CHECK(e.stages == pendulum.eval(x3));
  CHECK(e.residual == 0.0);

  const StageSolution m = solve_stages(Stepper(ButcherTableau::implicit_midpoint(), 0.1), decay, scalar(1.0));
  CHECK(m.stages[0] == doctest::Approx(-1.0 / 1.05).epsilon(1e-10));
  CHECK(m.residual <= 1e-10);

  // Radau IA on a linear field against the dense block solve.
  Mat J(2, 2);
  J << -0.3, 1.2, -0.9, -0.1;
  const double h = 0.4;
  const ButcherTableau rad = ButcherTableau::radau_ia();
  const Vec x = vec2(0.7, -1.1);
  Mat M = Mat::Identity(4, 4);
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 2; ++l) M.block(2 * j, 2 * l, 2, 2) -= h * rad.stage_matrix(j, l) * J;
  Vec rhs(4);
  rhs << J * x, J * x;
  const Vec oracle = M.lu().solve(rhs);
  const StageSolution r = solve_stages(Stepper(rad, h), linear_field(J), x);
  CHECK((r.stages - oracle).cwiseAbs().maxCoeff() < 1e-8);

  // Same with the finite-difference Jacobian default.
  const FunctionField fd_field(2, [J](const Vec& y) { return Vec(J * y); });
  CHECK((solve_stages(Stepper(rad, h), fd_field, x).stages - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("explicit recursion agrees with the least-squares solver") {
  SolverSettings forced;
  forced.force_iterative = true;
  Rng rng(5);
  for (const auto& tab : {ButcherTableau::explicit_euler(), ButcherTableau::heun()}) {
    for (int i = 0; i < 10; ++i) {
      const Vec x = standard_normal_vector(rng, 2);
      const Vec a = solve_stages(Stepper(tab, 0.1), pendulum, x).stages;
      const Vec b = solve_stages(Stepper(tab, 0.1, forced), pendulum, x).stages;
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("non-convergence is reported") {
  SolverSettings tight;
  tight.max_iterations = 1;
  tight.residual_tolerance = 1e-15;
  const FunctionField stiff(1, [](const Vec& x) { return Vec(x.array().cube() * 50.0 + 3.0 * x.array().sin()); });
  CHECK_THROWS_AS(solve_stages(Stepper(ButcherTableau::implicit_midpoint(), 0.5, tight), stiff, scalar(2.0)),
                  NonConvergence);
  try {
    integrate(Stepper(ButcherTableau::implicit_midpoint(), 0.5, tight), stiff, scalar(2.0), 3);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.step_index == 0);
  }
}

TEST_CASE("single steps") {
  const FunctionField growth = linear_field(Mat::Identity(1, 1));
  const FunctionField decay = linear_field(-Mat::Identity(1, 1));
  CHECK(rk_step(Stepper(ButcherTableau::explicit_euler(), 0.1), growth, scalar(1.0))[0] ==
        doctest::Approx(1.1).epsilon(1e-15));
  CHECK(rk_step(Stepper(ButcherTableau::heun(), 0.1), growth, scalar(1.0))[0] ==
        doctest::Approx(1.105).epsilon(1e-15));
  CHECK(rk_step(Stepper(ButcherTableau::implicit_midpoint(), 0.1), decay, scalar(1.0))[0] ==
        doctest::Approx(0.95 / 1.05).epsilon(1e-10));
}

TEST_CASE("symplectic Euler") {
  auto id = [](const Vec& v) { return v; };
  const auto [p1, q1] = symplectic_euler_step(id, id, scalar(0.0), scalar(1.0), 0.1);
  CHECK(p1[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(q1[0] == doctest::Approx(0.99).epsilon(1e-15));

  auto zero = [](const Vec& v) { return Vec(Vec::Zero(v.size())); };
  Vec p = vec2(0.5, -0.2), q = vec2(1.0, 2.0);
  for (int k = 0; k < 10; ++k) std::tie(p, q) = symplectic_euler_step(zero, id, p, q, 0.1);
  CHECK(p == vec2(0.5, -0.2));
  CHECK((q - vec2(1.5, 1.8)).cwiseAbs().maxCoeff() < 1e-14);

  auto vprime = [](const Vec& qq) { return Vec(6.0 * qq.array().sin()); };
  auto step = [&](const Vec& x) {
    const auto [pn, qn] = symplectic_euler_step(vprime, id, x.head(1), x.tail(1), 0.1);
    return vec2(pn[0], qn[0]);
  };
  Rng rng(4);
  for (int i = 0; i < 10; ++i)
    CHECK(std::abs(step_jacobian(step, 2.0 * standard_normal_vector(rng, 2)).determinant() - 1.0) < 1e-8);
}

TEST_CASE("implicit midpoint on Hamiltonian fields") {
  auto grad_h = [](const Vec& x) { return x; };
  Vec x = vec2(0.3, 1.0);
  const double r0 = x.squaredNorm();
  double drift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    x = implicit_midpoint_hamiltonian_step(grad_h, x, 0.1);
    drift = std::max(drift, std::abs(x.squaredNorm() - r0));
  }
  CHECK(drift <= 1e-8);

  const Vec x0 = vec2(0.4, -0.7);
  double prev = 1.0;
  for (double h : {1e-1, 1e-2, 1e-3}) {
    const double gap = (implicit_midpoint_hamiltonian_step(grad_h, x0, h) - x0).norm();
    CHECK(gap < prev);
    CHECK(gap <= 2.0 * h * x0.norm());
    prev = gap;
  }

  // Linear H = x^T M x / 2 gives the Cayley map.
  Mat M(2, 2);
  M << 2.0, 0.3, 0.3, 0.5;
  Mat Jinv(2, 2);
  Jinv << 0.0, -1.0, 1.0, 0.0;
  const double h = 0.2;
  const Mat A = Jinv * M;
  const Mat I = Mat::Identity(2, 2);
  const Vec cayley = (I - 0.5 * h * A).lu().solve((I + 0.5 * h * A) * x0);
  const Vec step = implicit_midpoint_hamiltonian_step([M](const Vec& y) { return Vec(M * y); }, x0, h, {},
                                                     [M](const Vec&) { return M; });
  CHECK((step - cayley).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(implicit_midpoint_hamiltonian_step(grad_h, Vec::Zero(3), 0.1), std::invalid_argument);
}

TEST_CASE("fixed-step integration") {
  const FunctionField decay = linear_field(-Mat::Identity(1, 1));
  const Stepper mid(ButcherTableau::implicit_midpoint(), 0.1);
  const Trajectory t0 = integrate(mid, decay, scalar(1.0), 0);
  CHECK(t0.size() == 1);
  CHECK(t0.states(0, 0) == 1.0);

  const FunctionField zero(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  const Trajectory tz = integrate(Stepper(ButcherTableau::radau_ia(), 0.1), zero, vec2(1, 2), 10);
  for (int k = 0; k <= 10; ++k) CHECK(tz.state(k) == vec2(1, 2));
  CHECK(tz.times[10] == doctest::Approx(1.0));

  const Trajectory td = integrate(mid, decay, scalar(1.0), 100);
  CHECK(td.states(100, 0) == doctest::Approx(std::pow(0.95 / 1.05, 100)).epsilon(1e-8));
}

TEST_CASE("local error orders") {
  const FunctionField decay = linear_field(-Mat::Identity(1, 1));
  for (const auto& tab : {ButcherTableau::explicit_euler(), ButcherTableau::heun(),
                          ButcherTableau::implicit_midpoint(), ButcherTableau::radau_ia()}) {
    SolverSettings tight;
    tight.residual_tolerance = 1e-14;
    std::vector<double> lh, le;
    for (double h : {0.2, 0.1, 0.05, 0.025}) {
      const double err = std::abs(rk_step(Stepper(tab, h, tight), decay, scalar(1.0))[0] - std::exp(-h));
      lh.push_back(std::log(h));
      le.push_back(std::log(err));
    }
    // Least-squares slope.
    const double mh = (lh[0] + lh[1] + lh[2] + lh[3]) / 4, me = (le[0] + le[1] + le[2] + le[3]) / 4;
    double num = 0, den = 0;
    for (int i = 0; i < 4; ++i) {
      num += (lh[i] - mh) * (le[i] - me);
      den += (lh[i] - mh) * (lh[i] - mh);
    }
    CAPTURE(tab.name);
    CHECK(std::abs(num / den - (tab.order + 1)) <= 0.2);
  }
}

TEST_CASE("midpoint preserves quadratic invariants of tangent fields") {
  // x^T f(x) = 0 for a skew-symmetric, state-dependent generator.
  const FunctionField spin(3, [](const Vec& x) {
    Vec f(3);
    f << x[1] * x[2], -2.0 * x[0] * x[2], x[0] * x[1];
    return f;
  });
  Vec x(3);
  x << 0.6, 0.0, 0.8;
  Stepper mid(ButcherTableau::implicit_midpoint(), 0.1);
  mid.solver.residual_tolerance = 1e-13;
  const Trajectory t = integrate(mid, spin, x, 300);
  for (Eigen::Index k = 0; k < t.size(); ++k) CHECK(std::abs(t.state(k).squaredNorm() - 1.0) < 1e-10);
}

TEST_CASE("adaptive integration") {
  const FunctionField zero(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  const Trajectory tz = integrate_adaptive(ButcherTableau::heun(), zero, vec2(1, -1), 0.0, 7.0, 1e-6, 1e-9);
  CHECK(tz.size() == 2);
  CHECK(tz.state(1) == vec2(1, -1));

  const FunctionField decay = linear_field(-Mat::Identity(1, 1));
  const Trajectory t1 = integrate_adaptive(ButcherTableau::heun(), decay, scalar(1.0), 0.0, 5.0, 1e-6, 1e-12);
  const double e1 = std::abs(t1.states(t1.size() - 1, 0) - std::exp(-5.0));
  CHECK(t1.times[t1.size() - 1] == 5.0);
  CHECK(e1 <= 1e-5);
  const Trajectory t2 = integrate_adaptive(ButcherTableau::heun(), decay, scalar(1.0), 0.0, 5.0, 1e-8, 1e-12);
  const double e2 = std::abs(t2.states(t2.size() - 1, 0) - std::exp(-5.0));
  CHECK(e2 * 10.0 <= e1);

  Vec grid(6);
  grid << 0.0, 0.5, 1.0, 1.5, 2.0, 2.5;
  const Trajectory g = integrate_adaptive_on_grid(ButcherTableau::radau_ia(), decay, scalar(1.0), grid, 1e-10, 1e-12);
  for (int k = 0; k < 6; ++k) CHECK(g.states(k, 0) == doctest::Approx(std::exp(-grid[k])).epsilon(1e-8));

  const FunctionField blowup(1, [](const Vec& x) { return Vec(x.array().square()); });
  CHECK_THROWS_AS(integrate_adaptive(ButcherTableau::heun(), blowup, scalar(1.0), 0.0, 2.0, 1e-8, 1e-8),
                  StepSizeUnderflow);
  CHECK_THROWS_AS(integrate_adaptive(ButcherTableau::heun(), decay, scalar(1.0), 0.0, 1.0, 0.0, 1e-8),
                  std::invalid_argument);
}

TEST_CASE("step Jacobians") {
  const FunctionField zero(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  const Stepper euler(ButcherTableau::explicit_euler(), 0.1);
  CHECK((step_jacobian(euler, zero, vec2(0.3, 0.2)) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

  const FunctionField rotation(2, [](const Vec& x) { return vec2(-x[1], x[0]); });
  const Mat J = step_jacobian(euler, rotation, vec2(1.0, -2.0));
  Mat expected(2, 2);
  expected << 1.0, -0.1, 0.1, 1.0;
  CHECK((J - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(J.determinant() == doctest::Approx(1.01).epsilon(1e-10));
}
