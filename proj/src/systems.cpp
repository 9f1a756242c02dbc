#include "gpdyn/systems.hpp"

#include <cmath>
#include <map>

namespace gpdyn {

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// H = 1 - 6 cos q + p^2 / 2
SystemSpec pendulum() {
  SystemSpec s;
  s.name = "pendulum";
  s.state_dim = 2;
  s.field = [](const Vec& x) { return vec({-6.0 * std::sin(x[1]), x[0]}); };
  s.jacobian = [](const Vec& x) {
    Mat J(2, 2);
    J << 0.0, -6.0 * std::cos(x[1]), 1.0, 0.0;
    return J;
  };
  s.energy = [](const Vec& x) { return 1.0 - 6.0 * std::cos(x[1]) + 0.5 * x[0] * x[0]; };
  return s;
}

// H = |p|^2 / 2 - 1 / |q1 - q2|, unit masses, state (p1, p2, q1, q2).
double separation(const Vec& x) {
  const double r = (x.segment<2>(4) - x.segment<2>(6)).norm();
  if (!(r > 1e-9)) throw NumericalError("two_body: coincident particles");
  return r;
}

SystemSpec two_body() {
  SystemSpec s;
  s.name = "two_body";
  s.state_dim = 8;
  s.field = [](const Vec& x) {
    const double r = separation(x);
    const Eigen::Vector2d d = x.segment<2>(4) - x.segment<2>(6);
    const Eigen::Vector2d a = d / (r * r * r);
    Vec f(8);
    f.segment<2>(0) = -a;
    f.segment<2>(2) = a;
    f.tail(4) = x.head(4);
    return f;
  };
  s.jacobian = [](const Vec& x) {
    const double r = separation(x);
    const Eigen::Vector2d d = x.segment<2>(4) - x.segment<2>(6);
    // d(d / r^3)/dd
    const Eigen::Matrix2d G = Eigen::Matrix2d::Identity() / std::pow(r, 3) - 3.0 * d * d.transpose() / std::pow(r, 5);
    Mat J = Mat::Zero(8, 8);
    J.block<2, 2>(0, 4) = -G;
    J.block<2, 2>(0, 6) = G;
    J.block<2, 2>(2, 4) = G;
    J.block<2, 2>(2, 6) = -G;
    J.block(4, 0, 4, 4) = Mat::Identity(4, 4);
    return J;
  };
  s.energy = [](const Vec& x) { return 0.5 * x.head(4).squaredNorm() - 1.0 / separation(x); };
  return s;
}

// H = (q^2 + 1)(p^2 + 1) / 2
SystemSpec non_separable() {
  SystemSpec s;
  s.name = "non_separable";
  s.state_dim = 2;
  s.field = [](const Vec& x) {
    const double p = x[0], q = x[1];
    return vec({-q * (p * p + 1.0), p * (q * q + 1.0)});
  };
  s.jacobian = [](const Vec& x) {
    const double p = x[0], q = x[1];
    Mat J(2, 2);
    J << -2.0 * p * q, -(p * p + 1.0), q * q + 1.0, 2.0 * p * q;
    return J;
  };
  s.energy = [](const Vec& x) { return 0.5 * (x[1] * x[1] + 1.0) * (x[0] * x[0] + 1.0); };
  return s;
}

// x' = A(x) x with A antisymmetric; E = x1^2/2 + x2^2 + 3 x3^2/2.
Mat rigid_matrix(const Vec& x) {
  Mat A(3, 3);
  A << 0.0, 1.5 * x[2], -x[1],
      -1.5 * x[2], 0.0, 0.5 * x[0],
      x[1], -0.5 * x[0], 0.0;
  return A;
}

SystemSpec rigid_body() {
  SystemSpec s;
  s.name = "rigid_body";
  s.state_dim = 3;
  s.field = [](const Vec& x) -> Vec { return rigid_matrix(x) * x; };
  s.jacobian = [](const Vec& x) {
    // f = (x2 x3 / 2, -x1 x3, x1 x2 / 2)
    Mat J(3, 3);
    J << 0.0, 0.5 * x[2], 0.5 * x[1],
        -x[2], 0.0, -x[0],
        0.5 * x[1], 0.5 * x[0], 0.0;
    return J;
  };
  s.energy = [](const Vec& x) { return 0.5 * x[0] * x[0] + x[1] * x[1] + 1.5 * x[2] * x[2]; };
  return s;
}

const std::map<std::string, SystemSpec>& registry() {
  static const std::map<std::string, SystemSpec> r = {
      {"pendulum", pendulum()},
      {"two_body", two_body()},
      {"non_separable", non_separable()},
      {"rigid_body", rigid_body()},
  };
  return r;
}

int steps_of(double horizon, double dt) {
  const double n = horizon / dt;
  const double r = std::round(n);
  if (!(r >= 1.0) || std::abs(n - r) > 1e-9 * std::max(1.0, r))
    throw std::invalid_argument("experiment: horizon must be a positive multiple of dt");
  return static_cast<int>(r);
}

}  // namespace

const SystemSpec& system_spec(const std::string& name) {
  const auto& r = registry();
  auto it = r.find(name);
  if (it == r.end()) throw std::invalid_argument("unknown system '" + name + "'");
  return it->second;
}

std::vector<std::string> system_names() { return {"pendulum", "two_body", "non_separable", "rigid_body"}; }

FunctionField system_field(const SystemSpec& spec) { return FunctionField(spec.state_dim, spec.field, spec.jacobian); }

Trajectory reference_trajectory(const SystemSpec& spec, const Vec& x0, double dt, int n_steps) {
  if (x0.size() != spec.state_dim) throw std::invalid_argument("reference_trajectory: state dimension mismatch");
  if (!(dt > 0.0) || n_steps < 0) throw std::invalid_argument("reference_trajectory: bad grid");
  const FunctionField f = system_field(spec);
  AdaptiveOptions opt;
  opt.solver.residual_tolerance = 1e-13;
  opt.solver.max_iterations = 200;
  opt.min_step = 1e-10;
  opt.local_extrapolation = true;
  Vec times(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) times[k] = k * dt;
  return integrate_adaptive_on_grid(ButcherTableau::radau_ia(), f, x0, times, 1e-10, 1e-12, opt);
}

Trajectory add_noise(const Trajectory& traj, const Vec& variances, Rng& rng) {
  if (variances.size() != traj.dim()) throw std::invalid_argument("add_noise: one variance per dimension required");
  if ((variances.array() < 0.0).any() || !variances.allFinite())
    throw std::invalid_argument("add_noise: variances must be non-negative");
  Trajectory out = traj;
  const Vec sd = variances.cwiseSqrt();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < out.size(); ++k)
    for (Eigen::Index i = 0; i < out.dim(); ++i) out.states(k, i) += sd[i] * normal(rng);
  out.noise_variances = variances;
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::sgpd: return "sgpd";
    case Method::euler: return "euler";
    case Method::heun: return "heun";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "sgpd") return Method::sgpd;
  if (s == "euler") return Method::euler;
  if (s == "heun") return Method::heun;
  throw std::invalid_argument("unknown method '" + s + "'");
}

InducingInit InducingInit::grid(Vec lower, Vec upper, Eigen::VectorXi points) {
  InducingInit g;
  g.kind = Kind::grid;
  g.lower = std::move(lower);
  g.upper = std::move(upper);
  g.points = std::move(points);
  return g;
}

InducingInit InducingInit::gaussian(Vec mean, Vec stddev, int count) {
  InducingInit g;
  g.kind = Kind::gaussian;
  g.mean = std::move(mean);
  g.stddev = std::move(stddev);
  g.count = count;
  return g;
}

int InducingInit::dim() const {
  return static_cast<int>(kind == Kind::grid ? lower.size() : mean.size());
}

int InducingInit::inducing_count() const {
  return kind == Kind::grid ? points.prod() : count;
}

Mat InducingInit::place(Rng& rng) const {
  const int d = dim();
  const int P = inducing_count();
  if (P < 1) throw std::invalid_argument("inducing init: no points");
  Mat X(P, d);
  if (kind == Kind::gaussian) {
    if (stddev.size() != d) throw std::invalid_argument("inducing init: mean/stddev size mismatch");
    for (int r = 0; r < P; ++r) X.row(r) = (mean + stddev.cwiseProduct(standard_normal_vector(rng, d))).transpose();
    return X;
  }
  if (upper.size() != d || points.size() != d) throw std::invalid_argument("inducing init: grid size mismatch");
  // First dimension varies slowest.
  for (int r = 0; r < P; ++r) {
    int rem = r;
    for (int c = d - 1; c >= 0; --c) {
      const int n = points[c];
      const int i = rem % n;
      rem /= n;
      X(r, c) = n == 1 ? lower[c] : lower[c] + (upper[c] - lower[c]) * i / (n - 1);
    }
  }
  return X;
}

int ExperimentConfig::train_points() const { return steps_of(train_horizon, dt) + 1; }
int ExperimentConfig::predict_steps() const { return steps_of(predict_horizon, dt); }

void ExperimentConfig::validate() const {
  const SystemSpec& spec = system_spec(system);
  if (x0.size() != spec.state_dim) throw std::invalid_argument("experiment: x0 has the wrong dimension");
  if (!(dt > 0.0)) throw std::invalid_argument("experiment: dt must be positive");
  train_points();
  predict_steps();
  if (noise_variances.size() != spec.state_dim || (noise_variances.array() < 0.0).any())
    throw std::invalid_argument("experiment: one non-negative noise variance per dimension required");
  if (gps.empty()) throw std::invalid_argument("experiment: no GPs");
  for (const auto& g : gps) {
    g.kernel.validate();
    if (g.inducing.dim() != g.kernel.dim()) throw std::invalid_argument("experiment: inducing/kernel dimension mismatch");
    if (!(g.variance > 0.0) || !(g.mean_stddev >= 0.0)) throw std::invalid_argument("experiment: bad variational init");
  }
  solver.validate();
  train.validate();
  if (train.window_length > train_points())
    throw std::invalid_argument("experiment: window longer than the training trajectory");
}

namespace {

GpInit gp_init(double sf2, Vec l2, double variance, InducingInit inducing) {
  GpInit g;
  g.kernel = ArdKernelParams(sf2, std::move(l2));
  g.variance = variance;
  g.inducing = std::move(inducing);
  return g;
}

Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

void pendulum_config(ExperimentConfig& c) {
  c.x0 = vec({2.0, 2.0});
  c.dt = 0.1;
  c.train_horizon = 10.0;
  c.predict_horizon = 40.0;
  c.noise_variances = vec({0.1, 0.1});
  const double sf2 = 0.01, l2 = std::sqrt(2.0), var = 1e-8;
  if (c.method == Method::sgpd) {
    // V'(q) on q in [-3, 3], T'(p) on p in [-5, 5]
    c.gps.push_back(gp_init(sf2, vec({l2}), var, InducingInit::grid(vec({-3.0}), vec({3.0}), ivec({9}))));
    c.gps.push_back(gp_init(sf2, vec({l2}), var, InducingInit::grid(vec({-5.0}), vec({5.0}), ivec({9}))));
  } else {
    const auto grid = InducingInit::grid(vec({-5.0, -3.0}), vec({5.0, 3.0}), ivec({3, 3}));
    for (int i = 0; i < 2; ++i) c.gps.push_back(gp_init(sf2, vec({l2, l2}), var, grid));
  }
  c.train.batch_size = 1;
  c.train.window_length = 10;
  c.train.elbo = {4.0, 1e-6};
  c.train.epochs = 149;
  c.train.lr_schedule = {{0, 1e-2}};
  c.train.selection.rule = SelectionRule::all;
}

// Squared lengthscales per state dimension (rows p1..p4, q1..q4), four
// input columns for the structured model.
const double kTwoBodyL2[8][4] = {
    {8.52, 4.97, 8.52, 4.97}, {9.0, 4.62, 9.0, 4.62}, {8.52, 4.97, 8.52, 4.97}, {9.0, 4.62, 9.0, 4.62},
    {169, 841, 169, 841},     {256, 324, 129, 324},   {169, 841, 169, 841},     {256, 324, 129, 324},
};

void two_body_config(ExperimentConfig& c) {
  c.x0 = vec({-0.241, 0.313, 0.241, -0.313, 1.144, 0.880, -1.144, -0.880});
  c.dt = 0.15;
  c.train_horizon = 18.75;
  c.predict_horizon = 30.0;
  c.noise_variances = Vec::Constant(8, 1e-3);
  const double sf2 = 1e-4, var = 1e-8;
  const int P = 20;
  const Vec p_mean = Vec::Constant(4, -1.1), p_sd = Vec::Constant(4, 2.2);
  const Vec q_mean = Vec::Constant(4, -0.7), q_sd = Vec::Constant(4, 1.4);
  auto row = [](int i) {
    Vec l(4);
    for (int j = 0; j < 4; ++j) l[j] = kTwoBodyL2[i][j];
    return l;
  };
  if (c.method == Method::sgpd) {
    for (int i = 0; i < 4; ++i) c.gps.push_back(gp_init(sf2, row(i), var, InducingInit::gaussian(q_mean, q_sd, P)));
    for (int i = 4; i < 8; ++i) c.gps.push_back(gp_init(sf2, row(i), var, InducingInit::gaussian(p_mean, p_sd, P)));
  } else {
    Vec mean(8), sd(8);
    mean << p_mean, q_mean;
    sd << p_sd, q_sd;
    for (int i = 0; i < 8; ++i) {
      Vec l(8);
      l << row(i), row(i);
      c.gps.push_back(gp_init(sf2, l, var, InducingInit::gaussian(mean, sd, P)));
    }
  }
  c.train.batch_size = 5;
  c.train.window_length = 50;
  c.train.elbo = {20.0, 1e-6};
  c.train.epochs = 149;
  c.train.lr_schedule = {{0, 1e-2}, {100, 1e-3}};
  c.train.selection.rule = SelectionRule::final_k;
  c.train.selection.final_k = 45;
}

void non_separable_config(ExperimentConfig& c) {
  c.x0 = vec({0.0, -1.5 / 4.0});
  c.dt = 0.1;
  c.train_horizon = 10.0;
  c.predict_horizon = 40.0;
  c.noise_variances = vec({5e-4, 5e-4});
  const double sf2 = 1e-4, var = 1e-7;
  if (c.method == Method::sgpd) {
    c.gps.push_back(gp_init(sf2, vec({2.0, 2.0}), var, InducingInit::grid(vec({-0.5, -0.5}), vec({0.5, 0.5}), ivec({4, 4}))));
    c.train.epochs = 10;
    c.train.lr_schedule = {{0, 1e-4}, {2, 1e-2}, {5, 1e-5}};
    c.train.selection.rule = SelectionRule::final_k;
    c.train.selection.final_k = 5;
  } else {
    const auto grid = InducingInit::grid(vec({-0.5, -0.5}), vec({0.5, 0.5}), ivec({3, 3}));
    for (int i = 0; i < 2; ++i) c.gps.push_back(gp_init(sf2, vec({2.0, 2.0}), var, grid));
    c.train.epochs = 49;
    c.train.lr_schedule = {{0, 1e-3}};
    c.train.selection.rule = SelectionRule::all;
  }
  c.train.batch_size = 1;
  c.train.window_length = 10;
  c.train.elbo = {1.0, 1e-6};
}

void rigid_body_config(ExperimentConfig& c) {
  c.x0 = vec({std::cos(1.1), 0.0, std::sin(1.1)});
  c.dt = 0.1;
  c.train_horizon = 15.0;
  c.predict_horizon = 50.0;
  c.noise_variances = vec({1e-3, 1e-3, 1e-4});
  if (c.method == Method::sgpd) {
    const auto grid = InducingInit::grid(vec({-0.5, -0.7, 0.0}), vec({0.5, 0.7, 0.0}), ivec({3, 3, 1}));
    for (int i = 0; i < 2; ++i) c.gps.push_back(gp_init(1e-3, vec({1.0, 1.0, 1.0}), 1e-6, grid));
    c.train.epochs = 11;
    c.train.lr_schedule = {{0, 1e-2}, {2, 1e-3}, {4, 1e-4}, {6, 1e-5}};
    c.train.selection.rule = SelectionRule::final_k;
    c.train.selection.final_k = 4;
  } else {
    const auto g = InducingInit::gaussian(vec({-0.5, -0.7, 0.7}), vec({1.0, 1.7, 0.2}), 11);
    for (int i = 0; i < 3; ++i) c.gps.push_back(gp_init(1e-5, vec({1.0, 1.0, 1.0}), 1e-8, g));
    c.train.epochs = 20;
    c.train.lr_schedule = {{0, 1e-2}, {10, 1e-3}, {20, 1e-4}};
    c.train.selection.rule = SelectionRule::all;
  }
  c.train.batch_size = 1;
  c.train.window_length = 20;
  c.train.elbo = {20.0, 1.0};
}

}  // namespace

ExperimentConfig default_experiment(const std::string& system, Method method) {
  system_spec(system);  // rejects unknown names
  if (method == Method::heun && system != "pendulum")
    throw std::invalid_argument("the Heun variant is defined for the pendulum only");
  ExperimentConfig c;
  c.system = system;
  c.method = method;
  c.train.feature_count = 10000;
  c.train.selection.n_rollouts = 5;
  if (system == "pendulum") pendulum_config(c);
  else if (system == "two_body") two_body_config(c);
  else if (system == "non_separable") non_separable_config(c);
  else rigid_body_config(c);
  if (method == Method::euler) c.tableau = "explicit_euler";
  if (method == Method::heun) c.tableau = "heun";
  c.validate();
  return c;
}

DynamicsModel build_model(const ExperimentConfig& config, Rng& rng) {
  config.validate();
  std::vector<SparseGp> gps;
  for (const auto& g : config.gps) {
    const Mat xi = g.inducing.place(rng);
    const int P = static_cast<int>(xi.rows());
    gps.emplace_back(xi, g.mean_stddev * standard_normal_vector(rng, P), Vec::Constant(P, g.variance), g.kernel);
  }
  const double h = config.dt;
  if (config.method != Method::sgpd)
    return DynamicsModel::generic(std::move(gps), ButcherTableau::from_name(config.tableau), h, config.solver);

  const std::string& s = config.system;
  if (s == "pendulum" || s == "two_body") {
    const auto half = static_cast<std::ptrdiff_t>(gps.size() / 2);
    std::vector<SparseGp> v(gps.begin(), gps.begin() + half), t(gps.begin() + half, gps.end());
    return DynamicsModel::separable_hamiltonian(std::move(v), std::move(t), h);
  }
  if (s == "non_separable") return DynamicsModel::non_separable_hamiltonian(gps[0], h, config.solver);
  return DynamicsModel::constrained_rigid_body(gps[0], gps[1], h, config.solver);
}

}  // namespace gpdyn
