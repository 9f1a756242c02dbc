#include "gpdyn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpdyn/kernel.hpp"

namespace gpdyn {

double TrainConfig::lr_at(int epoch) const {
  double lr = lr_schedule.front().learning_rate;
  for (const auto& ph : lr_schedule)
    if (ph.start_epoch <= epoch) lr = ph.learning_rate;
  return lr;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (window_length < 2) throw std::invalid_argument("train: window_length must be >= 2");
  if (epochs < 0) throw std::invalid_argument("train: negative epoch count");
  if (feature_count < 1) throw std::invalid_argument("train: feature_count must be >= 1");
  if (lr_schedule.empty() || lr_schedule.front().start_epoch != 0)
    throw std::invalid_argument("train: learning-rate schedule must start at epoch 0");
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (!(lr_schedule[i].learning_rate > 0.0)) throw std::invalid_argument("train: learning rates must be positive");
    if (i > 0 && lr_schedule[i].start_epoch <= lr_schedule[i - 1].start_epoch)
      throw std::invalid_argument("train: schedule epochs must be strictly increasing");
  }
  if (selection.n_rollouts < 1) throw std::invalid_argument("train: n_rollouts must be >= 1");
  if (selection.rule == SelectionRule::final_k && selection.final_k < 1)
    throw std::invalid_argument("train: final_k must be >= 1");
  if (!(elbo.a >= 0.0) || !(elbo.b >= 0.0)) throw std::invalid_argument("train: ELBO factors must be >= 0");
  if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0))
    throw std::invalid_argument("train: max_skip_fraction outside [0, 1]");
}

std::string to_string(SelectionRule r) {
  switch (r) {
    case SelectionRule::all: return "all";
    case SelectionRule::final_k: return "final_k";
    case SelectionRule::smallest_lr_only: return "smallest_lr_only";
  }
  return "?";
}

SelectionRule selection_rule_from_string(const std::string& s) {
  if (s == "all") return SelectionRule::all;
  if (s == "final_k") return SelectionRule::final_k;
  if (s == "smallest_lr_only") return SelectionRule::smallest_lr_only;
  throw std::invalid_argument("unknown selection rule '" + s + "'");
}

WindowDataset make_windows(const Trajectory& observations, int window_length) {
  const auto N = static_cast<int>(observations.size());
  if (window_length < 2) throw std::invalid_argument("make_windows: window length must be at least 2");
  if (window_length > N) throw std::invalid_argument("make_windows: window longer than the trajectory");
  if (!observations.noise_variances) throw std::invalid_argument("make_windows: observations carry no noise variances");
  if (observations.noise_variances->size() != observations.dim() || !(observations.noise_variances->array() > 0.0).all())
    throw std::invalid_argument("make_windows: noise variances must be positive, one per dimension");
  WindowDataset ds;
  ds.source = observations.states;
  ds.noise_variances = *observations.noise_variances;
  ds.length = window_length;
  ds.starts.resize(N - window_length + 1);
  std::iota(ds.starts.begin(), ds.starts.end(), 0);
  return ds;
}

double window_data_loss(const SampledModel& draw, const Mat& window, const Vec& noise_variances, double a,
                        Vec* grad) {
  if (window.rows() < 2 || window.cols() != draw.dim() || noise_variances.size() != draw.dim())
    throw std::invalid_argument("window_data_loss: shape mismatch");
  const Vec x0 = window.row(0).transpose();
  LossTerms terms = [&](int k, const Vec& x, Eigen::Ref<Vec> g) {
    if (k == 0) return 0.0;
    double l = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      l -= gaussian_log_density(window(k, i), x[i], noise_variances[i]);
      g[i] = a * (x[i] - window(k, i)) / noise_variances[i];
    }
    return a * l;
  };
  const GradientReport rep = rollout_gradient(draw, x0, static_cast<int>(window.rows()) - 1, terms);
  if (grad) *grad += rep.gradient;
  return rep.loss;
}

double elbo_window_loss(const DynamicsModel& model, const SampledModel& draw, const Mat& window,
                        const Vec& noise_variances, const ElboFactors& factors, Vec* grad) {
  double loss = window_data_loss(draw, window, noise_variances, factors.a, grad);
  if (factors.b != 0.0) {
    loss += factors.b * model.kl();
    if (grad) *grad += factors.b * model.kl_gradient();
  }
  return loss;
}

Adam::Adam(std::size_t n, double beta1_, double beta2_, double eps_)
    : m(Vec::Zero(static_cast<Eigen::Index>(n))),
      v(Vec::Zero(static_cast<Eigen::Index>(n))),
      beta1(beta1_),
      beta2(beta2_),
      eps(eps_) {}

void Adam::step(Vec& theta, const Vec& grad, double lr) {
  if (grad.size() != theta.size() || m.size() != theta.size()) throw std::invalid_argument("Adam: size mismatch");
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

double selection_error(const DynamicsModel& model, const Trajectory& observations, int n_rollouts,
                       int feature_count, Rng& rng) {
  if (n_rollouts < 1) throw std::invalid_argument("selection_error: n_rollouts must be >= 1");
  const Eigen::Index N = observations.size();
  const Vec x0 = observations.state(0);
  Mat mean = Mat::Zero(N, observations.dim());
  try {
    for (int r = 0; r < n_rollouts; ++r) {
      const SampledModel draw = sample_model(model, feature_count, rng);
      mean += draw.rollout(x0, static_cast<int>(N) - 1).states;
    }
  } catch (const NonConvergence&) {
    return std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
  mean /= n_rollouts;
  const double e = (mean - observations.states).squaredNorm();
  return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

TrainResult train(const DynamicsModel& model, const Trajectory& observations, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  const WindowDataset data = make_windows(observations, config.window_length);
  const std::size_t n = data.size();

  TrainResult res{model, {}, {}, {}};
  DynamicsModel& m = res.model;
  Vec theta = m.parameters();
  Adam adam(static_cast<std::size_t>(theta.size()));
  int first = 0;
  if (hooks.resume) {
    const Checkpoint& cp = *hooks.resume;
    if (cp.parameters.size() != theta.size() || cp.adam_m.size() != theta.size() || cp.adam_v.size() != theta.size())
      throw std::invalid_argument("train: checkpoint does not match the model");
    theta = cp.parameters;
    adam.m = cp.adam_m;
    adam.v = cp.adam_v;
    adam.t = cp.adam_t;
    first = cp.epoch;
    m.set_parameters(theta);
  }

  auto snapshot = [&](int epoch, double sel, double lr) {
    Checkpoint cp;
    cp.epoch = epoch;
    cp.parameters = theta;
    cp.selection_error = sel;
    cp.lr = lr;
    cp.adam_m = adam.m;
    cp.adam_v = adam.v;
    cp.adam_t = adam.t;
    return cp;
  };

  for (int epoch = first; epoch < config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    Rng sel_rng = make_stream(config.seed, "selection", static_cast<std::uint64_t>(epoch));
    const double sel = selection_error(m, observations, config.selection.n_rollouts, config.feature_count, sel_rng);
    res.checkpoints.push_back(snapshot(epoch, sel, lr));
    if (hooks.on_checkpoint) hooks.on_checkpoint(res.checkpoints.back());

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_stream(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng draw_rng = make_stream(config.seed, "draw", static_cast<std::uint64_t>(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.selection_error = sel;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t b1 = std::min(n, b0 + static_cast<std::size_t>(config.batch_size));
      Vec grad = Vec::Zero(theta.size());
      double loss = 0.0;
      int used = 0;
      std::optional<SampledModel> shared;
      try {
        for (std::size_t j = b0; j < b1; ++j) {
          if (config.draws == DrawPolicy::per_window || !shared)
            shared.emplace(materialize(m, sample_model_noise(m, config.feature_count, draw_rng)));
          try {
            Vec g = Vec::Zero(theta.size());
            const double l = window_data_loss(*shared, data.window(static_cast<std::size_t>(order[j])),
                                              data.noise_variances, config.elbo.a, &g);
            loss += l;
            grad += g;
            ++used;
          } catch (const NonConvergence&) {
            ++rec.skipped;
          } catch (const SingularConstraint&) {
            ++rec.skipped;
          } catch (const IftSingular&) {
            ++rec.skipped;
          }
        }
      } catch (const NumericalError& e) {
        throw NumericalAbort(std::string("training aborted: ") + e.what(), epoch);
      }
      if (used == 0) continue;
      if (config.elbo.b != 0.0) {
        loss += config.elbo.b * m.kl();
        grad += config.elbo.b * m.kl_gradient();
      }
      if (!std::isfinite(loss) || !grad.allFinite())
        throw NumericalAbort("training aborted: non-finite loss at epoch " + std::to_string(epoch), epoch);
      adam.step(theta, grad, lr);
      m.set_parameters(theta);
      loss_sum += loss;
      ++batches;
    }
    if (rec.skipped > config.max_skip_fraction * static_cast<double>(n))
      throw NumericalAbort("training aborted: " + std::to_string(rec.skipped) + " of " + std::to_string(n) +
                               " windows failed in epoch " + std::to_string(epoch),
                           epoch);
    rec.loss = batches > 0 ? loss_sum / batches : std::numeric_limits<double>::quiet_NaN();
    res.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  res.final_state = snapshot(std::max(config.epochs, first), std::numeric_limits<double>::quiet_NaN(),
                             config.epochs > 0 ? config.lr_at(config.epochs - 1) : config.lr_at(0));
  return res;
}

const Checkpoint& select_model(const std::vector<Checkpoint>& checkpoints, const TrainConfig& config) {
  auto eligible = [&](int epoch) {
    switch (config.selection.rule) {
      case SelectionRule::all: return true;
      case SelectionRule::final_k: return epoch >= config.epochs - config.selection.final_k;
      case SelectionRule::smallest_lr_only: {
        double smallest = config.lr_at(0);
        for (int e = 0; e < config.epochs; ++e) smallest = std::min(smallest, config.lr_at(e));
        return config.lr_at(epoch) == smallest;
      }
    }
    return false;
  };
  const Checkpoint* best = nullptr;
  double best_err = 0.0;
  for (const auto& cp : checkpoints) {
    if (!eligible(cp.epoch)) continue;
    const double err = std::isnan(cp.selection_error) ? std::numeric_limits<double>::infinity() : cp.selection_error;
    if (!best || err < best_err || (err == best_err && cp.epoch >= best->epoch)) {
      best = &cp;
      best_err = err;
    }
  }
  if (!best) throw std::invalid_argument("select_model: no eligible checkpoint");
  return *best;
}

}  // namespace gpdyn
