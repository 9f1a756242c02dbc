#pragma once

// Recurrent variational training on sliding windows of a noisy trajectory:
// negative ELBO with a/b balancing, Adam, learning-rate schedules, per-epoch
// checkpoints and rollout-based model selection.

#include <functional>
#include <limits>
#include <optional>

#include "gpdyn/gradient.hpp"
#include "gpdyn/train_config.hpp"

namespace gpdyn {

/// Windows x_hat[k .. k + L - 1] for k = 0..N - L, stride 1.
struct WindowDataset {
  Mat source;             // N x d observations
  Vec noise_variances;    // d
  int length = 0;         // L
  std::vector<int> starts;

  std::size_t size() const { return starts.size(); }
  Mat window(std::size_t i) const { return source.middleRows(starts[i], length); }
};

/// Requires 2 <= L <= N and recorded noise variances.
WindowDataset make_windows(const Trajectory& observations, int window_length);

/// Data term of one window: a * sum_{n>=1} sum_i -log N(x_hat_n,i | x_n,i, s_i)
/// for the rollout of `draw` from x_hat_0. With `grad` the gradient in the
/// model parameter layout is added to it.
double window_data_loss(const SampledModel& draw, const Mat& window, const Vec& noise_variances, double a,
                        Vec* grad = nullptr);

/// Negative ELBO contribution of a window with the KL term counted once:
/// window_data_loss + b * KL(q || p).
double elbo_window_loss(const DynamicsModel& model, const SampledModel& draw, const Mat& window,
                        const Vec& noise_variances, const ElboFactors& factors, Vec* grad = nullptr);

class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
  void step(Vec& theta, const Vec& grad, double lr);

  Vec m, v;
  long long t = 0;
  double beta1, beta2, eps;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;             // mean batch loss
  double selection_error = 0.0;  // at epoch start
  int skipped = 0;               // windows skipped on solver failure
};

/// Model state at the start of an epoch.
struct Checkpoint {
  int epoch = 0;
  Vec parameters;
  double selection_error = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
  // Optimizer state so that training resumes bit-identically.
  Vec adam_m, adam_v;
  long long adam_t = 0;
};

/// Raised on a non-finite loss or a persistent solver failure rate.
class NumericalAbort : public NumericalError {
 public:
  NumericalAbort(const std::string& what, int epoch) : NumericalError(what), epoch(epoch) {}
  int epoch;
};

/// e = sum_i ||X_bar_i - x_hat_i||^2, X_bar the mean of n_rollouts draws
/// rolled out from x_hat_0 over the observation grid. Infinite when a
/// rollout fails.
double selection_error(const DynamicsModel& model, const Trajectory& observations, int n_rollouts,
                       int feature_count, Rng& rng);

struct TrainResult {
  DynamicsModel model;                 // after the last epoch
  std::vector<EpochRecord> history;
  std::vector<Checkpoint> checkpoints; // one per epoch, in order
  Checkpoint final_state;              // after the last epoch (epoch = epochs)
};

struct TrainHooks {
  /// Called when an epoch-start checkpoint is taken (e.g. to persist it).
  std::function<void(const Checkpoint&)> on_checkpoint;
  /// Called when an epoch completes.
  std::function<void(const EpochRecord&)> on_epoch;
  /// Resume from the state at the start of this checkpoint's epoch.
  std::optional<Checkpoint> resume;
};

/// Randomness: shuffles from stream (seed, "shuffle", epoch), model draws
/// from (seed, "draw", epoch), selection rollouts from (seed, "selection", epoch).
/// Throws NumericalAbort; completed checkpoints are passed to the hook first.
TrainResult train(const DynamicsModel& model, const Trajectory& observations, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Eligible checkpoints per rule (final_k counts back from config.epochs),
/// argmin of the selection error, ties to the later epoch.
const Checkpoint& select_model(const std::vector<Checkpoint>& checkpoints, const TrainConfig& config);

}  // namespace gpdyn
