#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gpdyn {

struct LrPhase {
  int start_epoch = 0;
  double learning_rate = 1e-2;
};

enum class SelectionRule { all, final_k, smallest_lr_only };

std::string to_string(SelectionRule r);
SelectionRule selection_rule_from_string(const std::string& s);

struct ModelSelectionConfig {
  int n_rollouts = 5;
  SelectionRule rule = SelectionRule::all;
  int final_k = 0;  // used by final_k
};

/// loss = -(a * sum log p(x_hat | x) - b * KL)
struct ElboFactors {
  double a = 1.0;
  double b = 1.0;
};

enum class DrawPolicy { per_batch, per_window };

struct TrainConfig {
  int batch_size = 1;
  int window_length = 10;  // states per window
  int epochs = 0;
  std::vector<LrPhase> lr_schedule{{0, 1e-2}};
  ElboFactors elbo;
  int feature_count = 10000;
  ModelSelectionConfig selection;
  std::uint64_t seed = 0;
  DrawPolicy draws = DrawPolicy::per_batch;
  double max_skip_fraction = 0.1;

  double lr_at(int epoch) const;
  void validate() const;
};

}  // namespace gpdyn
