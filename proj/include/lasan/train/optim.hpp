#pragma once

#include <cstddef>
#include <vector>

#include "lasan/numerics/params.hpp"

namespace lasan::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled: theta -= lr * weight_decay * theta, separate from the moments.
  double weight_decay = 0.0;
};

// Adam over the trainable entries of a parameter set. Moment buffers are
// keyed by entry position; parameters without a gradient are skipped.
class Adam {
 public:
  Adam(num::ParameterSet<float>& params, AdamOptions opt);
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  num::ParameterSet<float>& params_;
  AdamOptions opt_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Global L2 norm of all accumulated gradients.
double grad_norm(const num::ParameterSet<float>& params);

// Rescales every gradient by max_norm / norm when norm > max_norm; returns
// the norm before clipping.
double clip_grad_norm(num::ParameterSet<float>& params, double max_norm);

// Early stopping on a metric to be maximized. An epoch counts as an
// improvement when it beats the best value by more than `threshold`.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double threshold) : patience_(patience), threshold_(threshold) {}
  // Returns true when training should stop after this epoch.
  bool update(std::size_t epoch, double value);
  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double threshold_;
  bool has_best_ = false;
  bool improved_ = false;
  double best_ = 0.0;
  std::size_t best_epoch_ = 0;
};

}  // namespace lasan::train
