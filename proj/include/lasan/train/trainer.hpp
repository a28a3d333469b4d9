#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lasan/kv.hpp"
#include "lasan/train/dataset.hpp"

namespace lasan::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t warmup_epochs = 5;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  double clip_norm = 1.0;
  double focal_gamma = 2.0;
  // Empty: inverse class frequency of the training targets, mean 1.
  std::vector<double> focal_alpha;
  std::uint64_t seed = 1;
  // Minimum validation gain that resets patience.
  double min_improvement = 1e-4;
  // Without early stopping every epoch runs; the best epoch is still restored.
  bool early_stopping = true;

  void validate() const;
  KvList to_kv() const;  // "train.*" keys
  void apply_kv(const KvList& kv);  // ignores keys of other sections
  static bool is_key(const std::string& key);
};

// Patience 15 for the three-class task, 20 for binary tasks.
TrainConfig default_train_config(Task task);

// Linear warmup (e + 1) / warmup, then cosine annealing reaching zero at the
// final epoch.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  TaskScore val;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::vector<std::string> class_names;  // per-class columns
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::size_t steps = 0;
  // Largest global gradient norm seen after clipping.
  double max_clipped_norm = 0.0;
};

// Called after each optimizer step; used by tests to observe training.
using StepHook = std::function<void(std::size_t epoch, std::size_t batch)>;
// Called after each epoch's validation; returning true ends training.
using EpochHook = std::function<bool(const EpochLog& row)>;

// Minibatch training with focal loss, Adam, global-norm clipping and
// validation AUROC early stopping. On return the model holds the parameters
// (and batchnorm statistics) of the best validation epoch.
TrainResult fit(model::Classifier<float>& model, const TaskData& train, const TaskData& val, const TrainConfig& cfg,
                const StepHook& hook = {}, const EpochHook& epoch_hook = {});

// CSV: epoch,lr,train_loss,val_auroc_macro,val_auroc_<CLASS>...,wall_seconds
std::string train_log_csv(const TrainResult& r);

}  // namespace lasan::train
