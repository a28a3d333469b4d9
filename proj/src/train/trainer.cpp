#include "lasan/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lasan/train/loss.hpp"
#include "lasan/train/optim.hpp"

namespace lasan::train {

namespace {
constexpr const char* kModule = "trainer";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(kModule, m); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(base_lr > 0.0)) fail("base_lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (max_epochs == 0) fail("max_epochs must be positive");
  if (early_stopping && patience >= max_epochs) fail("patience must be smaller than max_epochs");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  if (!(focal_gamma >= 0.0)) fail("focal_gamma must be non-negative");
  for (double a : focal_alpha)
    if (!(a > 0.0)) fail("focal_alpha entries must be positive");
  if (!(min_improvement >= 0.0)) fail("min_improvement must be non-negative");
}

KvList TrainConfig::to_kv() const {
  return {
      {"train.batch_size", std::to_string(batch_size)},
      {"train.base_lr", format_double(base_lr)},
      {"train.weight_decay", format_double(weight_decay)},
      {"train.warmup_epochs", std::to_string(warmup_epochs)},
      {"train.max_epochs", std::to_string(max_epochs)},
      {"train.patience", std::to_string(patience)},
      {"train.clip_norm", format_double(clip_norm)},
      {"train.focal_gamma", format_double(focal_gamma)},
      {"train.focal_alpha", focal_alpha.empty() ? "auto" : join(focal_alpha)},
      {"train.seed", std::to_string(seed)},
      {"train.min_improvement", format_double(min_improvement)},
      {"train.early_stopping", early_stopping ? "true" : "false"},
  };
}

bool TrainConfig::is_key(const std::string& key) { return key.starts_with("train."); }

void TrainConfig::apply_kv(const KvList& kv) {
  for (const auto& [k, v] : kv) {
    if (!is_key(k)) continue;
    const std::string f = k.substr(6);
    if (f == "batch_size") batch_size = kv_size(k, v);
    else if (f == "base_lr") base_lr = kv_double(k, v);
    else if (f == "weight_decay") weight_decay = kv_double(k, v);
    else if (f == "warmup_epochs") warmup_epochs = kv_size(k, v);
    else if (f == "max_epochs") max_epochs = kv_size(k, v);
    else if (f == "patience") patience = kv_size(k, v);
    else if (f == "clip_norm") clip_norm = kv_double(k, v);
    else if (f == "focal_gamma") focal_gamma = kv_double(k, v);
    else if (f == "focal_alpha") focal_alpha = v == "auto" ? std::vector<double>{} : kv_double_list(k, v);
    else if (f == "seed") seed = kv_u64(k, v);
    else if (f == "min_improvement") min_improvement = kv_double(k, v);
    else if (f == "early_stopping") early_stopping = kv_bool(k, v);
    else throw ConfigError("config", "unknown key '" + k + "'");
  }
}

TrainConfig default_train_config(Task task) {
  TrainConfig c;
  c.patience = task == Task::ThreeClass ? 15 : 20;
  return c;
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch < cfg.warmup_epochs)
    return cfg.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
  if (cfg.max_epochs <= cfg.warmup_epochs + 1) return cfg.base_lr;
  const double span = static_cast<double>(cfg.max_epochs - 1 - cfg.warmup_epochs);
  const double x = std::min(1.0, static_cast<double>(epoch - cfg.warmup_epochs) / span);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

TrainResult fit(model::Classifier<float>& model, const TaskData& train, const TaskData& val, const TrainConfig& cfg,
                const StepHook& hook, const EpochHook& epoch_hook) {
  cfg.validate();
  if (train.empty()) throw ConfigError(kModule, "training split is empty");
  if (val.empty()) throw ConfigError(kModule, "validation split is empty");
  const std::size_t n_classes = task_classes(train.task);
  const auto alpha = cfg.focal_alpha.empty() ? inverse_frequency_alpha(train.targets, n_classes) : cfg.focal_alpha;
  if (alpha.size() != n_classes) throw ConfigError(kModule, "focal_alpha needs one weight per class");

  auto& params = model.params();
  Adam opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});
  EarlyStopping stopper(cfg.patience, cfg.min_improvement);
  TrainResult res;
  res.class_names = score_class_names(train.task);
  auto best = params.snapshot();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed({cfg.seed, 0x5348u, epoch}));
    shuffle_rng.shuffle(order.begin(), order.end());
    Rng dropout_rng(derive_seed({cfg.seed, 0xd209u, epoch}));

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size, ++batch_index) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                   order.begin() + static_cast<std::ptrdiff_t>(b1));
      std::vector<std::size_t> targets;
      for (auto i : idx) targets.push_back(train.targets[i]);
      const auto where = " at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index);

      params.zero_grad();
      auto in = make_inputs(train, idx, model.needs_native(), model.needs_foundation());
      num::Trace<float> tr;
      num::Tensor<float> loss;
      try {
        auto out = model.forward(tr, in, model::Mode::Train, dropout_rng);
        loss = focal_loss(tr, out.probs, targets, cfg.focal_gamma, alpha);
      } catch (const NumericError& e) {
        throw NumericError(kModule, std::string(e.what()) + where);
      }
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw NumericError(kModule, "non-finite loss" + where);
      if (loss.requires_grad()) tr.backward(loss);
      clip_grad_norm(params, cfg.clip_norm);
      res.max_clipped_norm = std::max(res.max_clipped_norm, grad_norm(params));
      opt.step(lr);
      loss_sum += lv * static_cast<double>(idx.size());
      if (hook) hook(epoch, batch_index);
    }
    params.zero_grad();

    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.val = score_task(val.task, predict(model, val), val.targets);
    const bool stop = stopper.update(epoch, row.val.primary);
    if (stopper.improved()) best = params.snapshot();
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.log.push_back(row);
    if (cfg.early_stopping && stop) break;
    if (epoch_hook && epoch_hook(row)) break;
  }
  res.steps = opt.steps();
  res.best_epoch = stopper.best_epoch();
  res.best_val = stopper.best();
  params.restore(best);
  return res;
}

std::string train_log_csv(const TrainResult& r) {
  std::string s = "epoch,lr,train_loss,val_auroc_macro";
  for (const auto& c : r.class_names) s += ",val_auroc_" + c;
  s += ",wall_seconds\n";
  for (const auto& row : r.log) {
    s += std::to_string(row.epoch) + ',' + format_double(row.lr) + ',' + format_double(row.train_loss) + ',' +
         format_double(row.val.primary);
    for (double v : row.val.per_class) s += ',' + format_double(v);
    s += ',' + format_double(row.wall_seconds) + '\n';
  }
  return s;
}

}  // namespace lasan::train
