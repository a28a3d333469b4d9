#include "lasan/foundation/strategy.hpp"

namespace lasan::fm {

namespace {
constexpr const char* kModule = "foundation";
constexpr const char* kEncoderPrefix = "fm.";

void append(train::TrainResult& acc, train::TrainResult phase) {
  const std::size_t offset = acc.log.size();
  for (auto& e : phase.log) {
    e.epoch += offset;
    acc.log.push_back(std::move(e));
  }
  acc.class_names = std::move(phase.class_names);
  acc.best_epoch = phase.best_epoch + offset;
  acc.best_val = phase.best_val;
  acc.steps += phase.steps;
  acc.max_clipped_norm = std::max(acc.max_clipped_norm, phase.max_clipped_norm);
}
}  // namespace

std::string_view strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::LinearProbe:
      return "LINEAR_PROBE";
    case StrategyKind::FineTune:
      return "FINE_TUNE";
    case StrategyKind::ProbeThenFineTune:
      return "PROBE_THEN_FINE_TUNE";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::LinearProbe, StrategyKind::FineTune, StrategyKind::ProbeThenFineTune})
    if (strategy_name(k) == name) return k;
  throw ConfigError(kModule, "unknown strategy '" + std::string(name) + "'");
}

void StrategyConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(kModule, m); };
  if (kind != StrategyKind::FineTune && (probe_epochs == 0 || !(probe_lr > 0.0)))
    fail("probe_epochs and probe_lr must be positive");
  if (kind != StrategyKind::LinearProbe && (ft_epochs == 0 || !(ft_lr > 0.0)))
    fail("ft_epochs and ft_lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
}

KvList StrategyConfig::to_kv() const {
  return {
      {"strategy.kind", std::string(strategy_name(kind))},
      {"strategy.probe_epochs", std::to_string(probe_epochs)},
      {"strategy.probe_lr", format_double(probe_lr)},
      {"strategy.ft_epochs", std::to_string(ft_epochs)},
      {"strategy.ft_lr", format_double(ft_lr)},
      {"strategy.weight_decay", format_double(weight_decay)},
      {"strategy.clip_norm", format_double(clip_norm)},
  };
}

bool StrategyConfig::is_key(const std::string& key) { return key.starts_with("strategy."); }

void StrategyConfig::apply_kv(const KvList& kv) {
  for (const auto& [k, v] : kv) {
    if (!is_key(k)) continue;
    const std::string f = k.substr(9);
    if (f == "kind") kind = parse_strategy(v);
    else if (f == "probe_epochs") probe_epochs = kv_size(k, v);
    else if (f == "probe_lr") probe_lr = kv_double(k, v);
    else if (f == "ft_epochs") ft_epochs = kv_size(k, v);
    else if (f == "ft_lr") ft_lr = kv_double(k, v);
    else if (f == "weight_decay") weight_decay = kv_double(k, v);
    else if (f == "clip_norm") clip_norm = kv_double(k, v);
    else throw ConfigError("config", "unknown key '" + k + "'");
  }
}

namespace {
train::TrainConfig phase(const StrategyConfig& s, train::TrainConfig c, std::size_t epochs, double lr) {
  c.max_epochs = epochs;
  c.base_lr = lr;
  c.weight_decay = s.weight_decay;
  c.clip_norm = s.clip_norm;
  c.early_stopping = false;
  return c;
}
}  // namespace

train::TrainConfig probe_phase(const StrategyConfig& s, const train::TrainConfig& base) {
  return phase(s, base, s.probe_epochs, s.probe_lr);
}

train::TrainConfig finetune_phase(const StrategyConfig& s, const train::TrainConfig& base) {
  return phase(s, base, s.ft_epochs, s.ft_lr);
}

train::TrainResult apply_strategy(model::Classifier<float>& model, const StrategyConfig& s,
                                  const train::TaskData& train, const train::TaskData& val,
                                  const train::TrainConfig& base) {
  s.validate();
  auto& params = model.params();
  if (params.parameter_count(kEncoderPrefix) == 0)
    throw ConfigError(kModule, "model has no encoder parameters to apply a strategy to");
  train::TrainResult out;
  if (s.kind != StrategyKind::FineTune) {
    params.set_frozen(kEncoderPrefix, true);
    append(out, train::fit(model, train, val, probe_phase(s, base)));
  }
  if (s.kind != StrategyKind::LinearProbe) {
    params.set_frozen(kEncoderPrefix, false);
    append(out, train::fit(model, train, val, finetune_phase(s, base)));
  }
  return out;
}

}  // namespace lasan::fm
