#pragma once

#include <string>
#include <string_view>

#include "lasan/kv.hpp"
#include "lasan/train/trainer.hpp"

namespace lasan::fm {

enum class StrategyKind { LinearProbe, FineTune, ProbeThenFineTune };

std::string_view strategy_name(StrategyKind k);
StrategyKind parse_strategy(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::FineTune;
  std::size_t probe_epochs = 50;
  double probe_lr = 1e-2;
  std::size_t ft_epochs = 100;
  double ft_lr = 1e-4;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;

  void validate() const;
  KvList to_kv() const;  // "strategy.*" keys
  void apply_kv(const KvList& kv);
  static bool is_key(const std::string& key);
};

// The training config of one phase: `base` with epochs, rate, weight decay
// and clipping taken from the strategy. Phases run every epoch (no early
// stopping) so their step counts are fixed; the best validation epoch of
// each phase is still restored.
train::TrainConfig probe_phase(const StrategyConfig& s, const train::TrainConfig& base);
train::TrainConfig finetune_phase(const StrategyConfig& s, const train::TrainConfig& base);

// Trains a model whose encoder parameters live under "fm.". LINEAR_PROBE
// freezes them; FINE_TUNE trains everything; PROBE_THEN_FINE_TUNE probes,
// then unfreezes and fine-tunes. The returned log concatenates the phases
// with continuous epoch numbers; steps is the total over both phases.
train::TrainResult apply_strategy(model::Classifier<float>& model, const StrategyConfig& s,
                                  const train::TaskData& train, const train::TaskData& val,
                                  const train::TrainConfig& base = {});

}  // namespace lasan::fm
