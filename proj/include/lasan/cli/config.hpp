#pragma once

#include <string>

#include "lasan/dataio/split.hpp"
#include "lasan/foundation/integration.hpp"
#include "lasan/foundation/strategy.hpp"
#include "lasan/synth/generator.hpp"
#include "lasan/train/trainer.hpp"

namespace lasan::cli {

// Everything a run needs, read from a flat key=value file. Sections: synth.*,
// split.*, lasan.*, encoder.*, strategy.*, train.*, plus `task` and
// `integration`.
struct RunConfig {
  synth::SynthConfig synth;
  data::Ratios split_ratios = data::kDefaultRatios;
  std::uint64_t split_seed = 42;
  train::Task task = train::Task::ThreeClass;
  fm::Integration integration = fm::Integration::Standalone;
  model::LasanSpec lasan;
  fm::EncoderConfig encoder;
  fm::StrategyConfig strategy;
  train::TrainConfig train = train::default_train_config(train::Task::ThreeClass);

  // Applies one setting. Unknown keys and bad values are ConfigErrors.
  void set(const std::string& key, const std::string& value);
  // The LASAN spec with n_classes taken from the task.
  model::LasanSpec spec() const;
  KvList to_kv() const;

 private:
  bool patience_set_ = false;
};

// Applies every line of `text`; errors name `source` and the line number.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
// Applies "key=value" overrides; errors name the override.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace lasan::cli
