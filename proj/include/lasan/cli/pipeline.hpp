#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lasan/cli/config.hpp"
#include "lasan/model/checkpoint.hpp"

namespace lasan::cli {

struct Splits {
  train::TaskData train, val, test;
};

Splits select_splits(train::Task task, const std::vector<data::EcgRecord>& corpus, const data::SplitAssignment& split);

struct TrainedModel {
  std::unique_ptr<model::Classifier<float>> model;
  train::TrainResult result;
  KvList header;  // checkpoint header: describe() plus the task
};

// Builds the configured integration and trains it: STANDALONE with the plain
// trainer, every foundation integration through the configured strategy.
// `encoder` is required for foundation integrations (see make_encoder).
TrainedModel train_model(const RunConfig& cfg, const Splits& splits, const fm::EncoderHandle* encoder);

// The configured stub encoder, or nothing for STANDALONE.
std::optional<fm::EncoderHandle> make_encoder(const RunConfig& cfg);

model::Checkpoint to_checkpoint(const TrainedModel& m);

struct LoadedModel {
  std::unique_ptr<model::Classifier<float>> model;
  train::Task task = train::Task::ThreeClass;
};

// Rebuilds a model of the kind named in the header and loads its weights.
LoadedModel model_from_checkpoint(const model::Checkpoint& ck);

// Test-set AUROC over seeds for one grid cell.
struct BenchCell {
  std::string integration, strategy, encoder;
  std::vector<train::TaskScore> scores;  // one per seed
};

// Mean and sample standard deviation per column; the CSV header is
// integration,strategy,encoder,seeds,auroc_macro,auroc_macro_sd, then
// auroc_<CLASS>,auroc_<CLASS>_sd per class.
std::string bench_csv(train::Task task, const std::vector<BenchCell>& cells);

}  // namespace lasan::cli
