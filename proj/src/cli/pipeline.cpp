#include "lasan/cli/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "lasan/model/lasan.hpp"

namespace lasan::cli {

namespace {
constexpr const char* kModule = "cli";

std::uint64_t init_seed(std::uint64_t train_seed) { return derive_seed({train_seed, 0x696e6974u}); }

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

Splits select_splits(train::Task task, const std::vector<data::EcgRecord>& corpus, const data::SplitAssignment& split) {
  return {train::select(task, corpus, split, data::Partition::Train),
          train::select(task, corpus, split, data::Partition::Val),
          train::select(task, corpus, split, data::Partition::Test)};
}

std::optional<fm::EncoderHandle> make_encoder(const RunConfig& cfg) {
  if (cfg.integration == fm::Integration::Standalone) return std::nullopt;
  return fm::stub_encoder(cfg.encoder);
}

TrainedModel train_model(const RunConfig& cfg, const Splits& splits, const fm::EncoderHandle* encoder) {
  const bool standalone = cfg.integration == fm::Integration::Standalone;
  if (!standalone && encoder == nullptr)
    throw ConfigError(kModule, std::string(fm::integration_name(cfg.integration)) + " needs an encoder");
  Rng init(init_seed(cfg.train.seed));
  TrainedModel out;
  out.model = fm::build_integration(cfg.integration, standalone ? nullptr : encoder, cfg.spec(), init);
  out.result = standalone ? train::fit(*out.model, splits.train, splits.val, cfg.train)
                          : fm::apply_strategy(*out.model, cfg.strategy, splits.train, splits.val, cfg.train);
  out.header = out.model->describe();
  out.header.emplace_back("task", std::string(train::task_name(cfg.task)));
  return out;
}

model::Checkpoint to_checkpoint(const TrainedModel& m) { return model::make_checkpoint(m.header, m.model->params()); }

LoadedModel model_from_checkpoint(const model::Checkpoint& ck) {
  LoadedModel out;
  out.task = train::parse_task(ck.get("task"));
  const auto kind = fm::parse_integration(ck.get("model.kind"));
  model::LasanSpec spec;
  spec.apply_kv(ck.header);
  spec.n_classes = train::task_classes(out.task);
  // Placeholder weights of the right shapes; the checkpoint overwrites them.
  Rng init(0);
  std::optional<fm::EncoderHandle> enc;
  if (kind != fm::Integration::Standalone) {
    fm::EncoderConfig ec;
    ec.kind = fm::EncoderKind::RandomFrozen;
    ec.embed_dim = kv_size("encoder.embed_dim", ck.get("encoder.embed_dim"));
    enc = fm::stub_encoder(ec);
    enc->name = ck.get("encoder.name");
  }
  out.model = fm::build_integration(kind, enc ? &*enc : nullptr, spec, init);
  model::load_parameters(out.model->params(), ck);
  return out;
}

std::string bench_csv(train::Task task, const std::vector<BenchCell>& cells) {
  const auto names = train::score_class_names(task);
  std::string s = "integration,strategy,encoder,seeds,auroc_macro,auroc_macro_sd";
  for (const auto& n : names) s += ",auroc_" + n + ",auroc_" + n + "_sd";
  s += '\n';
  auto stats = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return fixed(m) + "," + fixed(sd);
  };
  for (const auto& c : cells) {
    s += c.integration + "," + c.strategy + "," + c.encoder + "," + std::to_string(c.scores.size());
    std::vector<double> col;
    for (const auto& sc : c.scores) col.push_back(sc.primary);
    s += "," + stats(col);
    for (std::size_t k = 0; k < names.size(); ++k) {
      col.clear();
      for (const auto& sc : c.scores) col.push_back(sc.per_class[k]);
      s += "," + stats(col);
    }
    s += '\n';
  }
  return s;
}

}  // namespace lasan::cli
