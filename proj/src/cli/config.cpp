#include "lasan/cli/config.hpp"

namespace lasan::cli {

namespace {
constexpr const char* kModule = "config";

std::string ratios_text(const data::Ratios& r) {
  return format_double(r[0]) + "," + format_double(r[1]) + "," + format_double(r[2]);
}
// what() without the leading "<module>: " when the module is ours.
std::string bare(const Error& e) {
  const std::string msg = e.what();
  const std::string prefix = std::string(kModule) + ": ";
  return msg.starts_with(prefix) ? msg.substr(prefix.size()) : msg;
}
}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const KvList one{{key, value}};
  if (key == "task") {
    task = train::parse_task(value);
    if (!patience_set_) train.patience = train::default_train_config(task).patience;
  } else if (key == "integration") {
    integration = fm::parse_integration(value);
  } else if (key == "split.ratios") {
    auto r = kv_double_list(key, value);
    if (r.size() != 3) throw ConfigError(kModule, "split.ratios needs three values");
    split_ratios = {r[0], r[1], r[2]};
  } else if (key == "split.seed") {
    split_seed = kv_u64(key, value);
  } else if (synth::SynthConfig::is_key(key)) {
    synth.apply_kv(one);
  } else if (model::LasanSpec::is_key(key)) {
    lasan.apply_kv(one);
  } else if (fm::EncoderConfig::is_key(key)) {
    encoder.apply_kv(one);
  } else if (fm::StrategyConfig::is_key(key)) {
    strategy.apply_kv(one);
  } else if (train::TrainConfig::is_key(key)) {
    train.apply_kv(one);
    if (key == "train.patience") patience_set_ = true;
  } else {
    throw ConfigError(kModule, "unknown key '" + key + "'");
  }
}

model::LasanSpec RunConfig::spec() const {
  auto s = lasan;
  s.n_classes = train::task_classes(task);
  return s;
}

KvList RunConfig::to_kv() const {
  KvList kv{{"task", std::string(train::task_name(task))},
            {"integration", std::string(fm::integration_name(integration))},
            {"split.ratios", ratios_text(split_ratios)},
            {"split.seed", std::to_string(split_seed)}};
  for (const auto& section : {synth.to_kv(), spec().to_kv(), encoder.to_kv(), strategy.to_kv(), train.to_kv()})
    kv.insert(kv.end(), section.begin(), section.end());
  return kv;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    try {
      for (const auto& [k, v] : parse_kv(line, where)) cfg.set(k, v);
    } catch (const Error& e) {
      std::string msg = bare(e);
      // parse_kv numbers the single line it was given as line 1.
      if (msg.starts_with(where + ":1:")) msg.erase(where.size(), 2);
      throw ConfigError(kModule, msg.starts_with(where) ? msg : where + ": " + msg);
    }
  }
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    try {
      const auto kv = parse_kv(o, "--set");
      if (kv.size() != 1) throw ConfigError(kModule, "expected key=value");
      cfg.set(kv[0].first, kv[0].second);
    } catch (const Error& e) {
      throw ConfigError(kModule, "--set '" + o + "': " + bare(e));
    }
  }
}

}  // namespace lasan::cli
