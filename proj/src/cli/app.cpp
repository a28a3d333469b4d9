#include "lasan/cli/app.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lasan/cli/pipeline.hpp"
#include "lasan/dataio/formats.hpp"
#include "lasan/eval/masking.hpp"
#include "lasan/eval/metrics.hpp"

namespace lasan::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli";

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Writer {
  fs::path dir;
  std::ostream& out;

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = dir / name;
    std::ofstream f(p, std::ios::binary);
    f << text;
    f.close();
    if (!f) throw IoError(kModule, "cannot write " + p.string());
    out << "wrote " << p.string() << '\n';
    return p;
  }
};

Writer prepare_out(const std::string& dir, std::ostream& out) {
  fs::create_directories(dir);
  return Writer{fs::path(dir), out};
}

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value run configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
  }
  RunConfig load() const {
    RunConfig cfg;
    if (!file.empty()) apply_config_text(cfg, read_text(file), file);
    apply_overrides(cfg, sets);
    return cfg;
  }
};

struct DataFlags {
  std::string manifest, split;
  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "corpus manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--split", split, "split file")->required()->check(CLI::ExistingFile);
  }
};

std::string metrics_csv(train::Task task, const data::Partition part, const train::Predictions& p,
                        const std::vector<std::size_t>& targets) {
  const auto score = train::score_task(task, p, targets);
  const auto names = train::score_class_names(task);
  std::string s = "partition,metric,class,value\n";
  const std::string pn(data::partition_name(part));
  auto row = [&](const std::string& metric, const std::string& cls, const std::string& v) {
    s += pn + "," + metric + "," + cls + "," + v + "\n";
  };
  const bool binary = train::task_classes(task) == 2;
  row("auroc", binary ? names[0] : "MACRO", format_double(score.primary));
  if (!binary)
    for (std::size_t k = 0; k < names.size(); ++k) row("auroc", names[k], format_double(score.per_class[k]));
  if (binary) {
    std::vector<int> labels(targets.begin(), targets.end());
    auto c = eval::confusion_metrics(p.probs, labels);
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
    row("tp", names[0], std::to_string(c.tp));
    row("fn", names[0], std::to_string(c.fn));
    row("tn", names[0], std::to_string(c.tn));
    row("fp", names[0], std::to_string(c.fp));
    row("sensitivity", names[0], opt(c.sensitivity));
    row("specificity", names[0], opt(c.specificity));
    row("balanced_accuracy", names[0], opt(c.balanced_accuracy));
    row("accuracy", names[0], opt(c.accuracy));
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lead-aware ECG classification: synthetic corpus, training, evaluation and masking"};
  app.name("lasan");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string out_dir;
  auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out_dir, "output directory")->required(); };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus (records + manifest)");
  ConfigFlags synth_cfg;
  synth_cfg.add_to(synth);
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--seed", synth_seed, "corpus seed (synth.seed)");
  add_out(synth);

  // split
  auto* split = app.add_subcommand("split", "patient-level stratified split of a manifest");
  ConfigFlags split_cfg;
  split_cfg.add_to(split);
  std::string split_manifest, ratios_text;
  std::optional<std::uint64_t> split_seed;
  split->add_option("--manifest", split_manifest, "corpus manifest")->required()->check(CLI::ExistingFile);
  split->add_option("--ratios", ratios_text, "train,val,test ratios (split.ratios)");
  split->add_option("--seed", split_seed, "split seed (split.seed)");
  add_out(split);

  // train
  auto* trn = app.add_subcommand("train", "train a model; writes a checkpoint and a training log");
  ConfigFlags train_cfg;
  train_cfg.add_to(trn);
  DataFlags train_data;
  train_data.add_to(trn);
  add_out(trn);

  // eval / mask
  std::string checkpoint, partition = "TEST";
  DataFlags eval_data, mask_data;
  auto* evl = app.add_subcommand("eval", "metrics of a checkpoint on one partition");
  auto* msk = app.add_subcommand("mask", "lead-group masking analysis of a checkpoint");
  for (auto* cmd : {evl, msk}) {
    cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--partition", partition, "TRAIN, VAL or TEST")->capture_default_str();
    add_out(cmd);
  }
  eval_data.add_to(evl);
  mask_data.add_to(msk);

  // bench
  auto* bench = app.add_subcommand("bench", "strategy x encoder x integration grid over seeds");
  ConfigFlags bench_cfg;
  bench_cfg.add_to(bench);
  DataFlags bench_data;
  bench_data.add_to(bench);
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> strategies{"LINEAR_PROBE", "FINE_TUNE", "PROBE_THEN_FINE_TUNE"};
  std::vector<std::string> encoders{"RANDOM_FROZEN", "PRETEXT_PRETRAINED"};
  std::vector<std::string> integrations{"LINEAR_HEAD"};
  bench->add_option("--seeds", seeds, "training seeds")->delimiter(',')->capture_default_str();
  bench->add_option("--strategies", strategies, "transfer strategies")->delimiter(',')->capture_default_str();
  bench->add_option("--encoders", encoders, "stub encoders")->delimiter(',')->capture_default_str();
  bench->add_option("--integrations", integrations, "integrations")->delimiter(',')->capture_default_str();
  add_out(bench);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: cli: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      auto cfg = synth_cfg.load();
      if (synth_seed) cfg.synth.seed = *synth_seed;
      auto entries = synth::generate_corpus(cfg.synth, out_dir);
      out << "wrote " << entries.size() << " records under " << (fs::path(out_dir) / "records").string() << '\n';
      out << "wrote " << (fs::path(out_dir) / "manifest.tsv").string() << '\n';
    } else if (split->parsed()) {
      auto cfg = split_cfg.load();
      if (!ratios_text.empty()) cfg.set("split.ratios", ratios_text);
      if (split_seed) cfg.split_seed = *split_seed;
      const auto manifest = data::read_manifest(split_manifest);
      std::vector<std::pair<std::string, data::Label>> patients;
      for (const auto& e : manifest)
        if (patients.empty() || patients.back().first != e.patient_id) patients.emplace_back(e.patient_id, e.label);
      std::sort(patients.begin(), patients.end());
      patients.erase(std::unique(patients.begin(), patients.end()), patients.end());
      auto s = data::stratified_patient_split(patients, cfg.split_ratios, cfg.split_seed);
      for (const auto& w : s.warnings) err << "warning: " << w << '\n';
      auto w = prepare_out(out_dir, out);
      data::write_split(w.dir / "split.tsv", s);
      out << "wrote " << (w.dir / "split.tsv").string() << '\n';
    } else if (trn->parsed()) {
      auto cfg = train_cfg.load();
      const auto corpus = data::load_corpus(train_data.manifest);
      const auto splits = select_splits(cfg.task, corpus, data::read_split(train_data.split));
      const auto enc = make_encoder(cfg);
      auto trained = train_model(cfg, splits, enc ? &*enc : nullptr);
      auto w = prepare_out(out_dir, out);
      model::write_checkpoint(w.dir / "model.lasw", to_checkpoint(trained));
      out << "wrote " << (w.dir / "model.lasw").string() << '\n';
      w.write("train_log.csv", train::train_log_csv(trained.result));
      w.write("run.conf", format_kv(cfg.to_kv()));
      out << "best epoch " << trained.result.best_epoch << " val auroc " << format_double(trained.result.best_val)
          << '\n';
    } else if (evl->parsed() || msk->parsed()) {
      const auto& d = evl->parsed() ? eval_data : mask_data;
      auto loaded = model_from_checkpoint(model::read_checkpoint(checkpoint));
      const auto corpus = data::load_corpus(d.manifest);
      const auto part = data::parse_partition(partition);
      const auto set = train::select(loaded.task, corpus, data::read_split(d.split), part);
      if (set.empty()) throw ConfigError(kModule, "partition " + partition + " has no records for this task");
      auto w = prepare_out(out_dir, out);
      if (evl->parsed()) {
        const auto p = train::predict(*loaded.model, set);
        w.write("metrics.csv", metrics_csv(loaded.task, part, p, set.targets));
      } else {
        const auto rep = eval::masking_analysis(*loaded.model, set, eval::canonical_groups());
        w.write("masking.csv", eval::masking_csv(rep));
        w.write("masking.svg", eval::masking_svg(rep));
      }
    } else if (bench->parsed()) {
      auto cfg = bench_cfg.load();
      const auto corpus = data::load_corpus(bench_data.manifest);
      const auto splits = select_splits(cfg.task, corpus, data::read_split(bench_data.split));
      std::vector<BenchCell> cells;
      auto run_seeds = [&](RunConfig c, const fm::EncoderHandle* enc, BenchCell cell) {
        for (auto seed : seeds) {
          c.train.seed = seed;
          auto trained = train_model(c, splits, enc);
          cell.scores.push_back(train::score_task(c.task, train::predict(*trained.model, splits.test), splits.test.targets));
          out << cell.integration << " " << cell.strategy << " " << cell.encoder << " seed " << seed << " test auroc "
              << format_double(cell.scores.back().primary) << '\n';
        }
        cells.push_back(std::move(cell));
      };
      for (const auto& in : integrations) {
        auto c = cfg;
        c.integration = fm::parse_integration(in);
        if (c.integration == fm::Integration::Standalone) {
          run_seeds(c, nullptr, {in, "-", "-", {}});
          continue;
        }
        for (const auto& en : encoders) {
          c.encoder.kind = fm::parse_encoder_kind(en);
          const auto enc = fm::stub_encoder(c.encoder);
          for (const auto& st : strategies) {
            c.strategy.kind = fm::parse_strategy(st);
            run_seeds(c, &enc, {in, st, en, {}});
          }
        }
      }
      auto w = prepare_out(out_dir, out);
      w.write("bench.csv", bench_csv(cfg.task, cells));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lasan::cli
