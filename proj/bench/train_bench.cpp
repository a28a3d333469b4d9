// Trains a standalone LASAN on a synthetic corpus and reports test AUROC and
// wall time. Arguments are key=value overrides (lasan.*, train.*, plus
// patients, ecgs, seed).
#include <chrono>
#include <cstdio>

#include "lasan/dataio/split.hpp"
#include "lasan/eval/masking.hpp"
#include "lasan/model/lasan.hpp"
#include "lasan/synth/generator.hpp"
#include "lasan/train/trainer.hpp"

using namespace lasan;

int main(int argc, char** argv) {
  std::string text;
  for (int i = 1; i < argc; ++i) text += std::string(argv[i]) + "\n";
  const auto kv = parse_kv(text, "args");

  synth::SynthConfig sc;
  model::LasanSpec spec = model::desk_spec();
  train::TrainConfig tc;
  tc.base_lr = 3e-3;
  tc.max_epochs = 20;
  tc.patience = 15;
  std::uint64_t split_seed = 42;
  for (const auto& [k, v] : kv) {
    if (k == "patients") sc.patients_per_class = kv_size(k, v);
    else if (k == "ecgs") sc.ecgs_min = sc.ecgs_max = kv_size(k, v);
    else if (k == "synth_seed") sc.seed = kv_u64(k, v);
    else if (k == "split_seed") split_seed = kv_u64(k, v);
    else if (k == "noise") sc.noise_std = kv_double(k, v);
  }
  sc.apply_kv(kv);
  spec.apply_kv(kv);
  tc.apply_kv(kv);

  auto t0 = std::chrono::steady_clock::now();
  auto corpus = synth::generate_records(sc);
  auto split = data::stratified_patient_split(data::patients_of(corpus), data::kDefaultRatios, split_seed);
  auto tr = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Train);
  auto va = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Val);
  auto te = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Test);
  Rng init(derive_seed({tc.seed, 1}));
  model::LasanModel<float> net(spec, &init);
  auto t1 = std::chrono::steady_clock::now();
  std::printf("corpus %zu records (train %zu val %zu test %zu) in %.1fs, params %zu\n", corpus.size(), tr.size(),
              va.size(), te.size(), std::chrono::duration<double>(t1 - t0).count(), net.params().parameter_count());
  auto res = train::fit(net, tr, va, tc);
  std::fputs(train::train_log_csv(res).c_str(), stdout);
  auto score = train::score_task(te.task, train::predict(net, te), te.targets);
  std::printf("best epoch %zu val %.4f test macro %.4f (CONTROL %.4f ARVC %.4f LQTS %.4f) total %.1fs\n",
              res.best_epoch, res.best_val, score.primary, score.per_class[0], score.per_class[1], score.per_class[2],
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  auto rep = eval::masking_analysis(net, te, eval::canonical_groups());
  for (const auto& g : eval::canonical_groups())
    std::printf("mask %-17s macro %6.2f%%  CONTROL %6.2f%%  ARVC %6.2f%%  LQTS %6.2f%%\n", g.name.c_str(),
                rep.at(g.name, "MACRO").drop_pct, rep.at(g.name, "CONTROL").drop_pct, rep.at(g.name, "ARVC").drop_pct,
                rep.at(g.name, "LQTS").drop_pct);
}
