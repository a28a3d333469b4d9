#include <doctest.h>

#include <cmath>

#include "lasan/dataio/split.hpp"
#include "lasan/foundation/integration.hpp"
#include "lasan/foundation/strategy.hpp"
#include "lasan/model/lasan.hpp"
#include "lasan/synth/generator.hpp"

using namespace lasan;
using namespace lasan::fm;
using num::Tensor;
using num::Trace;

namespace {

model::LasanSpec small_spec() {
  model::LasanSpec s;
  s.conv_channels = {4, 8};
  s.kernel = 5;
  s.embed_dim = 8;
  s.transformer_layers = 1;
  s.heads = 2;
  s.ffn_dim = 16;
  s.head_hidden = 8;
  return s;
}

EncoderHandle random_encoder(std::size_t e = 16, std::uint64_t seed = 3) {
  EncoderConfig c;
  c.kind = EncoderKind::RandomFrozen;
  c.embed_dim = e;
  c.seed = seed;
  return stub_encoder(c);
}

Tensor<float> random_input(std::size_t batch, Rng& rng) {
  std::vector<float> v(batch * data::kLeads * data::kSamples);
  for (auto& x : v) x = static_cast<float>(rng.normal(0.0, 1.0));
  return Tensor<float>({batch, data::kLeads, data::kSamples}, std::move(v));
}

std::vector<std::vector<float>> values_with_prefix(const num::ParameterSet<float>& set, const std::string& prefix) {
  std::vector<std::vector<float>> out;
  for (const auto& e : set.entries())
    if (e.name.starts_with(prefix)) out.push_back(e.tensor.values());
  return out;
}

std::vector<data::EcgRecord> corpus_of(std::size_t per_class, std::size_t ecgs_max) {
  synth::SynthConfig sc;
  sc.patients_per_class = per_class;
  sc.ecgs_max = ecgs_max;
  return synth::generate_records(sc);
}

}  // namespace

TEST_SUITE("foundation") {
  TEST_CASE("stub encoders: shape, determinism, validation") {
    Rng rng(1);
    auto x = random_input(3, rng);
    auto a = random_encoder(24, 5), b = random_encoder(24, 5), c = random_encoder(24, 6);
    auto ea = embed(a, x), eb = embed(b, x), ec = embed(c, x);
    CHECK(ea.shape() == num::Shape{3, 24});
    CHECK(ea.values() == eb.values());
    CHECK(ea.values() != ec.values());
    CHECK(a.name == "RANDOM_FROZEN");
    for (const auto& e : a.weights.entries()) CHECK(e.name.starts_with("fm."));

    EncoderConfig bad;
    bad.embed_dim = 8;
    CHECK_THROWS_AS(stub_encoder(bad), ConfigError);
    CHECK_THROWS_AS(parse_encoder_kind("ECG_FOUNDER"), ConfigError);
  }

  TEST_CASE("frozen branch memoizes and matches the handle") {
    Rng rng(2);
    auto h = random_encoder();
    num::ParameterSet<float> set;
    EncoderBranch br(set, h);
    CHECK(br.frozen());
    auto x = random_input(2, rng);
    Trace<float> tr;
    auto e1 = br.forward(tr, x);
    auto e2 = br.forward(tr, x);
    CHECK(e1.values() == embed(h, x).values());
    CHECK(e2.values() == e1.values());
    CHECK_FALSE(e1.requires_grad());

    set.set_frozen("fm.", false);
    CHECK_FALSE(br.frozen());
    auto e3 = br.forward(tr, x);
    CHECK(e3.values() == e1.values());
    tr.backward(num::sum(tr, e3));
    CHECK(set.get("fm.proj.weight").has_grad());
  }

  TEST_CASE("frozen parameters reject gradient writes") {
    auto h = random_encoder();
    auto w = h.weights.get("fm.proj.weight");
    CHECK(h.weights.is_frozen("fm.proj.weight"));
    CHECK_THROWS_AS(w.accumulate_grad(std::vector<float>(w.numel(), 1.0f)), ContractError);
  }

  TEST_CASE("gated fusion saturates and stays in (0, 1)") {
    Rng rng(3), init(4);
    const std::size_t d = 6, e = 16;
    num::ParameterSet<double> set;
    auto p = bind_gate(num::ParamBinder<double>(set, "fusion.", &init), d, e);
    auto rand = [&](num::Shape shape) {
      std::vector<double> v(num::numel(shape));
      for (auto& x : v) x = rng.normal(0.0, 1.0);
      return Tensor<double>(std::move(shape), std::move(v));
    };
    auto h = rand({4, d}), f = rand({4, e});
    Trace<double> tr(false);
    auto free = gated_fuse(tr, h, f, p);
    for (double g : free.gate.data()) CHECK((g > 0.0 && g < 1.0));

    auto proj = num::linear(tr, f, p.proj_w, p.proj_b);
    p.gate_w = Tensor<double>({d, 2 * d}, 0.0);
    p.gate_b = Tensor<double>({d}, 20.0);
    auto hi = gated_fuse(tr, h, f, p);
    for (std::size_t i = 0; i < h.numel(); ++i) CHECK(std::abs(hi.out.data()[i] - h.data()[i]) < 1e-4 * (1 + std::abs(proj.data()[i])));
    p.gate_b = Tensor<double>({d}, -20.0);
    auto lo = gated_fuse(tr, h, f, p);
    for (std::size_t i = 0; i < h.numel(); ++i) CHECK(std::abs(lo.out.data()[i] - proj.data()[i]) < 1e-4 * (1 + std::abs(h.data()[i])));

    CHECK_THROWS_AS(gated_fuse(tr, rand({3, d}), f, p), DimensionError);
  }

  TEST_CASE("gated fusion gradients") {
    Rng rng(5), init(6);
    num::ParameterSet<double> set;
    auto p = bind_gate(num::ParamBinder<double>(set, "fusion.", &init), 4, 8);
    std::vector<Tensor<double>> in{p.proj_w, p.proj_b, p.gate_w, p.gate_b};
    std::vector<double> hv(12), fv(24);
    for (auto& x : hv) x = rng.normal(0.0, 1.0);
    for (auto& x : fv) x = rng.normal(0.0, 1.0);
    in.push_back(Tensor<double>({3, 4}, hv));
    in.push_back(Tensor<double>({3, 8}, fv));
    // Finite differences against the analytic gradient of sum(out * out).
    auto loss = [](auto& tr, const auto& v) {
      using T = typename std::decay_t<decltype(v[0])>::value_type;
      GateParams<T> g{v[0], v[1], v[2], v[3]};
      auto o = gated_fuse(tr, v[4], v[5], g).out;
      return num::sum(tr, num::mul(tr, o, o));
    };
    std::vector<Tensor<double>> live;
    for (auto& t : in) {
      auto c = t.clone();
      c.set_requires_grad(true);
      live.push_back(c);
    }
    Trace<double> tr;
    tr.backward(loss(tr, live));
    for (std::size_t k = 0; k < live.size(); ++k)
      for (std::size_t i = 0; i < live[k].numel(); i += 3) {
        auto probe = live;
        for (auto& t : probe) t = t.clone();
        const double h = 1e-6;
        probe[k].data()[i] += h;
        Trace<double> a(false);
        const double up = loss(a, probe).item();
        probe[k].data()[i] -= 2 * h;
        const double down = loss(a, probe).item();
        const double num = (up - down) / (2 * h);
        CHECK(live[k].grad()[i] == doctest::Approx(num).epsilon(1e-5).scale(1.0));
      }
  }

  TEST_CASE("build_integration contracts and parameter sets") {
    Rng init(7);
    auto enc = random_encoder(16);
    auto spec = small_spec();
    CHECK_THROWS_AS(build_integration(Integration::Standalone, &enc, spec, init), ConfigError);
    for (auto k : {Integration::LasanHead, Integration::Hybrid, Integration::LinearHead})
      CHECK_THROWS_AS(build_integration(k, nullptr, spec, init), ConfigError);
    auto odd = random_encoder(20);
    CHECK_THROWS_AS(build_integration(Integration::LasanHead, &odd, spec, init), ConfigError);
    CHECK_THROWS_AS(parse_integration("LATE_FUSION"), ConfigError);

    Rng i1(8), i2(8);
    auto standalone = build_integration(Integration::Standalone, nullptr, spec, i1);
    auto hybrid = build_integration(Integration::Hybrid, &enc, spec, i2);
    auto& hp = hybrid->params();
    std::size_t lasan = 0, fmn = 0, fusion = 0;
    for (const auto& e : hp.entries()) {
      const bool l = e.name.starts_with("lasan."), f = e.name.starts_with("fm."), g = e.name.starts_with("fusion.");
      CHECK(int(l) + int(f) + int(g) == 1);
      lasan += l;
      fmn += f;
      fusion += g;
    }
    CHECK(lasan == standalone->params().entries().size());
    for (const auto& e : standalone->params().entries()) CHECK(hp.contains(e.name));
    CHECK(fmn == enc.weights.entries().size());
    CHECK(fusion == 4);
    CHECK(hp.parameter_count() == standalone->params().parameter_count() + enc.weights.parameter_count() +
                                      hp.parameter_count("fusion."));
    CHECK(hp.is_frozen("fm.proj.weight"));

    auto head = build_integration(Integration::LasanHead, &enc, spec, init);
    CHECK(head->params().contains("adapter.weight"));
    CHECK(head->params().get("adapter.weight").shape() == num::Shape{8, 2});
    CHECK(head->params().contains("lasan.aggregator.query"));
    CHECK_FALSE(head->params().contains("lasan.position.lead_embed"));
  }

  TEST_CASE("every integration with an aggregator exposes lead importance") {
    Rng init(9), rng(10);
    auto enc = random_encoder(16);
    auto x = random_input(2, rng);
    for (auto k : {Integration::Standalone, Integration::LasanHead, Integration::Hybrid, Integration::LinearHead}) {
      auto m = build_integration(k, k == Integration::Standalone ? nullptr : &enc, small_spec(), init);
      Trace<float> tr(false);
      Rng drop(1);
      auto out = m->forward(tr, {x, x}, model::Mode::Eval, drop);
      CHECK(out.probs.shape() == num::Shape{2, 3});
      if (k == Integration::LinearHead) {
        CHECK_FALSE(out.importance.defined());
        continue;
      }
      REQUIRE(out.importance.shape() == num::Shape{2, 8});
      for (std::size_t b = 0; b < 2; ++b) {
        double s = 0;
        for (std::size_t l = 0; l < 8; ++l) s += out.importance.data()[b * 8 + l];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("hybrid with a silenced foundation branch reduces to standalone") {
    Rng i1(11), i2(12), rng(13);
    auto enc = random_encoder(16);
    auto spec = small_spec();
    model::LasanModel<float> standalone(spec, &i1);
    HybridModel hybrid(enc, spec, i2);
    for (const auto& e : standalone.params().entries()) {
      auto dst = hybrid.params().get(e.name).data();
      std::copy(e.tensor.data().begin(), e.tensor.data().end(), dst.begin());
    }
    auto& g = hybrid.gate();
    for (auto* t : {&g.proj_w, &g.proj_b, &g.gate_w}) std::fill(t->data().begin(), t->data().end(), 0.0f);
    std::fill(g.gate_b.data().begin(), g.gate_b.data().end(), 100.0f);

    auto x = random_input(3, rng);
    Trace<float> tr(false);
    Rng d1(1), d2(1);
    auto a = standalone.forward(tr, {x, {}}, model::Mode::Eval, d1);
    auto b = hybrid.forward(tr, {x, x}, model::Mode::Eval, d2);
    CHECK(a.probs.values() == b.probs.values());
    CHECK(a.importance.values() == b.importance.values());
  }

  TEST_CASE("strategies: freeze contract and step arithmetic") {
    auto corpus = corpus_of(4, 1);
    auto all = train::select_all(train::Task::ThreeClass, corpus);
    auto enc = random_encoder(16);
    StrategyConfig s;
    s.probe_epochs = 2;
    s.ft_epochs = 3;
    s.probe_lr = 1e-2;
    s.ft_lr = 1e-3;
    train::TrainConfig base;
    base.batch_size = 4;
    base.warmup_epochs = 1;
    const std::size_t per_epoch = (all.size() + 3) / 4;

    Rng i1(14);
    LinearHeadModel lp(enc, 3, i1);
    const auto fm0 = values_with_prefix(lp.params(), "fm.");
    const auto probe0 = values_with_prefix(lp.params(), "probe.");
    s.kind = StrategyKind::LinearProbe;
    auto r = apply_strategy(lp, s, all, all, base);
    CHECK(values_with_prefix(lp.params(), "fm.") == fm0);
    CHECK(values_with_prefix(lp.params(), "probe.") != probe0);
    CHECK(r.steps == 2 * per_epoch);
    CHECK(r.log.size() == 2);

    Rng i2(14);
    LinearHeadModel ptft(enc, 3, i2);
    s.kind = StrategyKind::ProbeThenFineTune;
    r = apply_strategy(ptft, s, all, all, base);
    CHECK(r.steps == 2 * per_epoch + 3 * per_epoch);
    CHECK(r.log.size() == 5);
    CHECK(r.log[3].epoch == 3);
    CHECK(values_with_prefix(ptft.params(), "fm.") != fm0);

    Rng i3(14);
    LinearHeadModel ft(enc, 3, i3);
    s.kind = StrategyKind::FineTune;
    r = apply_strategy(ft, s, all, all, base);
    CHECK(r.steps == 3 * per_epoch);

    Rng i4(14);
    auto standalone = build_integration(Integration::Standalone, nullptr, small_spec(), i4);
    CHECK_THROWS_AS(apply_strategy(*standalone, s, all, all, base), ConfigError);
    s.ft_epochs = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);

    StrategyConfig defaults;
    CHECK(probe_phase(defaults, base).max_epochs == 50);
    CHECK(probe_phase(defaults, base).base_lr == 1e-2);
    CHECK(finetune_phase(defaults, base).max_epochs == 100);
    CHECK(finetune_phase(defaults, base).base_lr == 1e-4);
    StrategyConfig back;
    back.apply_kv(defaults.to_kv());
    CHECK(back.to_kv() == defaults.to_kv());
  }

  TEST_CASE("pretext pretraining beats random weights under linear probing") {
    auto corpus = corpus_of(100, 3);
    auto split = data::stratified_patient_split(data::patients_of(corpus), data::kDefaultRatios, 42);
    auto tr = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Train);
    auto va = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Val);
    auto te = train::select(train::Task::ThreeClass, corpus, split, data::Partition::Test);
    StrategyConfig lp;
    lp.kind = StrategyKind::LinearProbe;
    auto probe = [&](EncoderKind kind) {
      EncoderConfig c;
      c.kind = kind;
      auto enc = stub_encoder(c);
      Rng init(1);
      LinearHeadModel m(enc, 3, init);
      apply_strategy(m, lp, tr, va);
      return train::score_task(te.task, train::predict(m, te), te.targets).primary;
    };
    const double random = probe(EncoderKind::RandomFrozen);
    const double pretext = probe(EncoderKind::PretextPretrained);
    INFO("random " << random << " pretext " << pretext);
    CHECK(pretext > random);
  }
}
