#include "lasan/foundation/encoder.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "lasan/dataio/record.hpp"
#include "lasan/eval/masking.hpp"
#include "lasan/synth/generator.hpp"
#include "lasan/train/loss.hpp"
#include "lasan/train/optim.hpp"

namespace lasan::fm {

namespace {
constexpr const char* kModule = "foundation";
}

std::string_view encoder_kind_name(EncoderKind k) {
  return k == EncoderKind::RandomFrozen ? "RANDOM_FROZEN" : "PRETEXT_PRETRAINED";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "RANDOM_FROZEN") return EncoderKind::RandomFrozen;
  if (name == "PRETEXT_PRETRAINED") return EncoderKind::PretextPretrained;
  throw ConfigError(kModule, "unknown encoder '" + std::string(name) + "'");
}

void EncoderConfig::validate() const {
  if (embed_dim < 16) throw ConfigError(kModule, "embedding size must be at least 16");
  if (kind == EncoderKind::PretextPretrained) {
    if (pretrain_patients == 0 || pretrain_epochs == 0) throw ConfigError(kModule, "pretraining needs data and epochs");
    if (!(pretrain_lr > 0.0)) throw ConfigError(kModule, "pretrain_lr must be positive");
  }
}

KvList EncoderConfig::to_kv() const {
  return {
      {"encoder.name", std::string(encoder_kind_name(kind))},
      {"encoder.seed", std::to_string(seed)},
      {"encoder.embed_dim", std::to_string(embed_dim)},
      {"encoder.pretrain_patients", std::to_string(pretrain_patients)},
      {"encoder.pretrain_epochs", std::to_string(pretrain_epochs)},
      {"encoder.pretrain_lr", format_double(pretrain_lr)},
  };
}

bool EncoderConfig::is_key(const std::string& key) { return key.starts_with("encoder."); }

void EncoderConfig::apply_kv(const KvList& kv) {
  for (const auto& [k, v] : kv) {
    if (!is_key(k)) continue;
    const std::string f = k.substr(8);
    if (f == "name") kind = parse_encoder_kind(v);
    else if (f == "seed") seed = kv_u64(k, v);
    else if (f == "embed_dim") embed_dim = kv_size(k, v);
    else if (f == "pretrain_patients") pretrain_patients = kv_size(k, v);
    else if (f == "pretrain_epochs") pretrain_epochs = kv_size(k, v);
    else if (f == "pretrain_lr") pretrain_lr = kv_double(k, v);
    else throw ConfigError("config", "unknown key '" + k + "'");
  }
}

template <typename T>
StubParams<T> bind_stub(num::ParamBinder<T> b, std::size_t embed_dim) {
  StubParams<T> p;
  auto c1 = b.child("conv1");
  p.conv1_w = c1.uniform("weight", {kStubWidth1, 1, kStubKernel}, kStubKernel);
  p.conv1_b = c1.uniform("bias", {kStubWidth1}, kStubKernel);
  auto c2 = b.child("conv2");
  p.conv2_w = c2.uniform("weight", {kStubWidth2, kStubWidth1, kStubKernel}, kStubWidth1 * kStubKernel);
  p.conv2_b = c2.uniform("bias", {kStubWidth2}, kStubWidth1 * kStubKernel);
  auto pr = b.child("proj");
  const std::size_t in = data::kLeads * kStubWidth2;
  p.proj_w = pr.uniform("weight", {embed_dim, in}, in);
  p.proj_b = pr.uniform("bias", {embed_dim}, in);
  return p;
}

template <typename T>
num::Tensor<T> stub_embed(num::Trace<T>& tr, const num::Tensor<T>& x, const StubParams<T>& p) {
  if (x.dim() != 3 || x.size(1) != data::kLeads)
    throw DimensionError(kModule, "encoder input must be [B, 8, L], got " + num::to_string(x.shape()));
  const std::size_t batch = x.size(0);
  const std::size_t pad = kStubKernel / 2;
  auto h = num::reshape(tr, x, {batch * data::kLeads, 1, x.size(2)});
  h = num::relu(tr, num::conv1d(tr, h, p.conv1_w, p.conv1_b, kStubStride, pad));
  h = num::relu(tr, num::conv1d(tr, h, p.conv2_w, p.conv2_b, kStubStride, pad));
  h = num::global_avg_pool(tr, h);
  h = num::reshape(tr, h, {batch, data::kLeads * kStubWidth2});
  return num::linear(tr, h, p.proj_w, p.proj_b);
}

namespace {

// Pretext task: one lead of each record is zeroed and an 8-way linear head
// on the embedding predicts which.
void pretrain(num::ParameterSet<float>& set, const StubParams<float>& p, const EncoderConfig& cfg, Rng& init) {
  synth::SynthConfig sc;
  sc.patients_per_class = cfg.pretrain_patients;
  sc.ecgs_min = sc.ecgs_max = 1;
  sc.seed = derive_seed({cfg.seed, 0x70726574u});
  const auto records = synth::generate_records(sc);

  num::ParameterSet<float> all;
  for (const auto& e : set.entries()) all.add(e.name, e.tensor, e.kind);
  num::ParamBinder<float> hb(all, "pretext.", &init);
  auto hw = hb.uniform("weight", {data::kLeads, cfg.embed_dim}, cfg.embed_dim);
  auto hbias = hb.uniform("bias", {data::kLeads}, cfg.embed_dim);
  train::Adam opt(all, {0.9, 0.999, 1e-8, 0.0});
  const std::vector<double> alpha(data::kLeads, 1.0);

  Rng rng(derive_seed({cfg.seed, 0x6d61736bu}));
  std::vector<std::size_t> order(records.size());
  constexpr std::size_t kBatch = 32;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t b0 = 0; b0 < order.size(); b0 += kBatch) {
      const std::size_t b1 = std::min(order.size(), b0 + kBatch);
      std::vector<float> x;
      std::vector<std::size_t> targets;
      for (std::size_t i = b0; i < b1; ++i) {
        const std::size_t lead = rng.below(data::kLeads);
        auto sig = eval::mask_leads(records[order[i]].signal, std::vector<std::size_t>{lead});
        auto f = data::resample_for_foundation(sig);
        x.insert(x.end(), f.values().begin(), f.values().end());
        targets.push_back(lead);
      }
      all.zero_grad();
      num::Trace<float> tr;
      num::Tensor<float> xb({b1 - b0, data::kLeads, data::kSamples}, std::move(x));
      auto logits = num::linear(tr, stub_embed(tr, xb, p), hw, hbias);
      auto loss = train::focal_loss(tr, num::softmax(tr, logits), targets, 0.0, alpha);
      tr.backward(loss);
      train::clip_grad_norm(all, 1.0);
      opt.step(cfg.pretrain_lr);
    }
  }
  set.zero_grad();
}

std::uint64_t row_hash(const float* v, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) h = (h ^ std::bit_cast<std::uint32_t>(v[i])) * 0x100000001b3ULL;
  return mix64(h ^ n);
}

}  // namespace

EncoderHandle stub_encoder(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderHandle h;
  h.name = std::string(encoder_kind_name(cfg.kind));
  h.embed_dim = cfg.embed_dim;
  Rng init(derive_seed({cfg.seed, 0x696e6974u}));
  auto p = bind_stub(num::ParamBinder<float>(h.weights, "fm.", &init), cfg.embed_dim);
  if (cfg.kind == EncoderKind::PretextPretrained) pretrain(h.weights, p, cfg, init);
  h.weights.set_frozen("fm.", true);
  return h;
}

num::Tensor<float> embed(const EncoderHandle& h, const num::Tensor<float>& x) {
  auto set = h.weights;
  auto p = bind_stub(num::ParamBinder<float>(set, "fm.", nullptr), h.embed_dim);
  num::Trace<float> tr(false);
  return stub_embed(tr, x, p);
}

EncoderBranch::EncoderBranch(num::ParameterSet<float>& set, const EncoderHandle& h)
    : set_(&set), name_(h.name), embed_dim_(h.embed_dim) {
  for (const auto& e : h.weights.entries()) set.add(e.name, e.tensor.clone(), e.kind);
  p_ = bind_stub(num::ParamBinder<float>(set, "fm.", nullptr), embed_dim_);
  set.set_frozen("fm.", !h.trainable);
}

bool EncoderBranch::frozen() const {
  for (const auto& e : set_->entries())
    if (e.name.starts_with("fm.") && e.tensor.requires_grad()) return false;
  return true;
}

num::Tensor<float> EncoderBranch::forward(num::Trace<float>& tr, const num::Tensor<float>& x) {
  if (!frozen()) {
    cache_.clear();
    return stub_embed(tr, x, p_);
  }
  if (x.dim() != 3) throw DimensionError(kModule, "encoder input must be [B, 8, L]");
  const std::size_t batch = x.size(0);
  const std::size_t row = x.numel() / std::max<std::size_t>(batch, 1);
  std::vector<std::uint64_t> keys(batch);
  std::vector<std::size_t> missing;
  for (std::size_t b = 0; b < batch; ++b) {
    keys[b] = row_hash(x.data().data() + b * row, row);
    if (!cache_.contains(keys[b]) &&
        std::find_if(missing.begin(), missing.end(), [&](std::size_t m) { return keys[m] == keys[b]; }) ==
            missing.end())
      missing.push_back(b);
  }
  if (!missing.empty()) {
    std::vector<float> sub;
    for (auto b : missing) sub.insert(sub.end(), x.data().begin() + static_cast<std::ptrdiff_t>(b * row),
                                      x.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * row));
    num::Tensor<float> xs({missing.size(), x.size(1), x.size(2)}, std::move(sub));
    num::Trace<float> inner(false);
    auto e = stub_embed(inner, xs, p_);
    for (std::size_t i = 0; i < missing.size(); ++i)
      cache_[keys[missing[i]]] = std::vector<float>(e.data().begin() + static_cast<std::ptrdiff_t>(i * embed_dim_),
                                                    e.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * embed_dim_));
  }
  std::vector<float> out;
  out.reserve(batch * embed_dim_);
  for (auto k : keys) {
    const auto& v = cache_.at(k);
    out.insert(out.end(), v.begin(), v.end());
  }
  return num::Tensor<float>({batch, embed_dim_}, std::move(out));
}

template StubParams<float> bind_stub<float>(num::ParamBinder<float>, std::size_t);
template StubParams<double> bind_stub<double>(num::ParamBinder<double>, std::size_t);
template num::Tensor<float> stub_embed<float>(num::Trace<float>&, const num::Tensor<float>&, const StubParams<float>&);
template num::Tensor<double> stub_embed<double>(num::Trace<double>&, const num::Tensor<double>&,
                                                const StubParams<double>&);

}  // namespace lasan::fm
