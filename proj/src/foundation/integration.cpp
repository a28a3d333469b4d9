#include "lasan/foundation/integration.hpp"

#include "lasan/dataio/record.hpp"

namespace lasan::fm {

using num::Tensor;
using num::Trace;

namespace {
constexpr const char* kModule = "foundation";

KvList with_encoder(KvList kv, const EncoderBranch& enc) {
  kv.emplace_back("encoder.name", enc.name());
  kv.emplace_back("encoder.embed_dim", std::to_string(enc.embed_dim()));
  return kv;
}
}  // namespace

std::string_view integration_name(Integration k) {
  switch (k) {
    case Integration::Standalone:
      return "STANDALONE";
    case Integration::LasanHead:
      return "LASAN_HEAD";
    case Integration::Hybrid:
      return "HYBRID";
    case Integration::LinearHead:
      return "LINEAR_HEAD";
  }
  return "?";
}

Integration parse_integration(std::string_view name) {
  for (auto k : {Integration::Standalone, Integration::LasanHead, Integration::Hybrid, Integration::LinearHead})
    if (integration_name(k) == name) return k;
  throw ConfigError(kModule, "unknown integration '" + std::string(name) + "'");
}

template <typename T>
GateParams<T> bind_gate(num::ParamBinder<T> b, std::size_t d, std::size_t e) {
  GateParams<T> g;
  g.proj_w = b.uniform("proj.weight", {d, e}, e);
  g.proj_b = b.uniform("proj.bias", {d}, e);
  g.gate_w = b.uniform("gate.weight", {d, 2 * d}, 2 * d);
  g.gate_b = b.uniform("gate.bias", {d}, 2 * d);
  return g;
}

template <typename T>
Fused<T> gated_fuse(Trace<T>& tr, const Tensor<T>& h_lasan, const Tensor<T>& h_fm, const GateParams<T>& p) {
  if (h_lasan.dim() != 2 || h_fm.dim() != 2 || h_lasan.size(0) != h_fm.size(0))
    throw DimensionError(kModule, "gated_fuse expects [B, D] and [B, E] inputs");
  auto proj = num::linear(tr, h_fm, p.proj_w, p.proj_b);
  auto g = num::sigmoid(tr, num::linear(tr, num::concat(tr, {h_lasan, proj}), p.gate_w, p.gate_b));
  // g*h + (1-g)*p == p + g*(h - p)
  auto out = num::add(tr, proj, num::mul(tr, g, num::sub(tr, h_lasan, proj)));
  return {out, g};
}

LinearHeadModel::LinearHeadModel(const EncoderHandle& enc, std::size_t n_outputs, Rng& init)
    : enc_(params_, enc), n_outputs_(n_outputs) {
  num::ParamBinder<float> b(params_, "probe.", &init);
  w_ = b.uniform("weight", {n_outputs, enc.embed_dim}, enc.embed_dim);
  b_ = b.uniform("bias", {n_outputs}, enc.embed_dim);
}

model::ModelOutput<float> LinearHeadModel::forward(Trace<float>& tr, const model::ModelInputs<float>& in,
                                                   model::Mode, Rng&) {
  model::ModelOutput<float> out;
  out.logits = num::linear(tr, enc_.forward(tr, in.foundation), w_, b_);
  out.probs = model::output_probabilities(tr, out.logits);
  return out;
}

KvList LinearHeadModel::describe() const {
  return with_encoder({{"model.kind", "LINEAR_HEAD"}, {"model.n_outputs", std::to_string(n_outputs_)}}, enc_);
}

LasanHeadModel::LasanHeadModel(const EncoderHandle& enc, model::LasanSpec spec, Rng& init)
    : spec_(std::move(spec)), enc_(params_, enc) {
  spec_.validate();
  if (enc.embed_dim % data::kLeads != 0)
    throw ConfigError(kModule, "LASAN_HEAD needs an embedding size divisible by 8, got " + std::to_string(enc.embed_dim));
  const std::size_t tok = enc.embed_dim / data::kLeads;
  const std::size_t d = spec_.embed_dim;
  num::ParamBinder<float> a(params_, "adapter.", &init);
  adapter_w_ = a.uniform("weight", {d, tok}, tok);
  adapter_b_ = a.uniform("bias", {d}, tok);
  num::ParamBinder<float> l(params_, "lasan.", &init);
  agg_ = model::bind_aggregator(l.child("aggregator"), d);
  head_ = model::bind_head(l.child("head"), d, spec_.head_hidden, spec_.n_outputs());
}

model::ModelOutput<float> LasanHeadModel::forward(Trace<float>& tr, const model::ModelInputs<float>& in,
                                                  model::Mode mode, Rng& rng) {
  auto e = enc_.forward(tr, in.foundation);
  const std::size_t batch = e.size(0);
  auto tokens = num::reshape(tr, e, {batch, data::kLeads, enc_.embed_dim() / data::kLeads});
  tokens = num::linear(tr, tokens, adapter_w_, adapter_b_);
  auto agg = model::aggregate(tr, tokens, agg_);
  model::ModelOutput<float> out;
  out.logits = model::classification_head(tr, agg.pooled, head_, spec_.head_dropout, mode, rng);
  out.probs = model::output_probabilities(tr, out.logits);
  out.importance = agg.weights;
  return out;
}

KvList LasanHeadModel::describe() const {
  KvList kv{{"model.kind", "LASAN_HEAD"}};
  for (auto& e : spec_.to_kv()) kv.push_back(e);
  return with_encoder(kv, enc_);
}

HybridModel::HybridModel(const EncoderHandle& enc, model::LasanSpec spec, Rng& init)
    : spec_(std::move(spec)), enc_(params_, enc) {
  spec_.validate();
  lasan_ = model::bind_lasan(num::ParamBinder<float>(params_, "lasan.", &init), spec_);
  gate_ = bind_gate(num::ParamBinder<float>(params_, "fusion.", &init), spec_.embed_dim, enc.embed_dim);
}

model::ModelOutput<float> HybridModel::forward(Trace<float>& tr, const model::ModelInputs<float>& in,
                                               model::Mode mode, Rng& rng) {
  auto agg = model::lasan_trunk(tr, in.native, lasan_, spec_, mode, rng);
  auto fused = gated_fuse(tr, agg.pooled, enc_.forward(tr, in.foundation), gate_);
  model::ModelOutput<float> out;
  out.logits = model::classification_head(tr, fused.out, lasan_.head, spec_.head_dropout, mode, rng);
  out.probs = model::output_probabilities(tr, out.logits);
  out.importance = agg.weights;
  return out;
}

KvList HybridModel::describe() const {
  KvList kv{{"model.kind", "HYBRID"}};
  for (auto& e : spec_.to_kv()) kv.push_back(e);
  return with_encoder(kv, enc_);
}

std::unique_ptr<model::Classifier<float>> build_integration(Integration kind, const EncoderHandle* enc,
                                                            const model::LasanSpec& spec, Rng& init) {
  if (kind == Integration::Standalone) {
    if (enc != nullptr) throw ConfigError(kModule, "STANDALONE does not take a foundation encoder");
    spec.validate();
    return std::make_unique<model::LasanModel<float>>(spec, &init);
  }
  if (enc == nullptr)
    throw ConfigError(kModule, std::string(integration_name(kind)) + " requires a foundation encoder");
  switch (kind) {
    case Integration::LasanHead:
      return std::make_unique<LasanHeadModel>(*enc, spec, init);
    case Integration::Hybrid:
      return std::make_unique<HybridModel>(*enc, spec, init);
    default:
      return std::make_unique<LinearHeadModel>(*enc, spec.n_outputs(), init);
  }
}

template GateParams<float> bind_gate<float>(num::ParamBinder<float>, std::size_t, std::size_t);
template GateParams<double> bind_gate<double>(num::ParamBinder<double>, std::size_t, std::size_t);
template Fused<float> gated_fuse<float>(Trace<float>&, const Tensor<float>&, const Tensor<float>&,
                                        const GateParams<float>&);
template Fused<double> gated_fuse<double>(Trace<double>&, const Tensor<double>&, const Tensor<double>&,
                                          const GateParams<double>&);

}  // namespace lasan::fm
