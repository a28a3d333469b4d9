#include "lasan/model/lasan.hpp"

#include <cmath>

namespace lasan::model {

using num::Shape;
using num::Tensor;
using num::Trace;

namespace {

constexpr const char* kModule = "lasan";

template <typename T>
void check_stage(const Tensor<T>& t, const char* stage) {
  for (T v : t.data())
    if (!std::isfinite(v)) throw NumericError(kModule, std::string("non-finite values after stage '") + stage + "'");
}

}  // namespace

template <typename T>
EncoderParams<T> bind_encoder(num::ParamBinder<T> b, const std::vector<std::size_t>& channels, std::size_t kernel) {
  EncoderParams<T> enc;
  std::size_t in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    auto blk = b.child("block" + std::to_string(i));
    const std::size_t out = channels[i];
    ConvBlockParams<T> c;
    c.weight = blk.uniform("conv.weight", {out, in, kernel}, in * kernel);
    c.bias = blk.uniform("conv.bias", {out}, in * kernel);
    c.gamma = blk.constant("bn.gamma", {out}, 1.0);
    c.beta = blk.constant("bn.beta", {out}, 0.0);
    c.running_mean = blk.buffer("bn.running_mean", {out}, 0.0);
    c.running_var = blk.buffer("bn.running_var", {out}, 1.0);
    enc.blocks.push_back(c);
    in = out;
  }
  return enc;
}

template <typename T>
AggregatorParams<T> bind_aggregator(num::ParamBinder<T> b, std::size_t d) {
  AggregatorParams<T> a;
  a.query = b.normal("query", {d}, 1.0 / std::sqrt(static_cast<double>(d)));
  a.wk = b.uniform("key.weight", {d, d}, d);
  a.bk = b.uniform("key.bias", {d}, d);
  a.wv = b.uniform("value.weight", {d, d}, d);
  a.bv = b.uniform("value.bias", {d}, d);
  return a;
}

template <typename T>
HeadParams<T> bind_head(num::ParamBinder<T> b, std::size_t in, std::size_t hidden, std::size_t out) {
  HeadParams<T> h;
  h.w1 = b.uniform("fc1.weight", {hidden, in}, in);
  h.b1 = b.uniform("fc1.bias", {hidden}, in);
  h.w2 = b.uniform("fc2.weight", {out, hidden}, hidden);
  h.b2 = b.uniform("fc2.bias", {out}, hidden);
  return h;
}

template <typename T>
LasanParams<T> bind_lasan(num::ParamBinder<T> b, const LasanSpec& spec) {
  spec.validate();
  const std::size_t d = spec.embed_dim;
  LasanParams<T> p;
  if (spec.shared_encoder) {
    p.encoders.push_back(bind_encoder(b.child("encoder"), spec.conv_channels, spec.kernel));
  } else {
    for (std::size_t l = 0; l < spec.leads; ++l)
      p.encoders.push_back(bind_encoder(b.child("encoder.lead" + std::to_string(l)), spec.conv_channels, spec.kernel));
  }
  auto pos = b.child("position");
  p.lead_embed = pos.normal("lead_embed", {spec.leads, d}, 0.02);
  p.group_embed = pos.normal("group_embed", {spec.groups(), d}, 0.02);
  for (std::size_t i = 0; i < spec.transformer_layers; ++i) {
    auto lb = b.child("transformer.layer" + std::to_string(i));
    TransformerLayerParams<T> L;
    L.ln1_gamma = lb.constant("ln1.gamma", {d}, 1.0);
    L.ln1_beta = lb.constant("ln1.beta", {d}, 0.0);
    auto at = lb.child("attn");
    L.attn.wq = at.uniform("q.weight", {d, d}, d);
    L.attn.bq = at.uniform("q.bias", {d}, d);
    L.attn.wk = at.uniform("k.weight", {d, d}, d);
    L.attn.bk = at.uniform("k.bias", {d}, d);
    L.attn.wv = at.uniform("v.weight", {d, d}, d);
    L.attn.bv = at.uniform("v.bias", {d}, d);
    L.attn.wo = at.uniform("out.weight", {d, d}, d);
    L.attn.bo = at.uniform("out.bias", {d}, d);
    L.ln2_gamma = lb.constant("ln2.gamma", {d}, 1.0);
    L.ln2_beta = lb.constant("ln2.beta", {d}, 0.0);
    L.ff1_w = lb.uniform("ff1.weight", {spec.ffn_dim, d}, d);
    L.ff1_b = lb.uniform("ff1.bias", {spec.ffn_dim}, d);
    L.ff2_w = lb.uniform("ff2.weight", {d, spec.ffn_dim}, spec.ffn_dim);
    L.ff2_b = lb.uniform("ff2.bias", {d}, spec.ffn_dim);
    p.layers.push_back(L);
  }
  auto fin = b.child("transformer.final_ln");
  p.final_gamma = fin.constant("gamma", {d}, 1.0);
  p.final_beta = fin.constant("beta", {d}, 0.0);
  p.aggregator = bind_aggregator(b.child("aggregator"), d);
  p.head = bind_head(b.child("head"), d, spec.head_hidden, spec.n_outputs());
  return p;
}

template <typename T>
Tensor<T> encode_leads(Trace<T>& tr, const Tensor<T>& x, EncoderParams<T>& enc, std::size_t kernel, Mode mode) {
  num::BatchNormOptions bn;
  bn.training = mode == Mode::Train;
  Tensor<T> h = x;
  for (auto& blk : enc.blocks) {
    h = num::conv1d(tr, h, blk.weight, blk.bias, 1, (kernel - 1) / 2);
    h = num::batch_norm(tr, h, blk.gamma, blk.beta, blk.running_mean, blk.running_var, bn);
    h = num::relu(tr, h);
    h = num::maxpool1d(tr, h);
  }
  return num::global_avg_pool(tr, h);
}

template <typename T>
Tensor<T> per_lead_encode(Trace<T>& tr, const Tensor<T>& signal, LasanParams<T>& p, const LasanSpec& spec,
                          Mode mode) {
  const bool unbatched = signal.dim() == 2;
  if ((!unbatched && signal.dim() != 3) || signal.size(unbatched ? 0 : 1) != spec.leads ||
      signal.shape().back() != spec.samples)
    throw DimensionError(kModule, "per_lead_encode: expected [B, " + std::to_string(spec.leads) + ", " +
                                      std::to_string(spec.samples) + "], got " + num::to_string(signal.shape()));
  const std::size_t batch = unbatched ? 1 : signal.size(0);
  const std::size_t leads = spec.leads, len = spec.samples, c = spec.conv_channels.back();
  Tensor<T> feats;
  if (spec.shared_encoder) {
    auto x = num::reshape(tr, signal, {batch * leads, 1, len});
    feats = num::reshape(tr, encode_leads(tr, x, p.encoders.at(0), spec.kernel, mode), {batch, leads, c});
  } else {
    // Row-gather each lead as [B, 1, L] and run its own encoder.
    auto x3 = unbatched ? num::reshape(tr, signal, {1, leads, len}) : signal;
    auto by_lead = num::reshape(tr, num::permute(tr, x3, {1, 0, 2}), {leads, batch * len});
    std::vector<Tensor<T>> parts;
    for (std::size_t l = 0; l < leads; ++l) {
      auto xl = num::reshape(tr, num::embedding(tr, by_lead, {l}), {batch, 1, len});
      parts.push_back(encode_leads(tr, xl, p.encoders.at(l), spec.kernel, mode));
    }
    feats = num::reshape(tr, num::concat(tr, parts), {batch, leads, c});
  }
  return unbatched ? num::reshape(tr, feats, {leads, c}) : feats;
}

template <typename T>
Tensor<T> add_position_encoding(Trace<T>& tr, const Tensor<T>& features, const Tensor<T>& lead_embed,
                                const Tensor<T>& group_embed, const std::vector<std::size_t>& lead_groups) {
  if (features.dim() < 2) throw DimensionError(kModule, "add_position_encoding: features must be [..., leads, D]");
  const std::size_t leads = features.size(features.dim() - 2);
  if (lead_groups.size() != leads)
    throw ConfigError(kModule, "lead_groups maps " + std::to_string(lead_groups.size()) + " leads, features have " +
                                   std::to_string(leads));
  for (std::size_t l = 0; l < leads; ++l)
    if (lead_groups[l] >= group_embed.size(0))
      throw ConfigError(kModule, "lead " + std::to_string(l) + " is mapped to missing group " +
                                     std::to_string(lead_groups[l]));
  auto pe = num::add(tr, lead_embed, num::embedding(tr, group_embed, lead_groups));
  return num::add(tr, features, pe);
}

template <typename T>
Tensor<T> transformer(Trace<T>& tr, const Tensor<T>& tokens, LasanParams<T>& p, const LasanSpec& spec, Mode mode,
                      Rng& rng) {
  const bool train = mode == Mode::Train;
  const double pd = spec.transformer_dropout;
  Tensor<T> x = tokens;
  for (auto& L : p.layers) {
    auto h = num::layer_norm(tr, x, L.ln1_gamma, L.ln1_beta);
    h = num::multi_head_attention(tr, h, spec.heads, L.attn);
    x = num::add(tr, x, num::dropout(tr, h, pd, train, rng));
    h = num::layer_norm(tr, x, L.ln2_gamma, L.ln2_beta);
    h = num::relu(tr, num::linear(tr, h, L.ff1_w, L.ff1_b));
    h = num::linear(tr, num::dropout(tr, h, pd, train, rng), L.ff2_w, L.ff2_b);
    x = num::add(tr, x, num::dropout(tr, h, pd, train, rng));
  }
  return num::layer_norm(tr, x, p.final_gamma, p.final_beta);
}

template <typename T>
Aggregate<T> aggregate(Trace<T>& tr, const Tensor<T>& features, const AggregatorParams<T>& p) {
  const bool unbatched = features.dim() == 2;
  if (!unbatched && features.dim() != 3) throw DimensionError(kModule, "aggregate: features must be [B, leads, D]");
  const std::size_t d = features.shape().back();
  if (p.query.numel() != d) throw DimensionError(kModule, "aggregate: query size mismatch");
  const std::size_t leads = features.size(features.dim() - 2);
  auto f = unbatched ? num::reshape(tr, features, {1, leads, d}) : features;
  const std::size_t batch = f.size(0);
  auto keys = num::linear(tr, f, p.wk, p.bk);
  auto q = num::reshape(tr, p.query, {1, d});
  auto scores = num::reshape(tr, num::linear(tr, keys, q, Tensor<T>{}), {batch, leads});
  scores = num::scale(tr, scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
  auto weights = num::softmax(tr, scores);
  auto values = num::linear(tr, f, p.wv, p.bv);
  auto pooled = num::reshape(tr, num::matmul(tr, num::reshape(tr, weights, {batch, 1, leads}), values), {batch, d});
  return {weights, pooled};
}

template <typename T>
Tensor<T> classification_head(Trace<T>& tr, const Tensor<T>& pooled, const HeadParams<T>& p, double dropout, Mode mode,
                              Rng& rng) {
  auto h = num::relu(tr, num::linear(tr, pooled, p.w1, p.b1));
  h = num::dropout(tr, h, dropout, mode == Mode::Train, rng);
  return num::linear(tr, h, p.w2, p.b2);
}

template <typename T>
Tensor<T> output_probabilities(Trace<T>& tr, const Tensor<T>& logits) {
  return logits.shape().back() == 1 ? num::sigmoid(tr, logits) : num::softmax(tr, logits);
}

template <typename T>
Aggregate<T> lasan_trunk(Trace<T>& tr, const Tensor<T>& signal, LasanParams<T>& p, const LasanSpec& spec, Mode mode,
                         Rng& rng) {
  auto feats = per_lead_encode(tr, signal, p, spec, mode);
  check_stage(feats, "per-lead encoder");
  auto tokens = add_position_encoding(tr, feats, p.lead_embed, p.group_embed, spec.lead_groups);
  check_stage(tokens, "position encoding");
  tokens = transformer(tr, tokens, p, spec, mode, rng);
  check_stage(tokens, "transformer");
  auto agg = aggregate(tr, tokens, p.aggregator);
  check_stage(agg.pooled, "aggregator");
  return agg;
}

template <typename T>
LasanModel<T>::LasanModel(LasanSpec spec, Rng* init, num::ParameterSet<T> params, std::string prefix)
    : spec_(std::move(spec)), params_(std::move(params)) {
  p_ = bind_lasan(num::ParamBinder<T>(params_, std::move(prefix), init), spec_);
}

template <typename T>
ModelOutput<T> LasanModel<T>::forward(Trace<T>& tr, const ModelInputs<T>& in, Mode mode, Rng& rng) {
  auto agg = lasan_trunk(tr, in.native, p_, spec_, mode, rng);
  ModelOutput<T> out;
  out.logits = classification_head(tr, agg.pooled, p_.head, spec_.head_dropout, mode, rng);
  check_stage(out.logits, "classification head");
  out.probs = output_probabilities(tr, out.logits);
  out.importance = agg.weights;
  return out;
}

template <typename T>
KvList LasanModel<T>::describe() const {
  KvList kv{{"model.kind", "STANDALONE"}};
  for (auto& e : spec_.to_kv()) kv.push_back(e);
  return kv;
}

#define LASAN_INSTANTIATE_MODEL(T)                                                                                 \
  template EncoderParams<T> bind_encoder(num::ParamBinder<T>, const std::vector<std::size_t>&, std::size_t);      \
  template AggregatorParams<T> bind_aggregator(num::ParamBinder<T>, std::size_t);                                 \
  template HeadParams<T> bind_head(num::ParamBinder<T>, std::size_t, std::size_t, std::size_t);                   \
  template LasanParams<T> bind_lasan(num::ParamBinder<T>, const LasanSpec&);                                      \
  template Tensor<T> encode_leads(Trace<T>&, const Tensor<T>&, EncoderParams<T>&, std::size_t, Mode);              \
  template Tensor<T> per_lead_encode(Trace<T>&, const Tensor<T>&, LasanParams<T>&, const LasanSpec&, Mode);        \
  template Tensor<T> add_position_encoding(Trace<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                           const std::vector<std::size_t>&);                                       \
  template Tensor<T> transformer(Trace<T>&, const Tensor<T>&, LasanParams<T>&, const LasanSpec&, Mode, Rng&);      \
  template Aggregate<T> aggregate(Trace<T>&, const Tensor<T>&, const AggregatorParams<T>&);                       \
  template Tensor<T> classification_head(Trace<T>&, const Tensor<T>&, const HeadParams<T>&, double, Mode, Rng&);   \
  template Tensor<T> output_probabilities(Trace<T>&, const Tensor<T>&);                                            \
  template Aggregate<T> lasan_trunk(Trace<T>&, const Tensor<T>&, LasanParams<T>&, const LasanSpec&, Mode, Rng&);   \
  template class LasanModel<T>;

LASAN_INSTANTIATE_MODEL(float)
LASAN_INSTANTIATE_MODEL(double)

}  // namespace lasan::model
