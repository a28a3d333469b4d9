#pragma once

#include <vector>

#include "lasan/model/classifier.hpp"
#include "lasan/numerics/ops.hpp"

namespace lasan::model {

template <typename T>
struct ConvBlockParams {
  num::Tensor<T> weight, bias, gamma, beta, running_mean, running_var;
};

template <typename T>
struct EncoderParams {
  std::vector<ConvBlockParams<T>> blocks;
};

template <typename T>
struct TransformerLayerParams {
  num::Tensor<T> ln1_gamma, ln1_beta;
  num::AttentionParams<T> attn;
  num::Tensor<T> ln2_gamma, ln2_beta;
  num::Tensor<T> ff1_w, ff1_b, ff2_w, ff2_b;
};

template <typename T>
struct AggregatorParams {
  num::Tensor<T> query;  // [D]
  num::Tensor<T> wk, bk, wv, bv;
};

template <typename T>
struct HeadParams {
  num::Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct LasanParams {
  // One entry when the encoder is shared, one per lead otherwise.
  std::vector<EncoderParams<T>> encoders;
  num::Tensor<T> lead_embed;   // [8, D]
  num::Tensor<T> group_embed;  // [G, D]
  std::vector<TransformerLayerParams<T>> layers;
  num::Tensor<T> final_gamma, final_beta;
  AggregatorParams<T> aggregator;
  HeadParams<T> head;
};

// Parameter binders; each looks up or creates entries under the binder's prefix.
template <typename T>
EncoderParams<T> bind_encoder(num::ParamBinder<T> b, const std::vector<std::size_t>& channels, std::size_t kernel);
template <typename T>
AggregatorParams<T> bind_aggregator(num::ParamBinder<T> b, std::size_t dim);
template <typename T>
HeadParams<T> bind_head(num::ParamBinder<T> b, std::size_t in, std::size_t hidden, std::size_t out);
template <typename T>
LasanParams<T> bind_lasan(num::ParamBinder<T> b, const LasanSpec& spec);

// x: [N, 1, L] -> [N, C_last]; conv -> batchnorm -> relu -> maxpool per block,
// then global average pooling.
template <typename T>
num::Tensor<T> encode_leads(num::Trace<T>& tr, const num::Tensor<T>& x, EncoderParams<T>& enc, std::size_t kernel,
                            Mode mode);

// signal: [B, 8, L] or [8, L] -> [B, 8, D] or [8, D].
template <typename T>
num::Tensor<T> per_lead_encode(num::Trace<T>& tr, const num::Tensor<T>& signal, LasanParams<T>& p,
                               const LasanSpec& spec, Mode mode);

// features: [..., 8, D]; output[l] = features[l] + lead_embed[l] + group_embed[group(l)].
template <typename T>
num::Tensor<T> add_position_encoding(num::Trace<T>& tr, const num::Tensor<T>& features,
                                     const num::Tensor<T>& lead_embed, const num::Tensor<T>& group_embed,
                                     const std::vector<std::size_t>& lead_groups);

// Pre-LN transformer layers followed by a final layer norm; tokens [B, 8, D].
template <typename T>
num::Tensor<T> transformer(num::Trace<T>& tr, const num::Tensor<T>& tokens, LasanParams<T>& p, const LasanSpec& spec,
                           Mode mode, Rng& rng);

template <typename T>
struct Aggregate {
  num::Tensor<T> weights;  // [B, 8], rows sum to 1
  num::Tensor<T> pooled;   // [B, D]
};

// Single-head attention pooling with a learned query:
// scores[l] = <query, key(f_l)> / sqrt(D), weights = softmax(scores),
// pooled = sum_l weights[l] * value(f_l). features: [B, 8, D] or [8, D].
template <typename T>
Aggregate<T> aggregate(num::Trace<T>& tr, const num::Tensor<T>& features, const AggregatorParams<T>& p);

// MLP D -> hidden -> outputs with relu and dropout; returns logits.
template <typename T>
num::Tensor<T> classification_head(num::Trace<T>& tr, const num::Tensor<T>& pooled, const HeadParams<T>& p,
                                   double dropout, Mode mode, Rng& rng);

// Softmax over classes, or sigmoid for a single logit.
template <typename T>
num::Tensor<T> output_probabilities(num::Trace<T>& tr, const num::Tensor<T>& logits);

// Trunk up to the aggregate: encode, position-encode, transformer, aggregate.
template <typename T>
Aggregate<T> lasan_trunk(num::Trace<T>& tr, const num::Tensor<T>& signal, LasanParams<T>& p, const LasanSpec& spec,
                         Mode mode, Rng& rng);

template <typename T>
class LasanModel : public Classifier<T> {
 public:
  // Creates parameters from `init`, or binds existing entries of `params`
  // (e.g. loaded from a checkpoint) when `init` is null.
  LasanModel(LasanSpec spec, Rng* init, num::ParameterSet<T> params = {}, std::string prefix = "lasan.");

  ModelOutput<T> forward(num::Trace<T>& tr, const ModelInputs<T>& in, Mode mode, Rng& rng) override;
  num::ParameterSet<T>& params() override { return params_; }
  std::size_t n_outputs() const override { return spec_.n_outputs(); }
  bool needs_native() const override { return true; }
  bool needs_foundation() const override { return false; }
  KvList describe() const override;

  const LasanSpec& spec() const { return spec_; }
  LasanParams<T>& weights() { return p_; }

 private:
  LasanSpec spec_;
  num::ParameterSet<T> params_;
  LasanParams<T> p_;
};

}  // namespace lasan::model
