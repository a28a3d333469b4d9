#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "lasan/foundation/encoder.hpp"
#include "lasan/model/lasan.hpp"

namespace lasan::fm {

// STANDALONE: LASAN alone. LASAN_HEAD: foundation embedding split into 8
// pseudo-lead tokens, then the LASAN aggregator and head. HYBRID: LASAN and
// foundation branches fused by gates before the head. LINEAR_HEAD: the plain
// foundation + linear classifier used to compare transfer strategies.
enum class Integration { Standalone, LasanHead, Hybrid, LinearHead };

std::string_view integration_name(Integration k);
Integration parse_integration(std::string_view name);

template <typename T>
struct GateParams {
  num::Tensor<T> proj_w, proj_b;  // E -> D
  num::Tensor<T> gate_w, gate_b;  // 2D -> D
};

template <typename T>
GateParams<T> bind_gate(num::ParamBinder<T> b, std::size_t d, std::size_t e);

template <typename T>
struct Fused {
  num::Tensor<T> out;   // [B, D]
  num::Tensor<T> gate;  // [B, D], elementwise in (0, 1)
};

// p = proj(h_fm); g = sigmoid(W_g [h_lasan ; p] + b_g); out = g*h_lasan + (1-g)*p.
template <typename T>
Fused<T> gated_fuse(num::Trace<T>& tr, const num::Tensor<T>& h_lasan, const num::Tensor<T>& h_fm,
                    const GateParams<T>& p);

// Foundation encoder + linear classifier. Parameters: fm.*, probe.*.
class LinearHeadModel : public model::Classifier<float> {
 public:
  LinearHeadModel(const EncoderHandle& enc, std::size_t n_outputs, Rng& init);
  model::ModelOutput<float> forward(num::Trace<float>& tr, const model::ModelInputs<float>& in, model::Mode mode,
                                    Rng& rng) override;
  num::ParameterSet<float>& params() override { return params_; }
  std::size_t n_outputs() const override { return n_outputs_; }
  bool needs_native() const override { return false; }
  bool needs_foundation() const override { return true; }
  KvList describe() const override;

 private:
  num::ParameterSet<float> params_;
  EncoderBranch enc_;
  std::size_t n_outputs_;
  num::Tensor<float> w_, b_;
};

// Parameters: fm.*, adapter.* (E/8 -> D per token), lasan.aggregator.*, lasan.head.*.
class LasanHeadModel : public model::Classifier<float> {
 public:
  LasanHeadModel(const EncoderHandle& enc, model::LasanSpec spec, Rng& init);
  model::ModelOutput<float> forward(num::Trace<float>& tr, const model::ModelInputs<float>& in, model::Mode mode,
                                    Rng& rng) override;
  num::ParameterSet<float>& params() override { return params_; }
  std::size_t n_outputs() const override { return spec_.n_outputs(); }
  bool needs_native() const override { return false; }
  bool needs_foundation() const override { return true; }
  KvList describe() const override;

 private:
  model::LasanSpec spec_;
  num::ParameterSet<float> params_;
  EncoderBranch enc_;
  num::Tensor<float> adapter_w_, adapter_b_;
  model::AggregatorParams<float> agg_;
  model::HeadParams<float> head_;
};

// Parameters: lasan.* (as in STANDALONE), fm.*, fusion.*.
class HybridModel : public model::Classifier<float> {
 public:
  HybridModel(const EncoderHandle& enc, model::LasanSpec spec, Rng& init);
  model::ModelOutput<float> forward(num::Trace<float>& tr, const model::ModelInputs<float>& in, model::Mode mode,
                                    Rng& rng) override;
  num::ParameterSet<float>& params() override { return params_; }
  std::size_t n_outputs() const override { return spec_.n_outputs(); }
  bool needs_native() const override { return true; }
  bool needs_foundation() const override { return true; }
  KvList describe() const override;

  GateParams<float>& gate() { return gate_; }

 private:
  model::LasanSpec spec_;
  num::ParameterSet<float> params_;
  model::LasanParams<float> lasan_;
  EncoderBranch enc_;
  GateParams<float> gate_;
};

// Builds an integration. STANDALONE rejects an encoder; every other kind
// requires one. LASAN_HEAD requires E divisible by 8.
std::unique_ptr<model::Classifier<float>> build_integration(Integration kind, const EncoderHandle* enc,
                                                            const model::LasanSpec& spec, Rng& init);

}  // namespace lasan::fm
