#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lasan/kv.hpp"
#include "lasan/numerics/ops.hpp"
#include "lasan/numerics/params.hpp"

namespace lasan::fm {

// Stand-ins for pretrained ECG foundation models. Both share one small conv
// architecture; they differ only in how the weights are obtained.
enum class EncoderKind { RandomFrozen, PretextPretrained };

std::string_view encoder_kind_name(EncoderKind k);
EncoderKind parse_encoder_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::PretextPretrained;
  std::uint64_t seed = 11;
  std::size_t embed_dim = 64;
  // Pretext pretraining on a private synthetic corpus.
  std::size_t pretrain_patients = 60;  // per class, one ECG each
  std::size_t pretrain_epochs = 2;
  double pretrain_lr = 3e-3;

  void validate() const;
  KvList to_kv() const;  // "encoder.*" keys
  void apply_kv(const KvList& kv);
  static bool is_key(const std::string& key);
};

// Per lead (shared weights): conv(1->8, k9, s4) -> relu -> conv(8->16, k9, s4)
// -> relu -> mean over time; the 8 lead vectors are concatenated and
// projected to the embedding.
inline constexpr std::size_t kStubWidth1 = 8;
inline constexpr std::size_t kStubWidth2 = 16;
inline constexpr std::size_t kStubKernel = 9;
inline constexpr std::size_t kStubStride = 4;

template <typename T>
struct StubParams {
  num::Tensor<T> conv1_w, conv1_b, conv2_w, conv2_b, proj_w, proj_b;
};

template <typename T>
StubParams<T> bind_stub(num::ParamBinder<T> b, std::size_t embed_dim);

// x: [B, 8, L] -> [B, E].
template <typename T>
num::Tensor<T> stub_embed(num::Trace<T>& tr, const num::Tensor<T>& x, const StubParams<T>& p);

// A ready encoder: its name, embedding size and weights under "fm.".
struct EncoderHandle {
  std::string name;
  std::size_t embed_dim = 0;
  num::ParameterSet<float> weights;
  // Whether models built from this handle start with the encoder trainable.
  bool trainable = false;
};

EncoderHandle stub_encoder(const EncoderConfig& cfg);

// Embeddings of [B, 8, L] inputs with the handle's weights, no gradients.
num::Tensor<float> embed(const EncoderHandle& h, const num::Tensor<float>& x);

// The encoder inside a model: weights copied from a handle into the model's
// parameter set. While every encoder parameter is frozen, embeddings are
// memoized per input row (keyed by a content hash), which makes linear
// probing cost one encoder pass per distinct record.
class EncoderBranch {
 public:
  EncoderBranch(num::ParameterSet<float>& set, const EncoderHandle& h);
  num::Tensor<float> forward(num::Trace<float>& tr, const num::Tensor<float>& x);
  std::size_t embed_dim() const { return embed_dim_; }
  const std::string& name() const { return name_; }
  bool frozen() const;

 private:
  num::ParameterSet<float>* set_;
  std::string name_;
  std::size_t embed_dim_;
  StubParams<float> p_;
  std::unordered_map<std::uint64_t, std::vector<float>> cache_;
};

}  // namespace lasan::fm
