#pragma once

#include <cstddef>
#include <vector>

#include "lasan/kv.hpp"

namespace lasan::model {

enum class Mode { Train, Eval };

struct LasanSpec {
  std::size_t leads = 8;
  std::size_t samples = 2500;
  std::vector<std::size_t> conv_channels{32, 64, 128, 256};
  std::size_t kernel = 15;
  std::size_t pool_stride = 2;
  std::size_t embed_dim = 256;
  std::size_t transformer_layers = 3;
  std::size_t heads = 4;
  std::size_t ffn_dim = 512;
  double transformer_dropout = 0.1;
  std::size_t head_hidden = 128;
  double head_dropout = 0.25;
  std::size_t n_classes = 3;
  // limb {I, II}, right precordial {V1-V3}, lateral precordial {V4-V6}
  std::vector<std::size_t> lead_groups{0, 0, 1, 1, 1, 2, 2, 2};
  // One encoder for all leads (default) or one per lead.
  bool shared_encoder = true;

  void validate() const;
  std::size_t groups() const;
  // 1 for binary tasks (single sigmoid logit), n_classes otherwise.
  std::size_t n_outputs() const { return n_classes == 2 ? 1 : n_classes; }

  // Keys are "lasan.<field>", matching the run-config keys.
  KvList to_kv() const;
  // Applies every "lasan.*" key in `kv`; unknown lasan keys are errors.
  void apply_kv(const KvList& kv);
  static bool is_key(const std::string& key);
};

// Reduced widths for single-core desk runs: channels [4, 8, 12, 16],
// kernel 7, embed 16, ffn 32, head hidden 16. Depth, heads, pooling and
// dropout match the full spec.
LasanSpec desk_spec();

}  // namespace lasan::model
