#include "lasan/model/spec.hpp"

#include <algorithm>

#include "lasan/errors.hpp"

namespace lasan::model {

namespace {
constexpr const char* kModule = "lasan";
}

void LasanSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(kModule, m); };
  if (leads == 0 || samples == 0) fail("leads and samples must be positive");
  if (conv_channels.empty()) fail("conv_channels must not be empty");
  for (std::size_t i = 1; i < conv_channels.size(); ++i)
    if (conv_channels[i] <= conv_channels[i - 1]) fail("conv_channels must be strictly increasing");
  if (conv_channels.front() == 0) fail("conv_channels must be positive");
  if (conv_channels.back() != embed_dim) fail("last conv channel must equal embed_dim");
  if (kernel == 0 || kernel % 2 == 0) fail("kernel must be odd for same padding");
  if (pool_stride != 2) fail("only pool_stride 2 is supported");
  if (heads == 0 || embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (ffn_dim == 0 || head_hidden == 0) fail("ffn_dim and head_hidden must be positive");
  if (n_classes < 2) fail("n_classes must be at least 2");
  if (!(transformer_dropout >= 0.0 && transformer_dropout < 1.0) || !(head_dropout >= 0.0 && head_dropout < 1.0))
    fail("dropout rates must lie in [0, 1)");
  if (lead_groups.size() != leads) fail("every lead must be mapped to a group");
  std::size_t len = samples;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) len /= pool_stride;
  if (len == 0) fail("too many pooling stages for the sample count");
}

std::size_t LasanSpec::groups() const {
  return lead_groups.empty() ? 0 : *std::max_element(lead_groups.begin(), lead_groups.end()) + 1;
}

KvList LasanSpec::to_kv() const {
  return {
      {"lasan.leads", std::to_string(leads)},
      {"lasan.samples", std::to_string(samples)},
      {"lasan.conv_channels", join(conv_channels)},
      {"lasan.kernel", std::to_string(kernel)},
      {"lasan.pool_stride", std::to_string(pool_stride)},
      {"lasan.embed_dim", std::to_string(embed_dim)},
      {"lasan.transformer_layers", std::to_string(transformer_layers)},
      {"lasan.heads", std::to_string(heads)},
      {"lasan.ffn_dim", std::to_string(ffn_dim)},
      {"lasan.transformer_dropout", format_double(transformer_dropout)},
      {"lasan.head_hidden", std::to_string(head_hidden)},
      {"lasan.head_dropout", format_double(head_dropout)},
      {"lasan.n_classes", std::to_string(n_classes)},
      {"lasan.lead_groups", join(lead_groups)},
      {"lasan.shared_encoder", shared_encoder ? "true" : "false"},
  };
}

LasanSpec desk_spec() {
  LasanSpec s;
  s.conv_channels = {4, 8, 12, 16};
  s.kernel = 7;
  s.embed_dim = 16;
  s.ffn_dim = 32;
  s.head_hidden = 16;
  return s;
}

bool LasanSpec::is_key(const std::string& key) { return key.starts_with("lasan."); }

void LasanSpec::apply_kv(const KvList& kv) {
  for (const auto& [k, v] : kv) {
    if (!is_key(k)) continue;
    const std::string f = k.substr(6);
    if (f == "leads") leads = kv_size(k, v);
    else if (f == "samples") samples = kv_size(k, v);
    else if (f == "conv_channels") conv_channels = kv_size_list(k, v);
    else if (f == "kernel") kernel = kv_size(k, v);
    else if (f == "pool_stride") pool_stride = kv_size(k, v);
    else if (f == "embed_dim") embed_dim = kv_size(k, v);
    else if (f == "transformer_layers") transformer_layers = kv_size(k, v);
    else if (f == "heads") heads = kv_size(k, v);
    else if (f == "ffn_dim") ffn_dim = kv_size(k, v);
    else if (f == "transformer_dropout") transformer_dropout = kv_double(k, v);
    else if (f == "head_hidden") head_hidden = kv_size(k, v);
    else if (f == "head_dropout") head_dropout = kv_double(k, v);
    else if (f == "n_classes") n_classes = kv_size(k, v);
    else if (f == "lead_groups") lead_groups = kv_size_list(k, v);
    else if (f == "shared_encoder") shared_encoder = kv_bool(k, v);
    else throw ConfigError("config", "unknown key '" + k + "'");
  }
}

}  // namespace lasan::model
