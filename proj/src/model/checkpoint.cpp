#include "lasan/model/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lasan/dataio/bytes.hpp"

namespace lasan::model {

namespace {
constexpr const char* kModule = "lasan";
constexpr std::string_view kMagic = "LASW";
}  // namespace

const std::string& Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  throw FormatError(kModule, "checkpoint header lacks '" + key + "'");
}

bool Checkpoint::has(const std::string& key) const {
  return std::any_of(header.begin(), header.end(), [&](const auto& kv) { return kv.first == key; });
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  for (const auto& [k, v] : ck.header)
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError(kModule, "checkpoint header entry '" + k + "' is not a single key=value line");
  data::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  const std::string text = format_kv(ck.header);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const auto& e : ck.entries) {
    if (e.name.empty() || e.name.size() > 0xffff) throw FormatError(kModule, "bad checkpoint entry name");
    if (e.shape.empty() || e.shape.size() > 0xff || num::numel(e.shape) != e.data.size())
      throw FormatError(kModule, "checkpoint entry '" + e.name + "' has inconsistent shape");
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name);
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.data) w.f32(v);
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  data::ByteReader r(bytes, what);
  if (r.bytes(4) != kMagic) throw FormatError(kModule, what + ": bad magic");
  const auto version = r.u16();
  if (version != kCheckpointVersion)
    throw FormatError(kModule, what + ": unsupported version " + std::to_string(version));
  Checkpoint ck;
  const std::string text = r.bytes(r.u32());
  try {
    ck.header = parse_kv(text, what);
  } catch (const ConfigError& e) {
    throw FormatError(kModule, std::string(what) + ": bad header: " + e.what());
  }
  while (!r.at_end()) {
    CheckpointEntry e;
    e.name = r.bytes(r.u16());
    const auto rank = r.u8();
    if (rank == 0) throw FormatError(kModule, what + ": entry '" + e.name + "' has rank 0");
    std::size_t n = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const auto d = r.u32();
      if (d == 0) throw FormatError(kModule, what + ": entry '" + e.name + "' has a zero extent");
      e.shape.push_back(d);
      n *= d;
    }
    if (n > r.remaining() / 4) throw FormatError(kModule, what + ": truncated payload");
    e.data.resize(n);
    for (auto& v : e.data) v = r.f32();
    ck.entries.push_back(std::move(e));
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  data::write_file(path, encode_checkpoint(ck));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(data::read_file(path), path.string());
}

Checkpoint make_checkpoint(KvList header, const num::ParameterSet<float>& params) {
  Checkpoint ck;
  ck.header = std::move(header);
  for (const auto& e : params.entries()) ck.entries.push_back({e.name, e.tensor.shape(), e.tensor.values()});
  return ck;
}

void load_parameters(num::ParameterSet<float>& params, const Checkpoint& ck) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ck.entries)
    if (!by_name.emplace(e.name, &e).second) throw FormatError(kModule, "duplicate checkpoint entry '" + e.name + "'");
  if (by_name.size() != params.entries().size())
    throw FormatError(kModule, "checkpoint has " + std::to_string(by_name.size()) + " entries, model expects " +
                                   std::to_string(params.entries().size()));
  for (const auto& p : params.entries()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError(kModule, "checkpoint lacks entry '" + p.name + "'");
    if (it->second->shape != p.tensor.shape())
      throw FormatError(kModule, "checkpoint entry '" + p.name + "' has shape " + num::to_string(it->second->shape) +
                                     ", model expects " + num::to_string(p.tensor.shape()));
    auto dst = num::Tensor<float>(p.tensor).data();
    std::copy(it->second->data.begin(), it->second->data.end(), dst.begin());
  }
}

}  // namespace lasan::model
