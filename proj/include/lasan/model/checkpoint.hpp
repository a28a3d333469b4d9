#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lasan/kv.hpp"
#include "lasan/numerics/params.hpp"

namespace lasan::model {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  num::Shape shape;
  std::vector<float> data;
};

// "LASW" file: magic, u16 version, u32 header length + key=value lines, then
// entries until end of file (u16 name length + name, u8 rank, u32 extents,
// f32 values little-endian). Buffers are stored like parameters.
struct Checkpoint {
  KvList header;
  std::vector<CheckpointEntry> entries;

  // Header lookup; missing keys are format errors.
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& what = "checkpoint");
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(KvList header, const num::ParameterSet<float>& params);
// Copies values into a parameter set whose names and shapes must match the
// checkpoint exactly.
void load_parameters(num::ParameterSet<float>& params, const Checkpoint& ck);

}  // namespace lasan::model
