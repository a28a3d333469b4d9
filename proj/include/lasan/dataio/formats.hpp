#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lasan/dataio/record.hpp"
#include "lasan/dataio/split.hpp"

namespace lasan::data {

inline constexpr std::uint16_t kRecordVersion = 1;

// "LASN" record file: magic, u16 version, u16 leads, u32 samples, u8 label,
// u8 sub-label, u16 id length + UTF-8 id, then leads*samples f32 lead-major.
std::vector<std::uint8_t> encode_record(const EcgRecord& rec);
EcgRecord decode_record(const std::vector<std::uint8_t>& bytes, const std::string& what = "record");
void write_record(const std::filesystem::path& path, const EcgRecord& rec);
EcgRecord read_record(const std::filesystem::path& path);

struct ManifestEntry {
  std::string patient_id;
  Label label = Label::Control;
  SubLabel sub_label = SubLabel::None;
  // Relative to the manifest's directory.
  std::string path;
};

// Tab-separated: patient_id, label, sub_label, relative path.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Reads every record listed in a manifest and checks it against its entry.
std::vector<EcgRecord> load_corpus(const std::filesystem::path& manifest);

// "# seed=<n>" header, then patient_id<TAB>TRAIN|VAL|TEST sorted by id.
void write_split(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment read_split(const std::filesystem::path& path);

}  // namespace lasan::data
