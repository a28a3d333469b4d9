#include "lasan/dataio/formats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lasan/dataio/bytes.hpp"

namespace lasan::data {

namespace {
constexpr const char* kModule = "dataio";
constexpr std::string_view kRecordMagic = "LASN";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void check_field(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_of("\t\n\r") != std::string::npos)
    throw DataError(kModule, what + " must be non-empty and free of tabs and newlines");
}
}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(kModule, "write failed for '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> encode_record(const EcgRecord& rec) {
  validate(rec);
  if (rec.patient_id.size() > 0xffff) throw DataError(kModule, "patient id too long");
  ByteWriter w;
  w.bytes(kRecordMagic);
  w.u16(kRecordVersion);
  w.u16(static_cast<std::uint16_t>(kLeads));
  w.u32(static_cast<std::uint32_t>(kSamples));
  w.u8(static_cast<std::uint8_t>(rec.label));
  w.u8(static_cast<std::uint8_t>(rec.sub_label));
  w.u16(static_cast<std::uint16_t>(rec.patient_id.size()));
  w.bytes(rec.patient_id);
  for (float v : rec.signal.data()) w.f32(v);
  return w.buffer();
}

EcgRecord decode_record(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  ByteReader r(bytes, what);
  if (r.bytes(4) != kRecordMagic) throw FormatError(kModule, what + ": bad magic");
  const auto version = r.u16();
  if (version != kRecordVersion)
    throw FormatError(kModule, what + ": unsupported version " + std::to_string(version));
  const auto leads = r.u16();
  if (leads != kLeads) throw FormatError(kModule, what + ": declares " + std::to_string(leads) + " leads, expected 8");
  const auto samples = r.u32();
  if (samples != kSamples)
    throw FormatError(kModule, what + ": declares " + std::to_string(samples) + " samples, expected 2500");
  const auto label = r.u8();
  const auto sub = r.u8();
  if (label > 2) throw FormatError(kModule, what + ": invalid label code " + std::to_string(label));
  if (sub > 2) throw FormatError(kModule, what + ": invalid sub-label code " + std::to_string(sub));
  EcgRecord rec;
  rec.label = static_cast<Label>(label);
  rec.sub_label = static_cast<SubLabel>(sub);
  rec.patient_id = r.bytes(r.u16());
  std::vector<float> values(kLeads * kSamples);
  for (auto& v : values) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(kModule, what + ": non-finite sample");
  }
  if (!r.at_end()) throw FormatError(kModule, what + ": trailing bytes after payload");
  rec.signal = num::Tensor<float>(num::Shape{kLeads, kSamples}, std::move(values));
  for (std::size_t l = 0; l < kLeads; ++l) {
    auto d = rec.signal.data().subspan(l * kSamples, kSamples);
    rec.flat_leads[l] = std::all_of(d.begin(), d.end(), [](float v) { return v == 0.0f; });
  }
  if (rec.sub_label != SubLabel::None && rec.label != Label::Lqts)
    throw FormatError(kModule, what + ": sub-label on a non-LQTS record");
  return rec;
}

void write_record(const std::filesystem::path& path, const EcgRecord& rec) { write_file(path, encode_record(rec)); }

EcgRecord read_record(const std::filesystem::path& path) { return decode_record(read_file(path), path.string()); }

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) {
    check_field(e.patient_id, "patient id");
    check_field(e.path, "record path");
    text += e.patient_id + '\t' + std::string(label_name(e.label)) + '\t' + std::string(sub_label_name(e.sub_label)) +
            '\t' + e.path + '\n';
  }
  write_text(path, text);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 4) throw FormatError(kModule, where + ": expected 4 tab-separated fields");
    try {
      out.push_back(ManifestEntry{f[0], parse_label(f[1]), parse_sub_label(f[2]), f[3]});
    } catch (const DataError& e) {
      throw FormatError(kModule, where + ": " + e.what());
    }
  }
  return out;
}

std::vector<EcgRecord> load_corpus(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  std::vector<EcgRecord> out;
  for (const auto& e : read_manifest(manifest)) {
    auto rec = read_record(base / e.path);
    if (rec.patient_id != e.patient_id || rec.label != e.label || rec.sub_label != e.sub_label)
      throw DataError(kModule, "record '" + e.path + "' disagrees with its manifest entry");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_split(const std::filesystem::path& path, const SplitAssignment& split) {
  std::string text = "# seed=" + std::to_string(split.seed) + "\n";
  for (const auto& [id, p] : split.partition_of) {
    check_field(id, "patient id");
    text += id + '\t' + std::string(partition_name(p)) + '\n';
  }
  write_text(path, text);
}

SplitAssignment read_split(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  SplitAssignment out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.starts_with("# seed=")) {
      try {
        out.seed = std::stoull(line.substr(7));
      } catch (const std::exception&) {
        throw FormatError(kModule, where + ": bad seed header");
      }
      continue;
    }
    if (line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 2) throw FormatError(kModule, where + ": expected patient_id<TAB>partition");
    Partition p;
    try {
      p = parse_partition(f[1]);
    } catch (const DataError& e) {
      throw FormatError(kModule, where + ": " + e.what());
    }
    if (!out.partition_of.emplace(f[0], p).second)
      throw FormatError(kModule, where + ": patient '" + f[0] + "' assigned twice");
  }
  return out;
}

}  // namespace lasan::data
