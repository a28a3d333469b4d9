#include "lasan/dataio/record.hpp"

#include <cmath>
#include <vector>

namespace lasan::data {

namespace {
constexpr const char* kModule = "dataio";
}

std::string_view label_name(Label label) {
  switch (label) {
    case Label::Control: return "CONTROL";
    case Label::Arvc: return "ARVC";
    case Label::Lqts: return "LQTS";
  }
  throw DataError(kModule, "invalid label code " + std::to_string(static_cast<int>(label)));
}

std::string_view sub_label_name(SubLabel sub) {
  switch (sub) {
    case SubLabel::None: return "NONE";
    case SubLabel::Lqt1: return "LQT1";
    case SubLabel::Lqt2: return "LQT2";
  }
  throw DataError(kModule, "invalid sub-label code " + std::to_string(static_cast<int>(sub)));
}

Label parse_label(std::string_view name) {
  if (name == "CONTROL") return Label::Control;
  if (name == "ARVC") return Label::Arvc;
  if (name == "LQTS") return Label::Lqts;
  throw DataError(kModule, "unknown label '" + std::string(name) + "'");
}

SubLabel parse_sub_label(std::string_view name) {
  if (name == "NONE") return SubLabel::None;
  if (name == "LQT1") return SubLabel::Lqt1;
  if (name == "LQT2") return SubLabel::Lqt2;
  throw DataError(kModule, "unknown sub-label '" + std::string(name) + "'");
}

std::optional<std::size_t> lead_index(std::string_view name) {
  for (std::size_t i = 0; i < kLeads; ++i)
    if (kLeadNames[i] == name) return i;
  return std::nullopt;
}

void validate(const EcgRecord& rec) {
  if (!rec.signal.defined()) throw DataError(kModule, "record '" + rec.patient_id + "' has no signal");
  if (rec.signal.shape() != num::Shape{kLeads, kSamples})
    throw DataError(kModule, "record '" + rec.patient_id + "' has shape " + num::to_string(rec.signal.shape()) +
                                 ", expected [8, 2500]");
  if (rec.sub_label != SubLabel::None && rec.label != Label::Lqts)
    throw DataError(kModule, "record '" + rec.patient_id + "': sub-label given for a non-LQTS record");
  for (float v : rec.signal.data())
    if (!std::isfinite(v)) throw DataError(kModule, "record '" + rec.patient_id + "' has non-finite samples");
}

bool same_content(const EcgRecord& a, const EcgRecord& b) {
  return a.patient_id == b.patient_id && a.label == b.label && a.sub_label == b.sub_label &&
         a.signal.shape() == b.signal.shape() && a.signal.values() == b.signal.values();
}

num::Tensor<float> normalize_per_lead(const num::Tensor<float>& raw, std::array<bool, kLeads>* flat) {
  if (raw.dim() != 2) throw DimensionError(kModule, "normalize_per_lead expects [leads, samples]");
  const std::size_t leads = raw.size(0);
  const std::size_t n = raw.size(1);
  auto in = raw.data();
  for (float v : in)
    if (!std::isfinite(v)) throw DataError(kModule, "normalize_per_lead: non-finite input");
  std::vector<float> out(raw.numel(), 0.0f);
  for (std::size_t l = 0; l < leads; ++l) {
    const float* x = in.data() + l * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    const bool is_flat = sd < 1e-8;
    if (flat != nullptr && l < kLeads) (*flat)[l] = is_flat;
    if (is_flat) continue;
    for (std::size_t i = 0; i < n; ++i) out[l * n + i] = static_cast<float>((x[i] - mean) / sd);
  }
  return num::Tensor<float>(raw.shape(), std::move(out));
}

num::Tensor<float> resample_for_foundation(const num::Tensor<float>& signal) {
  if (signal.dim() != 2) throw DimensionError(kModule, "resample_for_foundation expects [leads, samples]");
  const std::size_t leads = signal.size(0);
  const std::size_t n = signal.size(1);
  auto in = signal.data();
  std::vector<float> out(signal.numel());
  // The dense grid has 2n-1 points (originals and midpoints) plus one
  // repeated endpoint; only its first n points are kept.
  for (std::size_t l = 0; l < leads; ++l) {
    const float* x = in.data() + l * n;
    float* y = out.data() + l * n;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = j / 2;
      if (j % 2 == 0 || k + 1 >= n)
        y[j] = x[k];
      else
        y[j] = 0.5f * (x[k] + x[k + 1]);
    }
  }
  return num::Tensor<float>(signal.shape(), std::move(out));
}

num::Tensor<float> resample_for_foundation(const EcgRecord& rec) {
  validate(rec);
  return resample_for_foundation(rec.signal);
}

}  // namespace lasan::data
