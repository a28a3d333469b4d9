#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "lasan/numerics/tensor.hpp"

namespace lasan::data {

inline constexpr std::size_t kLeads = 8;
inline constexpr std::size_t kSamples = 2500;
inline constexpr int kNativeRateHz = 250;

// Canonical lead order; every signal tensor uses these row indices.
inline constexpr std::array<std::string_view, kLeads> kLeadNames{"I", "II", "V1", "V2", "V3", "V4", "V5", "V6"};

// Numeric codes are the on-disk codes of the record format.
enum class Label : std::uint8_t { Control = 0, Arvc = 1, Lqts = 2 };
enum class SubLabel : std::uint8_t { None = 0, Lqt1 = 1, Lqt2 = 2 };

inline constexpr std::size_t kNumLabels = 3;

std::string_view label_name(Label label);
std::string_view sub_label_name(SubLabel sub);
Label parse_label(std::string_view name);
SubLabel parse_sub_label(std::string_view name);
std::optional<std::size_t> lead_index(std::string_view name);

struct EcgRecord {
  std::string patient_id;
  Label label = Label::Control;
  SubLabel sub_label = SubLabel::None;
  // [8, 2500], per-lead z-scored.
  num::Tensor<float> signal;
  int native_rate_hz = kNativeRateHz;
  // Leads that were constant before normalization and are therefore zero.
  std::array<bool, kLeads> flat_leads{};
};

// Checks lead/sample counts, finiteness and the sub-label/label pairing.
void validate(const EcgRecord& rec);

bool same_content(const EcgRecord& a, const EcgRecord& b);

// Per-lead z-score with population std. Works on any [leads, length] tensor.
// A lead whose std is below 1e-8 becomes all zeros and is flagged in `flat`.
num::Tensor<float> normalize_per_lead(const num::Tensor<float>& raw, std::array<bool, kLeads>* flat = nullptr);

// 250 Hz -> 500 Hz by linear interpolation over the full window, then the
// first half (5 s at 500 Hz) is kept, giving the same [leads, length] shape.
num::Tensor<float> resample_for_foundation(const num::Tensor<float>& signal);
num::Tensor<float> resample_for_foundation(const EcgRecord& rec);

}  // namespace lasan::data
