#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lasan/dataio/record.hpp"

namespace lasan::data {

enum class Partition : std::uint8_t { Train = 0, Val = 1, Test = 2 };

std::string_view partition_name(Partition p);
Partition parse_partition(std::string_view name);

struct SplitAssignment {
  std::map<std::string, Partition> partition_of;
  std::uint64_t seed = 0;
  // Non-fatal findings, e.g. a label class without patients.
  std::vector<std::string> warnings;

  Partition at(const std::string& patient_id) const;
  std::size_t count(Partition p) const;
};

using Ratios = std::array<double, 3>;
inline constexpr Ratios kDefaultRatios{0.70, 0.15, 0.15};

// Within each label class independently: patients sorted by id, shuffled by
// a generator seeded from (seed, class), then the first floor(r_train * n)
// go to TRAIN, the next floor(r_val * n) to VAL and the rest to TEST.
SplitAssignment stratified_patient_split(const std::vector<std::pair<std::string, Label>>& patients,
                                         const Ratios& ratios, std::uint64_t seed);

// Unique (patient_id, label) pairs from a record list; a patient whose
// records disagree on the label is a data error.
std::vector<std::pair<std::string, Label>> patients_of(const std::vector<EcgRecord>& records);

}  // namespace lasan::data
