#include "lasan/dataio/split.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lasan/rng.hpp"

namespace lasan::data {

namespace {
constexpr const char* kModule = "dataio";

// floor(r * n), tolerant of r * n landing a hair below an integer.
std::size_t floor_share(double r, std::size_t n) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
}
}  // namespace

std::string_view partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "TRAIN";
    case Partition::Val: return "VAL";
    case Partition::Test: return "TEST";
  }
  throw DataError(kModule, "invalid partition code");
}

Partition parse_partition(std::string_view name) {
  if (name == "TRAIN") return Partition::Train;
  if (name == "VAL") return Partition::Val;
  if (name == "TEST") return Partition::Test;
  throw DataError(kModule, "unknown partition '" + std::string(name) + "'");
}

Partition SplitAssignment::at(const std::string& patient_id) const {
  auto it = partition_of.find(patient_id);
  if (it == partition_of.end()) throw DataError(kModule, "patient '" + patient_id + "' is not in the split");
  return it->second;
}

std::size_t SplitAssignment::count(Partition p) const {
  return static_cast<std::size_t>(
      std::count_if(partition_of.begin(), partition_of.end(), [p](const auto& kv) { return kv.second == p; }));
}

SplitAssignment stratified_patient_split(const std::vector<std::pair<std::string, Label>>& patients,
                                         const Ratios& ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError(kModule, "split ratios must be nonnegative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(kModule, "split ratios must sum to 1");

  SplitAssignment out;
  out.seed = seed;
  std::array<std::vector<std::string>, kNumLabels> by_class;
  std::set<std::string> seen;
  for (const auto& [id, label] : patients) {
    if (!seen.insert(id).second) throw DataError(kModule, "patient '" + id + "' listed twice");
    by_class.at(static_cast<std::size_t>(label)).push_back(id);
  }
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    auto& ids = by_class[c];
    if (ids.empty()) {
      out.warnings.push_back("class " + std::string(label_name(static_cast<Label>(c))) + " has no patients");
      continue;
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed({seed, c}));
    rng.shuffle(ids.begin(), ids.end());
    const std::size_t n = ids.size();
    const std::size_t n_train = floor_share(ratios[0], n);
    const std::size_t n_val = std::min(n - n_train, floor_share(ratios[1], n));
    for (std::size_t i = 0; i < n; ++i) {
      const Partition p = i < n_train ? Partition::Train : (i < n_train + n_val ? Partition::Val : Partition::Test);
      out.partition_of.emplace(ids[i], p);
    }
  }
  return out;
}

std::vector<std::pair<std::string, Label>> patients_of(const std::vector<EcgRecord>& records) {
  std::map<std::string, Label> labels;
  std::vector<std::pair<std::string, Label>> out;
  for (const auto& r : records) {
    auto [it, inserted] = labels.emplace(r.patient_id, r.label);
    if (inserted)
      out.emplace_back(r.patient_id, r.label);
    else if (it->second != r.label)
      throw DataError(kModule, "patient '" + r.patient_id + "' has records with different labels");
  }
  return out;
}

}  // namespace lasan::data
