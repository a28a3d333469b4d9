#pragma once

#include <array>
#include <string>
#include <vector>

#include "lasan/dataio/record.hpp"
#include "lasan/train/dataset.hpp"

namespace lasan::eval {

// Zeroes the rows of `group` in an [8, L] normalized signal.
num::Tensor<float> mask_leads(const num::Tensor<float>& signal, const std::vector<std::size_t>& group);
num::Tensor<float> mask_leads(const num::Tensor<float>& signal, const std::array<bool, data::kLeads>& mask);

struct LeadGroup {
  std::string name;
  std::vector<std::size_t> leads;
};

// right_precordial {V1,V2,V3}, lateral {I,V5,V6}, precordial {V1..V6}, limb {I,II}.
const std::vector<LeadGroup>& canonical_groups();

struct MaskingRow {
  std::string group;
  std::string cls;  // class name, or "MACRO"
  double baseline_auroc = 0.0;
  double masked_auroc = 0.0;
  double drop_pct = 0.0;     // 100 * (baseline - masked) / baseline
  double drop_points = 0.0;  // 100 * (baseline - masked)
};

struct MaskingReport {
  std::vector<std::string> classes;  // score_class_names order
  train::TaskScore baseline;
  std::vector<MaskingRow> rows;  // per group: MACRO first, then classes

  const MaskingRow& at(const std::string& group, const std::string& cls) const;
};

MaskingReport masking_analysis(model::Classifier<float>& model, const train::TaskData& test,
                               const std::vector<LeadGroup>& groups);

// CSV columns: group,class,baseline_auroc,masked_auroc,drop_pct,drop_points
std::string masking_csv(const MaskingReport& r);
// Grouped bar chart: one cluster per group, one bar per class plus macro.
std::string masking_svg(const MaskingReport& r);

}  // namespace lasan::eval
