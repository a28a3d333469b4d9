#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lasan/dataio/split.hpp"
#include "lasan/model/classifier.hpp"

namespace lasan::train {

enum class Task { ThreeClass, ArvcVsControl, LqtsVsControl, Lqt1VsLqt2 };

std::string_view task_name(Task t);
Task parse_task(std::string_view name);
// 3 for the three-class task, 2 for binary tasks (which use one output).
std::size_t task_classes(Task t);
// Class names in target order; for binary tasks {negative, positive}.
std::vector<std::string> task_class_names(Task t);
// Training target of a record, or nothing if the record is outside the task.
std::optional<std::size_t> task_target(Task t, const data::EcgRecord& rec);

// Records of one partition restricted to a task. Holds pointers into the
// corpus, which must outlive it.
struct TaskData {
  Task task = Task::ThreeClass;
  std::vector<const data::EcgRecord*> records;
  std::vector<std::size_t> targets;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

TaskData select(Task task, const std::vector<data::EcgRecord>& corpus, const data::SplitAssignment& split,
                data::Partition part);
TaskData select_all(Task task, const std::vector<data::EcgRecord>& corpus);

using LeadMask = std::array<bool, data::kLeads>;

// Stacks the selected records into [B, 8, 2500] inputs. Masked leads are
// zeroed in the normalized signal, before the foundation view is derived.
model::ModelInputs<float> make_inputs(const TaskData& d, const std::vector<std::size_t>& idx, bool native,
                                      bool foundation, const LeadMask* mask = nullptr);

struct Predictions {
  std::size_t cols = 0;
  std::vector<double> probs;       // [n, cols]
  std::vector<double> importance;  // [n, 8], empty without an aggregator
};

// Eval-mode forward over the whole set, in order.
Predictions predict(model::Classifier<float>& model, const TaskData& d, const LeadMask* mask = nullptr,
                    std::size_t batch = 64);

// Macro AUROC (three-class) or binary AUROC, with the per-class values
// (one entry, the positive class, for binary tasks).
struct TaskScore {
  double primary = 0.0;
  std::vector<double> per_class;
};

TaskScore score_task(Task task, const Predictions& p, const std::vector<std::size_t>& targets);
// Names matching TaskScore::per_class.
std::vector<std::string> score_class_names(Task task);

}  // namespace lasan::train
