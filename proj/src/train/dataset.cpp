#include "lasan/train/dataset.hpp"

#include <algorithm>

#include "lasan/eval/masking.hpp"
#include "lasan/eval/metrics.hpp"

namespace lasan::train {

using data::Label;
using data::SubLabel;

std::string_view task_name(Task t) {
  switch (t) {
    case Task::ThreeClass:
      return "THREE_CLASS";
    case Task::ArvcVsControl:
      return "ARVC_VS_CONTROL";
    case Task::LqtsVsControl:
      return "LQTS_VS_CONTROL";
    case Task::Lqt1VsLqt2:
      return "LQT1_VS_LQT2";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::ThreeClass, Task::ArvcVsControl, Task::LqtsVsControl, Task::Lqt1VsLqt2})
    if (task_name(t) == name) return t;
  throw ConfigError("trainer", "unknown task '" + std::string(name) + "'");
}

std::size_t task_classes(Task t) { return t == Task::ThreeClass ? 3 : 2; }

std::vector<std::string> task_class_names(Task t) {
  switch (t) {
    case Task::ThreeClass:
      return {"CONTROL", "ARVC", "LQTS"};
    case Task::ArvcVsControl:
      return {"CONTROL", "ARVC"};
    case Task::LqtsVsControl:
      return {"CONTROL", "LQTS"};
    case Task::Lqt1VsLqt2:
      return {"LQT2", "LQT1"};
  }
  return {};
}

std::optional<std::size_t> task_target(Task t, const data::EcgRecord& rec) {
  switch (t) {
    case Task::ThreeClass:
      return static_cast<std::size_t>(rec.label);
    case Task::ArvcVsControl:
      if (rec.label == Label::Control) return 0;
      if (rec.label == Label::Arvc) return 1;
      return std::nullopt;
    case Task::LqtsVsControl:
      if (rec.label == Label::Control) return 0;
      if (rec.label == Label::Lqts) return 1;
      return std::nullopt;
    case Task::Lqt1VsLqt2:
      if (rec.sub_label == SubLabel::Lqt2) return 0;
      if (rec.sub_label == SubLabel::Lqt1) return 1;
      return std::nullopt;
  }
  return std::nullopt;
}

namespace {

template <typename Keep>
TaskData collect(Task task, const std::vector<data::EcgRecord>& corpus, Keep&& keep) {
  TaskData d;
  d.task = task;
  for (const auto& rec : corpus) {
    if (!keep(rec)) continue;
    if (auto y = task_target(task, rec)) {
      d.records.push_back(&rec);
      d.targets.push_back(*y);
    }
  }
  return d;
}

}  // namespace

TaskData select(Task task, const std::vector<data::EcgRecord>& corpus, const data::SplitAssignment& split,
                data::Partition part) {
  return collect(task, corpus, [&](const data::EcgRecord& r) { return split.at(r.patient_id) == part; });
}

TaskData select_all(Task task, const std::vector<data::EcgRecord>& corpus) {
  return collect(task, corpus, [](const data::EcgRecord&) { return true; });
}

model::ModelInputs<float> make_inputs(const TaskData& d, const std::vector<std::size_t>& idx, bool native,
                                      bool foundation, const LeadMask* mask) {
  const std::size_t per = data::kLeads * data::kSamples;
  std::vector<float> nat, fnd;
  if (native) nat.reserve(idx.size() * per);
  if (foundation) fnd.reserve(idx.size() * per);
  for (auto i : idx) {
    num::Tensor<float> sig = d.records.at(i)->signal;
    if (mask != nullptr) sig = eval::mask_leads(sig, *mask);
    if (native) nat.insert(nat.end(), sig.values().begin(), sig.values().end());
    if (foundation) {
      auto f = data::resample_for_foundation(sig);
      fnd.insert(fnd.end(), f.values().begin(), f.values().end());
    }
  }
  model::ModelInputs<float> in;
  const num::Shape shape{idx.size(), data::kLeads, data::kSamples};
  if (native) in.native = num::Tensor<float>(shape, std::move(nat));
  if (foundation) in.foundation = num::Tensor<float>(shape, std::move(fnd));
  return in;
}

Predictions predict(model::Classifier<float>& model, const TaskData& d, const LeadMask* mask, std::size_t batch) {
  Predictions p;
  p.cols = model.n_outputs();
  Rng unused(0);
  for (std::size_t start = 0; start < d.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(d.size(), start + batch); ++i) idx.push_back(i);
    auto in = make_inputs(d, idx, model.needs_native(), model.needs_foundation(), mask);
    num::Trace<float> tr(false);
    auto out = model.forward(tr, in, model::Mode::Eval, unused);
    p.probs.insert(p.probs.end(), out.probs.values().begin(), out.probs.values().end());
    if (out.importance.defined())
      p.importance.insert(p.importance.end(), out.importance.values().begin(), out.importance.values().end());
  }
  return p;
}

TaskScore score_task(Task task, const Predictions& p, const std::vector<std::size_t>& targets) {
  TaskScore s;
  if (task == Task::ThreeClass) {
    auto m = eval::auroc_macro(p.probs, targets, 3);
    s.primary = m.macro;
    s.per_class = m.per_class;
    return s;
  }
  if (p.cols != 1) throw DimensionError("trainer", "binary task expects one output per record");
  std::vector<int> labels(targets.begin(), targets.end());
  s.primary = eval::auroc_binary(p.probs, labels).auroc;
  s.per_class = {s.primary};
  return s;
}

std::vector<std::string> score_class_names(Task task) {
  auto names = task_class_names(task);
  if (task == Task::ThreeClass) return names;
  return {names[1]};
}

}  // namespace lasan::train
