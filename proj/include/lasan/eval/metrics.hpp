#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace lasan::eval {

struct RocResult {
  double auroc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Mann-Whitney AUROC: the fraction of (positive, negative) pairs ranked
// correctly, ties counting one half. Labels are 0 or 1; both must occur.
RocResult auroc_binary(const std::vector<double>& scores, const std::vector<int>& labels);

struct MacroAuroc {
  double macro = 0.0;
  std::vector<double> per_class;
};

// One-vs-rest AUROC per class from row-major [n, n_classes] probabilities;
// every class must be present in `labels`.
MacroAuroc auroc_macro(const std::vector<double>& probs, const std::vector<std::size_t>& labels,
                       std::size_t n_classes);

struct Confusion {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  // Undefined when the denominator is zero.
  std::optional<double> sensitivity, specificity, balanced_accuracy, accuracy;
};

// A score at or above `threshold` predicts the positive class.
Confusion confusion_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                            double threshold = 0.5);

// Threshold maximizing sensitivity + specificity - 1 among the observed
// scores; the lowest such threshold wins ties.
double youden_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace lasan::eval
