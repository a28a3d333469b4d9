#include "lasan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lasan/errors.hpp"

namespace lasan::eval {

RocResult auroc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractError("evalmask", "scores and labels differ in length");
  RocResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError("evalmask", "binary labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw NumericError("evalmask", "non-finite score");
    (labels[i] == 1 ? r.n_pos : r.n_neg)++;
  }
  if (r.n_pos == 0 || r.n_neg == 0) throw MetricError("evalmask", "AUROC undefined: only one class present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the count of correctly ordered pairs, so ties stay integral.
  double twice_wins = 0.0;
  double neg_below = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1.0;
      ++j;
    }
    twice_wins += pos * (2.0 * neg_below + neg);
    neg_below += neg;
    i = j;
  }
  r.auroc = twice_wins / (2.0 * static_cast<double>(r.n_pos) * static_cast<double>(r.n_neg));
  return r;
}

MacroAuroc auroc_macro(const std::vector<double>& probs, const std::vector<std::size_t>& labels,
                       std::size_t n_classes) {
  if (probs.size() != labels.size() * n_classes)
    throw DimensionError("evalmask", "probability matrix does not match label count");
  MacroAuroc m;
  std::vector<double> scores(labels.size());
  std::vector<int> bin(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      scores[i] = probs[i * n_classes + c];
      bin[i] = labels[i] == c ? 1 : 0;
    }
    if (std::find(bin.begin(), bin.end(), 1) == bin.end())
      throw MetricError("evalmask", "macro AUROC undefined: class " + std::to_string(c) + " absent");
    m.per_class.push_back(auroc_binary(scores, bin).auroc);
  }
  m.macro = std::accumulate(m.per_class.begin(), m.per_class.end(), 0.0) / static_cast<double>(n_classes);
  return m;
}

Confusion confusion_metrics(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw ContractError("evalmask", "scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      (pred ? c.tp : c.fn)++;
    } else if (labels[i] == 0) {
      (pred ? c.fp : c.tn)++;
    } else {
      throw ContractError("evalmask", "binary labels must be 0 or 1");
    }
  }
  if (c.tp + c.fn > 0) c.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) c.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  if (c.sensitivity && c.specificity) c.balanced_accuracy = 0.5 * (*c.sensitivity + *c.specificity);
  if (!scores.empty()) c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(scores.size());
  return c;
}

double youden_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
  auto candidates = scores;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty()) throw MetricError("evalmask", "Youden threshold undefined on empty input");
  double best = candidates.front();
  double best_j = -2.0;
  for (double t : candidates) {
    const auto c = confusion_metrics(scores, labels, t);
    if (!c.sensitivity || !c.specificity) throw MetricError("evalmask", "Youden threshold needs both classes");
    const double j = *c.sensitivity + *c.specificity - 1.0;
    if (j > best_j) {
      best_j = j;
      best = t;
    }
  }
  return best;
}

}  // namespace lasan::eval
