#include "lasan/train/loss.hpp"

#include <algorithm>
#include <cmath>

namespace lasan::train {

template <typename T>
num::Tensor<T> focal_loss(num::Trace<T>& tr, const num::Tensor<T>& probs, const std::vector<std::size_t>& targets,
                          double gamma, const std::vector<double>& alpha) {
  if (probs.dim() != 2) throw DimensionError("trainer", "focal loss expects [batch, classes] probabilities");
  const std::size_t batch = probs.size(0);
  const std::size_t cols = probs.size(1);
  const bool binary = cols == 1;
  const std::size_t n_classes = binary ? 2 : cols;
  if (targets.size() != batch) throw DimensionError("trainer", "focal loss: target count does not match batch");
  if (batch == 0) throw ContractError("trainer", "focal loss on an empty batch");
  if (alpha.size() != n_classes) throw ContractError("trainer", "focal loss: alpha has the wrong number of classes");
  if (gamma < 0) throw ContractError("trainer", "focal loss: gamma must be non-negative");

  auto pd = probs.data();
  // Per record: index of p in probs, sign of dp_t/dp, derivative dFL/dp_t.
  std::vector<std::size_t> where(batch);
  std::vector<double> sign(batch), dpt(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t y = targets[b];
    if (y >= n_classes) throw ContractError("trainer", "focal loss: target index " + std::to_string(y) + " out of range");
    double pt;
    if (binary) {
      where[b] = b;
      sign[b] = y == 1 ? 1.0 : -1.0;
      pt = y == 1 ? pd[b] : 1.0 - pd[b];
    } else {
      where[b] = b * cols + y;
      sign[b] = 1.0;
      pt = pd[where[b]];
    }
    const bool clamped = pt < kProbClamp || pt > 1.0 - kProbClamp;
    pt = std::clamp(pt, kProbClamp, 1.0 - kProbClamp);
    const double a = alpha[y];
    const double q = 1.0 - pt;
    const double lp = std::log(pt);
    total += -a * std::pow(q, gamma) * lp;
    if (clamped) {
      dpt[b] = 0.0;
    } else {
      const double dq = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
      dpt[b] = a * (dq * lp - std::pow(q, gamma) / pt);
    }
  }
  auto loss = num::Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(batch)));
  return tr.record("focal_loss", loss, {probs}, [probs, where, sign, dpt, batch](const num::Tensor<T>& out) {
    const double g = static_cast<double>(out.grad()[0]) / static_cast<double>(batch);
    num::Tensor<T> p(probs);
    for (std::size_t b = 0; b < batch; ++b)
      if (dpt[b] != 0.0) p.accumulate_grad_at(where[b], static_cast<T>(g * sign[b] * dpt[b]));
  });
}

std::vector<double> inverse_frequency_alpha(const std::vector<std::size_t>& targets, std::size_t n_classes) {
  std::vector<double> count(n_classes, 0.0);
  for (auto y : targets) {
    if (y >= n_classes) throw ContractError("trainer", "target index out of range");
    count[y] += 1.0;
  }
  std::vector<double> alpha(n_classes, 1.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (count[c] > 0) {
      alpha[c] = static_cast<double>(targets.size()) / count[c];
      sum += alpha[c];
      ++present;
    }
  if (present == 0) return alpha;
  const double mean = sum / static_cast<double>(present);
  for (std::size_t c = 0; c < n_classes; ++c)
    if (count[c] > 0) alpha[c] /= mean;
  return alpha;
}

template num::Tensor<float> focal_loss<float>(num::Trace<float>&, const num::Tensor<float>&,
                                              const std::vector<std::size_t>&, double, const std::vector<double>&);
template num::Tensor<double> focal_loss<double>(num::Trace<double>&, const num::Tensor<double>&,
                                                const std::vector<std::size_t>&, double, const std::vector<double>&);

}  // namespace lasan::train
