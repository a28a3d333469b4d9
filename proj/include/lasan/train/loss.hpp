#pragma once

#include <vector>

#include "lasan/numerics/trace.hpp"

namespace lasan::train {

inline constexpr double kProbClamp = 1e-7;

// Mean focal loss -alpha[y] * (1 - p_t)^gamma * log(p_t) over the batch.
// probs is [B, C] (class distributions) or [B, 1] (probability of the
// positive class, targets in {0, 1}). p_t is clamped to [1e-7, 1 - 1e-7];
// clamped entries receive no gradient.
template <typename T>
num::Tensor<T> focal_loss(num::Trace<T>& tr, const num::Tensor<T>& probs, const std::vector<std::size_t>& targets,
                          double gamma, const std::vector<double>& alpha);

// Inverse class frequency normalized to mean 1 over the classes present.
// Classes absent from `targets` get weight 1.
std::vector<double> inverse_frequency_alpha(const std::vector<std::size_t>& targets, std::size_t n_classes);

}  // namespace lasan::train
