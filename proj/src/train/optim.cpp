#include "lasan/train/optim.hpp"

#include <cmath>

namespace lasan::train {

Adam::Adam(num::ParameterSet<float>& params, AdamOptions opt) : params_(params), opt_(opt) {
  m_.resize(params.entries().size());
  v_.resize(params.entries().size());
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const auto& entries = params_.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    auto t = entries[e].tensor;
    if (entries[e].kind != num::EntryKind::Parameter || !t.requires_grad() || !t.has_grad()) continue;
    auto& m = m_[e];
    auto& v = v_[e];
    if (m.empty()) {
      m.assign(t.numel(), 0.0);
      v.assign(t.numel(), 0.0);
    }
    auto g = t.grad();
    auto w = t.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi;
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
      const double wi = w[i];
      w[i] = static_cast<float>(wi - lr * (update + opt_.weight_decay * wi));
    }
  }
}

double grad_norm(const num::ParameterSet<float>& params) {
  double sq = 0.0;
  for (const auto& e : params.entries()) {
    if (!e.tensor.has_grad()) continue;
    for (float g : e.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(num::ParameterSet<float>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (const auto& e : params.entries()) {
      auto t = e.tensor;
      if (!t.has_grad()) continue;
      for (auto& g : t.grad_mut()) g = static_cast<float>(g * factor);
    }
  }
  return norm;
}

bool EarlyStopping::update(std::size_t epoch, double value) {
  improved_ = !has_best_ || value > best_ + threshold_;
  if (improved_) {
    has_best_ = true;
    best_ = value;
    best_epoch_ = epoch;
  }
  return epoch - best_epoch_ >= patience_;
}

}  // namespace lasan::train
