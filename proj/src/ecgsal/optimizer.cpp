#include "ecgsal/optimizer.hpp"

#include <cmath>

#include "ecgsal/error.hpp"

namespace ecgsal::models {

std::string optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "nadam"; }

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
  if (name == "nadam" || name == "Nadam") return OptimizerKind::Nadam;
  fail(ErrorCode::InvalidConfig, "unknown optimizer '" + name + "' (expected adam or nadam)");
}

Optimizer::Optimizer(OptimizerKind kind, const nn::ParamStore& store) : kind_(kind) {
  for (const auto& t : store.tensors()) {
    m_.push_back(nn::Mat::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(nn::Mat::Zero(t.value.rows(), t.value.cols()));
  }
}

void Optimizer::step(nn::ParamStore& store, const nn::Grads& grads, double lr) {
  ++t_;
  const double t = static_cast<double>(t_);
  auto& tensors = store.tensors();

  if (kind_ == OptimizerKind::Adam) {
    const double lr_t = lr * std::sqrt(1.0 - std::pow(kBeta2, t)) / (1.0 - std::pow(kBeta1, t));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (!tensors[i].trainable || grads.g[i].size() == 0) continue;
      const nn::Mat& g = grads.g[i];
      m_[i].array() += (g - m_[i]).array() * (1.0 - kBeta1);
      v_[i].array() += (g.cwiseAbs2() - v_[i]).array() * (1.0 - kBeta2);
      tensors[i].value.array() -= m_[i].array() * lr_t / (v_[i].array().sqrt() + kEpsilon);
    }
    return;
  }

  const double mu_t = kBeta1 * (1.0 - 0.5 * std::pow(0.96, t));
  const double mu_next = kBeta1 * (1.0 - 0.5 * std::pow(0.96, t + 1.0));
  const double product = m_schedule_ * mu_t;
  const double product_next = product * mu_next;
  m_schedule_ = product;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].trainable || grads.g[i].size() == 0) continue;
    const nn::Mat& g = grads.g[i];
    m_[i].array() += (g - m_[i]).array() * (1.0 - kBeta1);
    v_[i].array() += (g.cwiseAbs2() - v_[i]).array() * (1.0 - kBeta2);
    const nn::Mat m_hat = mu_next * m_[i] / (1.0 - product_next) + (1.0 - mu_t) * g / (1.0 - product);
    const nn::Mat v_hat = v_[i] / (1.0 - std::pow(kBeta2, t));
    tensors[i].value.array() -= m_hat.array() * lr / (v_hat.array().sqrt() + kEpsilon);
  }
}

}  // namespace ecgsal::models
