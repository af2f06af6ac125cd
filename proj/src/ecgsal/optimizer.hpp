#pragma once

#include <string>
#include <vector>

#include "ecgsal/nn.hpp"

namespace ecgsal::models {

enum class OptimizerKind { Adam, Nadam };

std::string optimizer_name(OptimizerKind kind);
OptimizerKind optimizer_from_name(const std::string& name);

// Keras-compatible Adam and Nadam (Dozat momentum schedule, decay 0.004).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const nn::ParamStore& store);

  void step(nn::ParamStore& store, const nn::Grads& grads, double lr);
  long iterations() const noexcept { return t_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-7;

 private:
  OptimizerKind kind_;
  std::vector<nn::Mat> m_;
  std::vector<nn::Mat> v_;
  long t_ = 0;
  double m_schedule_ = 1.0;
};

}  // namespace ecgsal::models
