#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ecgsal/nn.hpp"

namespace ecgsal::models {

inline constexpr double kProbabilityFloor = 1e-12;

struct FocalLossConfig {
  double gamma = 2.0;
  std::vector<double> alpha = std::vector<double>(8, 0.25);  // per class, each in (0,1]
};

void validate(const FocalLossConfig& config, std::size_t n_classes);

enum class LossKind { CrossEntropy, Focal };

std::string loss_name(LossKind kind);  // "cross_entropy" / "focal"
LossKind loss_from_name(const std::string& name);

// -alpha_t * (1 - p_t)^gamma * log(p_t), p_t clamped below at 1e-12.
double focal_loss(std::span<const double> probs, std::size_t target, const FocalLossConfig& config);
double cross_entropy(std::span<const double> probs, std::size_t target);

struct LossValue {
  double loss = 0.0;     // batch mean
  nn::Mat dlogits;       // gradient of the batch mean w.r.t. logits
  nn::Mat probs;
};

LossValue batch_loss(const nn::Mat& logits, std::span<const int> targets, LossKind kind, const FocalLossConfig& focal);

}  // namespace ecgsal::models
