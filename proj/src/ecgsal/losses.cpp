#include "ecgsal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ecgsal/error.hpp"

namespace ecgsal::models {

namespace {

void check_distribution(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) fail(ErrorCode::InvalidArgument, "target class out of range");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidArgument, "probabilities must lie in [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail(ErrorCode::InvalidArgument, "probabilities must sum to 1");
}

double focal_term(double p_target, double gamma, double alpha) {
  const double p = std::max(p_target, kProbabilityFloor);
  const double weight = gamma == 0.0 ? 1.0 : std::pow(1.0 - p, gamma);
  return -alpha * weight * std::log(p);
}

// d(focal)/d(p_t), evaluated at the clamped probability.
double focal_dp(double p_target, double gamma, double alpha) {
  const double p = std::max(p_target, kProbabilityFloor);
  const double q = 1.0 - p;
  double d = -alpha * (gamma == 0.0 ? 1.0 : std::pow(q, gamma)) / p;
  if (gamma != 0.0 && q > 0.0) d += alpha * gamma * std::pow(q, gamma - 1.0) * std::log(p);
  return d;
}

}  // namespace

void validate(const FocalLossConfig& config, std::size_t n_classes) {
  if (!(config.gamma >= 0.0)) fail(ErrorCode::InvalidConfig, "focal gamma must be >= 0");
  if (config.alpha.size() != n_classes) fail(ErrorCode::InvalidConfig, "focal alpha needs one weight per class");
  for (double a : config.alpha) {
    if (!(a > 0.0 && a <= 1.0)) fail(ErrorCode::InvalidConfig, "focal alpha weights must lie in (0,1]");
  }
}

std::string loss_name(LossKind kind) { return kind == LossKind::Focal ? "focal" : "cross_entropy"; }

LossKind loss_from_name(const std::string& name) {
  if (name == "focal") return LossKind::Focal;
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  fail(ErrorCode::InvalidConfig, "unknown loss '" + name + "' (expected cross_entropy or focal)");
}

double focal_loss(std::span<const double> probs, std::size_t target, const FocalLossConfig& config) {
  check_distribution(probs, target);
  if (target >= config.alpha.size()) fail(ErrorCode::InvalidConfig, "no focal alpha for target class");
  return focal_term(probs[target], config.gamma, config.alpha[target]);
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  check_distribution(probs, target);
  return -std::log(std::max(probs[target], kProbabilityFloor));
}

LossValue batch_loss(const nn::Mat& logits, std::span<const int> targets, LossKind kind, const FocalLossConfig& focal) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<std::size_t>(batch) != targets.size()) fail(ErrorCode::ShapeMismatch, "one target per column required");
  if (batch == 0) fail(ErrorCode::InvalidArgument, "empty batch");
  LossValue out;
  out.probs = nn::softmax_columns(logits);
  out.dlogits = nn::Mat::Zero(logits.rows(), batch);
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int t = targets[static_cast<std::size_t>(j)];
    if (t < 0 || t >= logits.rows()) fail(ErrorCode::InvalidArgument, "target class out of range");
    const auto p = out.probs.col(j);
    const double pt = p(t);
    if (kind == LossKind::CrossEntropy) {
      total += -std::log(std::max(pt, kProbabilityFloor));
      out.dlogits.col(j) = p * inv_b;
      out.dlogits(t, j) -= inv_b;
    } else {
      const double alpha = focal.alpha.at(static_cast<std::size_t>(t));
      total += focal_term(pt, focal.gamma, alpha);
      // dL/dz_k = dL/dp_t * p_t * (delta_tk - p_k)
      const double g = focal_dp(pt, focal.gamma, alpha) * pt * inv_b;
      out.dlogits.col(j) = -g * p;
      out.dlogits(t, j) += g;
    }
  }
  out.loss = total * inv_b;
  return out;
}

}  // namespace ecgsal::models
