#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "ecgsal/beat_class.hpp"

namespace ecgsal::evaluation {

struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};  // [true][predicted]
  std::size_t total() const noexcept;
  std::size_t row_sum(std::size_t t) const noexcept;
  std::size_t col_sum(std::size_t p) const noexcept;
};

ConfusionMatrix confusion(std::span<const BeatClass> truth, std::span<const BeatClass> predicted);

// nullopt marks an empty row ("nan" when rendered).
using ProportionGrid = std::array<std::array<std::optional<double>, kNumClasses>, kNumClasses>;
ProportionGrid row_normalize(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> f1;
  std::size_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_specificity = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  std::size_t total = 0;
  std::size_t supported_classes = 0;
};

// One-vs-rest per class; zero-support classes are absent and left out of the
// macro means. Precision with no positive predictions is 0, specificity with
// no false positives is 1.
MetricsReport metrics(const ConfusionMatrix& cm);

struct Breakdown {
  std::array<std::optional<double>, kNumClasses> f1{};
  std::array<std::optional<double>, kNumClasses> precision{};
  std::array<std::optional<double>, kNumClasses> recall{};
};

Breakdown per_class_breakdown(const ConfusionMatrix& cm);

// "0.9710" style; nullopt renders as `absent`.
std::string format4(const std::optional<double>& v, const std::string& absent = "N/A");

nlohmann::json confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);
nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json breakdown_to_json(const Breakdown& b);

// Accuracy / F1 / Precision / Recall / Specificity, one row per label.
std::string format_summary_table(std::span<const std::pair<std::string, MetricsReport>> rows);
// Rows f1, precision, recall; one column per class.
std::string format_breakdown(const Breakdown& b);
std::string format_confusion(const ConfusionMatrix& cm);

}  // namespace ecgsal::evaluation
