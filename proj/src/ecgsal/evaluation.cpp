#include "ecgsal/evaluation.hpp"

#include <cstdio>
#include <algorithm>
#include <sstream>

#include "ecgsal/error.hpp"

namespace ecgsal::evaluation {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t t) const noexcept {
  std::size_t n = 0;
  for (std::size_t c : counts[t]) n += c;
  return n;
}

std::size_t ConfusionMatrix::col_sum(std::size_t p) const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[p];
  return n;
}

ConfusionMatrix confusion(std::span<const BeatClass> truth, std::span<const BeatClass> predicted) {
  if (truth.size() != predicted.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(truth.size()) + " true labels vs " +
                                        std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[index_of(truth[i])][index_of(predicted[i])];
  return cm;
}

ProportionGrid row_normalize(const ConfusionMatrix& cm) {
  ProportionGrid out{};
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    const std::size_t n = cm.row_sum(t);
    if (n == 0) continue;
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      out[t][p] = static_cast<double>(cm.counts[t][p]) / static_cast<double>(n);
    }
  }
  return out;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  if (r.total == 0) fail(ErrorCode::EmptyMatrix, "confusion matrix has no entries");
  std::size_t trace = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) trace += cm.counts[c][c];
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassMetrics& m = r.per_class[c];
    const std::size_t tp = cm.counts[c][c];
    const std::size_t support = cm.row_sum(c);
    const std::size_t predicted = cm.col_sum(c);
    const std::size_t fn = support - tp;
    const std::size_t fp = predicted - tp;
    const std::size_t tn = r.total - tp - fn - fp;
    m.support = support;
    if (support == 0) continue;
    const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall = static_cast<double>(tp) / static_cast<double>(support);
    m.precision = precision;
    m.recall = recall;
    m.specificity = fp == 0 ? 1.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
    m.f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    r.macro_precision += precision;
    r.macro_recall += recall;
    r.macro_specificity += *m.specificity;
    r.macro_f1 += *m.f1;
    ++r.supported_classes;
  }
  const auto k = static_cast<double>(r.supported_classes);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_specificity /= k;
  r.macro_f1 /= k;
  return r;
}

Breakdown per_class_breakdown(const ConfusionMatrix& cm) {
  const MetricsReport r = metrics(cm);
  Breakdown b;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    b.f1[c] = r.per_class[c].f1;
    b.precision[c] = r.per_class[c].precision;
    b.recall[c] = r.per_class[c].recall;
  }
  return b;
}

std::string format4(const std::optional<double>& v, const std::string& absent) {
  if (!v) return absent;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
  nlohmann::json classes = nlohmann::json::array();
  for (BeatClass c : kAllClasses) classes.push_back(class_key(c));
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& row : cm.counts) counts.push_back(row);
  nlohmann::json normalized = nlohmann::json::array();
  for (const auto& row : row_normalize(cm)) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& v : row) jr.push_back(opt(v));
    normalized.push_back(jr);
  }
  return {{"classes", classes}, {"index_order", "true,predicted"}, {"counts", counts}, {"row_normalized", normalized}};
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix cm;
  const auto& counts = j.at("counts");
  if (!counts.is_array() || counts.size() != kNumClasses) fail(ErrorCode::InvalidArgument, "confusion counts must be 8x8");
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    if (counts[t].size() != kNumClasses) fail(ErrorCode::InvalidArgument, "confusion counts must be 8x8");
    for (std::size_t p = 0; p < kNumClasses; ++p) cm.counts[t][p] = counts[t][p].get<std::size_t>();
  }
  return cm;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const ClassMetrics& m = r.per_class[c];
    per_class[std::string(class_key(kAllClasses[c]))] = {{"f1", opt(m.f1)},
                                                         {"precision", opt(m.precision)},
                                                         {"recall", opt(m.recall)},
                                                         {"specificity", opt(m.specificity)},
                                                         {"support", m.support}};
  }
  return {{"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_specificity", r.macro_specificity},
          {"formatted",
           {{"accuracy", format4(r.accuracy)},
            {"macro_f1", format4(r.macro_f1)},
            {"macro_precision", format4(r.macro_precision)},
            {"macro_recall", format4(r.macro_recall)},
            {"macro_specificity", format4(r.macro_specificity)}}},
          {"total", r.total},
          {"supported_classes", r.supported_classes},
          {"averaging", {{"macro", "unweighted mean over classes with support > 0"},
                         {"specificity", "one-vs-rest per class, macro averaged"}}},
          {"per_class", per_class}};
}

nlohmann::json breakdown_to_json(const Breakdown& b) {
  nlohmann::json out = nlohmann::json::object();
  const auto row = [](const std::array<std::optional<double>, kNumClasses>& values) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) j[std::string(class_key(kAllClasses[c]))] = format4(values[c]);
    return j;
  };
  out["f1"] = row(b.f1);
  out["precision"] = row(b.precision);
  out["recall"] = row(b.recall);
  return out;
}

std::string format_summary_table(std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::size_t label_width = 5;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  std::ostringstream out;
  out << pad("Model", label_width) << "  Accuracy  F1 Score  Precision  Recall  Specificity\n";
  for (const auto& [label, r] : rows) {
    out << pad(label, label_width) << "  " << pad(format4(r.accuracy), 8) << "  " << pad(format4(r.macro_f1), 8) << "  "
        << pad(format4(r.macro_precision), 9) << "  " << pad(format4(r.macro_recall), 6) << "  "
        << format4(r.macro_specificity) << "\n";
  }
  return out.str();
}

std::string format_breakdown(const Breakdown& b) {
  constexpr std::size_t w = 11;
  std::ostringstream out;
  out << pad("", 10);
  for (BeatClass c : kAllClasses) out << lpad(std::string(class_display_name(c)), w);
  out << "\n";
  const auto row = [&](const char* name, const std::array<std::optional<double>, kNumClasses>& v) {
    out << pad(name, 10);
    for (const auto& x : v) out << lpad(format4(x), w);
    out << "\n";
  };
  row("f1", b.f1);
  row("precision", b.precision);
  row("recall", b.recall);
  return out.str();
}

std::string format_confusion(const ConfusionMatrix& cm) {
  constexpr std::size_t w = 11;
  const ProportionGrid grid = row_normalize(cm);
  std::ostringstream out;
  out << pad("true\\pred", 12);
  for (BeatClass c : kAllClasses) out << lpad(std::string(class_display_name(c)), w);
  out << "\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    out << pad(std::string(class_display_name(kAllClasses[t])), 12);
    for (const auto& v : grid[t]) out << lpad(format4(v, "nan"), w);
    out << "\n";
  }
  return out.str();
}

}  // namespace ecgsal::evaluation
