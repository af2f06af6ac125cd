#include "ecgsal/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ecgsal/error.hpp"

namespace ecgsal::saliency {

namespace {

constexpr std::size_t kChunk = 32;

std::array<BlockSpan, kGridBlocks> make_layout() {
  std::array<BlockSpan, kGridBlocks> out{};
  std::size_t i = 0;
  const auto r = static_cast<long>(beatset::kRIndex);
  const auto slot = static_cast<long>(beatset::kLeadSlot);
  const auto w = static_cast<long>(kBlockSamples);
  for (int lead = 1; lead <= 2; ++lead) {
    const long base = (lead - 1) * slot;
    for (int k = static_cast<int>(kBlocksPerSide); k >= 1; --k) {
      const long begin = std::max(0L, r - w * k);
      const long end = r - w * (k - 1);
      out[i++] = {lead, -k, static_cast<std::size_t>(base + begin), static_cast<std::size_t>(base + end)};
    }
    for (int k = 1; k <= static_cast<int>(kBlocksPerSide); ++k) {
      const long begin = r + w * (k - 1);
      const long end = std::min(slot, r + w * k);
      out[i++] = {lead, k, static_cast<std::size_t>(base + begin), static_cast<std::size_t>(base + end)};
    }
  }
  return out;
}

nlohmann::json blocks_json(const ClassSegmentProfile& p) {
  nlohmann::json blocks = nlohmann::json::array();
  const auto& layout = block_layout();
  for (std::size_t b = 0; b < kGridBlocks; ++b) {
    blocks.push_back({{"lead", layout[b].lead},
                      {"offset", layout[b].offset},
                      {"median", p.median[b]},
                      {"q25", p.q25[b]},
                      {"q75", p.q75[b]}});
  }
  return blocks;
}

nlohmann::json optional_profile(const std::optional<ClassSegmentProfile>& p) {
  return p ? profile_to_json(*p) : nlohmann::json();
}

}  // namespace

std::string target_name(Target t) { return t == Target::TrueClass ? "true" : "predicted"; }

Target target_from_name(const std::string& name) {
  if (name == "predicted") return Target::PredictedClass;
  if (name == "true") return Target::TrueClass;
  fail(ErrorCode::InvalidConfig, "unknown saliency target '" + name + "' (expected predicted or true)");
}

models::Mat class_score_gradients(const models::Network& network, const models::Mat& inputs,
                                  std::span<const int> classes) {
  if (inputs.rows() != network.input_length()) fail(ErrorCode::ShapeMismatch, "input length does not match network");
  if (static_cast<std::size_t>(inputs.cols()) != classes.size()) {
    fail(ErrorCode::ShapeMismatch, "one target class per input column required");
  }
  nn::Tape tape = network.make_tape();
  nn::Context ctx;
  const models::Mat logits = network.forward(inputs, tape, ctx);
  models::Mat seed = models::Mat::Zero(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (classes[j] < 0 || classes[j] >= logits.rows()) fail(ErrorCode::InvalidArgument, "target class out of range");
    seed(classes[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return network.backward(seed, tape, nullptr);
}

std::vector<double> normalize_magnitude(std::span<const double> gradient) {
  std::vector<double> out(gradient.size(), 0.0);
  if (gradient.empty()) return out;
  double lo = std::abs(gradient[0]);
  double hi = lo;
  for (double g : gradient) {
    lo = std::min(lo, std::abs(g));
    hi = std::max(hi, std::abs(g));
  }
  if (hi == 0.0) return out;
  if (hi == lo) return std::vector<double>(gradient.size(), 1.0);
  const double range = hi - lo;
  for (std::size_t i = 0; i < gradient.size(); ++i) out[i] = (std::abs(gradient[i]) - lo) / range;
  return out;
}

SaliencyMap input_saliency(const models::Network& network, const beatset::BeatVector& beat, Target target) {
  const beatset::BeatVector one[] = {beat};
  const models::Mat x = models::to_batch(one);
  int cls = static_cast<int>(index_of(beat.label));
  if (target == Target::PredictedClass) {
    const models::Mat proba = models::predict_proba(network, x);
    Eigen::Index best = 0;
    proba.row(0).maxCoeff(&best);
    cls = static_cast<int>(best);
  }
  const int classes[] = {cls};
  const models::Mat g = class_score_gradients(network, x, classes);
  SaliencyMap map;
  map.values = normalize_magnitude(std::span<const double>(g.data(), static_cast<std::size_t>(g.rows())));
  map.target_class = kAllClasses[static_cast<std::size_t>(cls)];
  map.record_id = beat.record_id;
  map.beat_index = beat.beat_index;
  return map;
}

SaliencyMap input_saliency(const models::TrainedModel& model, const beatset::BeatVector& beat, Target target) {
  if (!model.trained()) fail(ErrorCode::UntrainedModel, "saliency requires a trained model");
  return input_saliency(model.network(), beat, target);
}

std::vector<SaliencyMap> batch_saliency(const models::TrainedModel& model, std::span<const beatset::BeatVector> beats,
                                        Target target) {
  if (!model.trained()) fail(ErrorCode::UntrainedModel, "saliency requires a trained model");
  const models::Network& net = model.network();
  std::vector<SaliencyMap> out(beats.size());
  for (std::size_t start = 0; start < beats.size(); start += kChunk) {
    const auto chunk = beats.subspan(start, std::min(kChunk, beats.size() - start));
    const models::Mat x = models::to_batch(chunk);
    std::vector<int> classes(chunk.size());
    if (target == Target::PredictedClass) {
      const auto labels = models::argmax_labels(models::predict_proba(net, x));
      for (std::size_t j = 0; j < chunk.size(); ++j) classes[j] = static_cast<int>(index_of(labels[j]));
    } else {
      for (std::size_t j = 0; j < chunk.size(); ++j) classes[j] = static_cast<int>(index_of(chunk[j].label));
    }
    const models::Mat g = class_score_gradients(net, x, classes);
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      SaliencyMap& m = out[start + j];
      m.values = normalize_magnitude(
          std::span<const double>(g.col(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(g.rows())));
      m.target_class = kAllClasses[static_cast<std::size_t>(classes[j])];
      m.record_id = chunk[j].record_id;
      m.beat_index = chunk[j].beat_index;
    }
  }
  return out;
}

const std::array<BlockSpan, kGridBlocks>& block_layout() {
  static const std::array<BlockSpan, kGridBlocks> layout = make_layout();
  return layout;
}

SegmentGrid segment_means(const SaliencyMap& map) {
  if (map.values.size() != beatset::kVectorLength) fail(ErrorCode::ShapeMismatch, "saliency map must have 860 values");
  SegmentGrid grid;
  const auto& layout = block_layout();
  for (std::size_t b = 0; b < kGridBlocks; ++b) {
    double sum = 0.0;
    for (std::size_t i = layout[b].begin; i < layout[b].end; ++i) sum += map.values[i];
    grid.means[b] = sum / static_cast<double>(layout[b].size());
  }
  grid.label = map.target_class;
  grid.record_id = map.record_id;
  grid.beat_index = map.beat_index;
  return grid;
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ClassSegmentProfile class_profile(BeatClass cls, std::span<const SegmentGrid> grids) {
  if (grids.empty()) fail(ErrorCode::EmptyClass, "no beats for class " + std::string(class_key(cls)));
  ClassSegmentProfile p;
  p.cls = cls;
  p.n_beats = grids.size();
  std::vector<double> column(grids.size());
  for (std::size_t b = 0; b < kGridBlocks; ++b) {
    for (std::size_t i = 0; i < grids.size(); ++i) column[i] = grids[i].means[b];
    std::sort(column.begin(), column.end());
    p.q25[b] = quantile(column, 0.25);
    p.median[b] = quantile(column, 0.5);
    p.q75[b] = quantile(column, 0.75);
  }
  return p;
}

GroupComparison group_comparison(BeatClass cls, std::span<const LabeledGrid> test,
                                 std::span<const SegmentGrid> total_grids) {
  GroupComparison out;
  out.cls = cls;
  std::vector<SegmentGrid> correct, incorrect, all;
  for (const auto& g : test) {
    if (g.truth != cls) continue;
    all.push_back(g.grid);
    if (g.predicted == cls) {
      correct.push_back(g.grid);
    } else {
      incorrect.push_back(g.grid);
      ++out.incorrect_predictions[index_of(g.predicted)];
    }
  }
  out.all = class_profile(cls, all);
  out.n_correct = correct.size();
  out.n_incorrect = incorrect.size();
  if (!correct.empty()) out.correct = class_profile(cls, correct);
  if (!total_grids.empty()) out.total = class_profile(cls, total_grids);
  if (incorrect.empty()) return out;

  out.incorrect = class_profile(cls, incorrect);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (out.incorrect_predictions[c] > out.incorrect_predictions[best]) best = c;
  }
  out.confused_class = kAllClasses[best];
  std::vector<SegmentGrid> confused;
  for (const auto& g : test) {
    if (g.truth == kAllClasses[best]) confused.push_back(g.grid);
  }
  if (!confused.empty()) out.confused_profile = class_profile(kAllClasses[best], confused);
  return out;
}

std::vector<OutlierEntry> outlier_scan(const ClassSegmentProfile& profile, std::span<const SegmentGrid> grids) {
  std::vector<OutlierEntry> out;
  out.reserve(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    double d = 0.0;
    for (std::size_t b = 0; b < kGridBlocks; ++b) d += std::abs(grids[i].means[b] - profile.median[b]);
    out.push_back({i, grids[i].record_id, grids[i].beat_index, d / static_cast<double>(kGridBlocks)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.distance > b.distance; });
  return out;
}

nlohmann::json map_to_json(const SaliencyMap& map) {
  return {{"record_id", map.record_id},
          {"beat_index", map.beat_index},
          {"target_class", class_key(map.target_class)},
          {"values", map.values}};
}

nlohmann::json grid_to_json(const SegmentGrid& grid) {
  nlohmann::json blocks = nlohmann::json::array();
  const auto& layout = block_layout();
  for (std::size_t b = 0; b < kGridBlocks; ++b) {
    blocks.push_back({{"lead", layout[b].lead}, {"offset", layout[b].offset}, {"mean", grid.means[b]}});
  }
  return {{"record_id", grid.record_id},
          {"beat_index", grid.beat_index},
          {"class", class_key(grid.label)},
          {"blocks", blocks}};
}

nlohmann::json profile_to_json(const ClassSegmentProfile& p) {
  return {{"class", class_key(p.cls)}, {"n_beats", p.n_beats}, {"blocks", blocks_json(p)}};
}

nlohmann::json comparison_to_json(const GroupComparison& c) {
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (c.incorrect_predictions[k] > 0) counts[std::string(class_key(kAllClasses[k]))] = c.incorrect_predictions[k];
  }
  return {{"class", class_key(c.cls)},
          {"status", c.incorrect ? "ok" : "NoIncorrectBeats"},
          {"n_correct", c.n_correct},
          {"n_incorrect", c.n_incorrect},
          {"incorrect_predicted_as", counts},
          {"confused_class", c.confused_class ? nlohmann::json(class_key(*c.confused_class)) : nlohmann::json()},
          {"groups",
           {{"correct", optional_profile(c.correct)},
            {"incorrect", optional_profile(c.incorrect)},
            {"all", profile_to_json(c.all)},
            {"total", optional_profile(c.total)},
            {"confused", optional_profile(c.confused_profile)}}}};
}

nlohmann::json outliers_to_json(std::span<const OutlierEntry> entries) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries) {
    out.push_back({{"index", e.index}, {"record_id", e.record_id}, {"beat_index", e.beat_index}, {"distance", e.distance}});
  }
  return out;
}

}  // namespace ecgsal::saliency
