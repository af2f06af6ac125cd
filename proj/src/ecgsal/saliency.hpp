#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgsal/beat_class.hpp"
#include "ecgsal/beatset.hpp"
#include "ecgsal/model.hpp"

namespace ecgsal::saliency {

enum class Target { PredictedClass, TrueClass };

std::string target_name(Target t);  // "predicted" / "true"
Target target_from_name(const std::string& name);

struct SaliencyMap {
  std::vector<double> values;  // 860, in [0,1]
  BeatClass target_class = BeatClass::Normal;
  std::string record_id;
  std::size_t beat_index = 0;
};

// Gradient of the pre-softmax score of `classes[j]` for column j, one column
// per input (inference mode).
models::Mat class_score_gradients(const models::Network& network, const models::Mat& inputs,
                                  std::span<const int> classes);

// |g| min-max scaled to [0,1]. A zero gradient maps to zeros; a constant
// nonzero magnitude maps to ones.
std::vector<double> normalize_magnitude(std::span<const double> gradient);

SaliencyMap input_saliency(const models::Network& network, const beatset::BeatVector& beat, Target target);
// Raises UntrainedModel for a model that has never been trained.
SaliencyMap input_saliency(const models::TrainedModel& model, const beatset::BeatVector& beat, Target target);
std::vector<SaliencyMap> batch_saliency(const models::TrainedModel& model, std::span<const beatset::BeatVector> beats,
                                        Target target);

inline constexpr std::size_t kBlockSamples = 36;  // 0.1 s at 360 Hz
inline constexpr std::size_t kBlocksPerSide = 6;
inline constexpr std::size_t kBlocksPerLead = 2 * kBlocksPerSide;
inline constexpr std::size_t kGridBlocks = 2 * kBlocksPerLead;

struct BlockSpan {
  int lead = 1;    // 1 or 2
  int offset = 0;  // -6..-1 left of the R-peak, +1..+6 right
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive, indices into the 860-vector
  std::size_t size() const noexcept { return end - begin; }
};

// Lead 1 then lead 2, each in positional order -6..-1, +1..+6.
const std::array<BlockSpan, kGridBlocks>& block_layout();

struct SegmentGrid {
  std::array<double, kGridBlocks> means{};
  BeatClass label = BeatClass::Normal;
  std::string record_id;
  std::size_t beat_index = 0;
};

SegmentGrid segment_means(const SaliencyMap& map);

// Linear interpolation between order statistics at position q*(n-1).
double quantile(std::span<const double> sorted, double q);

struct ClassSegmentProfile {
  BeatClass cls = BeatClass::Normal;
  std::array<double, kGridBlocks> median{};
  std::array<double, kGridBlocks> q25{};
  std::array<double, kGridBlocks> q75{};
  std::size_t n_beats = 0;
};

ClassSegmentProfile class_profile(BeatClass cls, std::span<const SegmentGrid> grids);

struct LabeledGrid {
  SegmentGrid grid;
  BeatClass truth = BeatClass::Normal;
  BeatClass predicted = BeatClass::Normal;
};

struct GroupComparison {
  BeatClass cls = BeatClass::Normal;
  std::optional<ClassSegmentProfile> correct;
  std::optional<ClassSegmentProfile> incorrect;  // empty when every beat was classified correctly
  ClassSegmentProfile all;                       // correct and incorrect test beats together
  std::optional<ClassSegmentProfile> total;      // training and test beats combined
  std::optional<BeatClass> confused_class;
  std::optional<ClassSegmentProfile> confused_profile;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::array<std::size_t, kNumClasses> incorrect_predictions{};
};

// `test` holds evaluated beats of any class; only those whose truth is `cls`
// are grouped. The confused class profile is built from test beats whose
// truth is the confused class. `total_grids` (optional) feeds the total curve.
GroupComparison group_comparison(BeatClass cls, std::span<const LabeledGrid> test,
                                 std::span<const SegmentGrid> total_grids = {});

struct OutlierEntry {
  std::size_t index = 0;  // position in the input grid list
  std::string record_id;
  std::size_t beat_index = 0;
  double distance = 0.0;
};

// Mean absolute deviation of each grid's 24 block means from the profile
// medians, most distant first (ties keep input order).
std::vector<OutlierEntry> outlier_scan(const ClassSegmentProfile& profile, std::span<const SegmentGrid> grids);

nlohmann::json map_to_json(const SaliencyMap& map);
nlohmann::json grid_to_json(const SegmentGrid& grid);
nlohmann::json profile_to_json(const ClassSegmentProfile& profile);
nlohmann::json comparison_to_json(const GroupComparison& cmp);
nlohmann::json outliers_to_json(std::span<const OutlierEntry> entries);

}  // namespace ecgsal::saliency
