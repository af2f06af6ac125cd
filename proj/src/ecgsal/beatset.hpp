#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgsal/beat_class.hpp"
#include "ecgsal/record_io.hpp"

namespace ecgsal::beatset {

inline constexpr std::size_t kLeadSlot = 430;
inline constexpr std::size_t kVectorLength = 2 * kLeadSlot;  // 860
inline constexpr std::size_t kRIndex = kLeadSlot / 2;        // 215
inline constexpr std::size_t kMaxBeatLength = kLeadSlot;

struct Beat {
  std::string record_id;
  std::size_t beat_index = 0;  // position among the record's beat annotations
  std::size_t start = 0;       // first sample of the segment within the record
  std::array<std::vector<double>, 2> leads;
  std::size_t r_offset = 0;
  BeatClass label = BeatClass::Normal;

  std::size_t length() const noexcept { return leads[0].size(); }
};

struct BeatVector {
  std::array<float, kVectorLength> values{};
  BeatClass label = BeatClass::Normal;
  std::string record_id;
  std::size_t beat_index = 0;
};

struct ExtractedBeats {
  std::vector<Beat> beats;
  std::size_t excluded = 0;
  std::map<char, std::size_t> excluded_by_symbol;
};

// Segments span [floor((r[k-1]+r[k])/2), floor((r[k]+r[k+1])/2)); the first
// starts at 0 and the last ends at n_samples. All beat annotations act as
// neighbours; beats whose symbol is outside the kept classes are dropped.
ExtractedBeats extract_beats(const record_io::EcgRecord& record);

struct FilterResult {
  std::vector<Beat> kept;
  std::size_t removed = 0;
};

FilterResult filter_overlong(std::vector<Beat> beats, std::size_t max_len = kMaxBeatLength);

// Min-max scaling to [0,1]; a constant segment maps to zeros.
std::vector<double> normalize_lead(std::span<const double> segment);

// Normalizes each lead and places it so the R-peak lands on index 215 of its
// 430-sample slot. Samples falling outside the slot are dropped.
BeatVector assemble_vector(const Beat& beat);

enum class Protocol { HoldOut, LeavePatientsOut };

std::string protocol_name(Protocol p);  // "holdout" / "lpo"
Protocol protocol_from_name(const std::string& name);

struct DatasetSplit {
  Protocol protocol = Protocol::HoldOut;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::string> test_record_ids;
  std::uint64_t seed = 0;
};

inline const std::vector<std::string> kDefaultTestRecords = {"104", "113", "119", "208", "210"};

DatasetSplit split_holdout(std::size_t n, std::uint64_t seed);

DatasetSplit split_leave_patients_out(std::span<const BeatVector> beats, const std::vector<std::string>& test_record_ids,
                                      std::uint64_t seed);

struct RebalanceResult {
  std::vector<std::size_t> indices;  // multiset over the input collection
  std::size_t target = 0;
  std::array<std::size_t, kNumClasses> counts_before{};
  std::array<std::size_t, kNumClasses> counts_after{};
  std::vector<BeatClass> skipped;  // classes with no training samples
};

// Normal (and any class above the target) is downsampled without
// replacement to the second-largest class size; smaller classes are
// upsampled by whole copies plus a random distinct subset.
RebalanceResult rebalance(std::span<const std::size_t> train_indices, std::span<const BeatClass> labels,
                          std::uint64_t seed);

struct LeakReport {
  Protocol protocol = Protocol::HoldOut;
  std::vector<std::string> shared_record_ids;
  bool disjoint() const noexcept { return shared_record_ids.empty(); }
};

// HoldOut compares train with test; LeavePatientsOut compares train+val with test.
LeakReport verify_no_leak(const DatasetSplit& split, std::span<const BeatVector> beats);

struct BeatSetStats {
  std::array<std::size_t, kNumClasses> before_filter{};
  std::array<std::size_t, kNumClasses> after_filter{};
  std::optional<std::array<std::size_t, kNumClasses>> after_rebalance;
  std::size_t excluded_symbol = 0;
  std::map<char, std::size_t> excluded_by_symbol;
  std::size_t overlong_removed = 0;
  std::size_t records = 0;

  std::size_t total() const noexcept;
};

struct BeatSet {
  std::vector<BeatVector> vectors;
  BeatSetStats stats;
};

// extract -> drop excluded symbols -> drop beats longer than max_len -> assemble.
void append_record(BeatSet& set, const record_io::EcgRecord& record, std::size_t max_len = kMaxBeatLength);

nlohmann::json stats_to_json(const BeatSetStats& stats);
BeatSetStats stats_from_json(const nlohmann::json& j);

nlohmann::json split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const nlohmann::json& j);

}  // namespace ecgsal::beatset
