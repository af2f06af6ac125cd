#include "ecgsal/beatset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ecgsal/error.hpp"
#include "ecgsal/rng.hpp"

namespace ecgsal::beatset {

ExtractedBeats extract_beats(const record_io::EcgRecord& record) {
  std::vector<const record_io::Annotation*> peaks;
  for (const auto& a : record.annotations) {
    if (a.is_beat) peaks.push_back(&a);
  }
  if (peaks.empty()) fail(ErrorCode::NoBeatAnnotations, "record " + record.header.record_id + " has no beat annotations");

  const std::size_t n = record.header.n_samples;
  ExtractedBeats out;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const std::size_t r = peaks[k]->sample_index;
    const std::size_t start = k == 0 ? 0 : (peaks[k - 1]->sample_index + r) / 2;
    const std::size_t end = k + 1 == peaks.size() ? n : (r + peaks[k + 1]->sample_index) / 2;
    const auto label = record_io::map_symbol(peaks[k]->symbol);
    if (!label) {
      ++out.excluded;
      ++out.excluded_by_symbol[peaks[k]->symbol];
      continue;
    }
    if (end <= start || r < start || r >= end) continue;  // coincident peaks leave no segment

    Beat beat;
    beat.record_id = record.header.record_id;
    beat.beat_index = k;
    beat.start = start;
    beat.r_offset = r - start;
    beat.label = *label;
    for (std::size_t l = 0; l < 2; ++l) {
      const auto& sig = record.signal[l];
      beat.leads[l].assign(sig.begin() + static_cast<std::ptrdiff_t>(start), sig.begin() + static_cast<std::ptrdiff_t>(end));
    }
    out.beats.push_back(std::move(beat));
  }
  return out;
}

FilterResult filter_overlong(std::vector<Beat> beats, std::size_t max_len) {
  if (max_len == 0) fail(ErrorCode::InvalidArgument, "max_len must be positive");
  FilterResult out;
  out.kept.reserve(beats.size());
  for (auto& b : beats) {
    if (b.length() <= max_len) {
      out.kept.push_back(std::move(b));
    } else {
      ++out.removed;
    }
  }
  return out;
}

std::vector<double> normalize_lead(std::span<const double> segment) {
  if (segment.empty()) fail(ErrorCode::EmptySegment, "cannot normalize an empty segment");
  const auto [lo, hi] = std::minmax_element(segment.begin(), segment.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(segment.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < segment.size(); ++i) out[i] = (segment[i] - min) / range;
  }
  return out;
}

BeatVector assemble_vector(const Beat& beat) {
  if (beat.length() > kLeadSlot) {
    fail(ErrorCode::BeatTooLong, "beat of length " + std::to_string(beat.length()) + " exceeds " + std::to_string(kLeadSlot));
  }
  if (beat.leads[1].size() != beat.length()) fail(ErrorCode::LengthMismatch, "leads differ in length");
  BeatVector v;
  v.label = beat.label;
  v.record_id = beat.record_id;
  v.beat_index = beat.beat_index;
  for (std::size_t l = 0; l < 2; ++l) {
    const auto norm = normalize_lead(beat.leads[l]);
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kRIndex) - static_cast<std::ptrdiff_t>(beat.r_offset);
    for (std::size_t i = 0; i < norm.size(); ++i) {
      const std::ptrdiff_t dst = shift + static_cast<std::ptrdiff_t>(i);
      if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(kLeadSlot)) continue;
      v.values[l * kLeadSlot + static_cast<std::size_t>(dst)] = static_cast<float>(norm[i]);
    }
  }
  return v;
}

std::string protocol_name(Protocol p) { return p == Protocol::HoldOut ? "holdout" : "lpo"; }

Protocol protocol_from_name(const std::string& name) {
  if (name == "holdout") return Protocol::HoldOut;
  if (name == "lpo") return Protocol::LeavePatientsOut;
  fail(ErrorCode::InvalidConfig, "unknown protocol '" + name + "' (expected holdout or lpo)");
}

DatasetSplit split_holdout(std::size_t n, std::uint64_t seed) {
  if (n < kNumClasses) fail(ErrorCode::TooFewBeats, "hold-out split needs at least 8 beats, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);
  const auto n_train = static_cast<std::size_t>(std::llround(0.65 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.10 * static_cast<double>(n)));

  DatasetSplit split;
  split.protocol = Protocol::HoldOut;
  split.seed = seed;
  split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                   perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

DatasetSplit split_leave_patients_out(std::span<const BeatVector> beats, const std::vector<std::string>& test_record_ids,
                                      std::uint64_t seed) {
  std::set<std::string> present;
  for (const auto& b : beats) present.insert(b.record_id);
  std::set<std::string> test_ids(test_record_ids.begin(), test_record_ids.end());
  for (const auto& id : test_ids) {
    if (!present.contains(id)) fail(ErrorCode::UnknownRecordId, "record '" + id + "' is not in the beat set");
  }

  DatasetSplit split;
  split.protocol = Protocol::LeavePatientsOut;
  split.seed = seed;
  split.test_record_ids.assign(test_ids.begin(), test_ids.end());
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < beats.size(); ++i) {
    (test_ids.contains(beats[i].record_id) ? split.test : rest).push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(rest);
  const auto n_train = static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(rest.size())));
  split.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

RebalanceResult rebalance(std::span<const std::size_t> train_indices, std::span<const BeatClass> labels,
                          std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> pools;
  for (std::size_t idx : train_indices) {
    if (idx >= labels.size()) fail(ErrorCode::InvalidArgument, "training index out of range");
    pools[index_of(labels[idx])].push_back(idx);
  }
  RebalanceResult out;
  std::vector<std::size_t> sizes;
  for (BeatClass c : kAllClasses) {
    out.counts_before[index_of(c)] = pools[index_of(c)].size();
    if (pools[index_of(c)].empty()) {
      out.skipped.push_back(c);
    } else {
      sizes.push_back(pools[index_of(c)].size());
    }
  }
  if (sizes.empty()) fail(ErrorCode::EmptyClass, "training partition is empty");
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  out.target = sizes.size() > 1 ? sizes[1] : sizes[0];

  Rng rng(seed);
  for (BeatClass c : kAllClasses) {
    auto& pool = pools[index_of(c)];
    if (pool.empty()) continue;
    if (pool.size() >= out.target) {
      rng.shuffle(pool);
      out.indices.insert(out.indices.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(out.target));
    } else {
      const std::size_t copies = out.target / pool.size();
      const std::size_t remainder = out.target % pool.size();
      for (std::size_t k = 0; k < copies; ++k) out.indices.insert(out.indices.end(), pool.begin(), pool.end());
      rng.shuffle(pool);
      out.indices.insert(out.indices.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(remainder));
    }
    out.counts_after[index_of(c)] = out.target;
  }
  rng.shuffle(out.indices);
  return out;
}

LeakReport verify_no_leak(const DatasetSplit& split, std::span<const BeatVector> beats) {
  const auto ids_of = [&](std::initializer_list<const std::vector<std::size_t>*> parts) {
    std::set<std::string> ids;
    for (const auto* part : parts) {
      for (std::size_t i : *part) {
        if (i >= beats.size()) fail(ErrorCode::InvalidArgument, "split index out of range");
        ids.insert(beats[i].record_id);
      }
    }
    return ids;
  };
  const auto fit_ids = split.protocol == Protocol::HoldOut ? ids_of({&split.train}) : ids_of({&split.train, &split.val});
  const auto test_ids = ids_of({&split.test});
  LeakReport report;
  report.protocol = split.protocol;
  std::set_intersection(fit_ids.begin(), fit_ids.end(), test_ids.begin(), test_ids.end(),
                        std::back_inserter(report.shared_record_ids));
  return report;
}

std::size_t BeatSetStats::total() const noexcept {
  return std::accumulate(after_filter.begin(), after_filter.end(), std::size_t{0});
}

void append_record(BeatSet& set, const record_io::EcgRecord& record, std::size_t max_len) {
  auto extracted = extract_beats(record);
  set.stats.excluded_symbol += extracted.excluded;
  for (const auto& [sym, n] : extracted.excluded_by_symbol) set.stats.excluded_by_symbol[sym] += n;
  for (const auto& b : extracted.beats) ++set.stats.before_filter[index_of(b.label)];
  auto filtered = filter_overlong(std::move(extracted.beats), max_len);
  set.stats.overlong_removed += filtered.removed;
  for (const auto& b : filtered.kept) {
    ++set.stats.after_filter[index_of(b.label)];
    set.vectors.push_back(assemble_vector(b));
  }
  ++set.stats.records;
}

namespace {

nlohmann::json counts_json(const std::array<std::size_t, kNumClasses>& counts) {
  nlohmann::json j = nlohmann::json::object();
  for (BeatClass c : kAllClasses) j[std::string(class_key(c))] = counts[index_of(c)];
  return j;
}

std::array<std::size_t, kNumClasses> counts_from(const nlohmann::json& j) {
  std::array<std::size_t, kNumClasses> out{};
  for (BeatClass c : kAllClasses) out[index_of(c)] = j.at(std::string(class_key(c))).get<std::size_t>();
  return out;
}

}  // namespace

nlohmann::json stats_to_json(const BeatSetStats& stats) {
  nlohmann::json j;
  j["records"] = stats.records;
  j["total"] = stats.total();
  j["before_filter"] = counts_json(stats.before_filter);
  j["after_filter"] = counts_json(stats.after_filter);
  if (stats.after_rebalance) j["after_rebalance"] = counts_json(*stats.after_rebalance);
  j["excluded_symbol"] = stats.excluded_symbol;
  nlohmann::json by_symbol = nlohmann::json::object();
  for (const auto& [sym, n] : stats.excluded_by_symbol) by_symbol[std::string(1, sym)] = n;
  j["excluded_by_symbol"] = by_symbol;
  j["overlong_removed"] = stats.overlong_removed;
  j["max_beat_length"] = kMaxBeatLength;
  j["exclusion_order"] = "symbol_then_length";
  return j;
}

BeatSetStats stats_from_json(const nlohmann::json& j) {
  BeatSetStats s;
  s.records = j.at("records").get<std::size_t>();
  s.before_filter = counts_from(j.at("before_filter"));
  s.after_filter = counts_from(j.at("after_filter"));
  if (j.contains("after_rebalance")) s.after_rebalance = counts_from(j.at("after_rebalance"));
  s.excluded_symbol = j.at("excluded_symbol").get<std::size_t>();
  for (const auto& [k, v] : j.at("excluded_by_symbol").items()) {
    if (!k.empty()) s.excluded_by_symbol[k[0]] = v.get<std::size_t>();
  }
  s.overlong_removed = j.at("overlong_removed").get<std::size_t>();
  return s;
}

nlohmann::json split_to_json(const DatasetSplit& split) {
  return {{"protocol", protocol_name(split.protocol)},
          {"seed", split.seed},
          {"train", split.train},
          {"val", split.val},
          {"test", split.test},
          {"test_record_ids", split.test_record_ids}};
}

DatasetSplit split_from_json(const nlohmann::json& j) {
  DatasetSplit s;
  s.protocol = protocol_from_name(j.at("protocol").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.val = j.at("val").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  s.test_record_ids = j.at("test_record_ids").get<std::vector<std::string>>();
  return s;
}

}  // namespace ecgsal::beatset
