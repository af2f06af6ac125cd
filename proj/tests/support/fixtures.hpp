#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ecgsal/beatset.hpp"
#include "ecgsal/network.hpp"
#include "ecgsal/record_io.hpp"
#include "synth.hpp"

namespace ecgsal::testsupport {

// Small enough to train in seconds on one core.
inline models::CnnConfig tiny_cnn() {
  models::CnnConfig c;
  c.n_residual_blocks = 2;
  c.initial_filters = 4;
  c.filters = {6, 8};
  c.kernel_size = 5;
  c.downsample = {4, 4};
  c.dropout = 0.1;
  return c;
}

inline models::LstmConfig tiny_lstm() {
  models::LstmConfig c;
  c.lstm_units = 8;
  c.fc_sizes = {8, 8};
  c.timestep_width = 20;
  return c;
}

// Beat vectors from freshly written synthetic records, one record per
// (id, symbols) pair.
inline std::vector<beatset::BeatVector> synthetic_beats(const std::vector<std::pair<std::string, std::vector<char>>>& records,
                                                        std::uint64_t seed) {
  const auto dir = temp_dir("fixture");
  beatset::BeatSet set;
  for (std::size_t i = 0; i < records.size(); ++i) {
    write_record(dir, records[i].first, records[i].second, seed + i);
    beatset::append_record(set, record_io::load_record(dir, records[i].first));
  }
  std::filesystem::remove_all(dir);
  return set.vectors;
}

inline std::vector<char> repeat(const std::string& pattern, std::size_t times) {
  std::vector<char> out;
  for (std::size_t i = 0; i < times; ++i) out.insert(out.end(), pattern.begin(), pattern.end());
  return out;
}

}  // namespace ecgsal::testsupport
