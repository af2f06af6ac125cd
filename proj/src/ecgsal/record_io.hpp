#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecgsal/beat_class.hpp"

namespace ecgsal::record_io {

inline constexpr int kFormat212 = 212;
inline constexpr int kLeads = 2;
inline constexpr double kMitBihFs = 360.0;

struct LeadInfo {
  std::string file_name;
  int format = kFormat212;
  double gain = 200.0;  // adc units per mV
  int baseline = 0;     // adc units
  int adc_resolution = 12;
  int adc_zero = 0;
  std::string lead_name;
};

struct RecordHeader {
  std::string record_id;
  int n_leads = 0;
  double fs = 0.0;
  std::size_t n_samples = 0;
  std::vector<LeadInfo> leads;
};

struct Annotation {
  std::size_t sample_index = 0;
  char symbol = ' ';
  bool is_beat = false;
  int code = 0;
  std::string aux;
};

struct EcgRecord {
  RecordHeader header;
  std::array<std::vector<double>, kLeads> signal;  // mV
  std::vector<Annotation> annotations;
};

using Samples212 = std::array<std::vector<std::int32_t>, kLeads>;

// Parses the text of a .hea file. Only single-segment, single-frequency,
// two-signal format-212 records are accepted.
RecordHeader parse_header(std::string_view text);

// Deinterleaves packed 12-bit sample pairs (lead 0, lead 1).
Samples212 decode_format212(std::span<const std::uint8_t> bytes, std::size_t n_samples_per_lead);

// Inverse of decode_format212; used by tests and fixture generation.
std::vector<std::uint8_t> encode_format212(std::span<const std::int32_t> lead0, std::span<const std::int32_t> lead1);

std::vector<double> to_physical(std::span<const std::int32_t> adc, double gain, double baseline);

// MIT annotation code table (ecgcodes).
char code_to_symbol(int code) noexcept;
std::optional<int> symbol_to_code(char symbol) noexcept;
bool is_beat_code(int code) noexcept;

std::vector<Annotation> read_annotations(std::span<const std::uint8_t> bytes);

// Writes a terminated MIT annotation stream. Deltas outside [0, 1023] use
// SKIP words; non-empty aux strings follow their annotation as AUX.
std::vector<std::uint8_t> encode_annotations(std::span<const Annotation> annotations);

// nullopt means Excluded (S, J and every other beat symbol outside the
// eight kept classes). Throws NonBeatSymbol for non-beat codes.
std::optional<BeatClass> map_symbol(char symbol);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// Loads <dir>/<id>.hea, the .dat it names, and <dir>/<id>.atr.
EcgRecord load_record(const std::filesystem::path& dir, const std::string& record_id);

// Record ids of every .hea file in dir, sorted.
std::vector<std::string> list_records(const std::filesystem::path& dir);

nlohmann::json record_to_json(const EcgRecord& record);

}  // namespace ecgsal::record_io
