#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgsal/beatset.hpp"
#include "ecgsal/error.hpp"

namespace ecgsal::archive {

// Binary beat-set archive, all integers little-endian:
//   "ECGBEATS/1\n"                      11-byte magic
//   u64 count
//   count x { u8 label, u16 id_len, id bytes, u32 beat_index, 860 x f32 values }
inline constexpr std::string_view kBeatMagic = "ECGBEATS/1\n";

std::vector<std::uint8_t> encode_beats(std::span<const beatset::BeatVector> beats);
std::vector<beatset::BeatVector> decode_beats(std::span<const std::uint8_t> bytes);

void write_beats(const std::filesystem::path& path, std::span<const beatset::BeatVector> beats);
std::vector<beatset::BeatVector> read_beats(const std::filesystem::path& path);

// Little-endian byte helpers shared with the checkpoint format.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str(std::string_view s);  // raw, no length prefix
  std::vector<std::uint8_t>& data() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, ErrorCode on_truncation)
      : bytes_(bytes), error_(on_truncation) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str(std::size_t n);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorCode error_;
};

}  // namespace ecgsal::archive
