#include "ecgsal/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ecgsal/error.hpp"
#include "ecgsal/record_io.hpp"

namespace ecgsal::archive {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) fail(error_, "unexpected end of data");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> encode_beats(std::span<const beatset::BeatVector> beats) {
  ByteWriter w;
  w.str(kBeatMagic);
  w.u64(beats.size());
  for (const auto& b : beats) {
    if (b.record_id.size() > 0xFFFF) fail(ErrorCode::InvalidArgument, "record id too long");
    w.u8(static_cast<std::uint8_t>(b.label));
    w.u16(static_cast<std::uint16_t>(b.record_id.size()));
    w.str(b.record_id);
    w.u32(static_cast<std::uint32_t>(b.beat_index));
    for (float v : b.values) w.f32(v);
  }
  return std::move(w.data());
}

std::vector<beatset::BeatVector> decode_beats(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::Io);
  if (r.str(kBeatMagic.size()) != kBeatMagic) fail(ErrorCode::Io, "not an ECGBEATS/1 archive");
  const std::uint64_t count = r.u64();
  std::vector<beatset::BeatVector> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, bytes.size() / (beatset::kVectorLength * 4))));
  for (std::uint64_t i = 0; i < count; ++i) {
    beatset::BeatVector b;
    const std::uint8_t label = r.u8();
    if (label >= kNumClasses) fail(ErrorCode::Io, "invalid class label in archive");
    b.label = static_cast<BeatClass>(label);
    b.record_id = r.str(r.u16());
    b.beat_index = r.u32();
    for (auto& v : b.values) v = r.f32();
    out.push_back(std::move(b));
  }
  if (r.remaining() != 0) fail(ErrorCode::Io, "trailing bytes in beat archive");
  return out;
}

void write_beats(const std::filesystem::path& path, std::span<const beatset::BeatVector> beats) {
  const auto bytes = encode_beats(beats);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<beatset::BeatVector> read_beats(const std::filesystem::path& path) {
  return decode_beats(record_io::read_file_bytes(path));
}

}  // namespace ecgsal::archive
