#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <vector>

#include "ecgsal/error.hpp"
#include "ecgsal/record_io.hpp"
#include "ecgsal/rng.hpp"
#include "synth.hpp"

using namespace ecgsal;
using namespace ecgsal::record_io;

namespace {

// Reference decoder written directly from the byte layout: byte 1 carries the
// high nibble of sample 0 in its low 4 bits and of sample 1 in its high 4 bits.
std::pair<int, int> oracle_212(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2) {
  int s0 = b0 + 256 * (b1 % 16);
  int s1 = b2 + 256 * (b1 / 16);
  if (s0 >= 2048) s0 -= 4096;
  if (s1 >= 2048) s1 -= 4096;
  return {s0, s1};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("header with two format-212 leads") {
  const auto h = parse_header(
      "100 2 360 650000\n"
      "100.dat 212 200 11 1024 995 -22131 0 MLII\n"
      "100.dat 212 200 11 1024 1011 20052 0 V5\n"
      "# 69 M 1085 1629 x1\n");
  CHECK(h.record_id == "100");
  CHECK(h.n_leads == 2);
  CHECK(h.fs == 360.0);
  CHECK(h.n_samples == 650000);
  REQUIRE(h.leads.size() == 2);
  CHECK(h.leads[0].gain == 200.0);
  CHECK(h.leads[1].gain == 200.0);
  CHECK(h.leads[0].baseline == 1024);
  CHECK(h.leads[0].lead_name == "MLII");
  CHECK(h.leads[1].lead_name == "V5");
}

TEST_CASE("header errors") {
  CHECK(code_of([] { parse_header("100 1 360 650000\n100.dat 212 200 11 1024 0 0 0 MLII\n"); }) ==
        ErrorCode::LeadCountMismatch);
  CHECK(code_of([] {
          parse_header("100 2 360 650000\n100.dat 16 200 11 1024 0 0 0 MLII\n100.dat 16 200 11 1024 0 0 0 V5\n");
        }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_header(""); }) == ErrorCode::MalformedHeader);
  CHECK(code_of([] { parse_header("100 two 360 10\n"); }) == ErrorCode::MalformedHeader);
  CHECK(code_of([] { parse_header("100 2 360 10\n100.dat 212 200 11 1024 0 0 0 MLII\n"); }) ==
        ErrorCode::MalformedHeader);
}

TEST_CASE("format 212 decoding") {
  auto s = decode_format212(std::vector<std::uint8_t>{0xE8, 0x03, 0x74}, 1);
  CHECK(s[0][0] == 1000);
  CHECK(s[1][0] == 116);

  s = decode_format212(std::vector<std::uint8_t>{0xFF, 0x0F, 0x00}, 1);
  CHECK(s[0][0] == -1);
  CHECK(s[1][0] == 0);

  s = decode_format212(std::vector<std::uint8_t>{0x00, 0x00, 0x00}, 1);
  CHECK(s[0][0] == 0);
  CHECK(s[1][0] == 0);

  CHECK(code_of([] { decode_format212(std::vector<std::uint8_t>{1, 2, 3, 4, 5}, 2); }) == ErrorCode::TruncatedSignal);
}

TEST_CASE("format 212 agrees with the reference decoder on random bytes") {
  Rng rng(212);
  std::vector<std::uint8_t> bytes(3 * 4096);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_index(256));
  const auto s = decode_format212(bytes, 4096);
  for (std::size_t i = 0; i < 4096; ++i) {
    const auto [a, b] = oracle_212(bytes[3 * i], bytes[3 * i + 1], bytes[3 * i + 2]);
    REQUIRE(s[0][i] == a);
    REQUIRE(s[1][i] == b);
  }
  CHECK(encode_format212(s[0], s[1]) == bytes);
}

TEST_CASE("physical units") {
  const std::vector<std::int32_t> adc = {1024, 1224, 924};
  const auto mv = to_physical(adc, 200.0, 1024.0);
  CHECK(mv[0] == doctest::Approx(0.0));
  CHECK(mv[1] == doctest::Approx(1.0));
  CHECK(mv[2] == doctest::Approx(-0.5));
  CHECK(code_of([&] { to_physical(adc, 0.0, 1024.0); }) == ErrorCode::ZeroGain);
}

TEST_CASE("annotation stream decoding") {
  // (code 1 << 10) | 370 = 0x0572, little-endian, then the zero terminator.
  const auto one = read_annotations(std::vector<std::uint8_t>{0x72, 0x05, 0x00, 0x00});
  REQUIRE(one.size() == 1);
  CHECK(one[0].sample_index == 370);
  CHECK(one[0].symbol == 'N');
  CHECK(one[0].is_beat);

  CHECK(read_annotations(std::vector<std::uint8_t>{0x00, 0x00}).empty());

  // Rhythm change '+' (code 28) at 10 with aux "(N", then N at 15.
  const auto two = read_annotations(
      std::vector<std::uint8_t>{0x0A, 0x70, 0x02, 0xFC, '(', 'N', 0x05, 0x04, 0x00, 0x00});
  REQUIRE(two.size() == 2);
  CHECK_FALSE(two[0].is_beat);
  CHECK(two[0].symbol == '+');
  CHECK(two[0].aux == "(N");
  CHECK(two[1].is_beat);
  CHECK(two[1].sample_index == 15);

  CHECK(code_of([] { read_annotations(std::vector<std::uint8_t>{0x72, 0x05}); }) ==
        ErrorCode::MalformedAnnotationStream);
  CHECK(code_of([] { read_annotations(std::vector<std::uint8_t>{}); }) == ErrorCode::MalformedAnnotationStream);
}

TEST_CASE("SKIP words carry long intervals") {
  std::vector<Annotation> ann(2);
  ann[0].sample_index = 5;
  ann[0].code = 1;
  ann[1].sample_index = 5 + 100000;
  ann[1].code = 5;
  const auto back = read_annotations(encode_annotations(ann));
  REQUIRE(back.size() == 2);
  CHECK(back[1].sample_index == 100005);
  CHECK(back[1].symbol == 'V');
}

TEST_CASE("beat symbol mapping") {
  CHECK(map_symbol('/') == BeatClass::Paced);
  CHECK(map_symbol('N') == BeatClass::Normal);
  CHECK(map_symbol('A') == BeatClass::APB);
  CHECK(map_symbol('V') == BeatClass::PVC);
  CHECK(map_symbol('L') == BeatClass::LBBB);
  CHECK(map_symbol('R') == BeatClass::RBBB);
  CHECK(map_symbol('E') == BeatClass::VentricularEscape);
  CHECK(map_symbol('j') == BeatClass::JunctionalEscape);
  CHECK_FALSE(map_symbol('S').has_value());
  CHECK_FALSE(map_symbol('J').has_value());
  CHECK_FALSE(map_symbol('F').has_value());
  CHECK(code_of([] { map_symbol('+'); }) == ErrorCode::NonBeatSymbol);
}

TEST_CASE("record loading from disk") {
  const auto dir = testsupport::temp_dir("record_io");
  const std::vector<char> symbols = {'N', 'N', 'V', 'N', 'A', 'N'};
  testsupport::write_record(dir, "101", symbols, 7);

  const auto rec = load_record(dir, "101");
  CHECK(rec.header.record_id == "101");
  CHECK(rec.header.fs == 360.0);
  CHECK(rec.signal[0].size() == rec.header.n_samples);
  CHECK(rec.signal[1].size() == rec.header.n_samples);
  REQUIRE(rec.annotations.size() == symbols.size() + 1);
  CHECK_FALSE(rec.annotations[0].is_beat);
  for (std::size_t i = 0; i < symbols.size(); ++i) CHECK(rec.annotations[i + 1].symbol == symbols[i]);

  CHECK(list_records(dir) == std::vector<std::string>{"101"});
  CHECK(code_of([&] { load_record(dir, "999"); }) == ErrorCode::Io);

  const auto j = record_to_json(rec);
  CHECK(j["record_id"] == "101");
  CHECK(j["n_samples"] == rec.header.n_samples);

  // A .dat cut short is reported, not read past.
  std::filesystem::resize_file(dir / "101.dat", 30);
  CHECK(code_of([&] { load_record(dir, "101"); }) == ErrorCode::TruncatedSignal);
  std::filesystem::remove_all(dir);
}
