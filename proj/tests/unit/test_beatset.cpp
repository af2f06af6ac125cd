#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "ecgsal/archive.hpp"
#include "ecgsal/beatset.hpp"
#include "ecgsal/error.hpp"
#include "ecgsal/record_io.hpp"
#include "synth.hpp"

using namespace ecgsal;
using namespace ecgsal::beatset;

namespace {

record_io::EcgRecord record_with_peaks(std::vector<std::size_t> peaks, std::size_t n, char symbol = 'N') {
  record_io::EcgRecord rec;
  rec.header.record_id = "100";
  rec.header.n_leads = 2;
  rec.header.fs = 360;
  rec.header.n_samples = n;
  for (auto& s : rec.signal) {
    s.resize(n);
    std::iota(s.begin(), s.end(), 0.0);
  }
  for (auto p : peaks) {
    record_io::Annotation a;
    a.sample_index = p;
    a.symbol = symbol;
    a.code = *record_io::symbol_to_code(symbol);
    a.is_beat = true;
    rec.annotations.push_back(a);
  }
  return rec;
}

Beat beat_of(std::size_t length, std::size_t r_offset) {
  Beat b;
  b.r_offset = r_offset;
  for (auto& l : b.leads) {
    l.resize(length);
    std::iota(l.begin(), l.end(), 1.0);
  }
  return b;
}

BeatVector vec(const std::string& record, BeatClass label) {
  BeatVector v;
  v.record_id = record;
  v.label = label;
  return v;
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

TEST_CASE("segmentation halves the distance to neighbouring peaks") {
  auto ex = extract_beats(record_with_peaks({300, 700, 1100}, 1400));
  REQUIRE(ex.beats.size() == 3);
  CHECK(ex.beats[1].start == 500);
  CHECK(ex.beats[1].length() == 400);
  CHECK(ex.beats[1].r_offset == 200);
  CHECK(ex.beats[0].start == 0);
  CHECK(ex.beats[2].start + ex.beats[2].length() == 1400);

  ex = extract_beats(record_with_peaks({500}, 1000));
  REQUIRE(ex.beats.size() == 1);
  CHECK(ex.beats[0].start == 0);
  CHECK(ex.beats[0].length() == 1000);
  CHECK(ex.beats[0].r_offset == 500);

  ex = extract_beats(record_with_peaks({100, 200}, 300));
  REQUIRE(ex.beats.size() == 2);
  CHECK(ex.beats[0].length() == 150);
  CHECK(ex.beats[1].start == 150);
  CHECK(ex.beats[1].length() == 150);
  CHECK(ex.beats[0].r_offset == 100);
  CHECK(ex.beats[1].r_offset == 50);

  CHECK(code_of([] { extract_beats(record_with_peaks({}, 100)); }) == ErrorCode::NoBeatAnnotations);
}

TEST_CASE("excluded symbols still bound their neighbours") {
  auto rec = record_with_peaks({300, 700, 1100}, 1400);
  rec.annotations[1].symbol = 'S';
  rec.annotations[1].code = *record_io::symbol_to_code('S');
  const auto ex = extract_beats(rec);
  REQUIRE(ex.beats.size() == 2);
  CHECK(ex.excluded == 1);
  CHECK(ex.excluded_by_symbol.at('S') == 1);
  CHECK(ex.beats[0].length() == 500);
  CHECK(ex.beats[1].start == 900);
  CHECK(ex.beats[1].beat_index == 2);
}

TEST_CASE("overlong beats are dropped at 430 samples") {
  std::vector<Beat> beats = {beat_of(400, 0), beat_of(431, 0), beat_of(430, 0)};
  auto r = filter_overlong(beats);
  REQUIRE(r.kept.size() == 2);
  CHECK(r.kept[0].length() == 400);
  CHECK(r.kept[1].length() == 430);
  CHECK(r.removed == 1);

  r = filter_overlong({beat_of(10, 0), beat_of(430, 0)});
  CHECK(r.removed == 0);
  r = filter_overlong({});
  CHECK(r.kept.empty());
  CHECK(r.removed == 0);
}

TEST_CASE("min-max lead normalization") {
  auto n = normalize_lead(std::vector<double>{0, 2, 4});
  CHECK(n == std::vector<double>{0, 0.5, 1});
  n = normalize_lead(std::vector<double>{5, 5, 5});
  CHECK(n == std::vector<double>{0, 0, 0});
  n = normalize_lead(std::vector<double>{-1, 0, 3});
  CHECK(n[0] == doctest::Approx(0.0));
  CHECK(n[1] == doctest::Approx(0.25));
  CHECK(n[2] == doctest::Approx(1.0));
  CHECK(code_of([] { normalize_lead(std::vector<double>{}); }) == ErrorCode::EmptySegment);
}

TEST_CASE("vector assembly anchors the R-peak at 215 in each slot") {
  auto v = assemble_vector(beat_of(430, 215));
  CHECK(v.values.size() == 860);
  CHECK(v.values[0] == 0.0f);
  CHECK(v.values[429] == 1.0f);
  CHECK(v.values[430] == 0.0f);
  CHECK(v.values[859] == 1.0f);

  v = assemble_vector(beat_of(100, 40));
  for (std::size_t i = 0; i < 430; ++i) {
    const bool inside = i >= 175 && i < 275;
    CHECK((v.values[i] != 0.0f || i == 175) == inside);
    CHECK(v.values[430 + i] == v.values[i]);
  }
  CHECK(v.values[175] == 0.0f);
  CHECK(v.values[274] == 1.0f);
  CHECK(v.values[215] == doctest::Approx(40.0 / 99.0));

  v = assemble_vector(beat_of(430, 0));
  CHECK(v.values[214] == 0.0f);
  CHECK(v.values[215] == 0.0f);
  CHECK(v.values[216] == doctest::Approx(1.0 / 429.0));
  CHECK(v.values[429] == doctest::Approx(214.0 / 429.0));

  CHECK(code_of([] { assemble_vector(beat_of(431, 0)); }) == ErrorCode::BeatTooLong);
}

TEST_CASE("hold-out split proportions and determinism") {
  const auto s = split_holdout(1000, 42);
  CHECK(s.train.size() == 650);
  CHECK(s.val.size() == 100);
  CHECK(s.test.size() == 250);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1000);

  const auto a = split_holdout(8, 5);
  const auto b = split_holdout(8, 5);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(split_holdout(1000, 43).test != s.test);
  CHECK(code_of([] { split_holdout(7, 1); }) == ErrorCode::TooFewBeats);
}

TEST_CASE("leave-patients-out split") {
  std::vector<BeatVector> beats;
  for (const auto& id : testsupport::mitbih_record_ids()) {
    for (int k = 0; k < 10; ++k) beats.push_back(vec(id, BeatClass::Normal));
  }
  const auto s = split_leave_patients_out(beats, kDefaultTestRecords, 3);
  CHECK(s.test.size() == 50);
  for (auto i : s.test) {
    CHECK(std::find(kDefaultTestRecords.begin(), kDefaultTestRecords.end(), beats[i].record_id) !=
          kDefaultTestRecords.end());
  }
  CHECK(s.train.size() + s.val.size() == 430);
  CHECK(s.val.size() == 43);
  CHECK(verify_no_leak(s, beats).disjoint());

  const auto none = split_leave_patients_out(beats, {}, 3);
  CHECK(none.test.empty());
  CHECK(none.train.size() == 432);
  CHECK(none.val.size() == 48);

  CHECK(code_of([&] { split_leave_patients_out(beats, {"999"}, 3); }) == ErrorCode::UnknownRecordId);

  auto corrupted = s;
  const auto moved = corrupted.test.back();
  corrupted.test.pop_back();
  corrupted.train.push_back(moved);
  const auto leak = verify_no_leak(corrupted, beats);
  CHECK(leak.shared_record_ids == std::vector<std::string>{beats[moved].record_id});
}

TEST_CASE("hold-out split over many records shares patients") {
  std::vector<BeatVector> beats;
  for (const auto& id : testsupport::mitbih_record_ids()) {
    for (int k = 0; k < 20; ++k) beats.push_back(vec(id, BeatClass::Normal));
  }
  const auto s = split_holdout(beats.size(), 11);
  CHECK(verify_no_leak(s, beats).shared_record_ids.size() > 0);
}

TEST_CASE("rebalancing to the second-largest class") {
  std::vector<BeatClass> labels;
  labels.insert(labels.end(), 100, BeatClass::Normal);
  labels.insert(labels.end(), 40, BeatClass::PVC);
  labels.insert(labels.end(), 10, BeatClass::APB);
  std::vector<std::size_t> train(labels.size());
  std::iota(train.begin(), train.end(), std::size_t{0});

  const auto r = rebalance(train, labels, 9);
  CHECK(r.target == 40);
  CHECK(r.counts_after[index_of(BeatClass::Normal)] == 40);
  CHECK(r.counts_after[index_of(BeatClass::PVC)] == 40);
  CHECK(r.counts_after[index_of(BeatClass::APB)] == 40);
  CHECK(r.indices.size() == 120);
  CHECK(r.counts_before[index_of(BeatClass::Normal)] == 100);

  // Downsampling draws distinct Normal beats; APB beats are each used exactly 4 times.
  std::map<std::size_t, int> uses;
  for (auto i : r.indices) ++uses[i];
  for (const auto& [i, n] : uses) {
    if (labels[i] == BeatClass::Normal || labels[i] == BeatClass::PVC) CHECK(n == 1);
    if (labels[i] == BeatClass::APB) CHECK(n == 4);
  }
  CHECK(r.skipped.size() == 5);
  CHECK(rebalance(train, labels, 9).indices == r.indices);
}

TEST_CASE("rebalancing leaves equal classes alone") {
  std::vector<BeatClass> labels;
  labels.insert(labels.end(), 50, BeatClass::Normal);
  labels.insert(labels.end(), 50, BeatClass::PVC);
  std::vector<std::size_t> train(labels.size());
  std::iota(train.begin(), train.end(), std::size_t{0});
  auto r = rebalance(train, labels, 1);
  std::sort(r.indices.begin(), r.indices.end());
  CHECK(r.indices == train);
  CHECK(r.target == 50);
}

TEST_CASE("uneven upsampling uses whole copies plus a distinct remainder") {
  std::vector<BeatClass> labels;
  labels.insert(labels.end(), 100, BeatClass::Normal);
  labels.insert(labels.end(), 25, BeatClass::PVC);
  labels.insert(labels.end(), 7, BeatClass::RBBB);
  std::vector<std::size_t> train(labels.size());
  std::iota(train.begin(), train.end(), std::size_t{0});
  const auto r = rebalance(train, labels, 4);
  std::map<std::size_t, int> uses;
  for (auto i : r.indices) ++uses[i];
  int threes = 0, fours = 0;
  for (const auto& [i, n] : uses) {
    if (labels[i] != BeatClass::RBBB) continue;
    CHECK((n == 3 || n == 4));
    (n == 3 ? threes : fours)++;
  }
  // 25 = 3 * 7 + 4
  CHECK(threes == 3);
  CHECK(fours == 4);
}

TEST_CASE("beat archive round trip") {
  std::vector<BeatVector> beats = {vec("100", BeatClass::Normal), vec("232", BeatClass::APB)};
  beats[1].beat_index = 77;
  beats[1].values[5] = 0.25f;
  const auto bytes = archive::encode_beats(beats);
  const auto back = archive::decode_beats(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[1].record_id == "232");
  CHECK(back[1].label == BeatClass::APB);
  CHECK(back[1].beat_index == 77);
  CHECK(back[1].values == beats[1].values);

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(archive::decode_beats(cut), Error);
}

TEST_CASE("appending a synthetic record accounts for every beat") {
  const auto dir = testsupport::temp_dir("beatset");
  const auto symbols = testsupport::corpus_symbols("207", 60, 5);
  testsupport::write_record(dir, "207", symbols, 5);
  BeatSet set;
  append_record(set, record_io::load_record(dir, "207"));
  const auto& st = set.stats;
  CHECK(st.excluded_symbol == 1);
  CHECK(st.excluded_by_symbol.at('F') == 1);
  std::size_t before = 0, after = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    before += st.before_filter[c];
    after += st.after_filter[c];
  }
  CHECK(before + st.excluded_symbol == symbols.size());
  CHECK(after + st.overlong_removed == before);
  CHECK(set.vectors.size() == after);
  CHECK(st.total() == after);
  CHECK(st.records == 1);
  std::filesystem::remove_all(dir);
}
