#include "synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unistd.h>

#include "ecgsal/record_io.hpp"
#include "ecgsal/rng.hpp"

namespace ecgsal::testsupport {

namespace {

constexpr double kFs = 360.0;
constexpr double kGain = 200.0;
constexpr int kAdcZero = 1024;
constexpr int kHalfWidth = 200;

struct Wave {
  double amp, mu, sigma;
};

struct Morphology {
  std::vector<Wave> lead0;
  std::vector<Wave> lead1;
  double rr_factor = 1.0;  // preceding RR relative to the record's base
};

Morphology morphology(char symbol) {
  switch (symbol) {
    case 'A':
      return {{{-0.12, -45, 8}, {-0.1, -8, 3}, {1.0, 0, 4}, {-0.2, 8, 3}, {0.3, 100, 22}},
              {{-0.08, -45, 8}, {0.6, 0, 4}, {-0.1, 8, 3}, {0.2, 100, 22}},
              0.65};
    case 'V':
      return {{{1.4, 0, 14}, {-0.6, 25, 12}, {-0.5, 110, 25}}, {{-1.0, 0, 14}, {0.3, 30, 12}, {0.4, 110, 25}}, 0.7};
    case 'E':
      return {{{0.9, 0, 12}, {-0.3, 100, 25}}, {{-0.5, 0, 12}, {0.2, 100, 25}}, 1.6};
    case 'j':
      return {{{-0.1, -8, 3}, {1.0, 0, 4}, {-0.2, 8, 3}, {0.25, 100, 22}},
              {{0.6, 0, 4}, {-0.1, 8, 3}, {0.15, 100, 22}},
              1.4};
    case 'L':
      return {{{0.15, -70, 10}, {0.9, -6, 9}, {0.8, 8, 9}, {-0.3, 110, 25}},
              {{0.1, -70, 10}, {-0.8, 0, 14}, {0.3, 110, 25}},
              1.0};
    case 'R':
      return {{{0.15, -65, 10}, {0.8, -4, 4}, {-0.3, 6, 4}, {0.6, 14, 5}, {0.2, 100, 22}},
              {{0.1, -65, 10}, {0.4, 0, 4}, {-0.6, 12, 8}, {0.15, 100, 22}},
              1.0};
    case '/':
      return {{{1.5, -20, 1.2}, {1.0, 0, 12}, {-0.5, 20, 10}, {-0.3, 110, 25}},
              {{1.2, -20, 1.2}, {-0.7, 0, 12}, {0.2, 110, 25}},
              1.0};
    case 'F':
      return {{{0.07, -65, 10}, {1.2, 0, 9}, {-0.4, 16, 8}, {-0.1, 105, 24}},
              {{-0.2, 0, 9}, {0.1, 20, 8}, {0.2, 105, 24}},
              0.85};
    default:
      return {{{0.15, -65, 10}, {-0.1, -8, 3}, {1.0, 0, 4}, {-0.2, 8, 3}, {0.3, 100, 22}},
              {{0.1, -65, 10}, {0.6, 0, 4}, {-0.1, 8, 3}, {0.2, 100, 22}},
              1.0};
  }
}

void add_waves(std::vector<double>& signal, std::size_t r, const std::vector<Wave>& waves, double amp, double width) {
  const std::int64_t lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(r) - kHalfWidth);
  const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(signal.size()), static_cast<std::int64_t>(r) + kHalfWidth);
  for (std::int64_t i = lo; i < hi; ++i) {
    const double t = static_cast<double>(i - static_cast<std::int64_t>(r));
    double v = 0.0;
    for (const auto& w : waves) {
      const double z = (t - w.mu * width) / (w.sigma * width);
      v += w.amp * std::exp(-0.5 * z * z);
    }
    signal[static_cast<std::size_t>(i)] += amp * v;
  }
}

using Mix = std::vector<std::pair<char, double>>;

const std::map<std::string, Mix>& record_mixes() {
  static const std::map<std::string, Mix> mixes = {
      {"102", {{'/', 0.6}, {'N', 0.35}, {'V', 0.05}}},
      {"104", {{'/', 0.6}, {'N', 0.35}, {'V', 0.05}}},
      {"107", {{'/', 0.95}, {'V', 0.05}}},
      {"217", {{'/', 0.6}, {'N', 0.2}, {'V', 0.2}}},
      {"109", {{'L', 0.9}, {'V', 0.1}}},
      {"111", {{'L', 0.97}, {'V', 0.03}}},
      {"207", {{'L', 0.4}, {'R', 0.3}, {'E', 0.15}, {'A', 0.1}, {'V', 0.05}}},
      {"214", {{'L', 0.85}, {'V', 0.15}}},
      {"118", {{'R', 0.9}, {'A', 0.08}, {'V', 0.02}}},
      {"124", {{'R', 0.75}, {'j', 0.15}, {'V', 0.05}, {'A', 0.05}}},
      {"212", {{'R', 0.5}, {'N', 0.5}}},
      {"231", {{'R', 0.6}, {'N', 0.4}}},
      {"209", {{'N', 0.8}, {'A', 0.2}}},
      {"220", {{'N', 0.85}, {'A', 0.15}}},
      {"222", {{'N', 0.6}, {'A', 0.2}, {'j', 0.2}}},
      {"232", {{'A', 0.75}, {'N', 0.25}}},
      {"234", {{'N', 0.9}, {'j', 0.05}, {'V', 0.05}}},
      {"119", {{'N', 0.7}, {'V', 0.3}}},
      {"200", {{'N', 0.7}, {'V', 0.3}}},
      {"203", {{'N', 0.8}, {'V', 0.2}}},
      {"208", {{'N', 0.6}, {'V', 0.4}}},
      {"210", {{'N', 0.85}, {'V', 0.1}, {'E', 0.05}}},
      {"213", {{'N', 0.8}, {'V', 0.15}, {'A', 0.05}}},
      {"221", {{'N', 0.8}, {'V', 0.2}}},
      {"223", {{'N', 0.8}, {'V', 0.15}, {'A', 0.05}}},
      {"233", {{'N', 0.75}, {'V', 0.25}}},
      {"113", {{'N', 0.95}, {'A', 0.05}}},
  };
  return mixes;
}

}  // namespace

const std::vector<std::string>& mitbih_record_ids() {
  static const std::vector<std::string> ids = {
      "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112",
      "113", "114", "115", "116", "117", "118", "119", "121", "122", "123", "124", "200",
      "201", "202", "203", "205", "207", "208", "209", "210", "212", "213", "214", "215",
      "217", "219", "220", "221", "222", "223", "228", "230", "231", "232", "233", "234",
  };
  return ids;
}

std::vector<char> corpus_symbols(const std::string& id, std::size_t beats, std::uint64_t seed) {
  Mix mix = {{'N', 0.9}, {'A', 0.03}, {'V', 0.07}};
  if (const auto it = record_mixes().find(id); it != record_mixes().end()) mix = it->second;

  std::vector<char> out;
  std::size_t dominant = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (mix[i].second > mix[dominant].second) dominant = i;
  }
  std::vector<std::size_t> counts(mix.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    counts[i] = std::max<std::size_t>(1, static_cast<std::size_t>(mix[i].second * static_cast<double>(beats)));
    assigned += counts[i];
  }
  if (assigned > beats) {
    const std::size_t excess = assigned - beats;
    if (counts[dominant] <= excess) throw std::invalid_argument("too few beats for the record mix");
    counts[dominant] -= excess;
  } else {
    counts[dominant] += beats - assigned;
  }
  for (std::size_t i = 0; i < mix.size(); ++i) out.insert(out.end(), counts[i], mix[i].first);

  Rng rng(seed);
  rng.shuffle(out);
  if (out.size() > 2) out[1 + rng.uniform_index(out.size() - 1)] = 'F';
  return out;
}

void write_record(const std::filesystem::path& dir, const std::string& id, const std::vector<char>& symbols,
                  std::uint64_t seed) {
  Rng rng(seed);
  const double base_rr = rng.uniform(250.0, 330.0);
  const double amp = rng.uniform(0.8, 1.2);
  const double width = rng.uniform(0.9, 1.1);
  const double wander_amp = rng.uniform(0.02, 0.08);
  const double wander_period = rng.uniform(900.0, 1600.0);

  std::vector<std::size_t> peaks;
  double pos = base_rr * 0.6;
  for (char s : symbols) {
    pos += base_rr * morphology(s).rr_factor * rng.uniform(0.95, 1.05);
    peaks.push_back(static_cast<std::size_t>(pos));
  }
  const std::size_t n = peaks.empty() ? 1000 : peaks.back() + static_cast<std::size_t>(base_rr);

  std::array<std::vector<double>, 2> signal{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t b = 0; b < symbols.size(); ++b) {
    const auto m = morphology(symbols[b]);
    add_waves(signal[0], peaks[b], m.lead0, amp, width);
    add_waves(signal[1], peaks[b], m.lead1, amp, width);
  }
  std::array<std::vector<std::int32_t>, 2> adc;
  for (int l = 0; l < 2; ++l) {
    adc[l].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double wander = wander_amp * std::sin(2.0 * M_PI * static_cast<double>(i) / wander_period + l);
      const double mv = signal[l][i] + wander + 0.02 * rng.normal();
      const auto v = static_cast<std::int32_t>(std::lround(mv * kGain)) + kAdcZero;
      adc[l][i] = std::clamp<std::int32_t>(v, -2048, 2047);
    }
  }

  std::filesystem::create_directories(dir);
  {
    std::ofstream hea(dir / (id + ".hea"));
    hea << id << " 2 " << kFs << ' ' << n << '\n';
    hea << id << ".dat 212 " << kGain << " 11 " << kAdcZero << ' ' << adc[0][0] << " 0 0 MLII\n";
    hea << id << ".dat 212 " << kGain << " 11 " << kAdcZero << ' ' << adc[1][0] << " 0 0 V5\n";
    hea << "# synthetic record\n";
  }
  const auto dat = record_io::encode_format212(adc[0], adc[1]);
  std::ofstream(dir / (id + ".dat"), std::ios::binary)
      .write(reinterpret_cast<const char*>(dat.data()), static_cast<std::streamsize>(dat.size()));

  std::vector<record_io::Annotation> ann;
  record_io::Annotation rhythm;
  rhythm.sample_index = 0;
  rhythm.code = *record_io::symbol_to_code('+');
  rhythm.symbol = '+';
  rhythm.aux = "(N";
  ann.push_back(rhythm);
  for (std::size_t b = 0; b < symbols.size(); ++b) {
    record_io::Annotation a;
    a.sample_index = peaks[b];
    a.code = *record_io::symbol_to_code(symbols[b]);
    a.symbol = symbols[b];
    ann.push_back(a);
  }
  const auto atr = record_io::encode_annotations(ann);
  std::ofstream(dir / (id + ".atr"), std::ios::binary)
      .write(reinterpret_cast<const char*>(atr.data()), static_cast<std::streamsize>(atr.size()));
}

void write_corpus(const std::filesystem::path& dir, std::size_t beats_per_record, std::uint64_t seed) {
  for (const auto& id : mitbih_record_ids()) {
    const std::uint64_t s = derive_seed(seed, "synth/" + id);
    write_record(dir, id, corpus_symbols(id, beats_per_record, s), s);
  }
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ecgsal_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ecgsal::testsupport
