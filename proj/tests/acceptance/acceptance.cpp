// Acceptance checks, one per criterion. Each run prints a single line:
//   criterion <id>: PASS|FAIL|SKIP <details>
// and exits 0 (pass), 1 (fail) or 77 (skipped: needs the MIT-BIH records).
//
// Environment:
//   ECGSAL_MITDB_DIR            directory holding the 48 MIT-BIH records
//   ECGSAL_ACCEPTANCE_WORKDIR   where full-size runs keep their outputs
//                               between criteria (default ./acceptance_work)
//   ECGSAL_ACCEPTANCE_CONFIG    optional key=value file applied to the
//                               full-size runs (e.g. threads = 8)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgsal/beatset.hpp"
#include "ecgsal/error.hpp"
#include "ecgsal/losses.hpp"
#include "ecgsal/model.hpp"
#include "ecgsal/network.hpp"
#include "ecgsal/pipeline.hpp"
#include "ecgsal/record_io.hpp"
#include "ecgsal/rng.hpp"
#include "ecgsal/saliency.hpp"
#include "ecgsal/train.hpp"
#include "synth.hpp"

using namespace ecgsal;
namespace fs = std::filesystem;
using pipeline::KeyValues;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kSkip = 77;

struct Outcome {
  int status = kFail;
  std::string details;
};

Outcome fail_with(std::string d) { return {kFail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? kPass : kFail, std::move(d)}; }

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

std::string fixed4(double v) {
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

// ---------------------------------------------------------------------------
// Synthetic corpus runs (criteria 6, 7a, 9)

const fs::path& synthetic_corpus() {
  static const testsupport::ScopedDir dir("acceptance_corpus");
  static const bool written = (testsupport::write_corpus(dir.path(), 60, 2024), true);
  (void)written;
  return dir.path();
}

KeyValues small_run(const fs::path& out) {
  return {{"data_dir", synthetic_corpus().string()},
          {"output_dir", out.string()},
          {"seed", "3"},
          {"epochs", "2"},
          {"batch_size", "32"},
          {"n_residual_blocks", "2"},
          {"initial_filters", "4"},
          {"cnn_filters", "6,8"},
          {"cnn_kernel_size", "5"},
          {"cnn_downsample", "4,4"},
          {"lstm_units", "8"},
          {"lstm_fc_sizes", "8,8"},
          {"timestep_width", "20"},
          {"explain_max_beats_per_class", "20"},
          {"threads", "1"}};
}

void full_run(const KeyValues& kv) {
  const auto c = pipeline::resolve_config(kv);
  pipeline::cmd_ingest(c);
  pipeline::cmd_split(c);
  pipeline::cmd_train(c);
  pipeline::cmd_eval(c);
  pipeline::cmd_explain(c);
  pipeline::cmd_report(c);
}

// ---------------------------------------------------------------------------
// Full-size runs on the real records (criteria 1, 4, 5, 7b, 8)

struct RealData {
  fs::path data_dir;
  fs::path work_dir;
};

std::optional<RealData> real_data() {
  const char* d = env("ECGSAL_MITDB_DIR");
  if (!d) return std::nullopt;
  const char* w = env("ECGSAL_ACCEPTANCE_WORKDIR");
  return RealData{d, w ? fs::path(w) : fs::current_path() / "acceptance_work"};
}

KeyValues real_entries(const RealData& r) {
  KeyValues kv;
  if (const char* file = env("ECGSAL_ACCEPTANCE_CONFIG")) {
    const auto bytes = record_io::read_file_bytes(file);
    kv = models::parse_key_values(std::string(bytes.begin(), bytes.end()));
  }
  kv["data_dir"] = r.data_dir.string();
  kv["output_dir"] = r.work_dir.string();
  return kv;
}

pipeline::PipelineConfig real_config(const RealData& r, const std::string& model, const std::string& protocol) {
  auto kv = real_entries(r);
  kv["model"] = model;
  kv["protocol"] = protocol;
  return pipeline::resolve_config(kv);
}

bool has_manifest(const fs::path& dir) { return fs::exists(dir / "manifest.json"); }

// Runs whatever stages are missing for (model, protocol); finished stages are reused.
pipeline::PipelineConfig ensure_run(const RealData& r, const std::string& model, const std::string& protocol,
                                    bool explain) {
  const auto c = real_config(r, model, protocol);
  const auto log = [&](const std::string& line) { std::cerr << "  [" << model << "-" << protocol << "] " << line << "\n"; };
  if (!has_manifest(pipeline::ingest_dir(c))) pipeline::cmd_ingest(c, log);
  if (!has_manifest(pipeline::split_dir(c))) pipeline::cmd_split(c, log);
  if (!has_manifest(pipeline::train_dir(c))) pipeline::cmd_train(c, log);
  if (!has_manifest(pipeline::eval_dir(c))) pipeline::cmd_eval(c, log);
  if (explain && !has_manifest(pipeline::explain_dir(c))) pipeline::cmd_explain(c, log);
  return c;
}

nlohmann::json metrics_of(const pipeline::PipelineConfig& c) {
  return pipeline::read_json(pipeline::eval_dir(c) / "metrics.json");
}

double train_seconds(const pipeline::PipelineConfig& c) {
  return pipeline::read_json(pipeline::train_dir(c) / "manifest.json")["timings"]["train_seconds"].get<double>();
}

Outcome skipped() { return {kSkip, "ECGSAL_MITDB_DIR is not set; the MIT-BIH records are required"}; }

// ---------------------------------------------------------------------------
// Criteria

Outcome criterion_1() {
  const auto r = real_data();
  if (!r) return skipped();
  const auto out = testsupport::temp_dir("acceptance_ingest");
  auto kv = real_entries(*r);
  kv["output_dir"] = out.string();
  const auto c = pipeline::resolve_config(kv);
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::cmd_ingest(c);
  const double secs = seconds_since(t0);
  const auto stats = pipeline::read_json(pipeline::ingest_dir(c) / "stats.json");
  fs::remove_all(out);

  const auto& counts = stats["after_filter"];
  std::size_t present = 0, total = 0, normal = counts["Normal"].get<std::size_t>();
  bool normal_largest = true;
  for (const auto& [key, n] : counts.items()) {
    const auto v = n.get<std::size_t>();
    present += v > 0;
    total += v;
    if (key != "Normal" && v >= normal) normal_largest = false;
  }
  const double rel = std::abs(static_cast<double>(total) - 107209.0) / 107209.0;
  const bool ok = present == 8 && rel <= 0.005 && normal_largest && secs < 120.0;
  return verdict(ok, "classes " + std::to_string(present) + "/8, total " + std::to_string(total) + " (deviation " +
                         fixed4(100 * rel) + "%, limit 0.5%), Normal largest: " + (normal_largest ? "yes" : "no") +
                         ", runtime " + fixed4(secs) + " s (limit 120 s)");
}

Outcome criterion_2() {
  Rng rng(20240101);
  std::size_t failures_212 = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::int32_t a = static_cast<std::int32_t>(rng.uniform_index(4096)) - 2048;
    const std::int32_t b = static_cast<std::int32_t>(rng.uniform_index(4096)) - 2048;
    const std::int32_t l0[] = {a}, l1[] = {b};
    const auto bytes = record_io::encode_format212(l0, l1);
    const auto back = record_io::decode_format212(bytes, 1);
    if (bytes.size() != 3 || back[0][0] != a || back[1][0] != b) ++failures_212;
  }

  std::size_t failures_ann = 0;
  static const int codes[] = {1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 13, 14, 16, 28, 31, 32, 34, 37, 38};
  for (int s = 0; s < 10000; ++s) {
    std::vector<record_io::Annotation> stream(rng.uniform_index(40));
    std::size_t t = 0;
    for (auto& a : stream) {
      const double u = rng.uniform01();
      t += u < 0.05 ? 1024 + rng.uniform_index(2000000) : rng.uniform_index(1024);
      a.sample_index = t;
      a.code = codes[rng.uniform_index(std::size(codes))];
      a.symbol = record_io::code_to_symbol(a.code);
      a.is_beat = record_io::is_beat_code(a.code);
      if (rng.uniform01() < 0.1) {
        const std::size_t len = 1 + rng.uniform_index(20);
        for (std::size_t k = 0; k < len; ++k) a.aux.push_back(static_cast<char>(32 + rng.uniform_index(95)));
      }
    }
    const auto bytes = record_io::encode_annotations(stream);
    const auto back = record_io::read_annotations(bytes);
    bool same = back.size() == stream.size() && record_io::encode_annotations(back) == bytes;
    for (std::size_t i = 0; same && i < stream.size(); ++i) {
      same = back[i].sample_index == stream[i].sample_index && back[i].code == stream[i].code &&
             back[i].symbol == stream[i].symbol && back[i].is_beat == stream[i].is_beat && back[i].aux == stream[i].aux;
    }
    failures_ann += !same;
  }
  return verdict(failures_212 == 0 && failures_ann == 0,
                 "format 212: " + std::to_string(failures_212) + " failures in 100000 pairs; annotations: " +
                     std::to_string(failures_ann) + " failures in 10000 streams");
}

struct GradientCheck {
  double worst = 0.0;       // worst relative error over beats
  std::size_t checked = 0;  // coordinates compared
  std::size_t kinks = 0;    // coordinates skipped as non-differentiable
};

// Compares the analytic input gradient of the predicted class score with
// central differences on 16 coordinates per beat: the 8 largest |g| and 8
// random ones. The CNN score is piecewise linear: zero padding puts ReLU
// inputs exactly on 0, and any coordinate can have a ReLU switch within the
// step. Where the score is smooth on [x - h, x + h], the gap between the two
// one-sided slopes is 0 (linear piece) or shrinks in proportion to the step
// (curvature), checked at h, h/2 and h/4. Coordinates that break this have a
// kink in the window; they are counted and left out. The relative error per
// beat is |a - f| / max(|a|, |f|) over the remaining coordinates, with f the
// central difference at step h/4.
GradientCheck check_gradients(const models::Network& net, std::span<const beatset::BeatVector> beats, Rng& rng) {
  constexpr double h = 1e-5;
  constexpr int kTop = 8, kRandom = 8;
  GradientCheck out;
  for (const auto& beat : beats) {
    const beatset::BeatVector one[] = {beat};
    const models::Mat x = models::to_batch(one);
    Eigen::Index cls = 0;
    models::predict_proba(net, x).row(0).maxCoeff(&cls);
    const int classes[] = {static_cast<int>(cls)};
    const models::Mat g = saliency::class_score_gradients(net, x, classes);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(g.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::partial_sort(order.begin(), order.begin() + kTop, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return std::abs(g(a, 0)) > std::abs(g(b, 0)); });
    std::vector<Eigen::Index> coords(order.begin(), order.begin() + kTop);
    for (int k = 0; k < kRandom; ++k) coords.push_back(static_cast<Eigen::Index>(rng.uniform_index(order.size())));

    // Columns 6k..6k+5 hold x + h, x - h, x + h/2, x - h/2, x + h/4, x - h/4
    // on coordinate k; the last column is x.
    const auto n = static_cast<Eigen::Index>(coords.size());
    const double steps[] = {h, -h, h / 2, -h / 2, h / 4, -h / 4};
    models::Mat probe(x.rows(), 6 * n + 1);
    probe.colwise() = x.col(0);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (int j = 0; j < 6; ++j) probe(coords[static_cast<std::size_t>(k)], 6 * k + j) += steps[j];
    }
    nn::Tape tape = net.make_tape();
    const models::Mat logits = net.forward(probe, tape, nn::Context{});
    const double f0 = logits(cls, 6 * n);
    const double g_scale = g.cwiseAbs().maxCoeff();

    std::vector<double> analytic, numeric;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto f = [&](int j) { return logits(cls, 6 * k + j); };
      const auto gap = [&](int j) { return (f(j) - f0) / steps[j] + (f(j + 1) - f0) / steps[j]; };
      const double g1 = gap(0), g2 = gap(2), g4 = gap(4);
      const bool smooth = std::abs(g1) <= 1e-7 * g_scale ||
                          (std::abs(g2 - g1 / 2) <= 0.1 * std::abs(g1) && std::abs(g4 - g1 / 4) <= 0.1 * std::abs(g1));
      if (!smooth) {
        ++out.kinks;
        continue;
      }
      analytic.push_back(g(coords[static_cast<std::size_t>(k)], 0));
      numeric.push_back((f(4) - f(5)) / (h / 2));
    }
    out.checked += analytic.size();
    const Eigen::Map<const Eigen::VectorXd> a(analytic.data(), static_cast<Eigen::Index>(analytic.size()));
    const Eigen::Map<const Eigen::VectorXd> f(numeric.data(), static_cast<Eigen::Index>(numeric.size()));
    const double scale = std::max(a.norm(), f.norm());
    if (scale > 0) out.worst = std::max(out.worst, (a - f).norm() / scale);
  }
  return out;
}

Outcome criterion_3() {
  Rng rng(77);
  double focal_gap = 0.0;
  models::FocalLossConfig fl{0.0, std::vector<double>(8, 1.0)};
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> p(8);
    double sum = 0;
    for (auto& v : p) sum += v = rng.uniform01() + 1e-9;
    for (auto& v : p) v /= sum;
    const std::size_t t = rng.uniform_index(8);
    focal_gap = std::max(focal_gap, std::abs(models::focal_loss(p, t, fl) - models::cross_entropy(p, t)));
  }

  const auto ids = testsupport::mitbih_record_ids();
  std::vector<beatset::BeatVector> pool;
  {
    const auto dir = testsupport::temp_dir("acceptance_grad");
    for (std::size_t i = 0; i < ids.size(); i += 4) testsupport::write_record(dir, ids[i], testsupport::corpus_symbols(ids[i], 40, 9), 9);
    beatset::BeatSet set;
    for (const auto& id : record_io::list_records(dir)) beatset::append_record(set, record_io::load_record(dir, id));
    pool = set.vectors;
    fs::remove_all(dir);
  }
  std::vector<beatset::BeatVector> beats;
  for (int i = 0; i < 100; ++i) beats.push_back(pool[rng.uniform_index(pool.size())]);

  const auto cnn = models::build_cnn(models::CnnConfig{}, 101);
  const auto lstm = models::build_lstm(models::LstmConfig{}, 102);
  const auto c = check_gradients(*cnn, beats, rng);
  const auto l = check_gradients(*lstm, beats, rng);
  const auto describe = [](const char* name, const GradientCheck& r) {
    return std::string(name) + " worst " + sci(r.worst) + " over " + std::to_string(r.checked) + " coordinates (" +
           std::to_string(r.kinks) + " kinks skipped)";
  };
  // At least half of the 1600 coordinates per architecture must be usable.
  const bool enough = c.checked >= 800 && l.checked >= 800;
  const bool ok = focal_gap <= 1e-12 && c.worst < 1e-4 && l.worst < 1e-4 && enough;
  return verdict(ok, "focal(gamma=0) vs CE max gap " + sci(focal_gap) + " (limit 1e-12); input gradient vs FD on " +
                         "100 beats: " + describe("cnn", c) + ", " + describe("lstm", l) + " (limit 1e-4 relative)");
}

Outcome criterion_4() {
  const auto r = real_data();
  if (!r) return skipped();
  const auto cnn = ensure_run(*r, "cnn", "holdout", false);
  const auto lstm = ensure_run(*r, "lstm", "holdout", false);
  const auto mc = metrics_of(cnn), ml = metrics_of(lstm);
  const double cnn_acc = mc["accuracy"], cnn_rec = mc["macro_recall"], lstm_acc = ml["accuracy"];
  const double cnn_s = train_seconds(cnn), lstm_s = train_seconds(lstm);
  const bool ok = cnn_acc >= 0.95 && cnn_rec >= 0.90 && lstm_acc >= 0.94 && cnn_s <= 14400 && lstm_s <= 14400;
  return verdict(ok, "cnn accuracy " + fixed4(cnn_acc) + " (>= 0.95), macro recall " + fixed4(cnn_rec) +
                         " (>= 0.90), train " + fixed4(cnn_s / 3600) + " h; lstm accuracy " + fixed4(lstm_acc) +
                         " (>= 0.94), train " + fixed4(lstm_s / 3600) + " h (limit 4 h each)");
}

Outcome criterion_5() {
  const auto r = real_data();
  if (!r) return skipped();
  bool ok = true;
  std::string details;
  for (const char* model : {"cnn", "lstm"}) {
    const auto h = metrics_of(ensure_run(*r, model, "holdout", false));
    const auto l = metrics_of(ensure_run(*r, model, "lpo", false));
    const double gap = h["macro_f1"].get<double>() - l["macro_f1"].get<double>();
    const auto& paced = l["per_class"]["Paced"]["f1"];
    const double paced_f1 = paced.is_null() ? 0.0 : paced.get<double>();
    ok = ok && gap >= 0.30 && paced_f1 >= 0.90;
    if (!details.empty()) details += "; ";
    details += std::string(model) + " macro F1 gap " + fixed4(gap) + " (>= 0.30), lpo Paced F1 " + fixed4(paced_f1) +
               " (>= 0.90)";
  }
  return verdict(ok, details);
}

Outcome criterion_6() {
  const auto out = testsupport::temp_dir("acceptance_leak");
  auto kv = small_run(out);
  std::map<std::string, nlohmann::json> leaks;
  for (const char* protocol : {"holdout", "lpo"}) {
    kv["protocol"] = protocol;
    const auto c = pipeline::resolve_config(kv);
    if (!has_manifest(pipeline::ingest_dir(c))) pipeline::cmd_ingest(c);
    pipeline::cmd_split(c);
    leaks[protocol] = pipeline::read_json(pipeline::split_dir(c) / "leak.json");
  }
  fs::remove_all(out);
  const int lpo = leaks["lpo"]["shared_count"], holdout = leaks["holdout"]["shared_count"];
  return verdict(lpo == 0 && holdout > 0, "shared records: lpo " + std::to_string(lpo) + " (must be 0), holdout " +
                                              std::to_string(holdout) + " (must be > 0)");
}

// Block layout and profile ordering, checked on a trained model's explain output.
Outcome profile_properties(const fs::path& explain_dir) {
  const auto& layout = saliency::block_layout();
  std::size_t per_lead[2] = {0, 0};
  for (const auto& b : layout) per_lead[b.lead - 1] += b.size();

  std::size_t grids = 0, bad_grids = 0;
  for (const auto& g : pipeline::read_json(explain_dir / "grids.json")) {
    ++grids;
    std::size_t blocks[2] = {0, 0};
    for (const auto& b : g["blocks"]) ++blocks[b["lead"].get<int>() - 1];
    bad_grids += blocks[0] != 12 || blocks[1] != 12;
  }
  std::size_t profiles = 0, bad_blocks = 0;
  const auto check_blocks = [&](const nlohmann::json& p) {
    if (p.is_null()) return;
    ++profiles;
    for (const auto& b : p["blocks"]) {
      const double q25 = b["q25"], med = b["median"], q75 = b["q75"];
      bad_blocks += !(q25 <= med && med <= q75);
    }
  };
  for (const auto& p : pipeline::read_json(explain_dir / "profiles.json")) check_blocks(p);
  for (const auto& c : pipeline::read_json(explain_dir / "comparisons.json")) {
    for (const auto& [name, p] : c["groups"].items()) check_blocks(p);
  }
  const bool ok = per_lead[0] == 430 && per_lead[1] == 430 && bad_grids == 0 && grids > 0 && bad_blocks == 0;
  return verdict(ok, "block samples per lead " + std::to_string(per_lead[0]) + "/" + std::to_string(per_lead[1]) +
                         " (430 each); " + std::to_string(grids) + " grids, " + std::to_string(bad_grids) +
                         " malformed; " + std::to_string(profiles) + " profiles, " + std::to_string(bad_blocks) +
                         " blocks violating q25 <= median <= q75");
}

Outcome criterion_7a() {
  const auto out = testsupport::temp_dir("acceptance_profiles");
  full_run(small_run(out));
  const auto c = pipeline::resolve_config(small_run(out));
  auto result = profile_properties(pipeline::explain_dir(c));
  fs::remove_all(out);
  return result;
}

Outcome criterion_7b() {
  const auto r = real_data();
  if (!r) return skipped();
  const auto c = ensure_run(*r, "cnn", "holdout", true);
  auto props = profile_properties(pipeline::explain_dir(c));
  for (const auto& p : pipeline::read_json(pipeline::explain_dir(c) / "profiles.json")) {
    if (p["class"] != "Paced") continue;
    double best[2] = {-1, -1};
    int offset[2] = {0, 0};
    for (const auto& b : p["blocks"]) {
      const int lead = b["lead"].get<int>() - 1;
      if (b["median"].get<double>() > best[lead]) {
        best[lead] = b["median"];
        offset[lead] = b["offset"];
      }
    }
    const bool qrs = std::abs(offset[0]) == 1 || std::abs(offset[1]) == 1;
    return verdict(qrs && props.status == kPass, "Paced max-median block offsets: lead 1 " + std::to_string(offset[0]) +
                                                     ", lead 2 " + std::to_string(offset[1]) +
                                                     " (need +-1 in some lead); " + props.details);
  }
  return fail_with("no Paced profile in the hold-out explain output");
}

Outcome criterion_8() {
  const auto r = real_data();
  if (!r) return skipped();
  const auto c = ensure_run(*r, "cnn", "holdout", true);
  for (const auto& cmp : pipeline::read_json(pipeline::explain_dir(c) / "comparisons.json")) {
    if (cmp["class"] != "APB") continue;
    const std::string confused = cmp["confused_class"].is_null() ? "none" : cmp["confused_class"].get<std::string>();
    return verdict(confused == "Normal", "APB confused_class " + confused + " (expected Normal)");
  }
  return fail_with("no APB comparison in the hold-out explain output");
}

std::map<std::string, std::string> json_outputs(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".json" || e.path().filename() == "manifest.json") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = s.str();
  }
  return out;
}

Outcome criterion_9() {
  const auto root = testsupport::temp_dir("acceptance_determinism");
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    auto kv = small_run(out);
    full_run(kv);
    kv["model"] = "lstm";
    kv["protocol"] = "lpo";
    full_run(kv);
    runs[i] = json_outputs(out);
  }
  fs::remove_all(root);
  std::size_t differing = 0;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    differing += it == runs[1].end() || it->second != bytes;
  }
  differing += runs[1].size() > runs[0].size() ? runs[1].size() - runs[0].size() : 0;
  return verdict(differing == 0 && !runs[0].empty(),
                 std::to_string(runs[0].size()) + " JSON files compared across two seeded runs (cnn holdout, lstm lpo), " +
                     std::to_string(differing) + " differ");
}

const std::map<std::string, std::function<Outcome()>>& criteria() {
  static const std::map<std::string, std::function<Outcome()>> table = {
      {"1", criterion_1},   {"2", criterion_2},   {"3", criterion_3}, {"4", criterion_4}, {"5", criterion_5},
      {"6", criterion_6},   {"7a", criterion_7a}, {"7b", criterion_7b}, {"8", criterion_8}, {"9", criterion_9}};
  return table;
}

int run_one(const std::string& id) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    o = criteria().at(id)();
  } catch (const Error& e) {
    o = fail_with(std::string("error ") + std::string(error_code_name(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    o = fail_with(std::string("exception: ") + e.what());
  }
  const char* word = o.status == kPass ? "PASS" : o.status == kSkip ? "SKIP" : "FAIL";
  std::cout << "criterion " << id << ": " << word << "  " << o.details << "  [" << fixed4(seconds_since(t0)) << " s]"
            << std::endl;
  return o.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecgsal acceptance checks"};
  std::vector<std::string> ids;
  app.add_option("criteria", ids, "criterion ids (1 2 3 4 5 6 7a 7b 8 9); all when omitted");
  CLI11_PARSE(app, argc, argv);
  if (ids.empty()) {
    for (const auto& [id, fn] : criteria()) ids.push_back(id);
  }
  int worst = kPass;
  for (const auto& id : ids) {
    if (!criteria().count(id)) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const int s = run_one(id);
    if (s == kFail) worst = kFail;
    else if (s == kSkip && worst == kPass) worst = kSkip;
  }
  return worst;
}
