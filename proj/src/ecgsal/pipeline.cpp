#include "ecgsal/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "ecgsal/archive.hpp"
#include "ecgsal/checksum.hpp"
#include "ecgsal/error.hpp"
#include "ecgsal/evaluation.hpp"
#include "ecgsal/model.hpp"
#include "ecgsal/plot.hpp"
#include "ecgsal/record_io.hpp"
#include "ecgsal/rng.hpp"

namespace ecgsal::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) fail(ErrorCode::InvalidConfig, "bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::InvalidConfig, "bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) out.push_back(parse_num<T>(key, s));
  if (out.empty()) fail(ErrorCode::InvalidConfig, key + " needs at least one value");
  return out;
}

std::string stage_name(const PipelineConfig& c) { return c.model + "-" + beatset::protocol_name(c.protocol); }

void reset_dir(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void require(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) fail(ErrorCode::MissingArtifact, path.string() + " not found; " + hint);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json class_counts_json(const std::array<std::size_t, kNumClasses>& counts) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) j[std::string(class_key(kAllClasses[c]))] = counts[c];
  return j;
}

std::array<std::size_t, kNumClasses> count_labels(std::span<const beatset::BeatVector> beats,
                                                  std::span<const std::size_t> indices) {
  std::array<std::size_t, kNumClasses> out{};
  for (std::size_t i : indices) ++out[index_of(beats[i].label)];
  return out;
}

std::vector<BeatClass> labels_of(std::span<const beatset::BeatVector> beats) {
  std::vector<BeatClass> out;
  out.reserve(beats.size());
  for (const auto& b : beats) out.push_back(b.label);
  return out;
}

struct Upstream {
  std::vector<beatset::BeatVector> beats;
  beatset::DatasetSplit split;
  fs::path beats_path;
  fs::path split_path;
  std::string split_sha;
};

Upstream load_upstream(const PipelineConfig& c) {
  Upstream u;
  u.beats_path = ingest_dir(c) / "beats.bin";
  u.split_path = split_dir(c) / "split.json";
  require(u.beats_path, "run the ingest command first");
  require(u.split_path, "run the split command for protocol " + beatset::protocol_name(c.protocol) + " first");
  const nlohmann::json sj = read_json(u.split_path);
  if (sj.value("beats_sha256", std::string()) != sha256_file(u.beats_path)) {
    fail(ErrorCode::ConfigConflict, "split.json was built from a different beat archive; re-run split");
  }
  u.split = beatset::split_from_json(sj);
  if (u.split.protocol != c.protocol) fail(ErrorCode::ConfigConflict, "split.json protocol does not match --protocol");
  u.split_sha = sha256_file(u.split_path);
  u.beats = archive::read_beats(u.beats_path);
  return u;
}

models::TrainedModel load_trained(const PipelineConfig& c, const Upstream& u, ManifestWriter& manifest) {
  const fs::path ckpt = train_dir(c) / "model.ckpt";
  const fs::path info_path = train_dir(c) / "training.json";
  require(ckpt, "run the train command for " + stage_name(c) + " first");
  require(info_path, "run the train command for " + stage_name(c) + " first");
  const nlohmann::json info = read_json(info_path);
  if (info.value("split_sha256", std::string()) != u.split_sha) {
    fail(ErrorCode::ConfigConflict, "checkpoint was trained on a different split; re-run train");
  }
  models::TrainedModel model = models::read_checkpoint(ckpt.string());
  if (model.tag() != c.model) {
    fail(ErrorCode::ConfigConflict, "checkpoint holds a " + model.tag() + " model but --model is " + c.model);
  }
  manifest.add_input(ckpt);
  manifest.add_input(info_path);
  return model;
}

// Deterministic subset of at most `cap` indices (0 = all), returned sorted.
std::vector<std::size_t> sample_indices(std::vector<std::size_t> pool, std::size_t cap, Rng& rng) {
  if (cap == 0 || pool.size() <= cap) {
    std::sort(pool.begin(), pool.end());
    return pool;
  }
  rng.shuffle(pool);
  pool.resize(cap);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::string counts_table(const std::array<std::size_t, kNumClasses>& counts) {
  std::ostringstream out;
  std::size_t total = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out << "  " << class_display_name(kAllClasses[c]);
    out << std::string(12 - std::min<std::size_t>(11, class_display_name(kAllClasses[c]).size()), ' ') << counts[c]
        << "\n";
    total += counts[c];
  }
  out << "  total       " << total << "\n";
  return out.str();
}

}  // namespace

models::Architecture PipelineConfig::architecture() const {
  if (model == "cnn") return cnn;
  return lstm;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "data_dir", "output_dir", "protocol", "seed", "model", "threads",
      // TrainConfig
      "epochs", "batch_size", "initial_lr", "optimizer", "plateau_patience", "plateau_factor", "min_lr",
      "plateau_min_delta",
      // losses
      "loss", "focal_gamma", "focal_alpha",
      // architectures
      "n_residual_blocks", "initial_filters", "cnn_filters", "cnn_kernel_size", "cnn_downsample", "cnn_dropout",
      "lstm_units", "lstm_fc_sizes", "timestep_width",
      // data and explain
      "test_records", "rebalance", "explain_max_beats_per_class", "explain_overlays_per_class", "explain_outliers",
      "saliency_target"};
  return keys;
}

PipelineConfig resolve_config(const KeyValues& entries) {
  PipelineConfig c;
  if (auto it = entries.find("model"); it != entries.end()) c.model = it->second;
  if (c.model != "cnn" && c.model != "lstm") fail(ErrorCode::InvalidConfig, "model must be cnn or lstm, got '" + c.model + "'");
  c.train = models::default_train_config(c.model);
  c.loss = c.model == "lstm" ? models::LossKind::Focal : models::LossKind::CrossEntropy;

  const auto& known = config_keys();
  for (const auto& [key, value] : entries) {
    if (std::find(known.begin(), known.end(), key) == known.end()) fail(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    if (key == "model") continue;
    if (key == "seed") {
      c.seed = parse_num<std::uint64_t>(key, value);
    } else if (models::apply_train_key(c.train, key, value)) {
      continue;
    } else if (key == "data_dir") {
      c.data_dir = value;
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else if (key == "protocol") {
      try {
        c.protocol = beatset::protocol_from_name(value);
      } catch (const Error& e) {
        fail(ErrorCode::InvalidConfig, e.what());
      }
    } else if (key == "threads") {
      c.threads = parse_num<unsigned>(key, value);
    } else if (key == "loss") {
      c.loss = models::loss_from_name(value);
    } else if (key == "focal_gamma") {
      c.focal.gamma = parse_num<double>(key, value);
    } else if (key == "focal_alpha") {
      auto a = parse_list<double>(key, value);
      if (a.size() == 1) a.assign(kNumClasses, a[0]);
      c.focal.alpha = a;
    } else if (key == "n_residual_blocks") {
      c.cnn.n_residual_blocks = parse_num<int>(key, value);
    } else if (key == "initial_filters") {
      c.cnn.initial_filters = parse_num<int>(key, value);
    } else if (key == "cnn_filters") {
      c.cnn.filters = parse_list<int>(key, value);
    } else if (key == "cnn_kernel_size") {
      c.cnn.kernel_size = parse_num<int>(key, value);
    } else if (key == "cnn_downsample") {
      c.cnn.downsample = parse_list<int>(key, value);
    } else if (key == "cnn_dropout") {
      c.cnn.dropout = parse_num<double>(key, value);
    } else if (key == "lstm_units") {
      c.lstm.lstm_units = parse_num<int>(key, value);
    } else if (key == "lstm_fc_sizes") {
      const auto v = parse_list<int>(key, value);
      if (v.size() != 2) fail(ErrorCode::InvalidConfig, "lstm_fc_sizes needs exactly two widths");
      c.lstm.fc_sizes = {v[0], v[1]};
    } else if (key == "timestep_width") {
      c.lstm.timestep_width = parse_num<int>(key, value);
    } else if (key == "test_records") {
      c.test_records = split_list(value);
    } else if (key == "rebalance") {
      c.rebalance = parse_bool(key, value);
    } else if (key == "explain_max_beats_per_class") {
      c.explain_max_beats_per_class = parse_num<std::size_t>(key, value);
    } else if (key == "explain_overlays_per_class") {
      c.explain_overlays_per_class = parse_num<std::size_t>(key, value);
    } else if (key == "explain_outliers") {
      c.explain_outliers = parse_num<std::size_t>(key, value);
    } else if (key == "saliency_target") {
      c.saliency_target = saliency::target_from_name(value);
    }
  }
  c.train.seed = derive_seed(c.seed, "train");
  models::validate(c.train);
  models::validate(c.cnn);
  models::validate(c.lstm);
  models::validate(c.focal, kNumClasses);
  if (c.output_dir.empty()) fail(ErrorCode::InvalidConfig, "output_dir must not be empty");
  return c;
}

PipelineConfig load_config_file(const fs::path& path, const KeyValues& overrides) {
  KeyValues entries;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    entries = models::parse_key_values(text.str());
  }
  for (const auto& [k, v] : overrides) entries[k] = v;
  return resolve_config(entries);
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  return {{"data_dir", c.data_dir.string()},
          {"output_dir", c.output_dir.string()},
          {"protocol", beatset::protocol_name(c.protocol)},
          {"seed", c.seed},
          {"model", c.model},
          {"architecture", models::to_json(c.architecture())},
          {"train", models::to_json(c.train)},
          {"loss", models::loss_name(c.loss)},
          {"focal", {{"gamma", c.focal.gamma}, {"alpha", c.focal.alpha}}},
          {"test_records", c.test_records},
          {"rebalance", c.rebalance},
          {"explain_max_beats_per_class", c.explain_max_beats_per_class},
          {"explain_overlays_per_class", c.explain_overlays_per_class},
          {"explain_outliers", c.explain_outliers},
          {"saliency_target", saliency::target_name(c.saliency_target)}};
}

fs::path ingest_dir(const PipelineConfig& c) { return c.output_dir / "ingest"; }
fs::path split_dir(const PipelineConfig& c) { return c.output_dir / "split" / beatset::protocol_name(c.protocol); }
fs::path train_dir(const PipelineConfig& c) { return c.output_dir / "train" / stage_name(c); }
fs::path eval_dir(const PipelineConfig& c) { return c.output_dir / "eval" / stage_name(c); }
fs::path explain_dir(const PipelineConfig& c) { return c.output_dir / "explain" / stage_name(c); }
fs::path report_dir(const PipelineConfig& c) { return c.output_dir / "report"; }

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingArtifact, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

ManifestWriter::ManifestWriter(std::string command, const PipelineConfig& config, std::uint64_t stage_seed)
    : command_(std::move(command)),
      config_(config_to_json(config)),
      stage_seed_(stage_seed),
      start_(Clock::now()),
      root_(config.output_dir) {}

void ManifestWriter::add_input(const fs::path& path) {
  std::error_code ec;
  const fs::path rel = fs::relative(path, root_, ec);
  const bool inside = !ec && !rel.empty() && *rel.begin() != "..";
  inputs_.push_back({{"path", inside ? rel.generic_string() : fs::absolute(path).generic_string()},
                     {"sha256", sha256_file(path)}});
}

void ManifestWriter::time(const std::string& phase, double seconds) { timings_[phase] = seconds; }

std::vector<std::string> ManifestWriter::finish(const fs::path& stage_dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(stage_dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::json outputs = nlohmann::json::array();
  std::vector<std::string> names;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, stage_dir).generic_string();
    outputs.push_back({{"path", rel}, {"sha256", sha256_file(f)}, {"bytes", fs::file_size(f)}});
    names.push_back(rel);
  }
  timings_["wall_seconds"] = seconds_since(start_);
  const nlohmann::json manifest = {{"tool", kToolName},
                                   {"version", kToolVersion},
                                   {"command", command_},
                                   {"finished_utc", utc_now()},
                                   {"stage_seed", stage_seed_},
                                   {"config", config_},
                                   {"inputs", inputs_},
                                   {"outputs", outputs},
                                   {"timings", timings_}};
  write_json(stage_dir / "manifest.json", manifest);
  names.push_back("manifest.json");
  return names;
}

CommandResult cmd_ingest(const PipelineConfig& c, const Logger& log) {
  if (c.data_dir.empty()) fail(ErrorCode::InvalidConfig, "data_dir is not set");
  if (!fs::is_directory(c.data_dir)) fail(ErrorCode::MissingRecords, "data directory " + c.data_dir.string() + " not found");
  const auto ids = record_io::list_records(c.data_dir);
  if (ids.empty()) fail(ErrorCode::MissingRecords, "no WFDB headers (*.hea) in " + c.data_dir.string());

  const fs::path dir = ingest_dir(c);
  ManifestWriter manifest("ingest", c, 0);
  const auto t0 = Clock::now();
  beatset::BeatSet set;
  for (const auto& id : ids) {
    try {
      const auto record = record_io::load_record(c.data_dir, id);
      append_record(set, record);
    } catch (const Error& e) {
      fail(e.code(), "record " + id + ": " + e.what());
    }
    for (const char* ext : {".hea", ".dat", ".atr"}) {
      const fs::path p = c.data_dir / (id + ext);
      if (fs::exists(p)) manifest.add_input(p);
    }
    if (log) log("ingested record " + id);
  }
  manifest.time("ingest_seconds", seconds_since(t0));

  reset_dir(dir);
  archive::write_beats(dir / "beats.bin", set.vectors);
  const std::size_t total = set.stats.total();
  nlohmann::json stats = beatset::stats_to_json(set.stats);
  stats["record_ids"] = ids;
  stats["reference_total"] = kReferenceBeatTotal;
  stats["delta_from_reference"] = static_cast<long long>(total) - static_cast<long long>(kReferenceBeatTotal);
  stats["delta_percent"] =
      100.0 * (static_cast<double>(total) - static_cast<double>(kReferenceBeatTotal)) / kReferenceBeatTotal;
  write_json(dir / "stats.json", stats);

  std::ostringstream summary;
  summary << "records: " << ids.size() << "\n" << "beats per class:\n" << counts_table(set.stats.after_filter);
  summary << "excluded symbols: " << set.stats.excluded_symbol << ", overlong removed: " << set.stats.overlong_removed
          << "\n";
  summary << "delta from " << kReferenceBeatTotal << ": " << stats["delta_from_reference"].get<long long>() << "\n";
  write_text(dir / "counts.txt", summary.str());
  return {dir, summary.str(), manifest.finish(dir)};
}

CommandResult cmd_split(const PipelineConfig& c, const Logger& log) {
  const fs::path beats_path = ingest_dir(c) / "beats.bin";
  require(beats_path, "run the ingest command first");
  const std::uint64_t seed = derive_seed(c.seed, "split/" + beatset::protocol_name(c.protocol));
  ManifestWriter manifest("split", c, seed);
  manifest.add_input(beats_path);
  const auto beats = archive::read_beats(beats_path);

  beatset::DatasetSplit split = c.protocol == beatset::Protocol::HoldOut
                                    ? beatset::split_holdout(beats.size(), seed)
                                    : beatset::split_leave_patients_out(beats, c.test_records, seed);
  const auto leak = beatset::verify_no_leak(split, beats);

  const fs::path dir = split_dir(c);
  reset_dir(dir);
  nlohmann::json sj = beatset::split_to_json(split);
  sj["beats_sha256"] = sha256_file(beats_path);
  write_json(dir / "split.json", sj);
  write_json(dir / "leak.json", {{"protocol", beatset::protocol_name(leak.protocol)},
                                 {"shared_record_ids", leak.shared_record_ids},
                                 {"shared_count", leak.shared_record_ids.size()},
                                 {"disjoint", leak.disjoint()}});
  write_json(dir / "partition_counts.json", {{"train", class_counts_json(count_labels(beats, split.train))},
                                             {"val", class_counts_json(count_labels(beats, split.val))},
                                             {"test", class_counts_json(count_labels(beats, split.test))}});
  std::ostringstream summary;
  summary << "protocol " << beatset::protocol_name(c.protocol) << ": train " << split.train.size() << ", val "
          << split.val.size() << ", test " << split.test.size() << "\n";
  summary << "records shared between train and test: " << leak.shared_record_ids.size() << "\n";
  if (log) log(summary.str());
  return {dir, summary.str(), manifest.finish(dir)};
}

CommandResult cmd_train(const PipelineConfig& c, const Logger& log) {
  const Upstream u = load_upstream(c);
  ManifestWriter manifest("train", c, c.train.seed);
  manifest.add_input(u.beats_path);
  manifest.add_input(u.split_path);

  beatset::DatasetSplit train_split = u.split;
  nlohmann::json rebalance_json = {{"enabled", c.rebalance}};
  if (c.rebalance) {
    const auto labels = labels_of(u.beats);
    const auto rr = beatset::rebalance(u.split.train, labels,
                                       derive_seed(c.seed, "rebalance/" + beatset::protocol_name(c.protocol)));
    train_split.train = rr.indices;
    nlohmann::json skipped = nlohmann::json::array();
    for (BeatClass s : rr.skipped) skipped.push_back(class_key(s));
    rebalance_json.update({{"target", rr.target},
                           {"counts_before", class_counts_json(rr.counts_before)},
                           {"counts_after", class_counts_json(rr.counts_after)},
                           {"skipped_classes", skipped}});
  }

  const std::uint64_t init_seed = derive_seed(c.seed, "init/" + c.model);
  const models::TrainedModel init = models::make_model(c.architecture(), init_seed);
  models::TrainOptions options;
  options.loss = c.loss;
  options.focal = c.focal;
  options.on_epoch = [&](const models::EpochRecord& e) {
    if (!log) return;
    std::ostringstream line;
    line << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " acc " << e.train_accuracy;
    if (e.val_loss) line << " val_loss " << *e.val_loss << " val_acc " << *e.val_accuracy;
    log(line.str());
  };
  const auto t0 = Clock::now();
  const models::TrainedModel trained = models::train(init, u.beats, train_split, c.train, options);
  manifest.time("train_seconds", seconds_since(t0));

  const fs::path dir = train_dir(c);
  reset_dir(dir);
  models::write_checkpoint((dir / "model.ckpt").string(), trained);
  write_json(dir / "history.json", models::history_to_json(trained.history()));
  write_json(dir / "rebalance.json", rebalance_json);
  write_json(dir / "training.json", {{"model", c.model},
                                     {"protocol", beatset::protocol_name(c.protocol)},
                                     {"architecture", models::to_json(c.architecture())},
                                     {"train", models::to_json(c.train)},
                                     {"loss", models::loss_name(c.loss)},
                                     {"focal", {{"gamma", c.focal.gamma}, {"alpha", c.focal.alpha}}},
                                     {"init_seed", init_seed},
                                     {"train_samples", train_split.train.size()},
                                     {"split_sha256", u.split_sha},
                                     {"beats_sha256", sha256_file(u.beats_path)}});
  std::ostringstream summary;
  summary << "trained " << c.model << " on " << train_split.train.size() << " samples for "
          << trained.history().size() << " epochs\n";
  if (!trained.history().empty()) {
    const auto& last = trained.history().back();
    summary << "final train loss " << last.train_loss << ", accuracy " << last.train_accuracy << "\n";
  }
  return {dir, summary.str(), manifest.finish(dir)};
}

CommandResult cmd_eval(const PipelineConfig& c, const Logger& log) {
  const Upstream u = load_upstream(c);
  ManifestWriter manifest("eval", c, 0);
  manifest.add_input(u.beats_path);
  manifest.add_input(u.split_path);
  const models::TrainedModel model = load_trained(c, u, manifest);

  const auto t0 = Clock::now();
  const models::Mat proba = models::predict_proba(model, models::to_batch(u.beats, u.split.test));
  const auto predicted = models::argmax_labels(proba);
  std::vector<BeatClass> truth;
  for (std::size_t i : u.split.test) truth.push_back(u.beats[i].label);
  const auto cm = evaluation::confusion(truth, predicted);
  const auto report = evaluation::metrics(cm);
  const auto breakdown = evaluation::per_class_breakdown(cm);
  manifest.time("predict_seconds", seconds_since(t0));

  const fs::path dir = eval_dir(c);
  reset_dir(dir);
  nlohmann::json mj = evaluation::metrics_to_json(report);
  mj["model"] = c.model;
  mj["protocol"] = beatset::protocol_name(c.protocol);
  write_json(dir / "metrics.json", mj);
  write_json(dir / "confusion.json", evaluation::confusion_to_json(cm));
  write_json(dir / "breakdown.json", evaluation::breakdown_to_json(breakdown));
  nlohmann::json preds = nlohmann::json::array();
  for (std::size_t k = 0; k < u.split.test.size(); ++k) {
    const auto& b = u.beats[u.split.test[k]];
    preds.push_back({{"record_id", b.record_id},
                     {"beat_index", b.beat_index},
                     {"true", class_key(truth[k])},
                     {"predicted", class_key(predicted[k])}});
  }
  write_json(dir / "predictions.json", preds);

  const std::string label = c.model + " " + beatset::protocol_name(c.protocol);
  const std::pair<std::string, evaluation::MetricsReport> rows[] = {{label, report}};
  std::ostringstream text;
  text << evaluation::format_summary_table(rows) << "\n"
       << "Per-class breakdown\n"
       << evaluation::format_breakdown(breakdown) << "\n"
       << "Row-normalized confusion matrix\n"
       << evaluation::format_confusion(cm);
  write_text(dir / "report.txt", text.str());
  plot::confusion_heatmap(cm, "Confusion matrix, " + label).write(dir / "confusion.svg", dir / "confusion.png");
  if (log) log("evaluated " + std::to_string(truth.size()) + " test beats");
  return {dir, text.str(), manifest.finish(dir)};
}

CommandResult cmd_explain(const PipelineConfig& c, const Logger& log) {
  const Upstream u = load_upstream(c);
  const std::uint64_t seed = derive_seed(c.seed, "explain/" + stage_name(c));
  ManifestWriter manifest("explain", c, seed);
  manifest.add_input(u.beats_path);
  manifest.add_input(u.split_path);
  const models::TrainedModel model = load_trained(c, u, manifest);
  if (!model.trained()) fail(ErrorCode::UntrainedModel, "checkpoint holds an untrained model (0 epochs)");

  const auto t0 = Clock::now();
  Rng rng(seed);
  std::array<std::vector<std::size_t>, kNumClasses> test_pool, train_pool;
  for (std::size_t i : u.split.test) test_pool[index_of(u.beats[i].label)].push_back(i);
  {
    std::set<std::size_t> distinct(u.split.train.begin(), u.split.train.end());
    for (std::size_t i : distinct) train_pool[index_of(u.beats[i].label)].push_back(i);
  }
  std::array<std::vector<std::size_t>, kNumClasses> test_sel, train_sel;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    test_sel[k] = sample_indices(test_pool[k], c.explain_max_beats_per_class, rng);
    train_sel[k] = sample_indices(train_pool[k], c.explain_max_beats_per_class, rng);
  }

  std::vector<std::size_t> all_idx;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    all_idx.insert(all_idx.end(), test_sel[k].begin(), test_sel[k].end());
    all_idx.insert(all_idx.end(), train_sel[k].begin(), train_sel[k].end());
  }
  std::vector<beatset::BeatVector> chosen;
  chosen.reserve(all_idx.size());
  for (std::size_t i : all_idx) chosen.push_back(u.beats[i]);
  const auto predicted = models::argmax_labels(models::predict_proba(model, chosen));
  if (log) log("computing saliency for " + std::to_string(chosen.size()) + " beats");
  const auto maps = saliency::batch_saliency(model, chosen, c.saliency_target);
  manifest.time("saliency_seconds", seconds_since(t0));

  std::vector<saliency::LabeledGrid> test_grids;
  std::array<std::vector<saliency::SegmentGrid>, kNumClasses> total_grids, test_class_grids;
  std::array<std::vector<std::size_t>, kNumClasses> overlay_pos;
  nlohmann::json grid_dump = nlohmann::json::array();
  std::size_t pos = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    for (std::size_t n = 0; n < test_sel[k].size(); ++n, ++pos) {
      saliency::SegmentGrid g = saliency::segment_means(maps[pos]);
      g.label = chosen[pos].label;
      test_grids.push_back({g, chosen[pos].label, predicted[pos]});
      test_class_grids[k].push_back(g);
      total_grids[k].push_back(g);
      if (overlay_pos[k].size() < c.explain_overlays_per_class) overlay_pos[k].push_back(pos);
      nlohmann::json gj = saliency::grid_to_json(g);
      gj["set"] = "test";
      gj["predicted"] = class_key(predicted[pos]);
      grid_dump.push_back(gj);
    }
    for (std::size_t n = 0; n < train_sel[k].size(); ++n, ++pos) {
      saliency::SegmentGrid g = saliency::segment_means(maps[pos]);
      g.label = chosen[pos].label;
      total_grids[k].push_back(g);
      nlohmann::json gj = saliency::grid_to_json(g);
      gj["set"] = "train";
      gj["predicted"] = class_key(predicted[pos]);
      grid_dump.push_back(gj);
    }
  }

  const fs::path dir = explain_dir(c);
  reset_dir(dir);
  std::vector<saliency::ClassSegmentProfile> profiles;
  nlohmann::json profiles_json = nlohmann::json::array();
  nlohmann::json comparisons_json = nlohmann::json::array();
  nlohmann::json outliers_json = nlohmann::json::object();
  nlohmann::json overlay_json = nlohmann::json::array();
  std::ostringstream summary;
  summary << "saliency target: " << saliency::target_name(c.saliency_target) << "\n";
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const BeatClass cls = kAllClasses[k];
    const std::string key(class_key(cls));
    if (test_class_grids[k].empty()) {
      summary << "  " << key << ": no test beats\n";
      continue;
    }
    const auto profile = saliency::class_profile(cls, test_class_grids[k]);
    profiles.push_back(profile);
    profiles_json.push_back(saliency::profile_to_json(profile));

    const auto cmp = saliency::group_comparison(cls, test_grids, total_grids[k]);
    nlohmann::json cj = saliency::comparison_to_json(cmp);
    comparisons_json.push_back(cj);
    plot::group_lines(cmp, "Saliency by segment, " + std::string(class_display_name(cls)))
        .write(dir / ("group_" + key + ".svg"), dir / ("group_" + key + ".png"));

    if (test_class_grids[k].size() >= 2) {
      auto ranked = saliency::outlier_scan(profile, test_class_grids[k]);
      if (ranked.size() > c.explain_outliers) ranked.resize(c.explain_outliers);
      outliers_json[key] = saliency::outliers_to_json(ranked);
    }
    for (std::size_t n = 0; n < overlay_pos[k].size(); ++n) {
      const std::size_t p = overlay_pos[k][n];
      const std::string stem = "overlay_" + key + "_" + std::to_string(n);
      plot::saliency_overlay(chosen[p], maps[p],
                             std::string(class_display_name(cls)) + " beat " + chosen[p].record_id + ":" +
                                 std::to_string(chosen[p].beat_index))
          .write(dir / (stem + ".svg"), dir / (stem + ".png"));
      overlay_json.push_back(saliency::map_to_json(maps[p]));
    }
    summary << "  " << key << ": " << cmp.n_correct << " correct, " << cmp.n_incorrect << " incorrect";
    if (cmp.confused_class) summary << ", confused with " << class_key(*cmp.confused_class);
    summary << "\n";
  }
  write_json(dir / "profiles.json", profiles_json);
  write_json(dir / "comparisons.json", comparisons_json);
  write_json(dir / "outliers.json", outliers_json);
  write_json(dir / "grids.json", grid_dump);
  write_json(dir / "overlays.json", overlay_json);
  if (!profiles.empty()) {
    plot::segment_heatmap(profiles, "Median saliency per segment, " + stage_name(c))
        .write(dir / "segments.svg", dir / "segments.png");
  }
  return {dir, summary.str(), manifest.finish(dir)};
}

CommandResult cmd_report(const PipelineConfig& c, const Logger&) {
  const fs::path eval_root = c.output_dir / "eval";
  std::vector<fs::path> metric_files;
  if (fs::is_directory(eval_root)) {
    for (const auto& e : fs::directory_iterator(eval_root)) {
      if (fs::exists(e.path() / "metrics.json")) metric_files.push_back(e.path() / "metrics.json");
    }
  }
  if (metric_files.empty()) fail(ErrorCode::MissingArtifact, "no evaluation results under " + eval_root.string());
  std::sort(metric_files.begin(), metric_files.end());

  ManifestWriter manifest("report", c, 0);
  nlohmann::json entries = nlohmann::json::array();
  std::vector<std::pair<std::string, evaluation::MetricsReport>> rows;
  std::map<std::string, std::map<std::string, double>> macro_f1;
  std::ostringstream breakdowns;
  for (const auto& f : metric_files) {
    manifest.add_input(f);
    const nlohmann::json mj = read_json(f);
    const fs::path cm_path = f.parent_path() / "confusion.json";
    require(cm_path, "re-run eval");
    manifest.add_input(cm_path);
    const auto cm = evaluation::confusion_from_json(read_json(cm_path));
    const auto report = evaluation::metrics(cm);
    const std::string model = mj.at("model").get<std::string>();
    const std::string protocol = mj.at("protocol").get<std::string>();
    rows.emplace_back(model + " " + protocol, report);
    macro_f1[model][protocol] = report.macro_f1;
    const auto bd = evaluation::per_class_breakdown(cm);
    entries.push_back({{"model", model},
                       {"protocol", protocol},
                       {"metrics", evaluation::metrics_to_json(report)},
                       {"breakdown", evaluation::breakdown_to_json(bd)}});
    breakdowns << model << " " << protocol << "\n" << evaluation::format_breakdown(bd) << "\n";
  }
  nlohmann::json gaps = nlohmann::json::object();
  for (const auto& [model, by_protocol] : macro_f1) {
    if (by_protocol.count("holdout") && by_protocol.count("lpo")) {
      gaps[model] = by_protocol.at("holdout") - by_protocol.at("lpo");
    }
  }

  const fs::path dir = report_dir(c);
  reset_dir(dir);
  write_json(dir / "summary.json", {{"entries", entries}, {"macro_f1_gap_holdout_minus_lpo", gaps}});
  std::ostringstream text;
  text << evaluation::format_summary_table(rows) << "\n" << breakdowns.str();
  for (const auto& [model, gap] : gaps.items()) {
    text << "macro F1 gap (holdout - lpo), " << model << ": " << evaluation::format4(gap.get<double>()) << "\n";
  }
  write_text(dir / "summary.txt", text.str());
  return {dir, text.str(), manifest.finish(dir)};
}

}  // namespace ecgsal::pipeline
