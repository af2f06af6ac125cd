#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgsal/beatset.hpp"
#include "ecgsal/losses.hpp"
#include "ecgsal/network.hpp"
#include "ecgsal/saliency.hpp"
#include "ecgsal/train.hpp"

namespace ecgsal::pipeline {

inline constexpr const char* kToolName = "ecgsal";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::size_t kReferenceBeatTotal = 107209;

using KeyValues = std::map<std::string, std::string>;

struct PipelineConfig {
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "out";
  beatset::Protocol protocol = beatset::Protocol::HoldOut;
  std::uint64_t seed = 0;
  std::string model = "cnn";
  models::TrainConfig train;  // train.seed is derived from `seed`
  models::LossKind loss = models::LossKind::CrossEntropy;
  models::FocalLossConfig focal;
  models::CnnConfig cnn;
  models::LstmConfig lstm;
  std::vector<std::string> test_records = beatset::kDefaultTestRecords;
  bool rebalance = true;
  std::size_t explain_max_beats_per_class = 500;  // 0 = every beat
  std::size_t explain_overlays_per_class = 1;
  std::size_t explain_outliers = 10;
  saliency::Target saliency_target = saliency::Target::PredictedClass;
  unsigned threads = 0;

  models::Architecture architecture() const;
};

// Keys accepted in a config file (and as overrides), in documentation order.
const std::vector<std::string>& config_keys();

// Resolves key=value entries on top of the defaults. Model-dependent
// defaults (optimizer, loss) apply unless the entries set them.
PipelineConfig resolve_config(const KeyValues& entries);
PipelineConfig load_config_file(const std::filesystem::path& path, const KeyValues& overrides);

nlohmann::json config_to_json(const PipelineConfig& config);

std::filesystem::path ingest_dir(const PipelineConfig& c);
std::filesystem::path split_dir(const PipelineConfig& c);
std::filesystem::path train_dir(const PipelineConfig& c);
std::filesystem::path eval_dir(const PipelineConfig& c);
std::filesystem::path explain_dir(const PipelineConfig& c);
std::filesystem::path report_dir(const PipelineConfig& c);

struct CommandResult {
  std::filesystem::path stage_dir;
  std::string summary;  // human-readable, printed by the CLI
  std::vector<std::string> outputs;
};

using Logger = std::function<void(const std::string&)>;

CommandResult cmd_ingest(const PipelineConfig& config, const Logger& log = {});
CommandResult cmd_split(const PipelineConfig& config, const Logger& log = {});
CommandResult cmd_train(const PipelineConfig& config, const Logger& log = {});
CommandResult cmd_eval(const PipelineConfig& config, const Logger& log = {});
CommandResult cmd_explain(const PipelineConfig& config, const Logger& log = {});
CommandResult cmd_report(const PipelineConfig& config, const Logger& log = {});

// Writes manifest.json into a stage directory; every other regular file in
// the directory is listed with its SHA-256.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, const PipelineConfig& config, std::uint64_t stage_seed);
  void add_input(const std::filesystem::path& path);
  void time(const std::string& phase, double seconds);
  std::vector<std::string> finish(const std::filesystem::path& stage_dir);

 private:
  std::string command_;
  nlohmann::json config_;
  std::uint64_t stage_seed_;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json timings_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_;
  std::filesystem::path root_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace ecgsal::pipeline
