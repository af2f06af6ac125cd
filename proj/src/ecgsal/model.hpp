#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecgsal/beat_class.hpp"
#include "ecgsal/beatset.hpp"
#include "ecgsal/network.hpp"

namespace ecgsal::models {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

nlohmann::json history_to_json(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> history_from_json(const nlohmann::json& j);

class TrainedModel {
 public:
  TrainedModel(Architecture arch, std::unique_ptr<Network> network, std::uint64_t seed);
  TrainedModel(const TrainedModel& other);
  TrainedModel& operator=(const TrainedModel& other);
  TrainedModel(TrainedModel&&) noexcept = default;
  TrainedModel& operator=(TrainedModel&&) noexcept = default;

  const Architecture& architecture() const noexcept { return arch_; }
  std::string tag() const { return arch_tag(arch_); }
  const Network& network() const { return *network_; }
  Network& network() { return *network_; }

  const std::vector<EpochRecord>& history() const noexcept { return history_; }
  std::vector<EpochRecord>& history() noexcept { return history_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool trained() const noexcept { return trained_; }
  void mark_trained() noexcept { trained_ = true; }

 private:
  Architecture arch_;
  std::unique_ptr<Network> network_;
  std::vector<EpochRecord> history_;
  std::uint64_t seed_ = 0;
  bool trained_ = false;
};

// Fresh model with seeded initialization.
TrainedModel make_model(const Architecture& arch, std::uint64_t seed);

// Column batch (860 x n) from the selected beats.
Mat to_batch(std::span<const beatset::BeatVector> beats, std::span<const std::size_t> indices);
Mat to_batch(std::span<const beatset::BeatVector> beats);

// n x n_classes probability rows; inference mode, no dropout.
Mat predict_proba(const Network& network, const Mat& inputs);
Mat predict_proba(const TrainedModel& model, const Mat& inputs);
Mat predict_proba(const TrainedModel& model, std::span<const beatset::BeatVector> beats);

std::vector<BeatClass> argmax_labels(const Mat& proba_rows);

// "ECGMDL/1\n", u16 tag length + tag, u32 config length + config JSON,
// u64 seed, u8 trained, u32 history length + history JSON, u32 tensor count,
// then per tensor u16 name length + name, u32 rows, u32 cols, u8 trainable,
// rows*cols f64 in column-major order.
inline constexpr std::string_view kCheckpointMagic = "ECGMDL/1\n";

std::vector<std::uint8_t> save_checkpoint(const TrainedModel& model);
TrainedModel load_checkpoint(std::span<const std::uint8_t> bytes, const std::optional<std::string>& expected_tag = {});

void write_checkpoint(const std::string& path, const TrainedModel& model);
TrainedModel read_checkpoint(const std::string& path, const std::optional<std::string>& expected_tag = {});

}  // namespace ecgsal::models
