#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>

#include <json.hpp>

#include "ecgsal/beatset.hpp"
#include "ecgsal/losses.hpp"
#include "ecgsal/model.hpp"
#include "ecgsal/optimizer.hpp"

namespace ecgsal::models {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double initial_lr = 0.001;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int plateau_patience = 5;
  double plateau_factor = 0.1;
  double min_lr = 1e-6;
  double plateau_min_delta = 1e-4;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

// Adam for the CNN, Nadam for the LSTM; everything else shared.
TrainConfig default_train_config(const std::string& arch_tag);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Applies one key=value entry. Returns false for keys that are not
// TrainConfig fields; malformed values raise InvalidConfig.
bool apply_train_key(TrainConfig& config, const std::string& key, const std::string& value);

// Parses "key = value" lines; '#' starts a comment, blank lines are ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text);

struct TrainOptions {
  LossKind loss = LossKind::CrossEntropy;
  FocalLossConfig focal;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mini-batch training over split.train (taken as given, duplicates allowed).
// The batch order is reshuffled every epoch; validation loss drives the
// plateau schedule (training loss when the validation partition is empty).
TrainedModel train(const TrainedModel& initial, std::span<const beatset::BeatVector> beats,
                   const beatset::DatasetSplit& split, const TrainConfig& config, const TrainOptions& options);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_loss(const Network& network, std::span<const beatset::BeatVector> beats,
                         std::span<const std::size_t> indices, LossKind loss, const FocalLossConfig& focal);

}  // namespace ecgsal::models
