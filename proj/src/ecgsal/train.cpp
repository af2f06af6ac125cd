#include "ecgsal/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "ecgsal/error.hpp"
#include "ecgsal/rng.hpp"

namespace ecgsal::models {

namespace {

constexpr std::size_t kEvalChunk = 256;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) fail(ErrorCode::InvalidConfig, "bad value for " + key + ": '" + value + "'");
  return out;
}

int count_correct(const Mat& probs, std::span<const int> targets) {
  int correct = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    Eigen::Index best = 0;
    probs.col(j).maxCoeff(&best);
    if (best == targets[static_cast<std::size_t>(j)]) ++correct;
  }
  return correct;
}

std::vector<int> targets_of(std::span<const beatset::BeatVector> beats, std::span<const std::size_t> indices) {
  std::vector<int> t(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) t[i] = static_cast<int>(index_of(beats[indices[i]].label));
  return t;
}

}  // namespace

void validate(const TrainConfig& c) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, what); };
  if (c.epochs < 0) bad("epochs must be >= 0");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (!(c.initial_lr > 0.0) || !std::isfinite(c.initial_lr)) bad("initial_lr must be positive");
  if (c.plateau_patience < 1) bad("plateau_patience must be >= 1");
  if (!(c.plateau_factor > 0.0 && c.plateau_factor < 1.0)) bad("plateau_factor must be in (0,1)");
  if (!(c.min_lr >= 0.0)) bad("min_lr must be >= 0");
  if (!(c.plateau_min_delta >= 0.0)) bad("plateau_min_delta must be >= 0");
}

TrainConfig default_train_config(const std::string& arch_tag) {
  TrainConfig c;
  if (arch_tag == "lstm") c.optimizer = OptimizerKind::Nadam;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"initial_lr", c.initial_lr},
          {"optimizer", optimizer_name(c.optimizer)},
          {"plateau_patience", c.plateau_patience},
          {"plateau_factor", c.plateau_factor},
          {"min_lr", c.min_lr},
          {"plateau_min_delta", c.plateau_min_delta},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.initial_lr = j.at("initial_lr").get<double>();
  c.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
  c.plateau_patience = j.at("plateau_patience").get<int>();
  c.plateau_factor = j.at("plateau_factor").get<double>();
  c.min_lr = j.value("min_lr", c.min_lr);
  c.plateau_min_delta = j.value("plateau_min_delta", c.plateau_min_delta);
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

bool apply_train_key(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "epochs") {
    c.epochs = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<int>(key, value);
  } else if (key == "initial_lr") {
    c.initial_lr = parse_number<double>(key, value);
  } else if (key == "optimizer") {
    c.optimizer = optimizer_from_name(value);
  } else if (key == "plateau_patience") {
    c.plateau_patience = parse_number<int>(key, value);
  } else if (key == "plateau_factor") {
    c.plateau_factor = parse_number<double>(key, value);
  } else if (key == "min_lr") {
    c.min_lr = parse_number<double>(key, value);
  } else if (key == "plateau_min_delta") {
    c.plateau_min_delta = parse_number<double>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else {
    return false;
  }
  return true;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
    if (out.count(key)) fail(ErrorCode::InvalidConfig, "duplicate key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

Evaluation evaluate_loss(const Network& network, std::span<const beatset::BeatVector> beats,
                         std::span<const std::size_t> indices, LossKind loss, const FocalLossConfig& focal) {
  if (indices.empty()) fail(ErrorCode::InvalidArgument, "nothing to evaluate");
  nn::Context ctx;
  nn::Tape tape = network.make_tape();
  double total = 0.0;
  int correct = 0;
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const auto chunk = indices.subspan(start, std::min(kEvalChunk, indices.size() - start));
    const auto targets = targets_of(beats, chunk);
    const Mat logits = network.forward(to_batch(beats, chunk), tape, ctx);
    const LossValue lv = batch_loss(logits, targets, loss, focal);
    total += lv.loss * static_cast<double>(chunk.size());
    correct += count_correct(lv.probs, targets);
  }
  const double n = static_cast<double>(indices.size());
  return {total / n, correct / n};
}

TrainedModel train(const TrainedModel& initial, std::span<const beatset::BeatVector> beats,
                   const beatset::DatasetSplit& split, const TrainConfig& config, const TrainOptions& options) {
  validate(config);
  TrainedModel model(initial);
  if (options.loss == LossKind::Focal) validate(options.focal, static_cast<std::size_t>(model.network().n_classes()));
  if (config.epochs == 0) return model;
  if (split.train.empty()) fail(ErrorCode::InvalidArgument, "training partition is empty");
  for (const auto* part : {&split.train, &split.val}) {
    for (std::size_t i : *part) {
      if (i >= beats.size()) fail(ErrorCode::InvalidArgument, "split index out of range for dataset");
    }
  }

  Network& net = model.network();
  Optimizer optimizer(config.optimizer, net.params());
  Rng shuffle_rng(derive_seed(config.seed, "train/shuffle"));
  Rng dropout_rng(derive_seed(config.seed, "train/dropout"));
  nn::Tape tape = net.make_tape();
  nn::Grads grads(net.params());

  double lr = config.initial_lr;
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;
  const int epoch_offset = model.history().empty() ? 0 : model.history().back().epoch;
  std::vector<std::size_t> order(split.train.begin(), split.train.end());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto idx = std::span<const std::size_t>(order).subspan(start, std::min(batch, order.size() - start));
      const auto targets = targets_of(beats, idx);
      nn::Context ctx{true, &dropout_rng, &net.params()};
      const Mat logits = net.forward(to_batch(beats, idx), tape, ctx);
      const LossValue lv = batch_loss(logits, targets, options.loss, options.focal);
      if (!std::isfinite(lv.loss)) {
        fail(ErrorCode::DivergedTraining, "non-finite loss at epoch " + std::to_string(epoch_offset + epoch) +
                                              ", batch starting at " + std::to_string(start) + " (lr " +
                                              std::to_string(lr) + ")");
      }
      grads.zero();
      net.backward(lv.dlogits, tape, &grads);
      optimizer.step(net.params(), grads, lr);
      loss_sum += lv.loss * static_cast<double>(idx.size());
      correct += count_correct(lv.probs, targets);
    }

    EpochRecord rec;
    rec.epoch = epoch_offset + epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!split.val.empty()) {
      const Evaluation ev = evaluate_loss(net, beats, split.val, options.loss, options.focal);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
    }
    const double monitored = rec.val_loss.value_or(rec.train_loss);
    if (!std::isfinite(monitored)) {
      fail(ErrorCode::DivergedTraining, "non-finite monitored loss after epoch " + std::to_string(rec.epoch));
    }
    model.history().push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (monitored < best - config.plateau_min_delta) {
      best = monitored;
      wait = 0;
    } else if (++wait >= config.plateau_patience) {
      if (lr > config.min_lr) lr = std::max(lr * config.plateau_factor, config.min_lr);
      wait = 0;
    }
  }
  model.mark_trained();
  return model;
}

}  // namespace ecgsal::models
