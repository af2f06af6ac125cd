#include "ecgsal/model.hpp"

#include <fstream>

#include "ecgsal/archive.hpp"
#include "ecgsal/error.hpp"
#include "ecgsal/record_io.hpp"

namespace ecgsal::models {

namespace {

constexpr std::size_t kInferenceChunk = 256;

nlohmann::json opt_to_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : history) {
    out.push_back({{"epoch", e.epoch},
                   {"lr", e.lr},
                   {"train_loss", e.train_loss},
                   {"train_accuracy", e.train_accuracy},
                   {"val_loss", opt_to_json(e.val_loss)},
                   {"val_accuracy", opt_to_json(e.val_accuracy)}});
  }
  return out;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> out;
  for (const auto& e : j) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<int>();
    r.lr = e.at("lr").get<double>();
    r.train_loss = e.at("train_loss").get<double>();
    r.train_accuracy = e.at("train_accuracy").get<double>();
    r.val_loss = opt_from_json(e.at("val_loss"));
    r.val_accuracy = opt_from_json(e.at("val_accuracy"));
    out.push_back(r);
  }
  return out;
}

TrainedModel::TrainedModel(Architecture arch, std::unique_ptr<Network> network, std::uint64_t seed)
    : arch_(std::move(arch)), network_(std::move(network)), seed_(seed) {
  if (!network_) fail(ErrorCode::InvalidArgument, "model needs a network");
  if (network_->tag() != arch_tag(arch_)) fail(ErrorCode::InvalidArgument, "network does not match architecture");
}

TrainedModel::TrainedModel(const TrainedModel& other)
    : arch_(other.arch_),
      network_(other.network_->clone()),
      history_(other.history_),
      seed_(other.seed_),
      trained_(other.trained_) {}

TrainedModel& TrainedModel::operator=(const TrainedModel& other) {
  if (this != &other) *this = TrainedModel(other);
  return *this;
}

TrainedModel make_model(const Architecture& arch, std::uint64_t seed) {
  return TrainedModel(arch, build_network(arch, seed), seed);
}

Mat to_batch(std::span<const beatset::BeatVector> beats, std::span<const std::size_t> indices) {
  Mat x(static_cast<Eigen::Index>(beatset::kVectorLength), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= beats.size()) fail(ErrorCode::InvalidArgument, "beat index out of range");
    const auto& v = beats[indices[j]].values;
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i];
  }
  return x;
}

Mat to_batch(std::span<const beatset::BeatVector> beats) {
  std::vector<std::size_t> all(beats.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return to_batch(beats, all);
}

Mat predict_proba(const Network& network, const Mat& inputs) {
  if (inputs.rows() != network.input_length()) {
    fail(ErrorCode::ShapeMismatch, "expected inputs of length " + std::to_string(network.input_length()) + ", got " +
                                       std::to_string(inputs.rows()));
  }
  const Eigen::Index n = inputs.cols();
  Mat out(n, network.n_classes());
  nn::Context ctx;
  nn::Tape tape = network.make_tape();
  for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(kInferenceChunk)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(kInferenceChunk), n - start);
    const Mat logits = network.forward(inputs.middleCols(start, len), tape, ctx);
    out.middleRows(start, len) = nn::softmax_columns(logits).transpose();
  }
  return out;
}

Mat predict_proba(const TrainedModel& model, const Mat& inputs) { return predict_proba(model.network(), inputs); }

Mat predict_proba(const TrainedModel& model, std::span<const beatset::BeatVector> beats) {
  return predict_proba(model.network(), to_batch(beats));
}

std::vector<BeatClass> argmax_labels(const Mat& proba_rows) {
  std::vector<BeatClass> out;
  out.reserve(static_cast<std::size_t>(proba_rows.rows()));
  for (Eigen::Index i = 0; i < proba_rows.rows(); ++i) {
    Eigen::Index best = 0;
    proba_rows.row(i).maxCoeff(&best);
    out.push_back(kAllClasses[static_cast<std::size_t>(best)]);
  }
  return out;
}

std::vector<std::uint8_t> save_checkpoint(const TrainedModel& model) {
  archive::ByteWriter w;
  w.str(kCheckpointMagic);
  const std::string tag = model.tag();
  w.u16(static_cast<std::uint16_t>(tag.size()));
  w.str(tag);
  const std::string config = to_json(model.architecture()).dump();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.str(config);
  w.u64(model.seed());
  w.u8(model.trained() ? 1 : 0);
  const std::string history = history_to_json(model.history()).dump();
  w.u32(static_cast<std::uint32_t>(history.size()));
  w.str(history);
  const auto& tensors = model.network().params().tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rows()));
    w.u32(static_cast<std::uint32_t>(t.value.cols()));
    w.u8(t.trainable ? 1 : 0);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.f64(t.value.data()[i]);
  }
  return std::move(w.data());
}

TrainedModel load_checkpoint(std::span<const std::uint8_t> bytes, const std::optional<std::string>& expected_tag) {
  const auto corrupt = [](const std::string& what) { fail(ErrorCode::CorruptCheckpoint, what); };
  archive::ByteReader r(bytes, ErrorCode::CorruptCheckpoint);
  if (r.str(kCheckpointMagic.size()) != kCheckpointMagic) corrupt("bad magic or version");
  const std::string tag = r.str(r.u16());
  if (tag != "cnn" && tag != "lstm") corrupt("unknown architecture tag '" + tag + "'");
  if (expected_tag && *expected_tag != tag) {
    corrupt("architecture tag mismatch: checkpoint holds '" + tag + "', expected '" + *expected_tag + "'");
  }
  Architecture arch;
  try {
    arch = architecture_from_json(tag, nlohmann::json::parse(r.str(r.u32())));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("config: ") + e.what());
  } catch (const Error& e) {
    corrupt(e.what());
  }
  const std::uint64_t seed = r.u64();
  const bool trained = r.u8() != 0;
  std::vector<EpochRecord> history;
  try {
    history = history_from_json(nlohmann::json::parse(r.str(r.u32())));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("history: ") + e.what());
  }

  TrainedModel model(arch, build_network(arch, 0), seed);
  auto& tensors = model.network().params().tensors();
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) corrupt("tensor count does not match architecture");
  for (auto& t : tensors) {
    const std::string name = r.str(r.u16());
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    const bool trainable = r.u8() != 0;
    if (name != t.name || rows != t.value.rows() || cols != t.value.cols() || trainable != t.trainable) {
      corrupt("tensor '" + name + "' does not match architecture");
    }
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.f64();
  }
  if (r.remaining() != 0) corrupt("trailing bytes");
  model.history() = std::move(history);
  if (trained) model.mark_trained();
  return model;
}

void write_checkpoint(const std::string& path, const TrainedModel& model) {
  const auto bytes = save_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

TrainedModel read_checkpoint(const std::string& path, const std::optional<std::string>& expected_tag) {
  const auto bytes = record_io::read_file_bytes(path);
  return load_checkpoint(bytes, expected_tag);
}

}  // namespace ecgsal::models
