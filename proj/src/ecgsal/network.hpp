#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ecgsal/nn.hpp"

namespace ecgsal::models {

using nn::Mat;

// Residual CNN in the style of the four-block 1-D ResNets used for ECG.
struct CnnConfig {
  int n_residual_blocks = 4;
  int initial_filters = 64;
  std::vector<int> filters = {64, 128, 196, 256};  // one per block
  int kernel_size = 16;
  std::vector<int> downsample = {4, 4, 4, 4};  // one per block
  double dropout = 0.2;
  int input_length = 860;
  int n_classes = 8;
};

struct LstmConfig {
  int lstm_units = 64;
  // First width feeds a ReLU; the second is the softmax output layer.
  std::array<int, 2> fc_sizes = {32, 8};
  int timestep_width = 1;
  int input_length = 860;
  int n_classes = 8;
};

using Architecture = std::variant<CnnConfig, LstmConfig>;

void validate(const CnnConfig& config);
void validate(const LstmConfig& config);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const std::string& tag, const nlohmann::json& j);
std::string arch_tag(const Architecture& arch);  // "cnn" / "lstm"

// A differentiable classifier over column batches: inputs are
// input_length x B, logits are n_classes x B (pre-softmax).
class Network {
 public:
  virtual ~Network() = default;

  virtual std::string tag() const = 0;
  virtual int input_length() const = 0;
  virtual int n_classes() const = 0;

  virtual Mat forward(const Mat& x, nn::Tape& tape, const nn::Context& ctx) const = 0;
  // Accumulates parameter gradients into grads (if non-null) and returns
  // the gradient with respect to the input batch.
  virtual Mat backward(const Mat& dlogits, const nn::Tape& tape, nn::Grads* grads) const = 0;

  virtual std::unique_ptr<Network> clone() const = 0;

  nn::Tape make_tape() const { return nn::Tape{std::vector<nn::Cache>(static_cast<std::size_t>(slot_count_))}; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

 protected:
  nn::ParamStore store_;
  int slot_count_ = 0;
};

class CnnNetwork final : public Network {
 public:
  explicit CnnNetwork(const CnnConfig& config);

  std::string tag() const override { return "cnn"; }
  int input_length() const override { return config_.input_length; }
  int n_classes() const override { return config_.n_classes; }
  const CnnConfig& config() const noexcept { return config_; }

  Mat forward(const Mat& x, nn::Tape& tape, const nn::Context& ctx) const override;
  Mat backward(const Mat& dlogits, const nn::Tape& tape, nn::Grads* grads) const override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<CnnNetwork>(*this); }

  void initialize(std::uint64_t seed);
  // Number of additive shortcut joins in the forward graph.
  int residual_additions() const noexcept { return static_cast<int>(blocks_.size()); }
  int final_length() const noexcept { return final_length_; }

 private:
  struct Block {
    nn::Conv1d conv1;
    nn::BatchNorm1d bn1;
    nn::Relu relu1;
    nn::Dropout drop1;
    nn::Conv1d conv2;
    nn::BatchNorm1d bn2;
    bool pool_skip = false;
    nn::MaxPool1d skip_pool;
    bool project_skip = false;
    nn::Conv1d skip_conv;
    nn::Relu relu_out;
    nn::Dropout drop_out;
  };

  CnnConfig config_;
  nn::Conv1d stem_conv_;
  nn::BatchNorm1d stem_bn_;
  nn::Relu stem_relu_;
  std::vector<Block> blocks_;
  nn::Dense head_;
  int final_channels_ = 0;
  int final_length_ = 0;
};

class LstmNetwork final : public Network {
 public:
  explicit LstmNetwork(const LstmConfig& config);

  std::string tag() const override { return "lstm"; }
  int input_length() const override { return config_.input_length; }
  int n_classes() const override { return config_.n_classes; }
  const LstmConfig& config() const noexcept { return config_; }

  Mat forward(const Mat& x, nn::Tape& tape, const nn::Context& ctx) const override;
  Mat backward(const Mat& dlogits, const nn::Tape& tape, nn::Grads* grads) const override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<LstmNetwork>(*this); }

  void initialize(std::uint64_t seed);
  std::size_t recurrent_parameter_count() const;

 private:
  LstmConfig config_;
  nn::Lstm lstm_;
  nn::Dense fc1_;
  int relu_slot_ = -1;
  nn::Dense fc2_;
};

// Untrained networks with seeded fan-in uniform initialization.
std::unique_ptr<CnnNetwork> build_cnn(const CnnConfig& config, std::uint64_t seed = 0);
std::unique_ptr<LstmNetwork> build_lstm(const LstmConfig& config, std::uint64_t seed = 0);
std::unique_ptr<Network> build_network(const Architecture& arch, std::uint64_t seed = 0);

}  // namespace ecgsal::models
