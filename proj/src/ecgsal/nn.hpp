#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "ecgsal/rng.hpp"

namespace ecgsal::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// One feature map per sample, channels x length.
using Maps = std::vector<Mat>;

struct Tensor {
  std::string name;
  Mat value;
  bool trainable = true;
};

class ParamStore {
 public:
  std::size_t add(std::string name, Mat init, bool trainable = true);

  Mat& value(std::size_t i) { return tensors_[i].value; }
  const Mat& value(std::size_t i) const { return tensors_[i].value; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t trainable_count() const;

 private:
  std::vector<Tensor> tensors_;
};

// Gradients aligned with ParamStore::tensors(); entries start empty and are
// sized on first accumulation.
struct Grads {
  std::vector<Mat> g;

  explicit Grads(const ParamStore& store) : g(store.size()) {}
  Mat& at(std::size_t i, Eigen::Index rows, Eigen::Index cols);
  void zero();
};

struct Context {
  bool training = false;
  Rng* rng = nullptr;             // dropout masks; required when training
  ParamStore* running = nullptr;  // batch-norm running statistics update target
};

// Per-layer forward state needed by backward.
struct Cache {
  bool training = false;
  Maps maps;
  Maps aux;
  std::vector<std::vector<int>> index;
  Mat a;
  Mat b;
  std::vector<Mat> seq;
  std::vector<Mat> seq2;
};

struct Tape {
  std::vector<Cache> slots;
};

// Slots are handed out at construction so a Tape can be sized up front.
class SlotAllocator {
 public:
  int next() { return count_++; }
  int count() const noexcept { return count_; }

 private:
  int count_ = 0;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamStore& store, SlotAllocator& slots, const std::string& name, int in_ch, int out_ch, int kernel, int stride,
         bool bias);

  // Keras-style "same" padding: output length ceil(L / stride).
  int output_length(int length) const noexcept { return (length + stride_ - 1) / stride_; }
  Maps forward(const ParamStore& p, const Maps& x, Tape& tape) const;
  Maps backward(const ParamStore& p, const Maps& dy, const Tape& tape, Grads* grads) const;
  void init(ParamStore& store, Rng& rng) const;
  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }

 private:
  int pad_left(int length) const noexcept;
  Mat im2col(const Mat& x) const;
  int slot_ = -1;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
  bool bias_ = false;
  int in_ = 0, out_ = 0, k_ = 0, stride_ = 1;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(ParamStore& store, SlotAllocator& slots, const std::string& name, int channels);

  Maps forward(const ParamStore& p, const Maps& x, Tape& tape, const Context& ctx) const;
  Maps backward(const ParamStore& p, const Maps& dy, const Tape& tape, Grads* grads) const;

  static constexpr double kEps = 1e-3;
  static constexpr double kMomentum = 0.99;

 private:
  int slot_ = -1;
  std::size_t gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0;
  int channels_ = 0;
};

class Relu {
 public:
  Relu() = default;
  explicit Relu(SlotAllocator& slots) : slot_(slots.next()) {}
  Maps forward(const Maps& x, Tape& tape) const;
  Maps backward(const Maps& dy, const Tape& tape) const;

 private:
  int slot_ = -1;
};

// Inverted dropout; identity at inference.
class Dropout {
 public:
  Dropout() = default;
  Dropout(SlotAllocator& slots, double rate) : slot_(slots.next()), rate_(rate) {}
  Maps forward(const Maps& x, Tape& tape, const Context& ctx) const;
  Maps backward(const Maps& dy, const Tape& tape) const;

 private:
  int slot_ = -1;
  double rate_ = 0.0;
};

// Non-overlapping max pooling; a trailing partial window is kept.
class MaxPool1d {
 public:
  MaxPool1d() = default;
  MaxPool1d(SlotAllocator& slots, int pool) : slot_(slots.next()), pool_(pool) {}
  Maps forward(const Maps& x, Tape& tape) const;
  Maps backward(const Maps& dy, const Tape& tape) const;

 private:
  int slot_ = -1;
  int pool_ = 1;
};

// Fully connected layer over column batches (features x batch).
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, SlotAllocator& slots, const std::string& name, int in, int out);
  Mat forward(const ParamStore& p, const Mat& x, Tape& tape) const;
  Mat backward(const ParamStore& p, const Mat& dy, const Tape& tape, Grads* grads) const;
  void init(ParamStore& store, Rng& rng, bool relu_follows) const;

 private:
  int slot_ = -1;
  std::size_t w_ = 0, b_ = 0;
  int in_ = 0, out_ = 0;
};

// Single LSTM layer (Keras gate order i, f, c, o) returning the last hidden
// state. The input column is read as timesteps of `width` features.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore& store, SlotAllocator& slots, const std::string& name, int width, int units);
  Mat forward(const ParamStore& p, const Mat& x, Tape& tape) const;
  Mat backward(const ParamStore& p, const Mat& dh_last, const Tape& tape, Grads* grads) const;
  void init(ParamStore& store, Rng& rng) const;

 private:
  int slot_ = -1;
  std::size_t w_ = 0, u_ = 0, b_ = 0;
  int width_ = 1, units_ = 0;
};

Mat relu_columns(const Mat& x);

// Column-wise softmax with max subtraction.
Mat softmax_columns(const Mat& logits);

// Stacks per-sample C x L maps into (C*L) x B, channel-major.
Mat flatten(const Maps& maps);
Maps unflatten(const Mat& flat, int channels, int length);

}  // namespace ecgsal::nn
