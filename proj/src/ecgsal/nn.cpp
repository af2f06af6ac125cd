#include "ecgsal/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ecgsal/error.hpp"
#include "ecgsal/parallel.hpp"

namespace ecgsal::nn {

namespace {

// Parameter gradients are reduced over fixed-size sample chunks in chunk
// order, so the sum does not depend on the worker count.
constexpr std::size_t kGradChunk = 16;

void uniform_fill(Mat& m, Rng& rng, double limit) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::size_t ParamStore::add(std::string name, Mat init, bool trainable) {
  tensors_.push_back({std::move(name), std::move(init), trainable});
  return tensors_.size() - 1;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (t.trainable) n += static_cast<std::size_t>(t.value.size());
  }
  return n;
}

Mat& Grads::at(std::size_t i, Eigen::Index rows, Eigen::Index cols) {
  if (g[i].size() == 0) g[i] = Mat::Zero(rows, cols);
  return g[i];
}

void Grads::zero() {
  for (auto& m : g) {
    if (m.size() != 0) m.setZero();
  }
}

// --- Conv1d ---------------------------------------------------------------

Conv1d::Conv1d(ParamStore& store, SlotAllocator& slots, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride, bool bias)
    : slot_(slots.next()), bias_(bias), in_(in_ch), out_(out_ch), k_(kernel), stride_(stride) {
  w_ = store.add(name + ".weight", Mat::Zero(out_ch, in_ch * kernel));
  if (bias_) b_ = store.add(name + ".bias", Mat::Zero(out_ch, 1));
}

void Conv1d::init(ParamStore& store, Rng& rng) const {
  uniform_fill(store.value(w_), rng, std::sqrt(6.0 / (in_ * k_)));
}

int Conv1d::pad_left(int length) const noexcept {
  const int total = std::max((output_length(length) - 1) * stride_ + k_ - length, 0);
  return total / 2;
}

Mat Conv1d::im2col(const Mat& x) const {
  const int length = static_cast<int>(x.cols());
  const int out_len = output_length(length);
  const int pl = pad_left(length);
  Mat col = Mat::Zero(in_ * k_, out_len);
  for (int o = 0; o < out_len; ++o) {
    const int base = o * stride_ - pl;
    for (int j = 0; j < k_; ++j) {
      const int src = base + j;
      if (src < 0 || src >= length) continue;
      for (int c = 0; c < in_; ++c) col(c * k_ + j, o) = x(c, src);
    }
  }
  return col;
}

Maps Conv1d::forward(const ParamStore& p, const Maps& x, Tape& tape) const {
  const Mat& w = p.value(w_);
  Maps y(x.size());
  parallel_for(x.size(), [&](std::size_t s) {
    if (x[s].rows() != in_) fail(ErrorCode::ShapeMismatch, "conv input channel mismatch");
    y[s].noalias() = w * im2col(x[s]);
    if (bias_) y[s].colwise() += p.value(b_).col(0);
  });
  tape.slots[static_cast<std::size_t>(slot_)].maps = x;
  return y;
}

Maps Conv1d::backward(const ParamStore& p, const Maps& dy, const Tape& tape, Grads* grads) const {
  const Maps& x = tape.slots[static_cast<std::size_t>(slot_)].maps;
  const Mat& w = p.value(w_);
  const std::size_t n = dy.size();
  const std::size_t chunks = (n + kGradChunk - 1) / kGradChunk;
  Maps dx(n);
  std::vector<Mat> dw_part(grads ? chunks : 0);
  std::vector<Mat> db_part(grads && bias_ ? chunks : 0);

  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kGradChunk;
    const std::size_t end = std::min(n, begin + kGradChunk);
    if (grads) dw_part[c] = Mat::Zero(w.rows(), w.cols());
    if (grads && bias_) db_part[c] = Mat::Zero(out_, 1);
    for (std::size_t s = begin; s < end; ++s) {
      const int length = static_cast<int>(x[s].cols());
      const int out_len = output_length(length);
      const int pl = pad_left(length);
      const Mat col = im2col(x[s]);
      if (grads) {
        dw_part[c].noalias() += dy[s] * col.transpose();
        if (bias_) db_part[c] += dy[s].rowwise().sum();
      }
      const Mat dcol = w.transpose() * dy[s];
      dx[s] = Mat::Zero(in_, length);
      for (int o = 0; o < out_len; ++o) {
        const int base = o * stride_ - pl;
        for (int j = 0; j < k_; ++j) {
          const int dst = base + j;
          if (dst < 0 || dst >= length) continue;
          for (int ch = 0; ch < in_; ++ch) dx[s](ch, dst) += dcol(ch * k_ + j, o);
        }
      }
    }
  });

  if (grads) {
    Mat& gw = grads->at(w_, w.rows(), w.cols());
    for (const auto& part : dw_part) gw += part;
    if (bias_) {
      Mat& gb = grads->at(b_, out_, 1);
      for (const auto& part : db_part) gb += part;
    }
  }
  return dx;
}

// --- BatchNorm1d ----------------------------------------------------------

BatchNorm1d::BatchNorm1d(ParamStore& store, SlotAllocator& slots, const std::string& name, int channels)
    : slot_(slots.next()), channels_(channels) {
  gamma_ = store.add(name + ".gamma", Mat::Ones(channels, 1));
  beta_ = store.add(name + ".beta", Mat::Zero(channels, 1));
  mean_ = store.add(name + ".running_mean", Mat::Zero(channels, 1), false);
  var_ = store.add(name + ".running_var", Mat::Ones(channels, 1), false);
}

Maps BatchNorm1d::forward(const ParamStore& p, const Maps& x, Tape& tape, const Context& ctx) const {
  Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  cache.training = ctx.training;
  const Mat& gamma = p.value(gamma_);
  const Mat& beta = p.value(beta_);
  Maps y(x.size());

  Vec mean(channels_), inv_std(channels_);
  if (ctx.training) {
    double count = 0.0;
    Vec sum = Vec::Zero(channels_);
    for (const auto& m : x) {
      sum += m.rowwise().sum();
      count += static_cast<double>(m.cols());
    }
    mean = sum / count;
    Vec sq = Vec::Zero(channels_);
    for (const auto& m : x) sq += (m.colwise() - mean).array().square().matrix().rowwise().sum();
    const Vec var = sq / count;
    inv_std = (var.array() + kEps).rsqrt();
    if (ctx.running) {
      Mat& rm = ctx.running->value(mean_);
      Mat& rv = ctx.running->value(var_);
      rm = kMomentum * rm + (1.0 - kMomentum) * mean;
      rv = kMomentum * rv + (1.0 - kMomentum) * var;
    }
    cache.aux.resize(x.size());
  } else {
    mean = p.value(mean_).col(0);
    inv_std = (p.value(var_).col(0).array() + kEps).rsqrt();
    cache.aux.clear();
  }
  cache.a = inv_std;

  for (std::size_t s = 0; s < x.size(); ++s) {
    Mat xhat = (x[s].colwise() - mean);
    xhat.array().colwise() *= inv_std.array();
    y[s] = xhat;
    y[s].array().colwise() *= gamma.col(0).array();
    y[s].colwise() += beta.col(0);
    if (ctx.training) cache.aux[s] = std::move(xhat);
  }
  if (!ctx.training) cache.maps = x;  // gamma gradient at inference needs x
  return y;
}

Maps BatchNorm1d::backward(const ParamStore& p, const Maps& dy, const Tape& tape, Grads* grads) const {
  const Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  const Vec gamma = p.value(gamma_).col(0);
  const Vec& inv_std = cache.a;
  Maps dx(dy.size());

  if (!cache.training) {
    const Vec scale = gamma.array() * inv_std.array();
    const Vec mean = p.value(mean_).col(0);
    Vec dgamma = Vec::Zero(channels_), dbeta = Vec::Zero(channels_);
    for (std::size_t s = 0; s < dy.size(); ++s) {
      dx[s] = dy[s];
      dx[s].array().colwise() *= scale.array();
      if (grads) {
        Mat xhat = cache.maps[s].colwise() - mean;
        xhat.array().colwise() *= inv_std.array();
        dgamma += (dy[s].array() * xhat.array()).matrix().rowwise().sum();
        dbeta += dy[s].rowwise().sum();
      }
    }
    if (grads) {
      grads->at(gamma_, channels_, 1) += dgamma;
      grads->at(beta_, channels_, 1) += dbeta;
    }
    return dx;
  }

  double count = 0.0;
  Vec sum_dy = Vec::Zero(channels_), sum_dy_xhat = Vec::Zero(channels_);
  for (std::size_t s = 0; s < dy.size(); ++s) {
    sum_dy += dy[s].rowwise().sum();
    sum_dy_xhat += (dy[s].array() * cache.aux[s].array()).matrix().rowwise().sum();
    count += static_cast<double>(dy[s].cols());
  }
  if (grads) {
    grads->at(gamma_, channels_, 1) += sum_dy_xhat;
    grads->at(beta_, channels_, 1) += sum_dy;
  }
  const Vec k = gamma.array() * inv_std.array() / count;
  for (std::size_t s = 0; s < dy.size(); ++s) {
    Mat t = count * dy[s];
    t.colwise() -= sum_dy;
    t -= (cache.aux[s].array().colwise() * sum_dy_xhat.array()).matrix();
    t.array().colwise() *= k.array();
    dx[s] = std::move(t);
  }
  return dx;
}

// --- Relu / Dropout / MaxPool ----------------------------------------------

Maps Relu::forward(const Maps& x, Tape& tape) const {
  Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  Maps y(x.size());
  cache.aux.resize(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    y[s] = x[s].cwiseMax(0.0);
    cache.aux[s] = (x[s].array() > 0.0).cast<double>().matrix();
  }
  return y;
}

Maps Relu::backward(const Maps& dy, const Tape& tape) const {
  const Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  Maps dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) dx[s] = dy[s].cwiseProduct(cache.aux[s]);
  return dx;
}

Maps Dropout::forward(const Maps& x, Tape& tape, const Context& ctx) const {
  Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  cache.training = ctx.training && rate_ > 0.0;
  if (!cache.training) return x;
  if (!ctx.rng) fail(ErrorCode::Internal, "dropout in training mode needs an rng");
  const double keep = 1.0 - rate_;
  Maps y(x.size());
  cache.aux.resize(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    Mat mask(x[s].rows(), x[s].cols());
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = ctx.rng->uniform01() < keep ? 1.0 / keep : 0.0;
    }
    y[s] = x[s].cwiseProduct(mask);
    cache.aux[s] = std::move(mask);
  }
  return y;
}

Maps Dropout::backward(const Maps& dy, const Tape& tape) const {
  const Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  if (!cache.training) return dy;
  Maps dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) dx[s] = dy[s].cwiseProduct(cache.aux[s]);
  return dx;
}

Maps MaxPool1d::forward(const Maps& x, Tape& tape) const {
  Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  Maps y(x.size());
  cache.index.assign(x.size(), {});
  cache.a.resize(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t s = 0; s < x.size(); ++s) {
    const int length = static_cast<int>(x[s].cols());
    const int out_len = (length + pool_ - 1) / pool_;
    const int ch = static_cast<int>(x[s].rows());
    y[s].resize(ch, out_len);
    auto& idx = cache.index[s];
    idx.resize(static_cast<std::size_t>(ch * out_len));
    for (int o = 0; o < out_len; ++o) {
      const int begin = o * pool_;
      const int end = std::min(length, begin + pool_);
      for (int c = 0; c < ch; ++c) {
        int best = begin;
        for (int t = begin + 1; t < end; ++t) {
          if (x[s](c, t) > x[s](c, best)) best = t;
        }
        y[s](c, o) = x[s](c, best);
        idx[static_cast<std::size_t>(c * out_len + o)] = best;
      }
    }
    cache.a(static_cast<Eigen::Index>(s), 0) = length;
  }
  return y;
}

Maps MaxPool1d::backward(const Maps& dy, const Tape& tape) const {
  const Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  Maps dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) {
    const int ch = static_cast<int>(dy[s].rows());
    const int out_len = static_cast<int>(dy[s].cols());
    dx[s] = Mat::Zero(ch, static_cast<Eigen::Index>(cache.a(static_cast<Eigen::Index>(s), 0)));
    const auto& idx = cache.index[s];
    for (int c = 0; c < ch; ++c) {
      for (int o = 0; o < out_len; ++o) dx[s](c, idx[static_cast<std::size_t>(c * out_len + o)]) += dy[s](c, o);
    }
  }
  return dx;
}

// --- Dense ----------------------------------------------------------------

Dense::Dense(ParamStore& store, SlotAllocator& slots, const std::string& name, int in, int out)
    : slot_(slots.next()), in_(in), out_(out) {
  w_ = store.add(name + ".weight", Mat::Zero(out, in));
  b_ = store.add(name + ".bias", Mat::Zero(out, 1));
}

void Dense::init(ParamStore& store, Rng& rng, bool relu_follows) const {
  uniform_fill(store.value(w_), rng, std::sqrt((relu_follows ? 6.0 : 3.0) / in_));
}

Mat Dense::forward(const ParamStore& p, const Mat& x, Tape& tape) const {
  if (x.rows() != in_) fail(ErrorCode::ShapeMismatch, "dense input width mismatch");
  tape.slots[static_cast<std::size_t>(slot_)].a = x;
  Mat y = p.value(w_) * x;
  y.colwise() += p.value(b_).col(0);
  return y;
}

Mat Dense::backward(const ParamStore& p, const Mat& dy, const Tape& tape, Grads* grads) const {
  const Mat& x = tape.slots[static_cast<std::size_t>(slot_)].a;
  if (grads) {
    grads->at(w_, out_, in_).noalias() += dy * x.transpose();
    grads->at(b_, out_, 1) += dy.rowwise().sum();
  }
  return p.value(w_).transpose() * dy;
}

// --- Lstm -----------------------------------------------------------------

Lstm::Lstm(ParamStore& store, SlotAllocator& slots, const std::string& name, int width, int units)
    : slot_(slots.next()), width_(width), units_(units) {
  w_ = store.add(name + ".kernel", Mat::Zero(4 * units, width));
  u_ = store.add(name + ".recurrent_kernel", Mat::Zero(4 * units, units));
  b_ = store.add(name + ".bias", Mat::Zero(4 * units, 1));
}

void Lstm::init(ParamStore& store, Rng& rng) const {
  uniform_fill(store.value(w_), rng, std::sqrt(3.0 / width_));
  uniform_fill(store.value(u_), rng, std::sqrt(3.0 / units_));
  store.value(b_).setZero();
  store.value(b_).block(units_, 0, units_, 1).setOnes();  // forget gate
}

Mat Lstm::forward(const ParamStore& p, const Mat& x, Tape& tape) const {
  if (x.rows() % width_ != 0) fail(ErrorCode::ShapeMismatch, "input length not divisible by timestep width");
  Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  const Eigen::Index steps = x.rows() / width_;
  const Eigen::Index batch = x.cols();
  const Eigen::Index h = units_;
  const Mat& w = p.value(w_);
  const Mat& u = p.value(u_);
  const Vec bias = p.value(b_).col(0);

  cache.a = x;
  cache.seq.resize(static_cast<std::size_t>(steps));   // activated gates i,f,g,o stacked
  cache.seq2.resize(static_cast<std::size_t>(steps) + 1);  // c_t; seq2[0] = c_0
  cache.maps.resize(static_cast<std::size_t>(steps) + 1);  // h_t; maps[0] = h_0
  cache.maps[0] = Mat::Zero(h, batch);
  cache.seq2[0] = Mat::Zero(h, batch);

  for (Eigen::Index t = 0; t < steps; ++t) {
    Mat z = w * x.middleRows(t * width_, width_) + u * cache.maps[static_cast<std::size_t>(t)];
    z.colwise() += bias;
    Mat gates(4 * h, batch);
    gates.topRows(2 * h) = z.topRows(2 * h).unaryExpr([](double v) { return sigmoid(v); });
    gates.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    gates.bottomRows(h) = z.bottomRows(h).unaryExpr([](double v) { return sigmoid(v); });
    const Mat& c_prev = cache.seq2[static_cast<std::size_t>(t)];
    Mat c = gates.middleRows(h, h).cwiseProduct(c_prev) + gates.topRows(h).cwiseProduct(gates.middleRows(2 * h, h));
    cache.maps[static_cast<std::size_t>(t) + 1] = gates.bottomRows(h).cwiseProduct(c.array().tanh().matrix());
    cache.seq2[static_cast<std::size_t>(t) + 1] = std::move(c);
    cache.seq[static_cast<std::size_t>(t)] = std::move(gates);
  }
  return cache.maps.back();
}

Mat Lstm::backward(const ParamStore& p, const Mat& dh_last, const Tape& tape, Grads* grads) const {
  const Cache& cache = tape.slots[static_cast<std::size_t>(slot_)];
  const Mat& x = cache.a;
  const Eigen::Index steps = static_cast<Eigen::Index>(cache.seq.size());
  const Eigen::Index batch = dh_last.cols();
  const Eigen::Index h = units_;
  const Mat& w = p.value(w_);
  const Mat& u = p.value(u_);

  Mat dx = Mat::Zero(x.rows(), batch);
  Mat dh = dh_last;
  Mat dc = Mat::Zero(h, batch);
  Mat* gw = grads ? &grads->at(w_, w.rows(), w.cols()) : nullptr;
  Mat* gu = grads ? &grads->at(u_, u.rows(), u.cols()) : nullptr;
  Mat* gb = grads ? &grads->at(b_, 4 * h, 1) : nullptr;

  Mat dz(4 * h, batch);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Mat& gates = cache.seq[static_cast<std::size_t>(t)];
    const auto i = gates.topRows(h).array();
    const auto f = gates.middleRows(h, h).array();
    const auto g = gates.middleRows(2 * h, h).array();
    const auto o = gates.bottomRows(h).array();
    const Mat& c = cache.seq2[static_cast<std::size_t>(t) + 1];
    const Mat& c_prev = cache.seq2[static_cast<std::size_t>(t)];
    const Eigen::ArrayXXd tc = c.array().tanh();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    dz.topRows(h) = (dc.array() * g * i * (1.0 - i)).matrix();
    dz.middleRows(h, h) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * h, h) = (dc.array() * i * (1.0 - g.square())).matrix();
    dz.bottomRows(h) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dc = (dc.array() * f).matrix();

    const Mat& h_prev = cache.maps[static_cast<std::size_t>(t)];
    if (grads) {
      gw->noalias() += dz * x.middleRows(t * width_, width_).transpose();
      gu->noalias() += dz * h_prev.transpose();
      *gb += dz.rowwise().sum();
    }
    dx.middleRows(t * width_, width_).noalias() = w.transpose() * dz;
    dh.noalias() = u.transpose() * dz;
  }
  return dx;
}

// --- helpers ----------------------------------------------------------------

Mat relu_columns(const Mat& x) { return x.cwiseMax(0.0); }

Mat softmax_columns(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const Vec e = (logits.col(j).array() - m).exp();
    out.col(j) = e / e.sum();
  }
  return out;
}

Mat flatten(const Maps& maps) {
  if (maps.empty()) return Mat();
  const Eigen::Index rows = maps[0].size();
  Mat flat(rows, static_cast<Eigen::Index>(maps.size()));
  for (std::size_t s = 0; s < maps.size(); ++s) {
    const Mat t = maps[s].transpose();
    flat.col(static_cast<Eigen::Index>(s)) = Eigen::Map<const Vec>(t.data(), rows);
  }
  return flat;
}

Maps unflatten(const Mat& flat, int channels, int length) {
  Maps maps(static_cast<std::size_t>(flat.cols()));
  for (Eigen::Index s = 0; s < flat.cols(); ++s) {
    const Vec col = flat.col(s);
    maps[static_cast<std::size_t>(s)] = Eigen::Map<const Mat>(col.data(), length, channels).transpose();
  }
  return maps;
}

}  // namespace ecgsal::nn
