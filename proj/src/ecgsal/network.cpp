#include "ecgsal/network.hpp"

#include "ecgsal/error.hpp"

namespace ecgsal::models {

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

void validate(const CnnConfig& c) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, "cnn: " + what); };
  if (c.n_residual_blocks < 1) bad("n_residual_blocks must be >= 1");
  if (c.filters.size() != static_cast<std::size_t>(c.n_residual_blocks)) bad("filters needs one entry per block");
  if (c.downsample.size() != static_cast<std::size_t>(c.n_residual_blocks)) bad("downsample needs one entry per block");
  if (c.initial_filters < 1) bad("initial_filters must be positive");
  for (int f : c.filters) {
    if (f < 1) bad("filters must be positive");
  }
  for (int d : c.downsample) {
    if (d < 1) bad("downsample factors must be >= 1");
  }
  if (c.kernel_size < 1) bad("kernel_size must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) bad("dropout must be in [0,1)");
  if (c.input_length < 1) bad("input_length must be positive");
  if (c.n_classes < 2) bad("n_classes must be >= 2");
}

void validate(const LstmConfig& c) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, "lstm: " + what); };
  if (c.lstm_units < 1) bad("lstm_units must be >= 1");
  if (c.fc_sizes[0] < 1) bad("fc_sizes[0] must be positive");
  if (c.fc_sizes[1] != c.n_classes) bad("fc_sizes[1] is the output layer and must equal n_classes");
  if (c.timestep_width < 1 || c.input_length % c.timestep_width != 0) bad("timestep_width must divide input_length");
  if (c.n_classes < 2) bad("n_classes must be >= 2");
}

nlohmann::json to_json(const Architecture& arch) {
  return std::visit(Overloaded{[](const CnnConfig& c) -> nlohmann::json {
                                 return {{"n_residual_blocks", c.n_residual_blocks},
                                         {"initial_filters", c.initial_filters},
                                         {"filters", c.filters},
                                         {"kernel_size", c.kernel_size},
                                         {"downsample", c.downsample},
                                         {"dropout", c.dropout},
                                         {"input_length", c.input_length},
                                         {"n_classes", c.n_classes}};
                               },
                               [](const LstmConfig& c) -> nlohmann::json {
                                 return {{"lstm_units", c.lstm_units},
                                         {"fc_sizes", c.fc_sizes},
                                         {"timestep_width", c.timestep_width},
                                         {"input_length", c.input_length},
                                         {"n_classes", c.n_classes}};
                               }},
                    arch);
}

Architecture architecture_from_json(const std::string& tag, const nlohmann::json& j) {
  if (tag == "cnn") {
    CnnConfig c;
    c.n_residual_blocks = j.at("n_residual_blocks").get<int>();
    c.initial_filters = j.at("initial_filters").get<int>();
    c.filters = j.at("filters").get<std::vector<int>>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.downsample = j.at("downsample").get<std::vector<int>>();
    c.dropout = j.at("dropout").get<double>();
    c.input_length = j.at("input_length").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    return c;
  }
  if (tag == "lstm") {
    LstmConfig c;
    c.lstm_units = j.at("lstm_units").get<int>();
    c.fc_sizes = j.at("fc_sizes").get<std::array<int, 2>>();
    c.timestep_width = j.at("timestep_width").get<int>();
    c.input_length = j.at("input_length").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    return c;
  }
  fail(ErrorCode::InvalidConfig, "unknown architecture '" + tag + "'");
}

std::string arch_tag(const Architecture& arch) { return std::holds_alternative<CnnConfig>(arch) ? "cnn" : "lstm"; }

// --- CNN --------------------------------------------------------------------

CnnNetwork::CnnNetwork(const CnnConfig& config) : config_(config) {
  validate(config_);
  nn::SlotAllocator slots;
  const int k = config_.kernel_size;
  stem_conv_ = nn::Conv1d(store_, slots, "stem.conv", 1, config_.initial_filters, k, 1, false);
  stem_bn_ = nn::BatchNorm1d(store_, slots, "stem.bn", config_.initial_filters);
  stem_relu_ = nn::Relu(slots);

  int channels = config_.initial_filters;
  int length = config_.input_length;
  for (int b = 0; b < config_.n_residual_blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    const int out = config_.filters[static_cast<std::size_t>(b)];
    const int ds = config_.downsample[static_cast<std::size_t>(b)];
    Block blk;
    blk.conv1 = nn::Conv1d(store_, slots, name + ".conv1", channels, out, k, 1, false);
    blk.bn1 = nn::BatchNorm1d(store_, slots, name + ".bn1", out);
    blk.relu1 = nn::Relu(slots);
    blk.drop1 = nn::Dropout(slots, config_.dropout);
    blk.conv2 = nn::Conv1d(store_, slots, name + ".conv2", out, out, k, ds, false);
    blk.bn2 = nn::BatchNorm1d(store_, slots, name + ".bn2", out);
    blk.pool_skip = ds > 1;
    if (blk.pool_skip) blk.skip_pool = nn::MaxPool1d(slots, ds);
    blk.project_skip = channels != out;
    if (blk.project_skip) blk.skip_conv = nn::Conv1d(store_, slots, name + ".skip", channels, out, 1, 1, false);
    blk.relu_out = nn::Relu(slots);
    blk.drop_out = nn::Dropout(slots, config_.dropout);
    blocks_.push_back(std::move(blk));
    channels = out;
    length = (length + ds - 1) / ds;
  }
  final_channels_ = channels;
  final_length_ = length;
  head_ = nn::Dense(store_, slots, "head", channels * length, config_.n_classes);
  slot_count_ = slots.count();
}

void CnnNetwork::initialize(std::uint64_t seed) {
  Rng rng(seed);
  stem_conv_.init(store_, rng);
  for (const auto& blk : blocks_) {
    blk.conv1.init(store_, rng);
    blk.conv2.init(store_, rng);
    if (blk.project_skip) blk.skip_conv.init(store_, rng);
  }
  head_.init(store_, rng, false);
}

Mat CnnNetwork::forward(const Mat& x, nn::Tape& tape, const nn::Context& ctx) const {
  if (x.rows() != config_.input_length) fail(ErrorCode::ShapeMismatch, "cnn expects inputs of length " + std::to_string(config_.input_length));
  nn::Maps h(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index s = 0; s < x.cols(); ++s) h[static_cast<std::size_t>(s)] = x.col(s).transpose();

  h = stem_relu_.forward(stem_bn_.forward(store_, stem_conv_.forward(store_, h, tape), tape, ctx), tape);
  for (const auto& blk : blocks_) {
    nn::Maps main = blk.conv1.forward(store_, h, tape);
    main = blk.bn1.forward(store_, main, tape, ctx);
    main = blk.relu1.forward(main, tape);
    main = blk.drop1.forward(main, tape, ctx);
    main = blk.conv2.forward(store_, main, tape);
    main = blk.bn2.forward(store_, main, tape, ctx);
    nn::Maps skip = h;
    if (blk.pool_skip) skip = blk.skip_pool.forward(skip, tape);
    if (blk.project_skip) skip = blk.skip_conv.forward(store_, skip, tape);
    for (std::size_t s = 0; s < main.size(); ++s) main[s] += skip[s];
    h = blk.drop_out.forward(blk.relu_out.forward(main, tape), tape, ctx);
  }
  return head_.forward(store_, nn::flatten(h), tape);
}

Mat CnnNetwork::backward(const Mat& dlogits, const nn::Tape& tape, nn::Grads* grads) const {
  nn::Maps dh = nn::unflatten(head_.backward(store_, dlogits, tape, grads), final_channels_, final_length_);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    const Block& blk = *it;
    const nn::Maps dsum = blk.relu_out.backward(blk.drop_out.backward(dh, tape), tape);
    nn::Maps dmain = blk.bn2.backward(store_, dsum, tape, grads);
    dmain = blk.conv2.backward(store_, dmain, tape, grads);
    dmain = blk.drop1.backward(dmain, tape);
    dmain = blk.relu1.backward(dmain, tape);
    dmain = blk.bn1.backward(store_, dmain, tape, grads);
    dmain = blk.conv1.backward(store_, dmain, tape, grads);
    nn::Maps dskip = dsum;
    if (blk.project_skip) dskip = blk.skip_conv.backward(store_, dskip, tape, grads);
    if (blk.pool_skip) dskip = blk.skip_pool.backward(dskip, tape);
    for (std::size_t s = 0; s < dmain.size(); ++s) dmain[s] += dskip[s];
    dh = std::move(dmain);
  }
  dh = stem_conv_.backward(store_, stem_bn_.backward(store_, stem_relu_.backward(dh, tape), tape, grads), tape, grads);
  Mat dx(config_.input_length, static_cast<Eigen::Index>(dh.size()));
  for (std::size_t s = 0; s < dh.size(); ++s) dx.col(static_cast<Eigen::Index>(s)) = dh[s].row(0).transpose();
  return dx;
}

// --- LSTM -------------------------------------------------------------------

LstmNetwork::LstmNetwork(const LstmConfig& config) : config_(config) {
  validate(config_);
  nn::SlotAllocator slots;
  lstm_ = nn::Lstm(store_, slots, "lstm", config_.timestep_width, config_.lstm_units);
  fc1_ = nn::Dense(store_, slots, "fc1", config_.lstm_units, config_.fc_sizes[0]);
  relu_slot_ = slots.next();
  fc2_ = nn::Dense(store_, slots, "fc2", config_.fc_sizes[0], config_.fc_sizes[1]);
  slot_count_ = slots.count();
}

void LstmNetwork::initialize(std::uint64_t seed) {
  Rng rng(seed);
  lstm_.init(store_, rng);
  fc1_.init(store_, rng, true);
  fc2_.init(store_, rng, false);
}

std::size_t LstmNetwork::recurrent_parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : store_.tensors()) {
    if (t.name.starts_with("lstm.")) n += static_cast<std::size_t>(t.value.size());
  }
  return n;
}

Mat LstmNetwork::forward(const Mat& x, nn::Tape& tape, const nn::Context& /*ctx*/) const {
  if (x.rows() != config_.input_length) fail(ErrorCode::ShapeMismatch, "lstm expects inputs of length " + std::to_string(config_.input_length));
  const Mat h = lstm_.forward(store_, x, tape);
  const Mat z1 = fc1_.forward(store_, h, tape);
  tape.slots[static_cast<std::size_t>(relu_slot_)].a = (z1.array() > 0.0).cast<double>().matrix();
  return fc2_.forward(store_, nn::relu_columns(z1), tape);
}

Mat LstmNetwork::backward(const Mat& dlogits, const nn::Tape& tape, nn::Grads* grads) const {
  Mat d = fc2_.backward(store_, dlogits, tape, grads);
  d = d.cwiseProduct(tape.slots[static_cast<std::size_t>(relu_slot_)].a);
  d = fc1_.backward(store_, d, tape, grads);
  return lstm_.backward(store_, d, tape, grads);
}

// --- builders -----------------------------------------------------------------

std::unique_ptr<CnnNetwork> build_cnn(const CnnConfig& config, std::uint64_t seed) {
  auto net = std::make_unique<CnnNetwork>(config);
  net->initialize(seed);
  return net;
}

std::unique_ptr<LstmNetwork> build_lstm(const LstmConfig& config, std::uint64_t seed) {
  auto net = std::make_unique<LstmNetwork>(config);
  net->initialize(seed);
  return net;
}

std::unique_ptr<Network> build_network(const Architecture& arch, std::uint64_t seed) {
  return std::visit(Overloaded{[&](const CnnConfig& c) -> std::unique_ptr<Network> { return build_cnn(c, seed); },
                               [&](const LstmConfig& c) -> std::unique_ptr<Network> { return build_lstm(c, seed); }},
                    arch);
}

}  // namespace ecgsal::models
