#include "abfpe/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "abfpe/nn_kernels.hpp"

namespace abfpe {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'B', 'F', 'P', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kReferenceWidths[5] = {16, 32, 64, 128, 256};
// Grid side whose summed-position head step the lr schedule was tuned for.
constexpr int kHeadReferenceSide = 7;

void check_model_config(const ModelConfig& cfg) {
  if (cfg.backbone != "reference_small")
    throw std::invalid_argument("unsupported backbone: " + cfg.backbone);
  if (cfg.anchor_count < 3)
    throw std::invalid_argument("anchor_count must be >= 3");
  if (cfg.neck_channels < 1)
    throw std::invalid_argument("neck_channels must be >= 1");
  if (cfg.backbone_blocks < 1 || cfg.backbone_blocks > 5)
    throw std::invalid_argument("backbone_blocks must lie in [1,5]");
  const int stride = 1 << cfg.backbone_blocks;
  if (cfg.input_size <= 0 || cfg.input_size % stride != 0)
    throw std::invalid_argument(
        "input_size must be divisible by the backbone stride (" +
        std::to_string(stride) + ")");
}

}  // namespace

Conv2d::Conv2d(int in_c, int out_c, int k, int stride, int pad)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
      w_(static_cast<size_t>(out_c) * in_c * k * k, 0.0f),
      b_(out_c, 0.0f),
      dw_(w_.size(), 0.0f),
      db_(out_c, 0.0f) {}

void Conv2d::init(Rng& rng, double weight_std) {
  for (auto& v : w_) v = static_cast<float>(rng.normal(0.0, weight_std));
  std::fill(b_.begin(), b_.end(), 0.0f);
}

int Conv2d::out_dim(int in) const {
  return nn::conv_out_dim(in, k_, stride_, pad_);
}

void Conv2d::forward(const float* x, int h, int w, float* y,
                     std::vector<float>& ws) const {
  nn::conv_forward(x, in_c_, h, w, w_.data(), b_.data(), out_c_, k_, stride_,
                   pad_, y, ws);
}

void Conv2d::backward(const float* x, int h, int w, const float* dy, float* dx,
                      std::vector<float>& col_ws, std::vector<float>& dcol_ws) {
  nn::conv_backward(x, in_c_, h, w, w_.data(), out_c_, k_, stride_, pad_, dy,
                    dx, dw_.data(), db_.data(), col_ws, dcol_ws);
}

void Conv2d::zero_grad() {
  std::fill(dw_.begin(), dw_.end(), 0.0f);
  std::fill(db_.begin(), db_.end(), 0.0f);
}

Network::Network(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  check_model_config(cfg);

  int channels = 3;
  int size = cfg.input_size;
  for (int b = 0; b < cfg.backbone_blocks; ++b) {
    layers_.emplace_back(channels, kReferenceWidths[b], 3, 2, 1);
    layer_in_sizes_.push_back(size);
    layer_residual_.push_back(false);
    channels = kReferenceWidths[b];
    size = layers_.back().out_dim(size);
    // Zero-initialized residual refinement: starts as identity, so extra
    // depth never slows early optimization.
    layers_.emplace_back(channels, channels, 3, 1, 1);
    layer_in_sizes_.push_back(size);
    layer_residual_.push_back(true);
  }
  backbone_out_ = size;

  layers_.emplace_back(channels, cfg.neck_channels, 1, 1, 0);
  layer_in_sizes_.push_back(size);
  layer_residual_.push_back(false);
  channels = cfg.neck_channels;

  head_hidden_ = std::make_unique<Conv2d>(channels, channels, size, 1, 0);
  head_class_ = std::make_unique<Conv2d>(
      channels, kNumFingers * (cfg.anchor_count + 1), 1, 1, 0);
  head_offset_ = std::make_unique<Conv2d>(channels, kNumFingers * 2, 1, 1, 0);
  // The full-field hidden layer sums over size^2 positions, so its output
  // variance and SGD step size grow with the grid area. Scaling by
  // kHeadReferenceSide/size pins both to a fixed reference grid: the
  // default lr schedule stays stable and equally fast at every depth.
  head_scale_ = static_cast<float>(kHeadReferenceSide) / static_cast<float>(size);

  Rng rng(Rng::derive(init_seed, 0xAB));
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (layer_residual_[l]) continue;  // residual branches start at zero
    const double fan_in = static_cast<double>(layers_[l].in_channels()) *
                          layers_[l].kernel_size() * layers_[l].kernel_size();
    layers_[l].init(rng, std::sqrt(2.0 / fan_in));
  }
  const double hidden_fan_in = static_cast<double>(channels) * size * size;
  head_hidden_->init(rng, std::sqrt(2.0 / hidden_fan_in));
  head_class_->init(rng, std::sqrt(1.0 / channels));
  head_offset_->init(rng, std::sqrt(1.0 / channels));
}

HeadOutputs Network::forward(const Tensor& batch, bool keep_activations) {
  if (batch.c != 3 || batch.h != cfg_.input_size || batch.w != cfg_.input_size)
    throw std::invalid_argument("forward: batch must be Bx3xSxS with S = " +
                                std::to_string(cfg_.input_size));
  for (const float v : batch.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("forward: batch contains non-finite values");

  const int b = batch.n;
  const int n_layers = static_cast<int>(layers_.size());
  acts_.resize(n_layers + 1);
  acts_[0] = batch;
  for (int l = 0; l < n_layers; ++l) {
    const int in_size = layer_in_sizes_[l];
    const int out_size = layers_[l].out_dim(in_size);
    acts_[l + 1] = Tensor(b, layers_[l].out_channels(), out_size, out_size);
  }

  for (int i = 0; i < b; ++i) {
    for (int l = 0; l < n_layers; ++l) {
      const int in_size = layer_in_sizes_[l];
      layers_[l].forward(acts_[l].sample(i), in_size, in_size,
                         acts_[l + 1].sample(i), ws_a_);
      float* y = acts_[l + 1].sample(i);
      const size_t count = acts_[l + 1].sample_size();
      if (layer_residual_[l]) {
        const float* x = acts_[l].sample(i);
        for (size_t j = 0; j < count; ++j) y[j] += x[j];
      }
      for (size_t j = 0; j < count; ++j) y[j] = std::max(y[j], 0.0f);
    }
  }

  HeadOutputs out;
  out.batch = b;
  out.anchor_count = cfg_.anchor_count;
  const int class_len = kNumFingers * (cfg_.anchor_count + 1);
  out.class_scores.resize(static_cast<size_t>(b) * class_len);
  out.offsets.resize(static_cast<size_t>(b) * kNumFingers * 2);

  const Tensor& feat = acts_.back();
  hidden_ = Tensor(b, head_hidden_->out_channels(), 1, 1);
  for (int i = 0; i < b; ++i) {
    float* h = hidden_.sample(i);
    head_hidden_->forward(feat.sample(i), backbone_out_, backbone_out_, h,
                          ws_a_);
    const size_t hn = hidden_.sample_size();
    for (size_t j = 0; j < hn; ++j)
      h[j] = std::max(h[j] * head_scale_, 0.0f);
    head_class_->forward(h, 1, 1,
                         out.class_scores.data() + static_cast<size_t>(i) * class_len,
                         ws_a_);
    head_offset_->forward(h, 1, 1,
                          out.offsets.data() + static_cast<size_t>(i) * kNumFingers * 2,
                          ws_a_);
  }

  last_batch_ = b;
  have_acts_ = keep_activations;
  if (!keep_activations) acts_.clear();
  return out;
}

void Network::backward(const HeadGrads& grads) {
  if (!have_acts_)
    throw std::logic_error("backward called without stored activations");
  const int b = last_batch_;
  const int n_layers = static_cast<int>(layers_.size());
  const int class_len = kNumFingers * (cfg_.anchor_count + 1);
  if (grads.d_class_scores.size() != static_cast<size_t>(b) * class_len ||
      grads.d_offsets.size() != static_cast<size_t>(b) * kNumFingers * 2)
    throw std::invalid_argument("backward: gradient shapes do not match");

  for (auto& layer : layers_) layer.zero_grad();
  head_hidden_->zero_grad();
  head_class_->zero_grad();
  head_offset_->zero_grad();

  const size_t feat_len = acts_.back().sample_size();
  const size_t hidden_len = hidden_.sample_size();
  std::vector<float> d_feat(feat_len);
  std::vector<float> d_hidden(hidden_len);
  std::vector<float> d_hidden_offset(hidden_len);
  std::vector<float> d_cur, d_next;

  for (int i = 0; i < b; ++i) {
    const Tensor& feat = acts_.back();
    const float* h = hidden_.sample(i);
    head_class_->backward(h, 1, 1,
                          grads.d_class_scores.data() +
                              static_cast<size_t>(i) * class_len,
                          d_hidden.data(), ws_a_, ws_b_);
    head_offset_->backward(h, 1, 1,
                           grads.d_offsets.data() +
                               static_cast<size_t>(i) * kNumFingers * 2,
                           d_hidden_offset.data(), ws_a_, ws_b_);
    // ReLU mask on the stored hidden activation, then the output scale.
    for (size_t j = 0; j < hidden_len; ++j) {
      d_hidden[j] = h[j] > 0.0f
                        ? (d_hidden[j] + d_hidden_offset[j]) * head_scale_
                        : 0.0f;
    }
    head_hidden_->backward(feat.sample(i), backbone_out_, backbone_out_,
                           d_hidden.data(), d_feat.data(), ws_a_, ws_b_);

    d_cur.assign(d_feat.begin(), d_feat.end());
    for (int l = n_layers - 1; l >= 0; --l) {
      // ReLU mask against the stored post-activation output.
      const float* act = acts_[l + 1].sample(i);
      const size_t count = acts_[l + 1].sample_size();
      for (size_t j = 0; j < count; ++j)
        if (act[j] <= 0.0f) d_cur[j] = 0.0f;

      const int in_size = layer_in_sizes_[l];
      float* dx = nullptr;
      if (l > 0) {
        d_next.resize(acts_[l].sample_size());
        dx = d_next.data();
      }
      layers_[l].backward(acts_[l].sample(i), in_size, in_size, d_cur.data(),
                          dx, ws_a_, ws_b_);
      // The skip path routes the masked gradient straight to the input.
      if (l > 0 && layer_residual_[l]) {
        const size_t n = acts_[l].sample_size();
        for (size_t j = 0; j < n; ++j) d_next[j] += d_cur[j];
      }
      if (l > 0) std::swap(d_cur, d_next);
    }
  }
}

std::vector<ParamGroup> Network::params() {
  std::vector<ParamGroup> groups;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    groups.push_back({base + ".weight", &layers_[l].weights(),
                      &layers_[l].grad_weights()});
    groups.push_back({base + ".bias", &layers_[l].bias(),
                      &layers_[l].grad_bias()});
  }
  groups.push_back({"head_hidden.weight", &head_hidden_->weights(),
                    &head_hidden_->grad_weights()});
  groups.push_back({"head_hidden.bias", &head_hidden_->bias(),
                    &head_hidden_->grad_bias()});
  groups.push_back({"head_class.weight", &head_class_->weights(),
                    &head_class_->grad_weights()});
  groups.push_back({"head_class.bias", &head_class_->bias(),
                    &head_class_->grad_bias()});
  groups.push_back({"head_offset.weight", &head_offset_->weights(),
                    &head_offset_->grad_weights()});
  groups.push_back({"head_offset.bias", &head_offset_->bias(),
                    &head_offset_->grad_bias()});
  return groups;
}

size_t Network::parameter_count() const {
  size_t total = 0;
  for (const auto& layer : layers_)
    total += layer.weights().size() + layer.bias().size();
  total += head_hidden_->weights().size() + head_hidden_->bias().size();
  total += head_class_->weights().size() + head_class_->bias().size();
  total += head_offset_->weights().size() + head_offset_->bias().size();
  return total;
}

namespace {

nlohmann::ordered_json sidecar_json(const ModelConfig& cfg) {
  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["input_size"] = cfg.input_size;
  meta["anchor_count"] = cfg.anchor_count;
  meta["anchor_layout"] = cfg.anchor_layout;
  meta["backbone"] = cfg.backbone;
  meta["neck_channels"] = cfg.neck_channels;
  meta["backbone_blocks"] = cfg.backbone_blocks;
  return meta;
}

void write_sidecar(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path + ".json");
  if (!out) throw std::runtime_error("cannot write sidecar: " + path + ".json");
  out << sidecar_json(cfg).dump(2) << "\n";
}

void write_checkpoint_file(const std::string& path,
                           const std::vector<ParamGroup>& groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint32_t count = static_cast<std::uint32_t>(groups.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& g : groups) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(g.name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(g.name.data(), name_len);
    const std::uint64_t n = g.values->size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(g.values->data()),
              static_cast<std::streamsize>(n * sizeof(float)));
  }
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

ModelConfig read_sidecar(const std::string& path) {
  const std::string sidecar = path + ".json";
  std::ifstream in(sidecar);
  if (!in)
    throw std::runtime_error("missing checkpoint sidecar: " + sidecar);
  nlohmann::json meta = nlohmann::json::parse(in);
  const std::uint32_t version = meta.at("format_version").get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("incompatible checkpoint format_version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  ModelConfig cfg;
  cfg.input_size = meta.at("input_size").get<int>();
  cfg.anchor_count = meta.at("anchor_count").get<int>();
  cfg.anchor_layout = meta.at("anchor_layout").get<std::string>();
  cfg.backbone = meta.at("backbone").get<std::string>();
  cfg.neck_channels = meta.at("neck_channels").get<int>();
  cfg.backbone_blocks = meta.value("backbone_blocks", 5);
  return cfg;
}

}  // namespace

void save_checkpoint(Network& net, const std::string& path) {
  write_checkpoint_file(path, net.params());
  write_sidecar(net.config(), path);
}

void save_oracle_checkpoint(const ModelConfig& cfg, const std::string& path) {
  ModelConfig stub = cfg;
  stub.backbone = "oracle_stub";
  write_checkpoint_file(path, {});
  write_sidecar(stub, path);
}

LoadedModel load_checkpoint(const std::string& path,
                            std::optional<int> expect_anchor_count) {
  ModelConfig cfg = read_sidecar(path);
  if (expect_anchor_count && cfg.anchor_count != *expect_anchor_count)
    throw std::runtime_error(
        "checkpoint anchor_count " + std::to_string(cfg.anchor_count) +
        " does not match requested grid of " +
        std::to_string(*expect_anchor_count));

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion)
    throw std::runtime_error("incompatible checkpoint version in " + path);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));

  LoadedModel loaded;
  loaded.cfg = cfg;
  if (cfg.backbone == "oracle_stub") {
    loaded.oracle_stub = true;
    return loaded;
  }

  loaded.network = std::make_unique<Network>(cfg);
  auto groups = loaded.network->params();
  if (count != groups.size())
    throw std::runtime_error("checkpoint tensor count mismatch in " + path);

  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));

    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const ParamGroup& g) { return g.name == name; });
    if (it == groups.end())
      throw std::runtime_error("unknown tensor '" + name + "' in " + path);
    if (it->values->size() != n)
      throw std::runtime_error("tensor '" + name + "' size mismatch in " + path);
    in.read(reinterpret_cast<char*>(it->values->data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return loaded;
}

}  // namespace abfpe
