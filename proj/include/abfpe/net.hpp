#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abfpe/rng.hpp"
#include "abfpe/types.hpp"

namespace abfpe {

/// Dense float NCHW tensor.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }
  float* sample(int i) { return data.data() + i * sample_size(); }
  const float* sample(int i) const { return data.data() + i * sample_size(); }
};

struct ModelConfig {
  int input_size = 224;
  int anchor_count = 24;
  std::string backbone = "reference_small";
  int neck_channels = 256;
  // Reference backbone depth. 4 keeps a stride-16 map; collapsing further
  // costs localization accuracy. Tests may shrink it for tiny inputs.
  int backbone_blocks = 4;
  std::string anchor_layout = "angular";
};

/// Raw two-head outputs for a batch: pre-softmax anchor-class scores of
/// shape B x 5 x (N+1) and normalized offsets of shape B x 5 x 2.
struct HeadOutputs {
  int batch = 0;
  int anchor_count = 0;
  std::vector<float> class_scores;
  std::vector<float> offsets;

  int class_row_size() const { return anchor_count + 1; }
  const float* sample_scores(int i) const {
    return class_scores.data() + static_cast<size_t>(i) * kNumFingers *
                                     (anchor_count + 1);
  }
  const float* sample_offsets(int i) const {
    return offsets.data() + static_cast<size_t>(i) * kNumFingers * 2;
  }
};

/// Upstream gradients for Network::backward, same layouts as HeadOutputs.
struct HeadGrads {
  std::vector<float> d_class_scores;
  std::vector<float> d_offsets;
};

struct ParamGroup {
  std::string name;
  std::vector<float>* values;
  std::vector<float>* grads;
};

class Conv2d {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad);

  void init(Rng& rng, double weight_std);
  int out_dim(int in) const;

  // Single-sample raw-buffer interfaces; see nn_kernels.hpp for layouts.
  void forward(const float* x, int h, int w, float* y,
               std::vector<float>& ws) const;
  void backward(const float* x, int h, int w, const float* dy, float* dx,
                std::vector<float>& col_ws, std::vector<float>& dcol_ws);

  void zero_grad();
  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }
  int kernel_size() const { return k_; }
  std::vector<float>& weights() { return w_; }
  std::vector<float>& bias() { return b_; }
  std::vector<float>& grad_weights() { return dw_; }
  std::vector<float>& grad_bias() { return db_; }
  const std::vector<float>& weights() const { return w_; }
  const std::vector<float>& bias() const { return b_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  std::vector<float> w_, b_, dw_, db_;
};

/// The two-head fingertip model: reference backbone (per block a 3x3
/// stride-2 conv plus a zero-initialized 3x3 residual refinement, ReLU) to
/// a stride-2^blocks map, a 1x1 neck that keeps the spatial grid, one
/// shared full-field hidden layer (kernel = grid side, ReLU) that
/// aggregates the whole map nonlinearly, and two 1x1 heads on top.
/// Collapsing the grid before the aggregation costs too much positional
/// information for this task.
class Network {
 public:
  explicit Network(const ModelConfig& cfg, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return cfg_; }

  /// Runs the batch through the net. keep_activations must be true when a
  /// backward pass will follow.
  HeadOutputs forward(const Tensor& batch, bool keep_activations = false);

  /// Backpropagates head gradients; accumulates into parameter grads
  /// (zeroed at the start of the call).
  void backward(const HeadGrads& grads);

  std::vector<ParamGroup> params();
  size_t parameter_count() const;

  /// Spatial side of the backbone output (input_size / 2^blocks).
  int backbone_out_size() const { return backbone_out_; }

 private:
  ModelConfig cfg_;
  std::vector<Conv2d> layers_;       // backbone blocks + neck
  std::vector<int> layer_in_sizes_;  // spatial side at each layer input
  std::vector<char> layer_residual_; // layer output adds its input pre-ReLU
  std::unique_ptr<Conv2d> head_hidden_;
  std::unique_ptr<Conv2d> head_class_;
  std::unique_ptr<Conv2d> head_offset_;
  int backbone_out_ = 0;
  // The hidden layer sums over backbone_out_^2 positions; a fixed output
  // scale pins its variance and gradient magnitude to a reference grid
  // size, so one learning-rate schedule works for every backbone depth.
  float head_scale_ = 1.0f;

  // forward state for backward
  std::vector<Tensor> acts_;  // acts_[0] = input, acts_[i+1] = relu(conv_i)
  Tensor hidden_;             // post-ReLU full-field hidden, B x C x 1 x 1
  Tensor d_input_;            // scratch
  std::vector<float> ws_a_, ws_b_;
  int last_batch_ = 0;
  bool have_acts_ = false;
};

/// Model handle returned by load_checkpoint. `network` is null for the
/// oracle stub (a checkpoint that stands in for a perfect predictor in
/// pipeline tests).
struct LoadedModel {
  ModelConfig cfg;
  std::unique_ptr<Network> network;
  bool oracle_stub = false;
};

/// Writes `path` (binary weights) plus `path + ".json"` (sidecar config).
void save_checkpoint(Network& net, const std::string& path);
void save_oracle_checkpoint(const ModelConfig& cfg, const std::string& path);

/// Restores a model; errors on a missing sidecar, a format-version
/// mismatch, or (when given) an anchor-count expectation mismatch.
LoadedModel load_checkpoint(const std::string& path,
                            std::optional<int> expect_anchor_count = {});

}  // namespace abfpe
