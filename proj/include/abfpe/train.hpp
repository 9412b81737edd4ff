#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abfpe/data.hpp"
#include "abfpe/net.hpp"
#include "abfpe/schedule.hpp"

namespace abfpe {

struct TrainConfig {
  double lr0 = 1e-2;
  double power = 0.9;
  double momentum = 0.9;  // Nesterov variant
  int batch_size = 64;
  int epochs = 100;
  double restart_fraction = 0.25;
  double restart_lr = 6.5e-3;
  double huber_delta = 1.0;  // normalized-offset units
  int checkpoint_every = 10;  // epochs between periodic checkpoints; 0 = off
};

void validate_train_config(const TrainConfig& cfg);

/// Composite loss for a whole forward pass: per-sample losses computed in
/// double precision, averaged over the batch. When grads is non-null it
/// receives d(batch loss)/d(head outputs) in the HeadOutputs layouts.
double batch_loss(const HeadOutputs& out,
                  const std::vector<EncodedTarget>& targets,
                  double huber_delta, HeadGrads* grads = nullptr);

/// Nesterov-momentum SGD: v = mu*v + g, p -= lr*(g + mu*v).
class NesterovSgd {
 public:
  explicit NesterovSgd(double momentum) : momentum_(momentum) {}
  void step(std::vector<ParamGroup>& params, double lr);

 private:
  double momentum_;
  std::vector<std::vector<float>> velocity_;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<double> epoch_mean_loss;   // one entry per epoch
  std::int64_t iterations = 0;
};

/// Full training run: caches bbox crops for every manifest record, then
/// runs epochs x ceil(n/batch) iterations of Nesterov SGD on the composite
/// loss with the per-iteration poly schedule. Writes a CSV log (one line
/// per epoch: epoch, iteration, lr, mean_loss), periodic checkpoints, and
/// the final checkpoint out_dir/model.ckpt. Reproducible given seed.
TrainResult train(const TrainConfig& tc, const ModelConfig& mc,
                  const AugmentationConfig& aug,
                  const std::string& manifest_path, const std::string& out_dir,
                  std::uint64_t seed);

}  // namespace abfpe
