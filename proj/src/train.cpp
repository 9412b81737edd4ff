#include "abfpe/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "abfpe/loss.hpp"

namespace abfpe {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.lr0 <= 0.0 || cfg.restart_lr <= 0.0)
    throw std::invalid_argument("learning rates must be positive");
  if (cfg.power <= 0.0) throw std::invalid_argument("power must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("momentum must lie in [0,1)");
  if (cfg.batch_size <= 0)
    throw std::invalid_argument("batch_size must be positive");
  if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (cfg.restart_fraction <= 0.0 || cfg.restart_fraction >= 1.0)
    throw std::invalid_argument("restart_fraction must lie in (0,1)");
  if (cfg.huber_delta <= 0.0)
    throw std::invalid_argument("huber_delta must be positive");
  if (cfg.checkpoint_every < 0)
    throw std::invalid_argument("checkpoint_every must be >= 0");
}

double batch_loss(const HeadOutputs& out,
                  const std::vector<EncodedTarget>& targets,
                  double huber_delta, HeadGrads* grads) {
  const int b = out.batch;
  if (static_cast<int>(targets.size()) != b)
    throw std::invalid_argument("batch_loss: target count does not match");
  const int class_len = kNumFingers * (out.anchor_count + 1);
  const int offset_len = kNumFingers * 2;

  if (grads) {
    grads->d_class_scores.assign(out.class_scores.size(), 0.0f);
    grads->d_offsets.assign(out.offsets.size(), 0.0f);
  }

  std::vector<double> scores(class_len), offsets(offset_len);
  std::vector<double> d_scores(class_len), d_offsets(offset_len);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const float* s = out.sample_scores(i);
    const float* o = out.sample_offsets(i);
    for (int j = 0; j < class_len; ++j) scores[j] = s[j];
    for (int j = 0; j < offset_len; ++j) offsets[j] = o[j];
    const SampleLoss loss = total_loss_sample(
        scores.data(), out.anchor_count + 1, offsets.data(), targets[i],
        huber_delta, grads ? d_scores.data() : nullptr,
        grads ? d_offsets.data() : nullptr);
    total += loss.total;
    if (grads) {
      float* ds = grads->d_class_scores.data() + static_cast<size_t>(i) * class_len;
      float* doff = grads->d_offsets.data() + static_cast<size_t>(i) * offset_len;
      for (int j = 0; j < class_len; ++j)
        ds[j] = static_cast<float>(d_scores[j] / b);
      for (int j = 0; j < offset_len; ++j)
        doff[j] = static_cast<float>(d_offsets[j] / b);
    }
  }
  return total / b;
}

void NesterovSgd::step(std::vector<ParamGroup>& params, double lr) {
  if (velocity_.empty()) {
    velocity_.resize(params.size());
    for (size_t g = 0; g < params.size(); ++g)
      velocity_[g].assign(params[g].values->size(), 0.0f);
  }
  const float mu = static_cast<float>(momentum_);
  const float rate = static_cast<float>(lr);
  for (size_t g = 0; g < params.size(); ++g) {
    float* v = velocity_[g].data();
    float* p = params[g].values->data();
    const float* grad = params[g].grads->data();
    const size_t n = params[g].values->size();
    for (size_t j = 0; j < n; ++j) {
      v[j] = mu * v[j] + grad[j];
      p[j] -= rate * (grad[j] + mu * v[j]);
    }
  }
}

TrainResult train(const TrainConfig& tc, const ModelConfig& mc,
                  const AugmentationConfig& aug,
                  const std::string& manifest_path, const std::string& out_dir,
                  std::uint64_t seed) {
  validate_train_config(tc);

  const ManifestLoad loaded = load_manifest(manifest_path, true);
  if (loaded.records.empty())
    throw std::runtime_error("manifest is empty: " + manifest_path);
  const int n = static_cast<int>(loaded.records.size());

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory: " + out_dir);

  const AnchorGrid grid =
      build_anchor_grid(mc.anchor_count, mc.input_size,
                        anchor_layout_from_string(mc.anchor_layout));

  // The random part of a sample is only the augmentation, so the crop and
  // resize are done once per record and cached.
  std::vector<CropSample> cache;
  cache.reserve(n);
  for (const auto& rec : loaded.records) {
    const ImageU8 frame = load_image(resolve_image_path(manifest_path, rec));
    cache.push_back(prepare_crop(frame, rec, mc.input_size));
  }

  const int batches_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  const std::int64_t total_iterations =
      static_cast<std::int64_t>(batches_per_epoch) * tc.epochs;
  const PolySchedule sched = make_poly_schedule(
      tc.lr0, tc.power, total_iterations, tc.restart_fraction, tc.restart_lr);

  Network net(mc, Rng::derive(seed, 0));
  auto params = net.params();
  NesterovSgd optimizer(tc.momentum);
  Rng shuffle_rng(Rng::derive(seed, 1));
  Rng aug_rng(Rng::derive(seed, 2));

  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write training log: " + log_path);
  log << std::setprecision(17);  // doubles survive the text round trip
  log << "epoch,iteration,lr,mean_loss\n";

  TrainResult result;
  result.log_path = log_path;
  result.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<EncodedTarget> targets;
  HeadGrads grads;
  std::int64_t iteration = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    double epoch_loss_sum = 0.0;
    double last_lr = 0.0;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int b = std::min(tc.batch_size, n - start);
      Tensor batch(b, 3, mc.input_size, mc.input_size);
      targets.assign(b, EncodedTarget{});
      for (int j = 0; j < b; ++j) {
        CropSample sample = cache[order[start + j]];
        augment_sample(sample, aug, aug_rng);
        TrainingSample enc = encode_sample(sample, grid);
        std::memcpy(batch.sample(j), enc.input.data(),
                    enc.input.size() * sizeof(float));
        targets[j] = enc.target;
      }

      const HeadOutputs out = net.forward(batch, true);
      const double loss = batch_loss(out, targets, tc.huber_delta, &grads);
      net.backward(grads);
      last_lr = poly_lr(sched, iteration);
      optimizer.step(params, last_lr);
      ++iteration;
      epoch_loss_sum += loss * b;
    }

    const double mean_loss = epoch_loss_sum / n;
    result.epoch_mean_loss.push_back(mean_loss);
    log << epoch << "," << iteration << "," << last_lr << "," << mean_loss
        << "\n";
    log.flush();

    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0 &&
        epoch < tc.epochs) {
      const std::string path =
          (fs::path(out_dir) / ("model_epoch_" + std::to_string(epoch) + ".ckpt"))
              .string();
      save_checkpoint(net, path);
    }
  }

  save_checkpoint(net, result.checkpoint_path);
  result.iterations = iteration;
  return result;
}

}  // namespace abfpe
