#include "abfpe/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abfpe {

double huber(double r, double delta) {
  const double a = std::abs(r);
  if (a <= delta) return 0.5 * r * r;
  return delta * (a - 0.5 * delta);
}

double huber_derivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

double classification_loss(const double* scores, int n_classes,
                           const int* targets, double* grad_scores) {
  if (n_classes < 2)
    throw std::invalid_argument("classification needs at least two classes");

  double loss = 0.0;
  for (int f = 0; f < kNumFingers; ++f) {
    const int target = targets[f];
    if (target < 0 || target >= n_classes)
      throw std::invalid_argument("target class out of range");

    const double* row = scores + f * n_classes;
    double m = row[0];
    for (int j = 1; j < n_classes; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n_classes; ++j) sum += std::exp(row[j] - m);
    const double lse = m + std::log(sum);
    loss += lse - row[target];

    if (grad_scores) {
      double* grow = grad_scores + f * n_classes;
      for (int j = 0; j < n_classes; ++j) {
        const double p = std::exp(row[j] - lse);
        grow[j] = (p - (j == target ? 1.0 : 0.0)) / kNumFingers;
      }
    }
  }
  return loss / kNumFingers;
}

double regression_loss(const double* offsets, const double* target_offsets,
                       const bool* mask, double delta, double* grad_offsets) {
  if (!(delta > 0.0)) throw std::invalid_argument("huber delta must be > 0");

  if (grad_offsets)
    std::fill(grad_offsets, grad_offsets + kNumFingers * 2, 0.0);

  int present = 0;
  for (int f = 0; f < kNumFingers; ++f) present += mask[f] ? 1 : 0;
  if (present == 0) return 0.0;

  double loss = 0.0;
  for (int f = 0; f < kNumFingers; ++f) {
    if (!mask[f]) continue;
    for (int c = 0; c < 2; ++c) {
      const double r = offsets[f * 2 + c] - target_offsets[f * 2 + c];
      loss += huber(r, delta);
      if (grad_offsets)
        grad_offsets[f * 2 + c] = huber_derivative(r, delta) / present;
    }
  }
  return loss / present;
}

SampleLoss total_loss_sample(const double* class_scores, int n_classes,
                             const double* offsets, const EncodedTarget& target,
                             double delta, double* grad_scores,
                             double* grad_offsets) {
  double flat_targets[kNumFingers * 2];
  for (int f = 0; f < kNumFingers; ++f) {
    flat_targets[f * 2 + 0] = target.offset[f][0];
    flat_targets[f * 2 + 1] = target.offset[f][1];
  }

  SampleLoss out;
  out.classification = classification_loss(class_scores, n_classes,
                                           target.anchor_class.data(),
                                           grad_scores);
  out.regression = regression_loss(offsets, flat_targets, target.mask.data(),
                                   delta, grad_offsets);
  out.total = out.classification + out.regression;
  return out;
}

}  // namespace abfpe
