#pragma once

#include <vector>

#include "abfpe/geometry.hpp"

namespace abfpe {

/// Mean over the five finger rows of softmax cross-entropy. `scores` is
/// row-major 5 x n_classes, targets in [0, n_classes-1] (the extra class
/// n_classes-1 stands for an absent finger). When grad_scores is non-null
/// it receives d(loss)/d(scores), same layout.
double classification_loss(const double* scores, int n_classes,
                           const int* targets,
                           double* grad_scores = nullptr);

/// Huber loss on offset residuals, summed over the two components and
/// averaged over mask-true fingers; 0 when no finger is masked. Layouts
/// are row-major 5 x 2.
double regression_loss(const double* offsets, const double* target_offsets,
                       const bool* mask, double delta,
                       double* grad_offsets = nullptr);

struct SampleLoss {
  double total = 0.0;
  double classification = 0.0;
  double regression = 0.0;
};

/// Unweighted sum of the two terms for one sample.
SampleLoss total_loss_sample(const double* class_scores, int n_classes,
                             const double* offsets, const EncodedTarget& target,
                             double delta, double* grad_scores = nullptr,
                             double* grad_offsets = nullptr);

/// Scalar Huber value and derivative, exposed for oracle tests.
double huber(double r, double delta);
double huber_derivative(double r, double delta);

}  // namespace abfpe
