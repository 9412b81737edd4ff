#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "abfpe/data.hpp"
#include "abfpe/net.hpp"
#include "abfpe/types.hpp"

namespace abfpe {

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<double> errors;  // px distances of the TP pairs
};

/// Per-slot delta-circle matching: a slot counts TP when both sides are
/// present within delta, FN when the ground truth is unanswered, FP when a
/// prediction has no ground truth; an empty slot counts nothing.
MatchResult match_fingertips(const FingertipSet& pred, const FingertipSet& gt,
                             double delta);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Counting metrics with the 0/0 -> 0 convention.
Prf precision_recall_f1(std::int64_t tp, std::int64_t fp, std::int64_t fn);

/// Intersection over union of two boxes in a shared coordinate space.
double iou(const Box& a, const Box& b);

/// Fraction of images whose per-image average error falls at or under each
/// threshold. Thresholds must be ascending; errors must be non-empty.
std::vector<std::pair<double, double>> cde_curve(
    const std::vector<double>& per_image_errors,
    const std::vector<double>& thresholds);

struct DeltaMetrics {
  double delta = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  // Mean distance over all gt-present/pred-present pairs (no delta cutoff);
  // 0 with no_matched_pairs set when no slot ever pairs up.
  double avg_pixel_error = 0.0;
  bool no_matched_pairs = false;
  std::int64_t matched_pairs = 0;
  std::vector<DeltaMetrics> per_threshold;
  // Curve over images that produced at least one matched pair.
  std::vector<std::pair<double, double>> cde;
  std::int64_t actual_fingertips = 0;
  std::int64_t detected_fingertips = 0;
  std::int64_t images = 0;
  double mean_iou = -1.0;  // >= 0 only when predicted boxes were supplied
};

struct EvalOptions {
  std::vector<double> deltas{10.0, 15.0};
  // Optional JSON Lines {image, bbox} with predicted boxes; when set the
  // crops use these boxes and the report adds mean IoU against the ground
  // truth boxes.
  std::string pred_boxes_path;
};

/// Runs the full measurement pipeline over a manifest: crop, predict,
/// decode, map back to the original frame, accumulate every metric there.
MetricsReport evaluate(const LoadedModel& model,
                       const std::string& manifest_path,
                       const EvalOptions& opts = {});

/// Decodes one prepared crop with the model (network forward or, for the
/// oracle stub, ground truth pushed through encode/decode) and returns
/// fingertips in original-frame pixels.
FingertipSet predict_frame_tips(const LoadedModel& model,
                                const AnchorGrid& grid, const CropSample& s);

/// JSON report IO; read_report rejects other format versions.
void write_report(const MetricsReport& report, const std::string& checkpoint,
                  const std::string& manifest, const std::string& path);
MetricsReport read_report(const std::string& path);

/// FNV-1a 64-bit hash of a file's bytes, for report metadata.
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace abfpe
