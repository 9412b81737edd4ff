#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "abfpe/geometry.hpp"
#include "abfpe/image.hpp"
#include "abfpe/rng.hpp"
#include "abfpe/types.hpp"

namespace abfpe {

/// One manifest line. Coordinates are normalized to the full frame; absent
/// fingertip slots carry present=false.
struct SampleRecord {
  std::string image;  // path relative to the manifest file
  int width = 0;
  int height = 0;
  Box bbox;
  FingertipSet fingertips;
};

struct ManifestIssue {
  int line = 0;  // 1-based line number in the manifest
  std::string message;
  bool fatal = false;
};

struct ManifestLoad {
  std::vector<SampleRecord> records;
  std::vector<ManifestIssue> issues;
};

/// Parses a JSON Lines manifest. Schema violations are fatal: strict mode
/// throws naming the line, lenient mode skips the line and records the
/// issue. A fingertip outside the bbox is a non-fatal warning either way.
ManifestLoad load_manifest(const std::string& path, bool strict = true);

void save_manifest(const std::vector<SampleRecord>& records,
                   const std::string& path);

/// Joins a record's relative image path onto the manifest's directory.
std::string resolve_image_path(const std::string& manifest_path,
                               const SampleRecord& rec);

struct AugmentationConfig {
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  double rotation_max_deg = 180.0;
  bool enabled = true;
};

struct SynthConfig {
  int count = 0;
  std::uint64_t seed = 0;
  int width = 640;
  int height = 480;
  // Weights over finger counts 1..5; nonnegative, not all zero.
  std::array<double, 5> finger_count_distribution{1, 1, 1, 1, 1};
};

/// Channel-wise contrast floor the renderer maintains between a fingertip
/// disk center and every nearby non-disk pixel.
constexpr int kMinTipContrast = 50;

/// Renders the synthetic hand set into out_dir (images/ plus
/// manifest.jsonl) and returns the manifest path. Deterministic per seed.
std::string generate_synthetic(const SynthConfig& cfg,
                               const std::string& out_dir);

/// A model-input patch with its keypoints mapped into model space.
struct CropSample {
  ImageU8 patch;
  FingertipSet tips;  // model-space px, clamped into [0,size]^2
  CropTransform transform;
};

/// Crops the record's bbox out of the frame and resizes to input_size.
/// Present tips that land outside the square are clamped onto it.
CropSample prepare_crop(const ImageU8& frame, const SampleRecord& rec,
                        int input_size, double pad_fraction = 0.0);

/// Applies horizontal flip, vertical flip, then rotation, identically to
/// pixels and keypoints. Draws exactly three variates from rng when
/// enabled (hflip, vflip, angle) regardless of which transforms fire; a
/// rotated-out tip becomes absent.
void augment_sample(CropSample& s, const AugmentationConfig& aug, Rng& rng);

struct TrainingSample {
  std::vector<float> input;  // CHW, values in [0,1]
  EncodedTarget target;
};

TrainingSample encode_sample(const CropSample& s, const AnchorGrid& grid);

/// Full pipeline: crop, augment, encode. Frame dimensions must match the
/// record.
TrainingSample make_training_sample(const ImageU8& frame,
                                    const SampleRecord& rec,
                                    const AnchorGrid& grid,
                                    const AugmentationConfig& aug, Rng& rng);

/// Distribution of fingertip distances to the nearest bbox edge, in
/// bbox-normalized units (center of the box = 0.5). Histogram bins cover
/// [0, 0.5] evenly; distances are clamped into that range first.
struct EdgeStats {
  std::array<double, 20> histogram{};  // fractions, summing to 1 when count>0
  double mean = 0.0;
  double median = 0.0;
  int count = 0;  // fingertips measured
};

EdgeStats edge_distance_statistics(const std::vector<SampleRecord>& records);

/// Per-tip render checks: distance from the annotated tip to the brightest
/// pixel in a +-6 px window, and the smallest channel-wise contrast between
/// the disk center and the surrounding ring.
struct TipRenderCheck {
  double recover_err_px = 0.0;
  int contrast = 255;
};

std::vector<TipRenderCheck> check_rendered_tips(const ImageU8& frame,
                                                const SampleRecord& rec);

/// Returns the record for the same scene rotated by k quarter turns
/// (the exact counterpart of rotate_quarter_turns on the raster), with
/// bbox and fingertips co-rotated.
SampleRecord rotate_record_quarter(const SampleRecord& rec, int k);

}  // namespace abfpe
