#pragma once

#include <array>
#include <string>
#include <vector>

#include "abfpe/types.hpp"

namespace abfpe {

/// Placement rule for the boundary anchors. kAngular spaces center rays at
/// equal angles and intersects them with the square boundary; an
/// equal-perimeter variant can be added here without touching consumers.
enum class AnchorLayout { kAngular };

std::string to_string(AnchorLayout layout);
AnchorLayout anchor_layout_from_string(const std::string& name);

/// N fixed points on the boundary of the [0,size] x [0,size] model-input
/// square. Index 0 sits on the ray at angle 0 (+x), indices increase with
/// angle toward +y (downward on screen). Immutable after construction.
struct AnchorGrid {
  int size = 0;
  AnchorLayout layout = AnchorLayout::kAngular;
  std::vector<Point2> points;

  int count() const { return static_cast<int>(points.size()); }
};

/// Builds the anchor grid for a model input of side `size`.
/// count >= 3, size >= 2; every returned point lies exactly on the boundary.
AnchorGrid build_anchor_grid(int count, int size,
                             AnchorLayout layout = AnchorLayout::kAngular);

struct NearestAnchor {
  int index = 0;
  double distance = 0.0;
};

/// Minimum-distance anchor for a point inside the model square.
/// Ties resolve to the lowest index.
NearestAnchor nearest_anchor(const AnchorGrid& grid, const Point2& p);

/// Per-finger training target: nearest-anchor class (value N marks an
/// absent finger) and the signed offset from that anchor divided by the
/// input size. mask[i] is true iff finger i is present.
struct EncodedTarget {
  std::array<int, kNumFingers> anchor_class{};
  std::array<std::array<double, 2>, kNumFingers> offset{};
  std::array<bool, kNumFingers> mask{};
};

/// Encodes model-space fingertips against the grid. Present tips must lie
/// inside [0, grid.size]^2.
EncodedTarget encode_targets(const AnchorGrid& grid, const FingertipSet& tips);

/// Decodes raw head outputs back into model-space fingertips.
/// class_scores is row-major 5 x (N+1), offsets row-major 5 x 2. Argmax at
/// the extra class N marks the slot absent; ties resolve to the lowest
/// index; decoded points are clamped to the model square.
FingertipSet decode_predictions(const AnchorGrid& grid,
                                const double* class_scores,
                                const double* offsets);

FingertipSet decode_predictions(const AnchorGrid& grid,
                                const std::vector<double>& class_scores,
                                const std::vector<double>& offsets);

/// Invertible affine map between original-frame pixels and model-input
/// pixels: crop at crop_origin with extent crop_size, then scale each axis
/// onto [0, input_size].
struct CropTransform {
  Point2 crop_origin;
  double crop_width = 0.0;
  double crop_height = 0.0;
  int input_size = 0;
};

/// Denormalizes a bbox against the frame, expands it symmetrically by
/// pad_fraction of each side length, and intersects with the frame.
/// bbox = [x_min, y_min, x_max, y_max], all in [0,1] with min < max.
CropTransform crop_transform_from_bbox(const std::array<double, 4>& bbox,
                                       int frame_width, int frame_height,
                                       int input_size,
                                       double pad_fraction = 0.0);

Point2 to_model_space(const CropTransform& t, const Point2& p);
Point2 from_model_space(const CropTransform& t, const Point2& p);

/// Rotates every present tip about `center` by `angle_deg` (positive turns
/// +x toward +y). A tip that leaves [0, size]^2 becomes absent.
FingertipSet rotate_points(const FingertipSet& tips, double angle_deg,
                           const Point2& center, int size);

}  // namespace abfpe
