#include "abfpe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace abfpe {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp01sq(double v, double size) {
  return std::min(std::max(v, 0.0), size);
}

bool inside_square(const Point2& p, double size) {
  return p.x >= 0.0 && p.x <= size && p.y >= 0.0 && p.y <= size;
}

}  // namespace

std::string to_string(AnchorLayout layout) {
  switch (layout) {
    case AnchorLayout::kAngular:
      return "angular";
  }
  return "angular";
}

AnchorLayout anchor_layout_from_string(const std::string& name) {
  if (name == "angular") return AnchorLayout::kAngular;
  throw std::invalid_argument("unknown anchor layout: " + name);
}

AnchorGrid build_anchor_grid(int count, int size, AnchorLayout layout) {
  if (count < 3) throw std::invalid_argument("anchor count must be >= 3");
  if (size < 2) throw std::invalid_argument("anchor grid size must be >= 2");

  AnchorGrid grid;
  grid.size = size;
  grid.layout = layout;
  grid.points.reserve(count);

  const double s = static_cast<double>(size);
  const double cx = s / 2.0;
  const double cy = s / 2.0;

  for (int n = 0; n < count; ++n) {
    const double theta = 2.0 * kPi * static_cast<double>(n) / count;
    double dx = std::cos(theta);
    double dy = std::sin(theta);
    // Snap nearly axis-aligned rays so quarter-turn anchors land exactly.
    if (std::abs(dx) < 1e-12) dx = 0.0;
    if (std::abs(dy) < 1e-12) dy = 0.0;

    const double inf = std::numeric_limits<double>::infinity();
    const double tx = dx > 0.0 ? (s - cx) / dx : (dx < 0.0 ? -cx / dx : inf);
    const double ty = dy > 0.0 ? (s - cy) / dy : (dy < 0.0 ? -cy / dy : inf);

    Point2 p;
    const double t = std::min(tx, ty);
    const bool hit_x = tx <= ty * (1.0 + 1e-12);
    const bool hit_y = ty <= tx * (1.0 + 1e-12);
    p.x = hit_x ? (dx > 0.0 ? s : 0.0) : clamp01sq(cx + t * dx, s);
    p.y = hit_y ? (dy > 0.0 ? s : 0.0) : clamp01sq(cy + t * dy, s);
    grid.points.push_back(p);
  }
  return grid;
}

NearestAnchor nearest_anchor(const AnchorGrid& grid, const Point2& p) {
  if (!inside_square(p, grid.size))
    throw std::invalid_argument("point lies outside the model square");

  NearestAnchor best{0, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < grid.count(); ++i) {
    const double d = distance(grid.points[i], p);
    if (d < best.distance) best = {i, d};
  }
  return best;
}

EncodedTarget encode_targets(const AnchorGrid& grid, const FingertipSet& tips) {
  const int absent_class = grid.count();
  EncodedTarget target;
  for (int i = 0; i < kNumFingers; ++i) {
    const Fingertip& tip = tips.slots[i];
    if (!tip.present) {
      target.anchor_class[i] = absent_class;
      target.offset[i] = {0.0, 0.0};
      target.mask[i] = false;
      continue;
    }
    if (!inside_square(tip.point, grid.size))
      throw std::invalid_argument("present fingertip outside the model square");
    const NearestAnchor nearest = nearest_anchor(grid, tip.point);
    const Point2& anchor = grid.points[nearest.index];
    target.anchor_class[i] = nearest.index;
    target.offset[i] = {(tip.point.x - anchor.x) / grid.size,
                        (tip.point.y - anchor.y) / grid.size};
    target.mask[i] = true;
  }
  return target;
}

FingertipSet decode_predictions(const AnchorGrid& grid,
                                const double* class_scores,
                                const double* offsets) {
  const int n_classes = grid.count() + 1;
  FingertipSet tips;
  for (int i = 0; i < kNumFingers; ++i) {
    const double* row = class_scores + i * n_classes;
    int best = 0;
    for (int j = 1; j < n_classes; ++j)
      if (row[j] > row[best]) best = j;

    if (best == grid.count()) {
      tips.slots[i] = {Point2{}, false};
      continue;
    }
    const Point2& anchor = grid.points[best];
    Point2 p{anchor.x + offsets[i * 2 + 0] * grid.size,
             anchor.y + offsets[i * 2 + 1] * grid.size};
    p.x = clamp01sq(p.x, grid.size);
    p.y = clamp01sq(p.y, grid.size);
    tips.slots[i] = {p, true};
  }
  return tips;
}

FingertipSet decode_predictions(const AnchorGrid& grid,
                                const std::vector<double>& class_scores,
                                const std::vector<double>& offsets) {
  const size_t want_scores = kNumFingers * (grid.count() + 1);
  if (class_scores.size() != want_scores || offsets.size() != kNumFingers * 2)
    throw std::invalid_argument("decode_predictions: wrong head shapes");
  return decode_predictions(grid, class_scores.data(), offsets.data());
}

CropTransform crop_transform_from_bbox(const std::array<double, 4>& bbox,
                                       int frame_width, int frame_height,
                                       int input_size, double pad_fraction) {
  const double x_min = bbox[0], y_min = bbox[1];
  const double x_max = bbox[2], y_max = bbox[3];
  if (!(x_min >= 0.0 && x_min < x_max && x_max <= 1.0) ||
      !(y_min >= 0.0 && y_min < y_max && y_max <= 1.0))
    throw std::invalid_argument("bbox must satisfy 0 <= min < max <= 1");
  if (pad_fraction < 0.0)
    throw std::invalid_argument("pad_fraction must be >= 0");
  if (frame_width <= 0 || frame_height <= 0)
    throw std::invalid_argument("frame dimensions must be positive");
  if (input_size <= 0)
    throw std::invalid_argument("input_size must be positive");

  double x0 = x_min * frame_width;
  double x1 = x_max * frame_width;
  double y0 = y_min * frame_height;
  double y1 = y_max * frame_height;

  const double pad_x = pad_fraction * (x1 - x0);
  const double pad_y = pad_fraction * (y1 - y0);
  x0 = std::max(0.0, x0 - pad_x);
  x1 = std::min(static_cast<double>(frame_width), x1 + pad_x);
  y0 = std::max(0.0, y0 - pad_y);
  y1 = std::min(static_cast<double>(frame_height), y1 + pad_y);

  if (!(x1 > x0) || !(y1 > y0))
    throw std::invalid_argument("degenerate crop after frame intersection");

  CropTransform t;
  t.crop_origin = {x0, y0};
  t.crop_width = x1 - x0;
  t.crop_height = y1 - y0;
  t.input_size = input_size;
  return t;
}

Point2 to_model_space(const CropTransform& t, const Point2& p) {
  return {(p.x - t.crop_origin.x) * t.input_size / t.crop_width,
          (p.y - t.crop_origin.y) * t.input_size / t.crop_height};
}

Point2 from_model_space(const CropTransform& t, const Point2& p) {
  return {t.crop_origin.x + p.x * t.crop_width / t.input_size,
          t.crop_origin.y + p.y * t.crop_height / t.input_size};
}

FingertipSet rotate_points(const FingertipSet& tips, double angle_deg,
                           const Point2& center, int size) {
  if (!std::isfinite(angle_deg))
    throw std::invalid_argument("rotation angle must be finite");
  const double theta = angle_deg * kPi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);

  FingertipSet out;
  for (int i = 0; i < kNumFingers; ++i) {
    const Fingertip& tip = tips.slots[i];
    if (!tip.present) {
      out.slots[i] = {Point2{}, false};
      continue;
    }
    const double dx = tip.point.x - center.x;
    const double dy = tip.point.y - center.y;
    const Point2 rotated{center.x + c * dx - s * dy,
                         center.y + s * dx + c * dy};
    if (!inside_square(rotated, size)) {
      out.slots[i] = {Point2{}, false};  // leaving the square drops the tip
    } else {
      out.slots[i] = {rotated, true};
    }
  }
  return out;
}

}  // namespace abfpe
