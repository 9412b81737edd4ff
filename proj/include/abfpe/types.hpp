#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace abfpe {

inline constexpr int kNumFingers = 5;

/// 2D point in pixel coordinates, y growing downward. The coordinate space
/// (original frame vs model input) is carried by context.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// One finger slot: a location plus a visibility flag. When `present` is
/// false the point is meaningless and ignored by all consumers.
struct Fingertip {
  Point2 point;
  bool present = false;
};

/// Five ordered fingertip slots: thumb, index, middle, ring, pinky.
struct FingertipSet {
  std::array<Fingertip, kNumFingers> slots;

  int present_count() const {
    int n = 0;
    for (const auto& s : slots) n += s.present ? 1 : 0;
    return n;
  }
};

inline constexpr const char* kFingerNames[kNumFingers] = {
    "thumb", "index", "middle", "ring", "pinky"};

/// Axis-aligned box, min-corner/max-corner. Units (normalized or pixels)
/// must be consistent per call site.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
};

}  // namespace abfpe
