#include "abfpe/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abfpe {

namespace {

inline std::uint8_t quantize(double v) {
  const double clamped = std::min(std::max(v, 0.0), 255.0);
  return static_cast<std::uint8_t>(std::floor(clamped + 0.5));
}

}  // namespace

double bilinear_sample(const ImageU8& img, double x, double y, int channel) {
  const double gx = x - 0.5;
  const double gy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double fx = gx - x0;
  const double fy = gy - y0;

  auto cx = [&](int v) { return std::clamp(v, 0, img.width - 1); };
  auto cy = [&](int v) { return std::clamp(v, 0, img.height - 1); };

  const double v00 = img.at(cx(x0), cy(y0), channel);
  const double v10 = img.at(cx(x0 + 1), cy(y0), channel);
  const double v01 = img.at(cx(x0), cy(y0 + 1), channel);
  const double v11 = img.at(cx(x0 + 1), cy(y0 + 1), channel);

  const double top = v00 + fx * (v10 - v00);
  const double bot = v01 + fx * (v11 - v01);
  return top + fy * (bot - top);
}

ImageU8 crop_resize(const ImageU8& img, const CropTransform& t) {
  if (img.empty()) throw std::invalid_argument("crop_resize: empty image");
  const int s = t.input_size;
  ImageU8 out(s, s);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const Point2 src = from_model_space(t, {c + 0.5, r + 0.5});
      for (int ch = 0; ch < 3; ++ch)
        out.at(c, r, ch) = quantize(bilinear_sample(img, src.x, src.y, ch));
    }
  }
  return out;
}

void flip_horizontal_inplace(ImageU8& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < 3; ++c)
        std::swap(img.at(x, y, c), img.at(img.width - 1 - x, y, c));
}

void flip_vertical_inplace(ImageU8& img) {
  for (int y = 0; y < img.height / 2; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        std::swap(img.at(x, y, c), img.at(x, img.height - 1 - y, c));
}

ImageU8 rotate_about_center(const ImageU8& img, double angle_deg) {
  const double theta = angle_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = img.width / 2.0;
  const double cy = img.height / 2.0;

  ImageU8 out(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int col = 0; col < img.width; ++col) {
      const double dx = (col + 0.5) - cx;
      const double dy = (r + 0.5) - cy;
      // inverse rotation of the output pixel center
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      for (int ch = 0; ch < 3; ++ch)
        out.at(col, r, ch) = quantize(bilinear_sample(img, sx, sy, ch));
    }
  }
  return out;
}

ImageU8 rotate_quarter_turns(const ImageU8& img, int k) {
  k = ((k % 4) + 4) % 4;
  ImageU8 out = img;
  for (int step = 0; step < k; ++step) {
    const ImageU8 in = out;
    ImageU8 next(in.height, in.width);
    // +90 degrees: (x, y) -> (H - y, x)
    for (int r = 0; r < next.height; ++r)
      for (int c = 0; c < next.width; ++c)
        for (int ch = 0; ch < 3; ++ch)
          next.at(c, r, ch) = in.at(r, in.height - 1 - c, ch);
    out = std::move(next);
  }
  return out;
}

std::vector<float> to_chw_float(const ImageU8& img) {
  const size_t plane = static_cast<size_t>(img.width) * img.height;
  std::vector<float> out(plane * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out[c * plane + static_cast<size_t>(y) * img.width + x] =
            static_cast<float>(img.at(x, y, c)) / 255.0f;
  return out;
}

}  // namespace abfpe
