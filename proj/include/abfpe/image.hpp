#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abfpe/geometry.hpp"
#include "abfpe/types.hpp"

namespace abfpe {

/// 8-bit RGB raster, interleaved row-major. Continuous coordinates put
/// (0,0) at the top-left corner of the top-left pixel, so pixel (r,c)
/// covers [c,c+1] x [r,r+1] and has its center at (c+0.5, r+0.5).
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  ImageU8() = default;
  ImageU8(int w, int h)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const { return pixels.empty(); }
};

/// Clamp-to-edge bilinear sample of one channel at a continuous point.
double bilinear_sample(const ImageU8& img, double x, double y, int channel);

/// Extracts the crop described by `t` and resizes it to
/// t.input_size x t.input_size with bilinear sampling.
ImageU8 crop_resize(const ImageU8& img, const CropTransform& t);

void flip_horizontal_inplace(ImageU8& img);
void flip_vertical_inplace(ImageU8& img);

/// Bilinear rotation about the image center (positive angle turns +x
/// toward +y); out-of-bounds samples clamp to the nearest edge pixel.
ImageU8 rotate_about_center(const ImageU8& img, double angle_deg);

/// Exact rotation by k quarter turns (k in 0..3, +x toward +y); no
/// resampling. Swaps width/height for odd k.
ImageU8 rotate_quarter_turns(const ImageU8& img, int k);

/// CHW float tensor with values in [0,1].
std::vector<float> to_chw_float(const ImageU8& img);

// PNG file IO (see image_io.cpp).
ImageU8 load_image(const std::string& path);
void save_image(const ImageU8& img, const std::string& path);

}  // namespace abfpe
