#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "abfpe/image.hpp"
#include "abfpe/rng.hpp"

using namespace abfpe;

namespace {

ImageU8 random_image(int w, int h, std::uint64_t seed) {
  ImageU8 img(w, h);
  Rng rng(seed);
  for (auto& v : img.pixels)
    v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

}  // namespace

TEST_CASE("bilinear sample at a pixel center returns that pixel") {
  ImageU8 img(4, 3);
  img.at(2, 1, 0) = 200;
  CHECK(bilinear_sample(img, 2.5, 1.5, 0) == doctest::Approx(200.0));
}

TEST_CASE("bilinear sample midway between two pixels averages them") {
  ImageU8 img(4, 3);
  img.at(1, 1, 2) = 100;
  img.at(2, 1, 2) = 200;
  CHECK(bilinear_sample(img, 2.0, 1.5, 2) == doctest::Approx(150.0));
}

TEST_CASE("bilinear sample clamps to the edge") {
  ImageU8 img(2, 2);
  img.at(0, 0, 1) = 77;
  CHECK(bilinear_sample(img, -5.0, -5.0, 1) == doctest::Approx(77.0));
}

TEST_CASE("crop_resize identity when crop equals the frame at input size") {
  const ImageU8 img = random_image(32, 32, 1);
  CropTransform t;
  t.crop_origin = {0, 0};
  t.crop_width = 32;
  t.crop_height = 32;
  t.input_size = 32;
  const ImageU8 out = crop_resize(img, t);
  REQUIRE(out.width == 32);
  REQUIRE(out.height == 32);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("crop_resize of a constant region is constant") {
  ImageU8 img(64, 48);
  for (auto& v : img.pixels) v = 131;
  CropTransform t;
  t.crop_origin = {10, 5};
  t.crop_width = 40;
  t.crop_height = 30;
  t.input_size = 16;
  const ImageU8 out = crop_resize(img, t);
  for (auto v : out.pixels) CHECK(v == 131);
}

TEST_CASE("horizontal flip mirrors columns and is an involution") {
  ImageU8 img = random_image(7, 5, 2);
  const ImageU8 orig = img;
  flip_horizontal_inplace(img);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(img.at(x, y, c) == orig.at(6 - x, y, c));
  flip_horizontal_inplace(img);
  CHECK(img.pixels == orig.pixels);
}

TEST_CASE("vertical flip mirrors rows and is an involution") {
  ImageU8 img = random_image(6, 4, 3);
  const ImageU8 orig = img;
  flip_vertical_inplace(img);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(img.at(x, y, c) == orig.at(x, 3 - y, c));
  flip_vertical_inplace(img);
  CHECK(img.pixels == orig.pixels);
}

TEST_CASE("quarter turns compose to the identity") {
  const ImageU8 img = random_image(9, 6, 4);
  ImageU8 r = img;
  for (int i = 0; i < 4; ++i) r = rotate_quarter_turns(r, 1);
  CHECK(r.width == img.width);
  CHECK(r.pixels == img.pixels);
  const ImageU8 r2 = rotate_quarter_turns(rotate_quarter_turns(img, 2), 2);
  CHECK(r2.pixels == img.pixels);
  const ImageU8 r3 =
      rotate_quarter_turns(rotate_quarter_turns(img, 1), 3);
  CHECK(r3.pixels == img.pixels);
}

TEST_CASE("one quarter turn moves a marked pixel as the continuous map") {
  // Pixel centered at (x+0.5, y+0.5) must land at (H-y-0.5, x+0.5).
  ImageU8 img(8, 6);
  img.at(3, 1, 0) = 250;
  const ImageU8 r = rotate_quarter_turns(img, 1);
  REQUIRE(r.width == 6);
  REQUIRE(r.height == 8);
  CHECK(r.at(4, 3, 0) == 250);
}

TEST_CASE("square quarter turn matches bilinear rotation") {
  const ImageU8 img = random_image(32, 32, 5);
  const ImageU8 exact = rotate_quarter_turns(img, 1);
  const ImageU8 sampled = rotate_about_center(img, 90.0);
  REQUIRE(sampled.width == 32);
  int max_diff = 0;
  for (size_t i = 0; i < exact.pixels.size(); ++i)
    max_diff = std::max(max_diff,
                        std::abs(int(exact.pixels[i]) - int(sampled.pixels[i])));
  // Bilinear weights at exact grid positions are 1, so the images agree.
  CHECK(max_diff <= 1);
}

TEST_CASE("rotation by zero degrees is the identity") {
  const ImageU8 img = random_image(20, 14, 6);
  const ImageU8 r = rotate_about_center(img, 0.0);
  CHECK(r.pixels == img.pixels);
}

TEST_CASE("chw conversion scales to unit range and transposes") {
  ImageU8 img(3, 2);
  img.at(1, 0, 0) = 255;
  img.at(2, 1, 1) = 51;
  const std::vector<float> t = to_chw_float(img);
  REQUIRE(t.size() == 3u * 2u * 3u);
  CHECK(t[0 * 6 + 0 * 3 + 1] == doctest::Approx(1.0f));
  CHECK(t[1 * 6 + 1 * 3 + 2] == doctest::Approx(0.2f));
  CHECK(t[2 * 6 + 0 * 3 + 0] == doctest::Approx(0.0f));
}

TEST_CASE("png round trip preserves bytes") {
  const ImageU8 img = random_image(31, 17, 7);
  const auto path =
      std::filesystem::temp_directory_path() / "abfpe_png_roundtrip.png";
  save_image(img, path.string());
  const ImageU8 back = load_image(path.string());
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove(path);
}

TEST_CASE("loading a missing file is an error") {
  CHECK_THROWS_AS(load_image("/nonexistent/abfpe.png"), std::runtime_error);
}
