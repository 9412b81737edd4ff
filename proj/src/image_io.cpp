#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

#include "abfpe/image.hpp"

namespace abfpe {

ImageU8 load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty())
    throw std::runtime_error("failed to read image: " + path);

  ImageU8 img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(x, y, 0) = row[x][2];
      img.at(x, y, 1) = row[x][1];
      img.at(x, y, 2) = row[x][0];
    }
  }
  return img;
}

void save_image(const ImageU8& img, const std::string& path) {
  if (img.empty()) throw std::invalid_argument("save_image: empty image");
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x][2] = img.at(x, y, 0);
      row[x][1] = img.at(x, y, 1);
      row[x][0] = img.at(x, y, 2);
    }
  }
  if (!cv::imwrite(path, bgr))
    throw std::runtime_error("failed to write image: " + path);
}

}  // namespace abfpe
