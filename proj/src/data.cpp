#include "abfpe/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace abfpe {

namespace {

using nlohmann::json;

SampleRecord parse_record(const std::string& line) {
  json j = json::parse(line);  // throws json::parse_error on bad JSON
  if (!j.is_object()) throw std::runtime_error("record is not a JSON object");

  SampleRecord rec;
  if (!j.contains("image") || !j["image"].is_string() ||
      j["image"].get<std::string>().empty())
    throw std::runtime_error("missing or empty 'image'");
  rec.image = j["image"].get<std::string>();

  for (const char* key : {"width", "height"}) {
    if (!j.contains(key) || !j[key].is_number_integer() ||
        j[key].get<int>() <= 0)
      throw std::runtime_error(std::string("'") + key +
                               "' must be a positive integer");
  }
  rec.width = j["width"].get<int>();
  rec.height = j["height"].get<int>();

  if (!j.contains("bbox") || !j["bbox"].is_array() || j["bbox"].size() != 4)
    throw std::runtime_error("'bbox' must be an array of 4 numbers");
  std::array<double, 4> b{};
  for (int i = 0; i < 4; ++i) {
    if (!j["bbox"][i].is_number())
      throw std::runtime_error("'bbox' must be an array of 4 numbers");
    b[i] = j["bbox"][i].get<double>();
  }
  for (double v : b)
    if (v < 0.0 || v > 1.0)
      throw std::runtime_error("bbox coordinates must lie in [0,1]");
  if (b[0] >= b[2]) throw std::runtime_error("bbox x_min must be < x_max");
  if (b[1] >= b[3]) throw std::runtime_error("bbox y_min must be < y_max");
  rec.bbox = {b[0], b[1], b[2], b[3]};

  if (!j.contains("fingertips") || !j["fingertips"].is_array() ||
      j["fingertips"].size() != kNumFingers)
    throw std::runtime_error("'fingertips' must be an array of 5 entries");
  for (int i = 0; i < kNumFingers; ++i) {
    const json& f = j["fingertips"][i];
    if (f.is_null()) continue;
    if (!f.is_array() || f.size() != 2 || !f[0].is_number() ||
        !f[1].is_number())
      throw std::runtime_error("fingertip " + std::to_string(i) +
                               " must be null or [x, y]");
    const double x = f[0].get<double>();
    const double y = f[1].get<double>();
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
      throw std::runtime_error("fingertip " + std::to_string(i) +
                               " coordinates must lie in [0,1]");
    rec.fingertips.slots[i] = {{x, y}, true};
  }
  return rec;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ManifestLoad load_manifest(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);

  ManifestLoad out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    SampleRecord rec;
    try {
      rec = parse_record(line);
    } catch (const std::exception& e) {
      if (strict)
        throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                 ": " + e.what());
      out.issues.push_back({line_no, e.what(), true});
      continue;
    }
    for (int i = 0; i < kNumFingers; ++i) {
      const auto& s = rec.fingertips.slots[i];
      if (s.present &&
          (s.point.x < rec.bbox.x_min || s.point.x > rec.bbox.x_max ||
           s.point.y < rec.bbox.y_min || s.point.y > rec.bbox.y_max))
        out.issues.push_back({line_no,
                              std::string("fingertip ") + std::to_string(i) +
                                  " (" + kFingerNames[i] + ") outside bbox",
                              false});
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void save_manifest(const std::vector<SampleRecord>& records,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  for (const auto& rec : records) {
    nlohmann::ordered_json j;
    j["image"] = rec.image;
    j["width"] = rec.width;
    j["height"] = rec.height;
    j["bbox"] = {rec.bbox.x_min, rec.bbox.y_min, rec.bbox.x_max,
                 rec.bbox.y_max};
    nlohmann::ordered_json tips = nlohmann::ordered_json::array();
    for (const auto& s : rec.fingertips.slots) {
      if (s.present)
        tips.push_back({s.point.x, s.point.y});
      else
        tips.push_back(nullptr);
    }
    j["fingertips"] = tips;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("short write on manifest: " + path);
}

std::string resolve_image_path(const std::string& manifest_path,
                               const SampleRecord& rec) {
  return (std::filesystem::path(manifest_path).parent_path() / rec.image)
      .string();
}

CropSample prepare_crop(const ImageU8& frame, const SampleRecord& rec,
                        int input_size, double pad_fraction) {
  if (frame.width != rec.width || frame.height != rec.height)
    throw std::invalid_argument("frame dimensions do not match the record");

  CropSample s;
  s.transform = crop_transform_from_bbox(
      {rec.bbox.x_min, rec.bbox.y_min, rec.bbox.x_max, rec.bbox.y_max},
      frame.width, frame.height, input_size, pad_fraction);
  s.patch = crop_resize(frame, s.transform);
  for (int i = 0; i < kNumFingers; ++i) {
    const auto& slot = rec.fingertips.slots[i];
    if (!slot.present) continue;
    const Point2 px{slot.point.x * frame.width, slot.point.y * frame.height};
    Point2 m = to_model_space(s.transform, px);
    m.x = std::clamp(m.x, 0.0, static_cast<double>(input_size));
    m.y = std::clamp(m.y, 0.0, static_cast<double>(input_size));
    s.tips.slots[i] = {m, true};
  }
  return s;
}

void augment_sample(CropSample& s, const AugmentationConfig& aug, Rng& rng) {
  if (aug.hflip_prob < 0.0 || aug.hflip_prob > 1.0 || aug.vflip_prob < 0.0 ||
      aug.vflip_prob > 1.0)
    throw std::invalid_argument("flip probabilities must lie in [0,1]");
  if (aug.rotation_max_deg < 0.0)
    throw std::invalid_argument("rotation_max_deg must be >= 0");
  if (!aug.enabled) return;

  const int size = s.transform.input_size;
  const double u_h = rng.uniform();
  const double u_v = rng.uniform();
  const double u_a = rng.uniform();

  if (u_h < aug.hflip_prob) {
    flip_horizontal_inplace(s.patch);
    for (auto& slot : s.tips.slots)
      if (slot.present) slot.point.x = size - slot.point.x;
  }
  if (u_v < aug.vflip_prob) {
    flip_vertical_inplace(s.patch);
    for (auto& slot : s.tips.slots)
      if (slot.present) slot.point.y = size - slot.point.y;
  }
  const double angle = (2.0 * u_a - 1.0) * aug.rotation_max_deg;
  if (angle != 0.0) {
    s.patch = rotate_about_center(s.patch, angle);
    s.tips = rotate_points(s.tips, angle, {size / 2.0, size / 2.0}, size);
  }
}

TrainingSample encode_sample(const CropSample& s, const AnchorGrid& grid) {
  if (grid.size != s.transform.input_size)
    throw std::invalid_argument("anchor grid size does not match the crop");
  return {to_chw_float(s.patch), encode_targets(grid, s.tips)};
}

TrainingSample make_training_sample(const ImageU8& frame,
                                    const SampleRecord& rec,
                                    const AnchorGrid& grid,
                                    const AugmentationConfig& aug, Rng& rng) {
  CropSample s = prepare_crop(frame, rec, grid.size);
  augment_sample(s, aug, rng);
  return encode_sample(s, grid);
}

EdgeStats edge_distance_statistics(const std::vector<SampleRecord>& records) {
  std::vector<double> dists;
  for (const auto& rec : records) {
    for (const auto& slot : rec.fingertips.slots) {
      if (!slot.present) continue;
      const double u = (slot.point.x - rec.bbox.x_min) / rec.bbox.width();
      const double v = (slot.point.y - rec.bbox.y_min) / rec.bbox.height();
      const double d =
          std::min(std::min(u, 1.0 - u), std::min(v, 1.0 - v));
      dists.push_back(std::clamp(d, 0.0, 0.5));
    }
  }

  EdgeStats st;
  st.count = static_cast<int>(dists.size());
  if (dists.empty()) return st;

  const double bin_width = 0.5 / st.histogram.size();
  for (double d : dists) {
    const int bin = std::min(static_cast<int>(st.histogram.size()) - 1,
                             static_cast<int>(d / bin_width));
    st.histogram[bin] += 1.0;
  }
  for (auto& h : st.histogram) h /= st.count;

  double sum = 0.0;
  for (double d : dists) sum += d;
  st.mean = sum / st.count;

  std::sort(dists.begin(), dists.end());
  const size_t mid = dists.size() / 2;
  st.median = dists.size() % 2 == 1
                  ? dists[mid]
                  : 0.5 * (dists[mid - 1] + dists[mid]);
  return st;
}

std::vector<TipRenderCheck> check_rendered_tips(const ImageU8& frame,
                                                const SampleRecord& rec) {
  std::vector<TipRenderCheck> checks;
  for (const auto& slot : rec.fingertips.slots) {
    if (!slot.present) continue;
    const double x = slot.point.x * frame.width;
    const double y = slot.point.y * frame.height;
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));

    TipRenderCheck check;

    // Brightest pixel in the +-6 window; the disk's radial highlight makes
    // the true center the luminance peak.
    int best = -1;
    Point2 best_center;
    for (int py = std::max(0, iy - 6);
         py <= std::min(frame.height - 1, iy + 6); ++py) {
      for (int px = std::max(0, ix - 6);
           px <= std::min(frame.width - 1, ix + 6); ++px) {
        const int lum =
            frame.at(px, py, 0) + frame.at(px, py, 1) + frame.at(px, py, 2);
        if (lum > best) {
          best = lum;
          best_center = {px + 0.5, py + 0.5};
        }
      }
    }
    check.recover_err_px = distance(best_center, {x, y});

    // Lowest channel-wise contrast between the center and a surrounding
    // ring that lies outside any disk radius the renderer uses.
    const std::uint8_t c0 = frame.at(ix, iy, 0);
    const std::uint8_t c1 = frame.at(ix, iy, 1);
    const std::uint8_t c2 = frame.at(ix, iy, 2);
    for (int py = std::max(0, iy - 21); py <= std::min(frame.height - 1, iy + 21);
         ++py) {
      for (int px = std::max(0, ix - 21);
           px <= std::min(frame.width - 1, ix + 21); ++px) {
        const double r = distance({px + 0.5, py + 0.5}, {x, y});
        if (r < 17.0 || r > 21.0) continue;
        const int diff = std::max(
            {std::abs(frame.at(px, py, 0) - c0),
             std::abs(frame.at(px, py, 1) - c1),
             std::abs(frame.at(px, py, 2) - c2)});
        check.contrast = std::min(check.contrast, diff);
      }
    }
    checks.push_back(check);
  }
  return checks;
}

SampleRecord rotate_record_quarter(const SampleRecord& rec, int k) {
  SampleRecord out = rec;
  k = ((k % 4) + 4) % 4;
  for (int turn = 0; turn < k; ++turn) {
    SampleRecord next = out;
    next.width = out.height;
    next.height = out.width;
    // One quarter turn maps a normalized point (x, y) to (1 - y, x).
    next.bbox = {1.0 - out.bbox.y_max, out.bbox.x_min, 1.0 - out.bbox.y_min,
                 out.bbox.x_max};
    for (int i = 0; i < kNumFingers; ++i) {
      const auto& s = out.fingertips.slots[i];
      next.fingertips.slots[i] =
          s.present ? Fingertip{{1.0 - s.point.y, s.point.x}, true}
                    : Fingertip{};
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace abfpe
