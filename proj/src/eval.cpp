#include "abfpe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace abfpe {

MatchResult match_fingertips(const FingertipSet& pred, const FingertipSet& gt,
                             double delta) {
  if (delta <= 0.0) throw std::invalid_argument("delta must be positive");
  MatchResult m;
  for (int i = 0; i < kNumFingers; ++i) {
    const auto& g = gt.slots[i];
    const auto& p = pred.slots[i];
    if (g.present && p.present) {
      const double d = distance(g.point, p.point);
      if (d <= delta) {
        ++m.tp;
        m.errors.push_back(d);
      } else {
        ++m.fn;
      }
    } else if (g.present) {
      ++m.fn;
    } else if (p.present) {
      ++m.fp;
    }
  }
  return m;
}

Prf precision_recall_f1(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0)
    throw std::invalid_argument("counts must be >= 0");
  Prf out;
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

double iou(const Box& a, const Box& b) {
  if (a.width() <= 0.0 || a.height() <= 0.0 || b.width() <= 0.0 ||
      b.height() <= 0.0)
    throw std::invalid_argument("iou: degenerate box");
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::pair<double, double>> cde_curve(
    const std::vector<double>& per_image_errors,
    const std::vector<double>& thresholds) {
  if (per_image_errors.empty())
    throw std::invalid_argument("cde_curve: no per-image errors");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("cde_curve: thresholds must be ascending");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    std::int64_t under = 0;
    for (double e : per_image_errors) under += e <= t ? 1 : 0;
    curve.emplace_back(t, static_cast<double>(under) / per_image_errors.size());
  }
  return curve;
}

namespace {

FingertipSet decode_model_space(const LoadedModel& model,
                                const AnchorGrid& grid, const CropSample& s) {
  const int n_classes = grid.count() + 1;
  std::vector<double> scores(static_cast<size_t>(kNumFingers) * n_classes, 0.0);
  std::vector<double> offsets(kNumFingers * 2, 0.0);

  if (model.oracle_stub) {
    // Ground truth pushed through the real encode and decode paths.
    const EncodedTarget enc = encode_targets(grid, s.tips);
    for (int i = 0; i < kNumFingers; ++i) {
      scores[static_cast<size_t>(i) * n_classes + enc.anchor_class[i]] = 1.0;
      offsets[i * 2 + 0] = enc.offset[i][0];
      offsets[i * 2 + 1] = enc.offset[i][1];
    }
    return decode_predictions(grid, scores, offsets);
  }

  Tensor batch(1, 3, s.patch.height, s.patch.width);
  const std::vector<float> chw = to_chw_float(s.patch);
  std::memcpy(batch.sample(0), chw.data(), chw.size() * sizeof(float));
  const HeadOutputs out = model.network->forward(batch, false);
  for (size_t j = 0; j < scores.size(); ++j) scores[j] = out.class_scores[j];
  for (size_t j = 0; j < offsets.size(); ++j) offsets[j] = out.offsets[j];
  return decode_predictions(grid, scores, offsets);
}

std::map<std::string, Box> load_pred_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predicted boxes: " + path);
  std::map<std::string, Box> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (!j.contains("image") || !j.contains("bbox") || !j["bbox"].is_array() ||
        j["bbox"].size() != 4)
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": expected {image, bbox[4]}");
    boxes[j["image"].get<std::string>()] = {
        j["bbox"][0].get<double>(), j["bbox"][1].get<double>(),
        j["bbox"][2].get<double>(), j["bbox"][3].get<double>()};
  }
  return boxes;
}

}  // namespace

FingertipSet predict_frame_tips(const LoadedModel& model,
                                const AnchorGrid& grid, const CropSample& s) {
  const FingertipSet decoded = decode_model_space(model, grid, s);
  FingertipSet frame_tips;
  for (int i = 0; i < kNumFingers; ++i) {
    if (!decoded.slots[i].present) continue;
    frame_tips.slots[i] = {from_model_space(s.transform, decoded.slots[i].point),
                           true};
  }
  return frame_tips;
}

MetricsReport evaluate(const LoadedModel& model,
                       const std::string& manifest_path,
                       const EvalOptions& opts) {
  const ManifestLoad loaded = load_manifest(manifest_path, true);
  if (loaded.records.empty())
    throw std::runtime_error("manifest is empty: " + manifest_path);
  for (double d : opts.deltas)
    if (d <= 0.0) throw std::invalid_argument("deltas must be positive");

  const AnchorGrid grid =
      build_anchor_grid(model.cfg.anchor_count, model.cfg.input_size,
                        anchor_layout_from_string(model.cfg.anchor_layout));

  std::map<std::string, Box> pred_boxes;
  const bool use_pred_boxes = !opts.pred_boxes_path.empty();
  if (use_pred_boxes) pred_boxes = load_pred_boxes(opts.pred_boxes_path);

  MetricsReport report;
  report.per_threshold.resize(opts.deltas.size());
  for (size_t k = 0; k < opts.deltas.size(); ++k)
    report.per_threshold[k].delta = opts.deltas[k];

  std::vector<double> all_errors;
  std::vector<double> per_image_errors;
  double iou_sum = 0.0;

  for (const auto& rec : loaded.records) {
    const ImageU8 frame = load_image(resolve_image_path(manifest_path, rec));

    SampleRecord crop_rec = rec;
    if (use_pred_boxes) {
      const auto it = pred_boxes.find(rec.image);
      if (it == pred_boxes.end())
        throw std::runtime_error("no predicted box for image: " + rec.image);
      crop_rec.bbox = it->second;
      iou_sum += iou(it->second, rec.bbox);
    }

    const CropSample crop =
        prepare_crop(frame, crop_rec, model.cfg.input_size);
    const FingertipSet pred = predict_frame_tips(model, grid, crop);

    FingertipSet gt;
    for (int i = 0; i < kNumFingers; ++i) {
      const auto& s = rec.fingertips.slots[i];
      if (s.present)
        gt.slots[i] = {{s.point.x * rec.width, s.point.y * rec.height}, true};
    }

    for (size_t k = 0; k < opts.deltas.size(); ++k) {
      const MatchResult m = match_fingertips(pred, gt, opts.deltas[k]);
      report.per_threshold[k].tp += m.tp;
      report.per_threshold[k].fp += m.fp;
      report.per_threshold[k].fn += m.fn;
    }

    // Unthresholded pairing feeds the error metrics.
    const MatchResult pairs =
        match_fingertips(pred, gt, std::numeric_limits<double>::infinity());
    if (!pairs.errors.empty()) {
      double sum = 0.0;
      for (double e : pairs.errors) sum += e;
      per_image_errors.push_back(sum / pairs.errors.size());
      all_errors.insert(all_errors.end(), pairs.errors.begin(),
                        pairs.errors.end());
    }

    report.actual_fingertips += gt.present_count();
    report.detected_fingertips += pred.present_count();
    ++report.images;
  }

  for (auto& t : report.per_threshold) {
    const Prf prf = precision_recall_f1(t.tp, t.fp, t.fn);
    t.precision = prf.precision;
    t.recall = prf.recall;
    t.f1 = prf.f1;
  }

  report.matched_pairs = static_cast<std::int64_t>(all_errors.size());
  if (all_errors.empty()) {
    report.no_matched_pairs = true;
  } else {
    double sum = 0.0;
    for (double e : all_errors) sum += e;
    report.avg_pixel_error = sum / all_errors.size();

    const double max_err =
        *std::max_element(per_image_errors.begin(), per_image_errors.end());
    std::vector<double> thresholds;
    for (double t = 0.0; t <= 25.0; t += 0.5) thresholds.push_back(t);
    if (max_err > thresholds.back()) thresholds.push_back(max_err);
    report.cde = cde_curve(per_image_errors, thresholds);
  }

  if (use_pred_boxes) report.mean_iou = iou_sum / report.images;
  return report;
}

void write_report(const MetricsReport& report, const std::string& checkpoint,
                  const std::string& manifest, const std::string& path) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;

  nlohmann::ordered_json meta;
  meta["checkpoint"] = checkpoint;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64_file(checkpoint)));
  meta["checkpoint_hash"] = hash;
  meta["manifest"] = manifest;
  nlohmann::ordered_json deltas = nlohmann::ordered_json::array();
  for (const auto& t : report.per_threshold) deltas.push_back(t.delta);
  meta["deltas"] = deltas;
  meta["images"] = report.images;
  j["metadata"] = meta;

  nlohmann::ordered_json metrics;
  metrics["avg_pixel_error"] = report.avg_pixel_error;
  metrics["no_matched_pairs"] = report.no_matched_pairs;
  metrics["matched_pairs"] = report.matched_pairs;
  metrics["actual_fingertips"] = report.actual_fingertips;
  metrics["detected_fingertips"] = report.detected_fingertips;
  nlohmann::ordered_json per_threshold = nlohmann::ordered_json::array();
  for (const auto& t : report.per_threshold) {
    nlohmann::ordered_json row;
    row["delta"] = t.delta;
    row["tp"] = t.tp;
    row["fp"] = t.fp;
    row["fn"] = t.fn;
    row["precision"] = t.precision;
    row["recall"] = t.recall;
    row["f1"] = t.f1;
    per_threshold.push_back(row);
  }
  metrics["per_threshold"] = per_threshold;
  nlohmann::ordered_json cde = nlohmann::ordered_json::array();
  for (const auto& [t, frac] : report.cde) cde.push_back({t, frac});
  metrics["cde"] = cde;
  if (report.mean_iou >= 0.0) metrics["mean_iou"] = report.mean_iou;
  j["metrics"] = metrics;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

MetricsReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("incompatible report format_version in " + path);

  MetricsReport report;
  const auto& metrics = j.at("metrics");
  report.avg_pixel_error = metrics.at("avg_pixel_error").get<double>();
  report.no_matched_pairs = metrics.at("no_matched_pairs").get<bool>();
  report.matched_pairs = metrics.at("matched_pairs").get<std::int64_t>();
  report.actual_fingertips = metrics.at("actual_fingertips").get<std::int64_t>();
  report.detected_fingertips =
      metrics.at("detected_fingertips").get<std::int64_t>();
  for (const auto& row : metrics.at("per_threshold")) {
    DeltaMetrics t;
    t.delta = row.at("delta").get<double>();
    t.tp = row.at("tp").get<std::int64_t>();
    t.fp = row.at("fp").get<std::int64_t>();
    t.fn = row.at("fn").get<std::int64_t>();
    t.precision = row.at("precision").get<double>();
    t.recall = row.at("recall").get<double>();
    t.f1 = row.at("f1").get<double>();
    report.per_threshold.push_back(t);
  }
  for (const auto& row : metrics.at("cde"))
    report.cde.emplace_back(row[0].get<double>(), row[1].get<double>());
  if (metrics.contains("mean_iou"))
    report.mean_iou = metrics["mean_iou"].get<double>();
  report.images = j.at("metadata").at("images").get<std::int64_t>();
  return report;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
  }
  return hash;
}

}  // namespace abfpe
