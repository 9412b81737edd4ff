#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "abfpe/data.hpp"
#include "abfpe/eval.hpp"
#include "abfpe/geometry.hpp"
#include "abfpe/loss.hpp"
#include "abfpe/net.hpp"
#include "abfpe/schedule.hpp"
#include "abfpe/train.hpp"

namespace py = pybind11;
using namespace abfpe;

namespace {

using OptPoint = std::optional<std::pair<double, double>>;

FingertipSet tips_from_py(const std::vector<OptPoint>& tips) {
  if (tips.size() != kNumFingers)
    throw std::invalid_argument("expected exactly 5 fingertip slots");
  FingertipSet set;
  for (int i = 0; i < kNumFingers; ++i)
    if (tips[i]) set.slots[i] = {{tips[i]->first, tips[i]->second}, true};
  return set;
}

std::vector<OptPoint> tips_to_py(const FingertipSet& set) {
  std::vector<OptPoint> out(kNumFingers);
  for (int i = 0; i < kNumFingers; ++i)
    if (set.slots[i].present)
      out[i] = {set.slots[i].point.x, set.slots[i].point.y};
  return out;
}

py::dict report_to_py(const MetricsReport& r) {
  py::dict d;
  d["avg_pixel_error"] = r.avg_pixel_error;
  d["no_matched_pairs"] = r.no_matched_pairs;
  d["matched_pairs"] = r.matched_pairs;
  d["actual_fingertips"] = r.actual_fingertips;
  d["detected_fingertips"] = r.detected_fingertips;
  d["images"] = r.images;
  py::list per_threshold;
  for (const DeltaMetrics& t : r.per_threshold) {
    py::dict row;
    row["delta"] = t.delta;
    row["tp"] = t.tp;
    row["fp"] = t.fp;
    row["fn"] = t.fn;
    row["precision"] = t.precision;
    row["recall"] = t.recall;
    row["f1"] = t.f1;
    per_threshold.append(row);
  }
  d["per_threshold"] = per_threshold;
  d["cde"] = r.cde;
  if (r.mean_iou >= 0.0) d["mean_iou"] = r.mean_iou;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Anchor-based fingertip position estimation core";

  m.def(
      "anchor_grid",
      [](int count, int size) {
        const AnchorGrid grid = build_anchor_grid(count, size);
        std::vector<std::pair<double, double>> points;
        points.reserve(grid.points.size());
        for (const Point2& p : grid.points) points.emplace_back(p.x, p.y);
        return points;
      },
      py::arg("count"), py::arg("size"),
      "Boundary anchor coordinates for a model input square.");

  m.def(
      "nearest_anchor",
      [](int count, int size, double x, double y) {
        const NearestAnchor n =
            nearest_anchor(build_anchor_grid(count, size), {x, y});
        return std::make_pair(n.index, n.distance);
      },
      py::arg("count"), py::arg("size"), py::arg("x"), py::arg("y"),
      "(index, distance) of the closest anchor; ties go to the lowest index.");

  m.def(
      "encode_targets",
      [](int count, int size, const std::vector<OptPoint>& tips) {
        const EncodedTarget t =
            encode_targets(build_anchor_grid(count, size), tips_from_py(tips));
        py::dict d;
        d["anchor_class"] = t.anchor_class;
        d["offset"] = t.offset;
        d["mask"] = t.mask;
        return d;
      },
      py::arg("count"), py::arg("size"), py::arg("tips"),
      "Per-slot anchor classes, normalized offsets, and presence mask. "
      "tips is five entries of (x, y) or None, in model-space pixels.");

  m.def(
      "decode_predictions",
      [](int count, int size, const std::vector<double>& class_scores,
         const std::vector<double>& offsets) {
        return tips_to_py(decode_predictions(build_anchor_grid(count, size),
                                             class_scores, offsets));
      },
      py::arg("count"), py::arg("size"), py::arg("class_scores"),
      py::arg("offsets"),
      "Model-space fingertips from raw head outputs (row-major 5x(N+1) "
      "scores, 5x2 offsets); absent slots come back as None.");

  m.def("huber", &huber, py::arg("residual"), py::arg("delta"));

  m.def(
      "poly_lr",
      [](std::int64_t iteration, double lr0, double power,
         std::int64_t total_iterations, double restart_fraction,
         double restart_lr) {
        const PolySchedule s =
            restart_fraction <= 0.0
                ? make_poly_schedule_no_restart(lr0, power, total_iterations)
                : make_poly_schedule(lr0, power, total_iterations,
                                     restart_fraction, restart_lr);
        return poly_lr(s, iteration);
      },
      py::arg("iteration"), py::arg("lr0") = 1e-2, py::arg("power") = 0.9,
      py::arg("total_iterations") = 1000, py::arg("restart_fraction") = 0.25,
      py::arg("restart_lr") = 6.5e-3,
      "Polynomial-decay learning rate; restart_fraction <= 0 disables the "
      "warm restart.");

  m.def(
      "precision_recall_f1",
      [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
        const Prf r = precision_recall_f1(tp, fp, fn);
        return std::make_tuple(r.precision, r.recall, r.f1);
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"));

  m.def(
      "iou",
      [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
        return iou(Box{a[0], a[1], a[2], a[3]}, Box{b[0], b[1], b[2], b[3]});
      },
      py::arg("box_a"), py::arg("box_b"),
      "Boxes as [x_min, y_min, x_max, y_max].");

  m.def("cde_curve", &cde_curve, py::arg("per_image_errors"),
        py::arg("thresholds"));

  m.def(
      "match_fingertips",
      [](const std::vector<OptPoint>& pred, const std::vector<OptPoint>& gt,
         double delta) {
        const MatchResult r =
            match_fingertips(tips_from_py(pred), tips_from_py(gt), delta);
        py::dict d;
        d["tp"] = r.tp;
        d["fp"] = r.fp;
        d["fn"] = r.fn;
        d["errors"] = r.errors;
        return d;
      },
      py::arg("pred"), py::arg("gt"), py::arg("delta"));

  m.def(
      "generate_synthetic",
      [](const std::string& out_dir, int count, std::uint64_t seed, int width,
         int height) {
        SynthConfig cfg;
        cfg.count = count;
        cfg.seed = seed;
        cfg.width = width;
        cfg.height = height;
        return generate_synthetic(cfg, out_dir);
      },
      py::arg("out_dir"), py::arg("count"), py::arg("seed") = 0,
      py::arg("width") = 640, py::arg("height") = 480,
      "Renders a deterministic synthetic hand set; returns the manifest "
      "path.");

  m.def(
      "save_oracle_checkpoint",
      [](const std::string& path, int anchor_count, int input_size) {
        ModelConfig cfg;
        cfg.anchor_count = anchor_count;
        cfg.input_size = input_size;
        save_oracle_checkpoint(cfg, path);
      },
      py::arg("path"), py::arg("anchor_count") = 24,
      py::arg("input_size") = 224,
      "Writes a checkpoint that decodes ground truth instead of running a "
      "network; for pipeline tests.");

  m.def(
      "train",
      [](const std::string& manifest, const std::string& out_dir, int epochs,
         int batch_size, std::uint64_t seed, int input_size, int anchor_count,
         int neck_channels, int backbone_blocks, double lr0, bool augment,
         double rotation_max_deg) {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.lr0 = lr0;
        ModelConfig mc;
        mc.input_size = input_size;
        mc.anchor_count = anchor_count;
        mc.neck_channels = neck_channels;
        mc.backbone_blocks = backbone_blocks;
        AugmentationConfig aug;
        aug.enabled = augment;
        aug.rotation_max_deg = rotation_max_deg;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = abfpe::train(tc, mc, aug, manifest, out_dir, seed);
        }
        py::dict d;
        d["checkpoint"] = r.checkpoint_path;
        d["log"] = r.log_path;
        d["epoch_mean_loss"] = r.epoch_mean_loss;
        d["iterations"] = r.iterations;
        return d;
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("epochs") = 15,
      py::arg("batch_size") = 32, py::arg("seed") = 0,
      py::arg("input_size") = 224, py::arg("anchor_count") = 24,
      py::arg("neck_channels") = 256, py::arg("backbone_blocks") = 4,
      py::arg("lr0") = 1e-2, py::arg("augment") = true,
      py::arg("rotation_max_deg") = 180.0,
      "Trains from scratch on a manifest; returns checkpoint path, log "
      "path, per-epoch mean losses, and the iteration count.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& manifest,
         const std::vector<double>& deltas, const std::string& pred_boxes) {
        const LoadedModel model = load_checkpoint(checkpoint);
        EvalOptions opts;
        if (!deltas.empty()) opts.deltas = deltas;
        opts.pred_boxes_path = pred_boxes;
        MetricsReport report;
        {
          py::gil_scoped_release release;
          report = abfpe::evaluate(model, manifest, opts);
        }
        return report_to_py(report);
      },
      py::arg("checkpoint"), py::arg("manifest"),
      py::arg("deltas") = std::vector<double>{10.0, 15.0},
      py::arg("pred_boxes") = std::string(),
      "Full measurement pass of a checkpoint over a manifest.");

  m.def(
      "predict_image",
      [](const std::string& checkpoint, const std::string& image,
         const std::array<double, 4>& bbox) {
        const LoadedModel model = load_checkpoint(checkpoint);
        if (model.oracle_stub)
          throw std::runtime_error("an oracle-stub checkpoint cannot predict");
        const ImageU8 frame = load_image(image);
        SampleRecord rec;
        rec.image = image;
        rec.width = frame.width;
        rec.height = frame.height;
        rec.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
        const AnchorGrid grid =
            build_anchor_grid(model.cfg.anchor_count, model.cfg.input_size,
                              anchor_layout_from_string(model.cfg.anchor_layout));
        const CropSample crop = prepare_crop(frame, rec, model.cfg.input_size);
        return tips_to_py(predict_frame_tips(model, grid, crop));
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("bbox"),
      "Fingertips for one image given a normalized hand box; five entries "
      "of (x, y) in frame pixels or None.");

  m.attr("FINGER_NAMES") = std::vector<std::string>(
      kFingerNames, kFingerNames + kNumFingers);
}
