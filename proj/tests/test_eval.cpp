#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "abfpe/eval.hpp"
#include "abfpe/rng.hpp"

using namespace abfpe;
namespace fs = std::filesystem;

namespace {

FingertipSet set_with(std::initializer_list<std::pair<int, Point2>> tips) {
  FingertipSet s;
  for (const auto& [slot, p] : tips) s.slots[slot] = {p, true};
  return s;
}

}  // namespace

TEST_CASE("matching: identical sets are all true positives") {
  const FingertipSet gt = set_with(
      {{0, {10, 10}}, {1, {50, 50}}, {2, {90, 10}}, {3, {10, 90}}, {4, {90, 90}}});
  const MatchResult m = match_fingertips(gt, gt, 15.0);
  CHECK(m.tp == 5);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  REQUIRE(m.errors.size() == 5);
  for (double e : m.errors) CHECK(e == doctest::Approx(0.0));
}

TEST_CASE("matching: distance beyond delta turns pairs into misses") {
  const FingertipSet gt = set_with({{0, {10, 10}}, {1, {50, 50}}});
  const FingertipSet pred = set_with({{0, {30, 10}}, {1, {70, 50}}});
  const MatchResult m = match_fingertips(pred, gt, 15.0);
  CHECK(m.tp == 0);
  CHECK(m.fn == 2);
  CHECK(m.fp == 0);  // a failed pair is a miss, not a false alarm
}

TEST_CASE("matching: mixed slot presences") {
  const FingertipSet gt = set_with({{0, {10, 10}}, {1, {50, 50}}});
  const FingertipSet pred = set_with({{1, {52, 50}}, {2, {80, 80}}});
  const MatchResult m = match_fingertips(pred, gt, 15.0);
  CHECK(m.tp == 1);
  CHECK(m.fn == 1);
  CHECK(m.fp == 1);
  REQUIRE(m.errors.size() == 1);
  CHECK(m.errors[0] == doctest::Approx(2.0));
}

TEST_CASE("matching: the four presence cases are exhaustive per slot") {
  // One slot at a time: (gt, pred) in {00, 01, 10, 11-near, 11-far}.
  struct Case {
    bool gt, pred, near;
    int tp, fp, fn;
  };
  const Case cases[] = {
      {false, false, false, 0, 0, 0},
      {false, true, false, 0, 1, 0},
      {true, false, false, 0, 0, 1},
      {true, true, true, 1, 0, 0},
      {true, true, false, 0, 0, 1},
  };
  for (const Case& c : cases) {
    FingertipSet gt, pred;
    if (c.gt) gt.slots[2] = {{50, 50}, true};
    if (c.pred) pred.slots[2] = {{c.near ? 55.0 : 80.0, 50}, true};
    const MatchResult m = match_fingertips(pred, gt, 10.0);
    CHECK(m.tp == c.tp);
    CHECK(m.fp == c.fp);
    CHECK(m.fn == c.fn);
    CHECK(m.tp + m.fp + m.fn <= 1);
  }
}

TEST_CASE("matching agrees with a naive recount on randomized cases") {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    FingertipSet gt, pred;
    for (int i = 0; i < kNumFingers; ++i) {
      if (rng.uniform() < 0.6)
        gt.slots[i] = {{rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)},
                       true};
      if (rng.uniform() < 0.6)
        pred.slots[i] = {{rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)},
                         true};
    }
    const double delta = rng.uniform(1.0, 60.0);
    const MatchResult m = match_fingertips(pred, gt, delta);

    // Independent recount, written from the slot rules directly.
    int tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < kNumFingers; ++i) {
      const bool g = gt.slots[i].present, p = pred.slots[i].present;
      if (g && p) {
        if (distance(gt.slots[i].point, pred.slots[i].point) <= delta)
          ++tp;
        else
          ++fn;
      } else if (g) {
        ++fn;
      } else if (p) {
        ++fp;
      }
    }
    REQUIRE(m.tp == tp);
    REQUIRE(m.fp == fp);
    REQUIRE(m.fn == fn);
    REQUIRE(int(m.errors.size()) == tp);
  }
}

TEST_CASE("precision recall f1 arithmetic") {
  SUBCASE("perfect") {
    const Prf r = precision_recall_f1(5, 0, 0);
    CHECK(r.precision == doctest::Approx(1.0));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(1.0));
  }
  SUBCASE("worked example") {
    const Prf r = precision_recall_f1(3, 1, 2);
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.recall == doctest::Approx(0.6));
    CHECK(std::abs(r.f1 - 0.6667) <= 1e-4);
  }
  SUBCASE("zero denominators use the 0 convention") {
    const Prf r = precision_recall_f1(0, 0, 0);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(precision_recall_f1(0, 3, 0).recall == 0.0);
    CHECK(precision_recall_f1(0, 0, 3).precision == 0.0);
  }
}

TEST_CASE("iou cases") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == doctest::Approx(0.0));
  CHECK(iou({0, 0, 2, 2}, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0));
  // Symmetry and range on random boxes.
  Rng rng(72);
  for (int trial = 0; trial < 200; ++trial) {
    const auto box = [&] {
      const double x0 = rng.uniform(0.0, 50.0), y0 = rng.uniform(0.0, 50.0);
      return Box{x0, y0, x0 + rng.uniform(1.0, 50.0),
                 y0 + rng.uniform(1.0, 50.0)};
    };
    const Box a = box(), b = box();
    const double ab = iou(a, b);
    CHECK(ab == doctest::Approx(iou(b, a)).epsilon(1e-12));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(iou({2, 0, 1, 1}, {0, 0, 1, 1}), std::invalid_argument);
}

TEST_CASE("cde curve") {
  SUBCASE("counting example") {
    const auto curve = cde_curve({1, 2, 3}, {2});
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].first == doctest::Approx(2.0));
    CHECK(curve[0].second == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("bracketing thresholds") {
    const auto curve = cde_curve({5, 6, 7}, {1, 7, 100});
    CHECK(curve[0].second == doctest::Approx(0.0));
    CHECK(curve[1].second == doctest::Approx(1.0));
    CHECK(curve[2].second == doctest::Approx(1.0));
  }
  SUBCASE("monotone and bounded on random inputs") {
    Rng rng(73);
    std::vector<double> errors(50);
    for (auto& e : errors) e = rng.uniform(0.0, 30.0);
    std::vector<double> thresholds;
    for (double t = 0; t <= 30.0; t += 1.5) thresholds.push_back(t);
    const auto curve = cde_curve(errors, thresholds);
    double prev = -1.0;
    for (const auto& [t, f] : curve) {
      CHECK(f >= prev);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      prev = f;
    }
    CHECK(curve.back().second == doctest::Approx(1.0));
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(cde_curve({}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(cde_curve({1.0}, {3.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("report round trip") {
  MetricsReport report;
  report.avg_pixel_error = 3.25;
  report.matched_pairs = 940;
  report.per_threshold.push_back({10.0, 900, 20, 40, 0.9783, 0.9574, 0.9677});
  report.per_threshold.push_back({15.0, 930, 5, 10, 0.9947, 0.9894, 0.992});
  report.cde = {{0.0, 0.0}, {5.0, 0.82}, {10.0, 1.0}};
  report.actual_fingertips = 940;
  report.detected_fingertips = 920;
  report.images = 200;

  const fs::path dir = fs::temp_directory_path();
  const std::string checkpoint = (dir / "abfpe_report_ck.bin").string();
  {
    std::ofstream out(checkpoint, std::ios::binary);
    out << "weights";
  }
  const std::string path = (dir / "abfpe_report.json").string();
  write_report(report, checkpoint, "manifest.jsonl", path);

  const MetricsReport back = read_report(path);
  CHECK(back.avg_pixel_error == doctest::Approx(3.25));
  CHECK(back.matched_pairs == 940);
  REQUIRE(back.per_threshold.size() == 2);
  CHECK(back.per_threshold[0].delta == doctest::Approx(10.0));
  CHECK(back.per_threshold[0].tp == 900);
  CHECK(back.per_threshold[1].f1 == doctest::Approx(0.992));
  REQUIRE(back.cde.size() == 3);
  CHECK(back.cde[1].second == doctest::Approx(0.82));
  CHECK(back.actual_fingertips == 940);
  CHECK(back.detected_fingertips == 920);
  CHECK(back.images == 200);
  CHECK(back.mean_iou < 0.0);  // no predicted boxes in this report

  fs::remove(path);
  fs::remove(checkpoint);
}

TEST_CASE("report format version is enforced") {
  const fs::path path = fs::temp_directory_path() / "abfpe_badver.json";
  {
    std::ofstream out(path);
    out << R"({"format_version":2,"metadata":{},"metrics":{}})";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(read_report(path.string())),
                       doctest::Contains("format_version"),
                       std::runtime_error);
  fs::remove(path);
}

TEST_CASE("file hashing is stable and content-sensitive") {
  const fs::path a = fs::temp_directory_path() / "abfpe_hash_a";
  const fs::path b = fs::temp_directory_path() / "abfpe_hash_b";
  std::ofstream(a) << "content-1";
  std::ofstream(b) << "content-2";
  CHECK(fnv1a64_file(a.string()) == fnv1a64_file(a.string()));
  CHECK(fnv1a64_file(a.string()) != fnv1a64_file(b.string()));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("oracle evaluation closes the measurement loop") {
  // Generate a tiny set, evaluate the oracle stub: every stage of crop,
  // encode, decode, and inverse mapping must cancel out.
  const fs::path dir =
      fs::temp_directory_path() / "abfpe_eval_oracle";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthConfig cfg;
  cfg.count = 8;
  cfg.seed = 19;
  cfg.width = 640;
  cfg.height = 480;
  const std::string manifest = generate_synthetic(cfg, dir.string());

  ModelConfig mc;
  mc.anchor_count = 24;
  const std::string ckpt = (dir / "oracle.ckpt").string();
  save_oracle_checkpoint(mc, ckpt);
  const LoadedModel model = load_checkpoint(ckpt);
  REQUIRE(model.oracle_stub);

  const MetricsReport report = evaluate(model, manifest);
  CHECK(report.images == 8);
  CHECK_FALSE(report.no_matched_pairs);
  CHECK(report.avg_pixel_error <= 0.5);
  REQUIRE(report.per_threshold.size() == 2);
  for (const DeltaMetrics& t : report.per_threshold) {
    CHECK(t.f1 == doctest::Approx(1.0));
    CHECK(t.fp == 0);
    CHECK(t.fn == 0);
  }
  CHECK(report.detected_fingertips == report.actual_fingertips);
  CHECK(report.cde.back().second == doctest::Approx(1.0));
  CHECK(report.mean_iou < 0.0);
}

TEST_CASE("evaluation with predicted boxes reports their IoU") {
  const fs::path dir = fs::temp_directory_path() / "abfpe_eval_boxes";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthConfig cfg;
  cfg.count = 4;
  cfg.seed = 23;
  cfg.width = 640;
  cfg.height = 480;
  const std::string manifest = generate_synthetic(cfg, dir.string());

  // Predicted boxes identical to ground truth: IoU must be 1.
  const ManifestLoad load = load_manifest(manifest);
  const std::string boxes = (dir / "boxes.jsonl").string();
  {
    std::ofstream out(boxes);
    for (const SampleRecord& rec : load.records) {
      out << R"({"image":")" << rec.image << R"(","bbox":[)" << rec.bbox.x_min
          << "," << rec.bbox.y_min << "," << rec.bbox.x_max << ","
          << rec.bbox.y_max << "]}\n";
    }
  }

  ModelConfig mc;
  const std::string ckpt = (dir / "oracle.ckpt").string();
  save_oracle_checkpoint(mc, ckpt);
  const LoadedModel model = load_checkpoint(ckpt);

  EvalOptions opts;
  opts.pred_boxes_path = boxes;
  const MetricsReport report = evaluate(model, manifest, opts);
  CHECK(report.mean_iou == doctest::Approx(1.0));
  CHECK(report.per_threshold[0].f1 == doctest::Approx(1.0));
}

TEST_CASE("evaluation validates its deltas") {
  const fs::path dir = fs::temp_directory_path() / "abfpe_eval_deltas";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthConfig cfg;
  cfg.count = 1;
  cfg.seed = 2;
  cfg.width = 320;
  cfg.height = 320;
  const std::string manifest = generate_synthetic(cfg, dir.string());
  ModelConfig mc;
  const std::string ckpt = (dir / "oracle.ckpt").string();
  save_oracle_checkpoint(mc, ckpt);
  const LoadedModel model = load_checkpoint(ckpt);
  EvalOptions opts;
  opts.deltas = {10.0, -5.0};
  CHECK_THROWS_AS(evaluate(model, manifest, opts), std::invalid_argument);
}
