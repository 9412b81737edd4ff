#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "abfpe/data.hpp"

using namespace abfpe;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("abfpe_data_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_lines(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kGoodLine =
    R"({"image":"images/a.png","width":640,"height":480,)"
    R"("bbox":[0.2,0.3,0.6,0.8],)"
    R"("fingertips":[[0.3,0.5],null,[0.4,0.6],null,null]})";

SampleRecord simple_record() {
  SampleRecord rec;
  rec.image = "img.png";
  rec.width = 640;
  rec.height = 480;
  rec.bbox = {0.25, 0.25, 0.75, 0.75};
  rec.fingertips.slots[0] = {{0.5, 0.5}, true};
  rec.fingertips.slots[2] = {{0.3, 0.4}, true};
  return rec;
}

}  // namespace

TEST_CASE("manifest parses a well-formed line exactly") {
  const fs::path dir = make_temp_dir("parse");
  write_lines(dir / "m.jsonl", std::string(kGoodLine) + "\n");
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string());
  REQUIRE(load.records.size() == 1);
  const SampleRecord& r = load.records[0];
  CHECK(r.image == "images/a.png");
  CHECK(r.width == 640);
  CHECK(r.height == 480);
  CHECK(r.bbox.x_min == doctest::Approx(0.2));
  CHECK(r.bbox.y_max == doctest::Approx(0.8));
  CHECK(r.fingertips.slots[0].present);
  CHECK(r.fingertips.slots[0].point.x == doctest::Approx(0.3));
  CHECK_FALSE(r.fingertips.slots[1].present);
  CHECK(r.fingertips.slots[2].present);
  CHECK(r.fingertips.present_count() == 2);
}

TEST_CASE("empty manifest yields an empty list") {
  const fs::path dir = make_temp_dir("empty");
  write_lines(dir / "m.jsonl", "");
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string());
  CHECK(load.records.empty());
  CHECK(load.issues.empty());
}

TEST_CASE("blank lines are skipped") {
  const fs::path dir = make_temp_dir("blank");
  write_lines(dir / "m.jsonl",
              "\n" + std::string(kGoodLine) + "\n\n" + kGoodLine + "\n");
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string());
  CHECK(load.records.size() == 2);
}

TEST_CASE("missing manifest file is an error") {
  CHECK_THROWS_AS(load_manifest("/nonexistent/m.jsonl"), std::runtime_error);
}

TEST_CASE("schema violations name the line") {
  const fs::path dir = make_temp_dir("schema");
  SUBCASE("inverted bbox") {
    write_lines(dir / "m.jsonl",
                std::string(kGoodLine) + "\n" +
                    R"({"image":"a.png","width":640,"height":480,)" +
                    R"("bbox":[0.6,0.3,0.2,0.8],"fingertips":[null,null,null,null,null]})" +
                    "\n");
    CHECK_THROWS_WITH_AS(
        static_cast<void>(load_manifest((dir / "m.jsonl").string())),
        doctest::Contains("line 2"), std::runtime_error);
  }
  SUBCASE("malformed JSON") {
    write_lines(dir / "m.jsonl", "{not json\n");
    CHECK_THROWS_WITH_AS(
        static_cast<void>(load_manifest((dir / "m.jsonl").string())),
        doctest::Contains("line 1"), std::runtime_error);
  }
  SUBCASE("wrong fingertip arity") {
    write_lines(dir / "m.jsonl",
                R"({"image":"a.png","width":640,"height":480,)"
                R"("bbox":[0.2,0.3,0.6,0.8],"fingertips":[null,null]})"
                "\n");
    CHECK_THROWS_AS(
        static_cast<void>(load_manifest((dir / "m.jsonl").string())),
        std::runtime_error);
  }
  SUBCASE("coordinate out of range") {
    write_lines(dir / "m.jsonl",
                R"({"image":"a.png","width":640,"height":480,)"
                R"("bbox":[0.2,0.3,0.6,1.4],"fingertips":[null,null,null,null,null]})"
                "\n");
    CHECK_THROWS_AS(
        static_cast<void>(load_manifest((dir / "m.jsonl").string())),
        std::runtime_error);
  }
}

TEST_CASE("lenient mode skips bad lines and reports them") {
  const fs::path dir = make_temp_dir("lenient");
  write_lines(dir / "m.jsonl",
              std::string(kGoodLine) + "\n{broken\n" + kGoodLine + "\n");
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string(), false);
  CHECK(load.records.size() == 2);
  REQUIRE(load.issues.size() == 1);
  CHECK(load.issues[0].line == 2);
  CHECK(load.issues[0].fatal);
}

TEST_CASE("a fingertip outside the bbox warns but does not fail") {
  const fs::path dir = make_temp_dir("warn");
  write_lines(dir / "m.jsonl",
              R"({"image":"a.png","width":640,"height":480,)"
              R"("bbox":[0.4,0.4,0.6,0.6],)"
              R"("fingertips":[[0.1,0.1],null,null,null,null]})"
              "\n");
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string());
  CHECK(load.records.size() == 1);
  REQUIRE(load.issues.size() == 1);
  CHECK_FALSE(load.issues[0].fatal);
  CHECK(load.issues[0].message.find("thumb") != std::string::npos);
}

TEST_CASE("save and reload round-trips records") {
  const fs::path dir = make_temp_dir("save");
  std::vector<SampleRecord> records{simple_record(), simple_record()};
  records[1].fingertips.slots[4] = {{0.6, 0.7}, true};
  save_manifest(records, (dir / "m.jsonl").string());
  const ManifestLoad load = load_manifest((dir / "m.jsonl").string());
  REQUIRE(load.records.size() == 2);
  CHECK(load.records[0].bbox.x_min == doctest::Approx(0.25));
  CHECK(load.records[1].fingertips.slots[4].present);
  CHECK(load.records[1].fingertips.slots[4].point.y == doctest::Approx(0.7));
}

TEST_CASE("image paths resolve against the manifest directory") {
  SampleRecord rec;
  rec.image = "images/00000.png";
  CHECK(resolve_image_path("/data/set/manifest.jsonl", rec) ==
        "/data/set/images/00000.png");
}

TEST_CASE("prepare_crop maps tips into model space") {
  ImageU8 frame(640, 480);
  const SampleRecord rec = simple_record();
  const CropSample s = prepare_crop(frame, rec, 224);
  REQUIRE(s.patch.width == 224);
  REQUIRE(s.patch.height == 224);
  // Tip (0.5, 0.5) is the frame center = crop center -> model center.
  REQUIRE(s.tips.slots[0].present);
  CHECK(s.tips.slots[0].point.x == doctest::Approx(112.0));
  CHECK(s.tips.slots[0].point.y == doctest::Approx(112.0));
  // Tip (0.3, 0.4): frame (192, 192), crop origin (160, 120), size (320, 240).
  CHECK(s.tips.slots[2].point.x == doctest::Approx((192.0 - 160.0) / 320 * 224));
  CHECK(s.tips.slots[2].point.y == doctest::Approx((192.0 - 120.0) / 240 * 224));
  CHECK_FALSE(s.tips.slots[1].present);
}

TEST_CASE("prepare_crop rejects mismatched frame dimensions") {
  ImageU8 frame(320, 480);
  CHECK_THROWS_AS(prepare_crop(frame, simple_record(), 224),
                  std::invalid_argument);
}

TEST_CASE("augmentation disabled leaves the sample untouched") {
  ImageU8 frame(640, 480);
  for (size_t i = 0; i < frame.pixels.size(); ++i)
    frame.pixels[i] = static_cast<std::uint8_t>(i * 31 % 251);
  const SampleRecord rec = simple_record();
  CropSample s = prepare_crop(frame, rec, 224);
  const CropSample before = s;
  AugmentationConfig aug;
  aug.enabled = false;
  Rng rng(1);
  augment_sample(s, aug, rng);
  CHECK(s.patch.pixels == before.patch.pixels);
  CHECK(s.tips.slots[0].point.x == before.tips.slots[0].point.x);
}

TEST_CASE("forced horizontal flip mirrors pixels and keypoints together") {
  ImageU8 frame(640, 480);
  for (size_t i = 0; i < frame.pixels.size(); ++i)
    frame.pixels[i] = static_cast<std::uint8_t>(i * 17 % 256);
  const SampleRecord rec = simple_record();
  CropSample s = prepare_crop(frame, rec, 224);
  const CropSample before = s;
  AugmentationConfig aug;
  aug.hflip_prob = 1.0;
  aug.vflip_prob = 0.0;
  aug.rotation_max_deg = 0.0;
  Rng rng(2);
  augment_sample(s, aug, rng);
  for (int i = 0; i < kNumFingers; ++i) {
    REQUIRE(s.tips.slots[i].present == before.tips.slots[i].present);
    if (!s.tips.slots[i].present) continue;
    CHECK(s.tips.slots[i].point.x ==
          doctest::Approx(224.0 - before.tips.slots[i].point.x));
    CHECK(s.tips.slots[i].point.y ==
          doctest::Approx(before.tips.slots[i].point.y));
  }
  ImageU8 mirrored = before.patch;
  flip_horizontal_inplace(mirrored);
  CHECK(s.patch.pixels == mirrored.pixels);
}

TEST_CASE("augmentation keypoints track the replayed transform sequence") {
  ImageU8 frame(640, 480);
  for (size_t i = 0; i < frame.pixels.size(); ++i)
    frame.pixels[i] = static_cast<std::uint8_t>(i % 256);
  const SampleRecord rec = simple_record();
  AugmentationConfig aug;  // defaults: flips at 0.5, rotation up to 180

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CropSample s = prepare_crop(frame, rec, 224);
    const CropSample base = s;
    Rng rng(seed);
    augment_sample(s, aug, rng);

    // Replay the same three draws to reconstruct the applied transform.
    Rng replay(seed);
    const bool hflip = replay.uniform() < aug.hflip_prob;
    const bool vflip = replay.uniform() < aug.vflip_prob;
    const double angle =
        (2.0 * replay.uniform() - 1.0) * aug.rotation_max_deg;

    FingertipSet expect = base.tips;
    for (int i = 0; i < kNumFingers; ++i) {
      if (!expect.slots[i].present) continue;
      if (hflip) expect.slots[i].point.x = 224.0 - expect.slots[i].point.x;
      if (vflip) expect.slots[i].point.y = 224.0 - expect.slots[i].point.y;
    }
    expect = rotate_points(expect, angle, {112.0, 112.0}, 224);

    for (int i = 0; i < kNumFingers; ++i) {
      REQUIRE(s.tips.slots[i].present == expect.slots[i].present);
      if (!s.tips.slots[i].present) continue;
      CHECK(distance(s.tips.slots[i].point, expect.slots[i].point) <= 1e-6);
    }
  }
}

TEST_CASE("augmentation is deterministic given the rng seed") {
  ImageU8 frame(640, 480);
  for (size_t i = 0; i < frame.pixels.size(); ++i)
    frame.pixels[i] = static_cast<std::uint8_t>(i * 13 % 256);
  const SampleRecord rec = simple_record();
  AugmentationConfig aug;
  CropSample a = prepare_crop(frame, rec, 224);
  CropSample b = prepare_crop(frame, rec, 224);
  Rng ra(99), rb(99);
  augment_sample(a, aug, ra);
  augment_sample(b, aug, rb);
  CHECK(a.patch.pixels == b.patch.pixels);
  for (int i = 0; i < kNumFingers; ++i)
    CHECK(a.tips.slots[i].point.x == b.tips.slots[i].point.x);
}

TEST_CASE("augmentation validates its configuration") {
  ImageU8 frame(640, 480);
  CropSample s = prepare_crop(frame, simple_record(), 224);
  Rng rng(1);
  AugmentationConfig aug;
  aug.hflip_prob = 1.5;
  CHECK_THROWS_AS(augment_sample(s, aug, rng), std::invalid_argument);
  aug = {};
  aug.rotation_max_deg = -10.0;
  CHECK_THROWS_AS(augment_sample(s, aug, rng), std::invalid_argument);
}

TEST_CASE("training samples are encoded against the grid") {
  ImageU8 frame(640, 480);
  const SampleRecord rec = simple_record();
  const AnchorGrid grid = build_anchor_grid(24, 224);
  AugmentationConfig aug;
  aug.enabled = false;
  Rng rng(5);
  const TrainingSample ts =
      make_training_sample(frame, rec, grid, aug, rng);
  CHECK(ts.input.size() == size_t(3) * 224 * 224);
  CHECK(ts.target.mask[0]);
  CHECK(ts.target.mask[2]);
  CHECK_FALSE(ts.target.mask[1]);
  CHECK(ts.target.anchor_class[1] == 24);
  // Values in [0,1] for a u8 source.
  for (float v : ts.input) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("encode_sample requires a grid matching the patch size") {
  ImageU8 frame(640, 480);
  const CropSample s = prepare_crop(frame, simple_record(), 224);
  const AnchorGrid wrong = build_anchor_grid(24, 128);
  CHECK_THROWS_AS(encode_sample(s, wrong), std::invalid_argument);
}

TEST_CASE("edge distance statistics on hand-built records") {
  SampleRecord rec;
  rec.image = "x.png";
  rec.width = 100;
  rec.height = 100;
  rec.bbox = {0.0, 0.0, 1.0, 1.0};
  rec.fingertips.slots[0] = {{0.5, 0.5}, true};   // center: distance 0.5
  rec.fingertips.slots[1] = {{0.0, 0.5}, true};   // on edge: distance 0
  rec.fingertips.slots[2] = {{0.25, 0.5}, true};  // quarter in: 0.25
  const EdgeStats stats = edge_distance_statistics({rec});
  CHECK(stats.count == 3);
  CHECK(stats.mean == doctest::Approx(0.25));
  CHECK(stats.median == doctest::Approx(0.25));
  double total = 0.0;
  for (double b : stats.histogram) total += b;
  CHECK(total == doctest::Approx(1.0));
  // Bin 0 holds the on-edge tip, the last bin the centered tip.
  CHECK(stats.histogram[0] == doctest::Approx(1.0 / 3.0));
  CHECK(stats.histogram[19] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("edge distances use bbox-normalized units") {
  SampleRecord rec;
  rec.image = "x.png";
  rec.width = 200;
  rec.height = 100;
  rec.bbox = {0.2, 0.4, 0.6, 0.8};
  // u = (0.3-0.2)/0.4 = 0.25, v = (0.6-0.4)/0.4 = 0.5 -> distance 0.25.
  rec.fingertips.slots[0] = {{0.3, 0.6}, true};
  const EdgeStats stats = edge_distance_statistics({rec});
  CHECK(stats.count == 1);
  CHECK(stats.mean == doctest::Approx(0.25));
}

TEST_CASE("empty record list yields empty statistics") {
  const EdgeStats stats = edge_distance_statistics({});
  CHECK(stats.count == 0);
  CHECK(stats.mean == 0.0);
}

TEST_CASE("quarter-turn record rotation matches the raster rotation") {
  SampleRecord rec;
  rec.image = "x.png";
  rec.width = 640;
  rec.height = 480;
  rec.bbox = {0.2, 0.3, 0.6, 0.8};
  rec.fingertips.slots[0] = {{0.25, 0.5}, true};
  SUBCASE("one turn maps (x,y) to (1-y,x) and swaps the frame") {
    const SampleRecord r = rotate_record_quarter(rec, 1);
    CHECK(r.width == 480);
    CHECK(r.height == 640);
    CHECK(r.fingertips.slots[0].point.x == doctest::Approx(0.5));
    CHECK(r.fingertips.slots[0].point.y == doctest::Approx(0.25));
    CHECK(r.bbox.x_min == doctest::Approx(1.0 - 0.8));
    CHECK(r.bbox.y_min == doctest::Approx(0.2));
    CHECK(r.bbox.x_max == doctest::Approx(1.0 - 0.3));
    CHECK(r.bbox.y_max == doctest::Approx(0.6));
  }
  SUBCASE("four turns restore the record") {
    SampleRecord r = rec;
    for (int i = 0; i < 4; ++i) r = rotate_record_quarter(r, 1);
    CHECK(r.width == rec.width);
    CHECK(r.bbox.x_min == doctest::Approx(rec.bbox.x_min));
    CHECK(r.fingertips.slots[0].point.x ==
          doctest::Approx(rec.fingertips.slots[0].point.x));
  }
  SUBCASE("k composes mod 4") {
    const SampleRecord a =
        rotate_record_quarter(rotate_record_quarter(rec, 1), 2);
    const SampleRecord b = rotate_record_quarter(rec, 3);
    CHECK(a.bbox.x_min == doctest::Approx(b.bbox.x_min));
    CHECK(a.fingertips.slots[0].point.y ==
          doctest::Approx(b.fingertips.slots[0].point.y));
  }
}

TEST_CASE("synthetic generation is deterministic and self-consistent") {
  const fs::path dir_a = make_temp_dir("synth_a");
  const fs::path dir_b = make_temp_dir("synth_b");
  SynthConfig cfg;
  cfg.count = 3;
  cfg.seed = 7;
  cfg.width = 320;
  cfg.height = 320;

  const std::string manifest_a = generate_synthetic(cfg, dir_a.string());
  const std::string manifest_b = generate_synthetic(cfg, dir_b.string());

  const auto read_bytes = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(read_bytes(manifest_a) == read_bytes(manifest_b));
  for (int i = 0; i < 3; ++i) {
    const std::string name = "images/0000" + std::to_string(i) + ".png";
    CHECK(read_bytes((dir_a / name).string()) ==
          read_bytes((dir_b / name).string()));
  }

  // Strict validation passes and every record references a readable image.
  const ManifestLoad load = load_manifest(manifest_a);
  CHECK(load.records.size() == 3);
  for (const ManifestIssue& issue : load.issues) CHECK_FALSE(issue.fatal);
  for (const SampleRecord& rec : load.records) {
    const ImageU8 frame =
        load_image(resolve_image_path(manifest_a, rec));
    CHECK(frame.width == rec.width);
    CHECK(frame.height == rec.height);
    CHECK(rec.fingertips.present_count() >= 1);
  }
}

TEST_CASE("rendered tips are recoverable and high-contrast") {
  const fs::path dir = make_temp_dir("synth_check");
  SynthConfig cfg;
  cfg.count = 6;
  cfg.seed = 11;
  cfg.width = 480;
  cfg.height = 360;
  const std::string manifest = generate_synthetic(cfg, dir.string());
  const ManifestLoad load = load_manifest(manifest);
  int tips_checked = 0;
  for (const SampleRecord& rec : load.records) {
    const ImageU8 frame = load_image(resolve_image_path(manifest, rec));
    for (const TipRenderCheck& check : check_rendered_tips(frame, rec)) {
      CHECK(check.recover_err_px <= 2.0);
      CHECK(check.contrast >= kMinTipContrast);
      ++tips_checked;
    }
  }
  CHECK(tips_checked >= 6);
}

TEST_CASE("finger count weights steer the sampler") {
  const fs::path dir = make_temp_dir("synth_w");
  SynthConfig cfg;
  cfg.count = 12;
  cfg.seed = 3;
  cfg.width = 320;
  cfg.height = 320;
  cfg.finger_count_distribution = {0, 0, 0, 0, 1};  // always five fingers
  const std::string manifest = generate_synthetic(cfg, dir.string());
  for (const SampleRecord& rec : load_manifest(manifest).records)
    CHECK(rec.fingertips.present_count() == 5);
}

TEST_CASE("synthetic config validation") {
  SynthConfig cfg;
  cfg.count = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, "/tmp/abfpe_unused"),
                  std::invalid_argument);
  cfg.count = 1;
  cfg.width = 100;  // too small for the scene layout
  CHECK_THROWS_AS(generate_synthetic(cfg, "/tmp/abfpe_unused"),
                  std::invalid_argument);
  cfg = {};
  cfg.count = 1;
  cfg.finger_count_distribution = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(generate_synthetic(cfg, "/tmp/abfpe_unused"),
                  std::invalid_argument);
}
