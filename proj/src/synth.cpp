#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "abfpe/data.hpp"

namespace abfpe {

namespace {

// Saturated per-slot disk colors. Each slot's dominant channel stays far
// from every other surface the renderer produces, which is what keeps the
// kMinTipContrast invariant true everywhere in a scene.
constexpr std::array<std::array<int, 3>, kNumFingers> kSlotColors = {{
    {250, 70, 60},    // thumb: red
    {80, 240, 75},    // index: green
    {85, 140, 250},   // middle: blue
    {245, 225, 60},   // ring: yellow
    {240, 70, 235},   // pinky: magenta
}};

constexpr double kHighlight = 55.0;  // radial brightness peak at disk center
constexpr std::array<int, 3> kPalmBase = {170, 138, 112};

std::uint8_t q(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

void fill_background(ImageU8& img, Rng& rng) {
  // Smooth value-noise lattice in a muted band, plus per-pixel grain.
  const int cell = 80;
  const int gw = img.width / cell + 2;
  const int gh = img.height / cell + 2;
  std::vector<std::array<int, 3>> lattice(static_cast<size_t>(gw) * gh);
  for (auto& node : lattice)
    for (int c = 0; c < 3; ++c) node[c] = rng.uniform_int(45, 135);

  for (int y = 0; y < img.height; ++y) {
    const int cy = y / cell;
    const double fy = static_cast<double>(y % cell) / cell;
    for (int x = 0; x < img.width; ++x) {
      const int cx = x / cell;
      const double fx = static_cast<double>(x % cell) / cell;
      const auto& n00 = lattice[cy * gw + cx];
      const auto& n01 = lattice[cy * gw + cx + 1];
      const auto& n10 = lattice[(cy + 1) * gw + cx];
      const auto& n11 = lattice[(cy + 1) * gw + cx + 1];
      for (int c = 0; c < 3; ++c) {
        const double top = n00[c] * (1.0 - fx) + n01[c] * fx;
        const double bot = n10[c] * (1.0 - fx) + n11[c] * fx;
        const double base = top * (1.0 - fy) + bot * fy;
        const double grain = static_cast<double>(rng.uniform_int(-6, 6));
        img.at(x, y, c) = q(base + grain);
      }
    }
  }
}

void draw_ellipse(ImageU8& img, const Point2& c, double a, double b,
                  double theta, const std::array<int, 3>& color) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ex = std::sqrt(a * a * ct * ct + b * b * st * st);
  const double ey = std::sqrt(a * a * st * st + b * b * ct * ct);
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - ex - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.x + ex + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - ey - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.y + ey + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0)
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = q(color[ch]);
    }
  }
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, {a.x + t * vx, a.y + t * vy});
}

void draw_capsule(ImageU8& img, const Point2& p0, const Point2& p1,
                  double half_width, const std::array<int, 3>& color) {
  const double pad = half_width + 1;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p0.x, p1.x) - pad)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(p0.x, p1.x) + pad)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p0.y, p1.y) - pad)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(p0.y, p1.y) + pad)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (segment_distance({x + 0.5, y + 0.5}, p0, p1) <= half_width)
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = q(color[ch]);
}

void draw_tip_disk(ImageU8& img, const Point2& c, double rho,
                   const std::array<int, 3>& base) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - rho - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.x + rho + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - rho - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.y + rho + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double r = distance({x + 0.5, y + 0.5}, c);
      if (r > rho) continue;
      const double h = kHighlight * (1.0 - (r * r) / (rho * rho));
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = q(base[ch] + h);
    }
  }
}

int sample_finger_count(Rng& rng, const std::array<double, 5>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("finger count weights must be >= 0");
    total += w;
  }
  if (total <= 0.0)
    throw std::invalid_argument("finger count weights must not all be zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (int i = 0; i < 5; ++i) {
    acc += weights[i];
    if (u < acc) return i + 1;
  }
  return 5;
}

struct Scene {
  ImageU8 img;
  SampleRecord rec;
};

Scene render_scene(const SynthConfig& cfg, Rng& rng,
                   const std::string& image_name) {
  const double w = cfg.width, h = cfg.height;
  Scene scene;
  scene.img = ImageU8(cfg.width, cfg.height);
  fill_background(scene.img, rng);

  const Point2 palm{rng.uniform(90.0, w - 90.0), rng.uniform(90.0, h - 90.0)};
  const double palm_a = rng.uniform(40.0, 56.0);
  const double palm_b = rng.uniform(30.0, 42.0);
  const double palm_theta = rng.uniform(0.0, 2.0 * M_PI);
  std::array<int, 3> palm_color{};
  for (int c = 0; c < 3; ++c)
    palm_color[c] = kPalmBase[c] + rng.uniform_int(-15, 15);
  const double hand_angle = rng.uniform(0.0, 2.0 * M_PI);

  const int finger_count =
      sample_finger_count(rng, cfg.finger_count_distribution);
  std::array<int, kNumFingers> order{0, 1, 2, 3, 4};
  for (int i = kNumFingers - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  std::vector<int> slots(order.begin(), order.begin() + finger_count);
  std::sort(slots.begin(), slots.end());

  struct Finger {
    int slot;
    Point2 tip;
    double rho, half_width;
    std::array<int, 3> color;
  };
  std::vector<Finger> fingers;
  for (int slot : slots) {
    Finger f;
    f.slot = slot;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 10000)
        throw std::logic_error("finger placement failed to converge");
      const double fan = hand_angle + (slot - 2) * 0.32;
      const double ang = attempt < 40 ? fan + rng.uniform(-0.10, 0.10)
                                      : rng.uniform(0.0, 2.0 * M_PI);
      const double len = rng.uniform(75.0, 130.0);
      f.rho = rng.uniform(10.0, 13.0);
      f.half_width = rng.uniform(7.0, 11.0);
      f.tip = {palm.x + std::cos(ang) * len, palm.y + std::sin(ang) * len};
      const double margin = f.rho + 6.0;
      bool ok = f.tip.x >= margin && f.tip.x <= w - margin &&
                f.tip.y >= margin && f.tip.y <= h - margin;
      for (const auto& other : fingers)
        ok = ok && distance(f.tip, other.tip) >= f.rho + other.rho + 4.0;
      if (ok) break;
    }
    for (int c = 0; c < 3; ++c)
      f.color[c] = palm_color[c] + rng.uniform_int(-10, 10);
    fingers.push_back(f);
  }

  draw_ellipse(scene.img, palm, palm_a, palm_b, palm_theta, palm_color);
  for (const auto& f : fingers)
    draw_capsule(scene.img, palm, f.tip, f.half_width, f.color);
  for (const auto& f : fingers) {
    std::array<int, 3> color{};
    for (int c = 0; c < 3; ++c)
      color[c] = kSlotColors[f.slot][c] + rng.uniform_int(-8, 8);
    draw_tip_disk(scene.img, f.tip, f.rho, color);
  }

  const double ct = std::cos(palm_theta), st = std::sin(palm_theta);
  double x_min = palm.x - std::sqrt(palm_a * palm_a * ct * ct + palm_b * palm_b * st * st);
  double x_max = 2.0 * palm.x - x_min;
  double y_min = palm.y - std::sqrt(palm_a * palm_a * st * st + palm_b * palm_b * ct * ct);
  double y_max = 2.0 * palm.y - y_min;
  for (const auto& f : fingers) {
    const double reach = std::max(f.rho, f.half_width);
    x_min = std::min({x_min, palm.x - f.half_width, f.tip.x - reach});
    x_max = std::max({x_max, palm.x + f.half_width, f.tip.x + reach});
    y_min = std::min({y_min, palm.y - f.half_width, f.tip.y - reach});
    y_max = std::max({y_max, palm.y + f.half_width, f.tip.y + reach});
  }
  x_min = std::clamp(x_min - 2.0, 0.0, w);
  x_max = std::clamp(x_max + 2.0, 0.0, w);
  y_min = std::clamp(y_min - 2.0, 0.0, h);
  y_max = std::clamp(y_max + 2.0, 0.0, h);

  scene.rec.image = image_name;
  scene.rec.width = cfg.width;
  scene.rec.height = cfg.height;
  scene.rec.bbox = {x_min / w, y_min / h, x_max / w, y_max / h};
  for (const auto& f : fingers)
    scene.rec.fingertips.slots[f.slot] = {{f.tip.x / w, f.tip.y / h}, true};
  return scene;
}

}  // namespace

std::string generate_synthetic(const SynthConfig& cfg,
                               const std::string& out_dir) {
  if (cfg.count <= 0) throw std::invalid_argument("count must be > 0");
  if (cfg.width < 256 || cfg.height < 256)
    throw std::invalid_argument("image_size must be at least 256x256");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec)
    throw std::runtime_error("cannot create output directory: " + out_dir +
                             " (" + ec.message() + ")");

  std::vector<SampleRecord> records;
  records.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    // Per-image derived stream: image i is independent of count.
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof(name), "images/%05d.png", i);
    Scene scene = render_scene(cfg, rng, name);
    save_image(scene.img, (fs::path(out_dir) / scene.rec.image).string());
    records.push_back(std::move(scene.rec));
  }

  const std::string manifest = (fs::path(out_dir) / "manifest.jsonl").string();
  save_manifest(records, manifest);
  return manifest;
}

}  // namespace abfpe
