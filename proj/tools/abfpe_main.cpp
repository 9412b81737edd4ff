#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abfpe/data.hpp"
#include "abfpe/eval.hpp"
#include "abfpe/net.hpp"
#include "abfpe/train.hpp"

namespace {

using namespace abfpe;

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string join_comma(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += ',';
    out += parts[i];
  }
  return out;
}

// Defaults captured from vector options look like "[1,1,1,1,1]".
std::string plain_default(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != '[' && c != ']' && c != ' ' && c != '"') out += c;
  return out;
}

void write_config_snapshot(const CLI::App& cmd, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config snapshot: " + path);
  out << "# resolved settings for `" << cmd.get_name()
      << "`; re-feed with --config (explicit flags win)\n";
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "config" || name == "help") continue;
    if (opt->get_type_size_max() == 0) {
      if (opt->count() > 0) out << name << "=true\n";
      continue;
    }
    const std::string value = opt->count() > 0
                                  ? join_comma(opt->results())
                                  : plain_default(opt->get_default_str());
    if (value.empty()) continue;
    out << name << "=" << value << "\n";
  }
}

// Turns each key=value line into a --key=value token, dropping keys the
// command line already sets so explicit flags take precedence.
std::vector<std::string> config_file_tokens(
    const std::string& path, const std::vector<std::string>& explicit_names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim_copy(line);
    if (text.empty() || text[0] == '#') continue;
    const auto at = [&] {
      return path + " line " + std::to_string(line_no) + ": ";
    };
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(at() + "expected key=value");
    const std::string key = trim_copy(text.substr(0, eq));
    std::string value = trim_copy(text.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(at() + "empty key");
    if (key == "config")
      throw std::runtime_error(at() + "config files cannot nest");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (std::find(explicit_names.begin(), explicit_names.end(), key) !=
        explicit_names.end())
      continue;
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Splices --config FILE into the argument list before parsing.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  const std::vector<std::string> raw(argv + 1, argv + argc);
  std::vector<std::string> explicit_names;
  for (const std::string& tok : raw) {
    if (tok.rfind("--", 0) != 0) continue;
    const auto eq = tok.find('=');
    const std::string body =
        eq == std::string::npos ? tok.substr(2) : tok.substr(2, eq - 2);
    if (!body.empty() && body != "config") explicit_names.push_back(body);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string file;
    if (raw[i] == "--config") {
      if (i + 1 >= raw.size())
        throw std::runtime_error("--config needs a file path");
      file = raw[++i];
    } else if (raw[i].rfind("--config=", 0) == 0) {
      file = raw[i].substr(9);
    } else {
      out.push_back(raw[i]);
      continue;
    }
    const std::vector<std::string> extra =
        config_file_tokens(file, explicit_names);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

constexpr std::array<std::array<int, 3>, kNumFingers> kMarkerColors = {{
    {255, 64, 48},
    {64, 235, 64},
    {64, 128, 255},
    {250, 230, 40},
    {245, 60, 240},
}};

void draw_marker(ImageU8& img, const Point2& p, const std::array<int, 3>& c) {
  const int cx = static_cast<int>(std::lround(p.x - 0.5));
  const int cy = static_cast<int>(std::lround(p.y - 0.5));
  for (int dy = -9; dy <= 9; ++dy) {
    for (int dx = -9; dx <= 9; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
      const double r = std::hypot(dx, dy);
      const bool ring = r >= 6.0 && r <= 8.0;
      const bool dot = r <= 2.0;
      if (!ring && !dot) continue;
      for (int ch = 0; ch < 3; ++ch)
        img.at(x, y, ch) = static_cast<std::uint8_t>(c[ch]);
    }
  }
}

struct SynthArgs {
  int count = 0;
  std::uint64_t seed = 0;
  std::string out;
  int width = 640;
  int height = 480;
  std::vector<double> finger_weights{1, 1, 1, 1, 1};
};

int run_synth(const CLI::App& cmd, const SynthArgs& args) {
  SynthConfig cfg;
  cfg.count = args.count;
  cfg.seed = args.seed;
  cfg.width = args.width;
  cfg.height = args.height;
  std::copy_n(args.finger_weights.begin(), 5,
              cfg.finger_count_distribution.begin());
  const std::string manifest = generate_synthetic(cfg, args.out);
  write_config_snapshot(
      cmd, (std::filesystem::path(args.out) / "run_config.cfg").string());
  std::cout << manifest << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  AugmentationConfig aug;
  bool no_augment = false;
};

int run_train(const CLI::App& cmd, TrainArgs& args) {
  args.aug.enabled = !args.no_augment;
  const TrainResult result =
      train(args.train, args.model, args.aug, args.data, args.out, args.seed);
  write_config_snapshot(
      cmd, (std::filesystem::path(args.out) / "run_config.cfg").string());
  std::cout << result.checkpoint_path << "\n";
  std::cout << "final mean loss " << result.epoch_mean_loss.back() << " after "
            << result.iterations << " iterations\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string report;
  std::vector<double> deltas{10.0, 15.0};
  std::string pred_boxes;
  int expect_anchors = -1;
};

int run_eval(const CLI::App& cmd, const EvalArgs& args) {
  std::optional<int> expect;
  if (args.expect_anchors > 0) expect = args.expect_anchors;
  const LoadedModel model = load_checkpoint(args.checkpoint, expect);

  EvalOptions opts;
  opts.deltas = args.deltas;
  opts.pred_boxes_path = args.pred_boxes;
  const MetricsReport report = evaluate(model, args.data, opts);

  write_report(report, args.checkpoint, args.data, args.report);
  write_config_snapshot(cmd, args.report + ".cfg");

  std::cout << "avg_pixel_error=" << report.avg_pixel_error;
  for (const auto& t : report.per_threshold)
    std::cout << " f1@" << t.delta << "=" << t.f1;
  if (report.mean_iou >= 0.0) std::cout << " mean_iou=" << report.mean_iou;
  std::cout << "\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
  std::vector<double> bbox;
  std::string pred_boxes;
};

int run_predict(const CLI::App& cmd, const PredictArgs& args) {
  if (args.bbox.empty() && args.pred_boxes.empty())
    throw std::invalid_argument("either --bbox or --pred-boxes is required");

  const LoadedModel model = load_checkpoint(args.checkpoint);
  if (model.oracle_stub)
    throw std::runtime_error("an oracle-stub checkpoint cannot predict");

  ImageU8 frame = load_image(args.image);

  Box bbox;
  if (!args.bbox.empty()) {
    bbox = {args.bbox[0], args.bbox[1], args.bbox[2], args.bbox[3]};
  } else {
    std::ifstream in(args.pred_boxes);
    if (!in)
      throw std::runtime_error("cannot open predicted boxes: " +
                               args.pred_boxes);
    std::string line;
    bool found = false;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      const nlohmann::json j = nlohmann::json::parse(line);
      if (j.at("image").get<std::string>() != args.image) continue;
      bbox = {j.at("bbox")[0].get<double>(), j.at("bbox")[1].get<double>(),
              j.at("bbox")[2].get<double>(), j.at("bbox")[3].get<double>()};
      found = true;
      break;
    }
    if (!found)
      throw std::runtime_error("no box for image in sidecar: " + args.image);
  }

  SampleRecord rec;
  rec.image = args.image;
  rec.width = frame.width;
  rec.height = frame.height;
  rec.bbox = bbox;

  const AnchorGrid grid =
      build_anchor_grid(model.cfg.anchor_count, model.cfg.input_size,
                        anchor_layout_from_string(model.cfg.anchor_layout));
  const CropSample crop = prepare_crop(frame, rec, model.cfg.input_size);
  const FingertipSet tips = predict_frame_tips(model, grid, crop);

  nlohmann::ordered_json out_json;
  out_json["image"] = args.image;
  out_json["width"] = frame.width;
  out_json["height"] = frame.height;
  nlohmann::ordered_json fingers;
  for (int i = 0; i < kNumFingers; ++i) {
    if (!tips.slots[i].present) continue;
    fingers[kFingerNames[i]] = {tips.slots[i].point.x, tips.slots[i].point.y};
    draw_marker(frame, tips.slots[i].point, kMarkerColors[i]);
  }
  out_json["fingertips"] = fingers;

  save_image(frame, args.out);
  write_config_snapshot(cmd, args.out + ".cfg");
  std::cout << out_json.dump(2) << "\n";
  return 0;
}

struct PlotArgs {
  std::vector<std::string> reports;
  std::string out;
};

int run_plot_cde(const CLI::App& cmd, const PlotArgs& args) {
  constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                      "#9467bd", "#ff7f0e", "#17becf"};
  struct Curve {
    std::string label;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Curve> curves;
  double x_max = 0.0;
  for (const auto& path : args.reports) {
    const MetricsReport report = read_report(path);
    if (report.cde.empty())
      throw std::runtime_error("report has no error curve: " + path);
    curves.push_back(
        {std::filesystem::path(path).stem().string(), report.cde});
    x_max = std::max(x_max, report.cde.back().first);
  }
  if (x_max <= 0.0) x_max = 1.0;

  const double w = 640, h = 480;
  const double ml = 60, mr = 20, mt = 20, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  const auto sx = [&](double t) { return ml + pw * t / x_max; };
  const auto sy = [&](double f) { return mt + ph * (1.0 - f); };

  std::ofstream svg(args.out);
  if (!svg) throw std::runtime_error("cannot write plot: " + args.out);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h
      << "\">\n";
  svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    svg << "<line x1=\"" << ml << "\" y1=\"" << sy(f) << "\" x2=\"" << w - mr
        << "\" y2=\"" << sy(f) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(f) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << f << "</text>\n";
  }
  const double x_step = x_max > 10.0 ? 5.0 : 1.0;
  for (double t = 0.0; t <= x_max + 1e-9; t += x_step) {
    svg << "<line x1=\"" << sx(t) << "\" y1=\"" << mt << "\" x2=\"" << sx(t)
        << "\" y2=\"" << h - mb << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << sx(t) << "\" y=\"" << h - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << t << "</text>\n";
  }
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">average error threshold "
         "(px)</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">fraction of images</text>\n";

  for (size_t c = 0; c < curves.size(); ++c) {
    const char* color = kPalette[c % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& [t, f] : curves[c].points)
      svg << sx(t) << "," << sy(f) << " ";
    svg << "\"/>\n";
    const double ly = mt + 18 + 18 * c;
    svg << "<line x1=\"" << ml + 12 << "\" y1=\"" << ly << "\" x2=\""
        << ml + 40 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << ml + 46 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << curves[c].label << "</text>\n";
  }
  svg << "</svg>\n";
  svg.close();
  write_config_snapshot(cmd, args.out + ".cfg");
  std::cout << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor-based fingertip position estimation toolkit"};
  app.name(std::filesystem::path(argv[0]).filename().string());
  app.require_subcommand(1);

  // The token is consumed before parsing; the option exists for --help.
  std::string config_doc;
  const auto add_config_option = [&config_doc](CLI::App* cmd) {
    cmd->add_option("--config", config_doc,
                    "Key=value settings file; explicit flags win");
  };

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Render a synthetic dataset");
  add_config_option(synth);
  synth->add_option("--count", synth_args.count, "Number of images")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_args.seed, "Generator seed")
      ->capture_default_str();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--width", synth_args.width, "Frame width")
      ->capture_default_str();
  synth->add_option("--height", synth_args.height, "Frame height")
      ->capture_default_str();
  synth
      ->add_option("--finger-weights", synth_args.finger_weights,
                   "Sampling weights for finger counts 1..5")
      ->delimiter(',')
      ->expected(5)
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_config_option(train_cmd);
  train_cmd->add_option("--data", train_args.data, "Training manifest")
      ->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")
      ->required();
  train_cmd->add_option("--seed", train_args.seed, "Run seed")
      ->capture_default_str();
  train_cmd->add_option("--input-size", train_args.model.input_size,
                        "Model input side")
      ->capture_default_str();
  train_cmd->add_option("--anchors", train_args.model.anchor_count,
                        "Anchor count N")
      ->capture_default_str();
  train_cmd->add_option("--neck-channels", train_args.model.neck_channels,
                        "Neck width")
      ->capture_default_str();
  train_cmd->add_option("--backbone", train_args.model.backbone,
                        "Backbone name")
      ->capture_default_str();
  train_cmd->add_option("--backbone-blocks", train_args.model.backbone_blocks,
                        "Backbone block count")
      ->capture_default_str();
  train_cmd->add_option("--lr0", train_args.train.lr0, "Initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--power", train_args.train.power, "Poly decay power")
      ->capture_default_str();
  train_cmd->add_option("--momentum", train_args.train.momentum,
                        "Nesterov momentum")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", train_args.train.batch_size,
                        "Batch size")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train_args.train.epochs, "Epochs")
      ->capture_default_str();
  train_cmd->add_option("--restart-fraction", train_args.train.restart_fraction,
                        "Warm-restart point as a fraction of iterations")
      ->capture_default_str();
  train_cmd->add_option("--restart-lr", train_args.train.restart_lr,
                        "Learning rate at the restart")
      ->capture_default_str();
  train_cmd->add_option("--huber-delta", train_args.train.huber_delta,
                        "Huber threshold in normalized-offset units")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_args.train.checkpoint_every,
                        "Epochs between periodic checkpoints (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--hflip-prob", train_args.aug.hflip_prob,
                        "Horizontal flip probability")
      ->capture_default_str();
  train_cmd->add_option("--vflip-prob", train_args.aug.vflip_prob,
                        "Vertical flip probability")
      ->capture_default_str();
  train_cmd->add_option("--rotation-max-deg", train_args.aug.rotation_max_deg,
                        "Rotation range, degrees")
      ->capture_default_str();
  train_cmd->add_flag("--no-augment", train_args.no_augment,
                      "Disable augmentation");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_config_option(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")
      ->required();
  eval_cmd->add_option("--data", eval_args.data, "Evaluation manifest")
      ->required();
  eval_cmd->add_option("--report", eval_args.report, "Report JSON path")
      ->required();
  eval_cmd->add_option("--deltas", eval_args.deltas, "Match radii in px")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_option("--pred-boxes", eval_args.pred_boxes,
                       "JSON Lines {image, bbox} with predicted boxes");
  eval_cmd->add_option("--expect-anchors", eval_args.expect_anchors,
                       "Require this anchor count in the checkpoint")
      ->capture_default_str();

  PredictArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Detect fingertips in one image");
  add_config_option(predict_cmd);
  predict_cmd
      ->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint path")
      ->required();
  predict_cmd->add_option("--image", predict_args.image, "Input image")
      ->required();
  predict_cmd->add_option("--out", predict_args.out, "Overlay output path")
      ->required();
  predict_cmd
      ->add_option("--bbox", predict_args.bbox,
                   "Normalized hand box x_min,y_min,x_max,y_max")
      ->delimiter(',')
      ->expected(4);
  predict_cmd->add_option("--pred-boxes", predict_args.pred_boxes,
                          "JSON Lines sidecar with a box for --image");

  PlotArgs plot_args;
  CLI::App* plot_cmd =
      app.add_subcommand("plot-cde", "Plot cumulative error curves");
  add_config_option(plot_cmd);
  plot_cmd
      ->add_option("--reports", plot_args.reports, "Evaluation report JSONs")
      ->delimiter(',')
      ->required();
  plot_cmd->add_option("--out", plot_args.out, "Output SVG path")->required();

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(*synth, synth_args);
    if (train_cmd->parsed()) return run_train(*train_cmd, train_args);
    if (eval_cmd->parsed()) return run_eval(*eval_cmd, eval_args);
    if (predict_cmd->parsed()) return run_predict(*predict_cmd, predict_args);
    if (plot_cmd->parsed()) return run_plot_cde(*plot_cmd, plot_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
