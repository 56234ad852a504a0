#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lsc/calibration.hpp"
#include "lsc/components.hpp"
#include "lsc/losses.hpp"
#include "lsc/mvol.hpp"
#include "lsc/nn/checkpoint.hpp"
#include "lsc/phantom.hpp"
#include "lsc/raw_stack.hpp"
#include "lsc/segmentation.hpp"
#include "lsc/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace lsc::app {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& name, const std::string& text, std::size_t n) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--" + name + ": not a number: '" + item + "'");
    }
  }
  if (v.size() != n) {
    throw UsageError("--" + name + ": expected " + std::to_string(n) + " comma-separated values");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string pose_text(const RigidPose& pose) {
  std::string s;
  char buf[64];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, "%.12f\n", pose.rotation(r, c));
      s += buf;
    }
  }
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof buf, "%.12f\n", pose.translation[i]);
    s += buf;
  }
  return s;
}

RigidPose read_pose(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read pose file " + path.string());
  double v[12];
  for (double& x : v) {
    if (!(f >> x)) throw std::runtime_error("pose file needs 12 values: " + path.string());
  }
  RigidPose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = v[3 * r + c];
  p.translation = Vec3(v[9], v[10], v[11]);
  return p;
}

// Inserts `--key=value` for each config line right after the subcommand, so
// flags given on the command line come later and take precedence.
std::vector<std::string> splice_config(std::vector<std::string> args) {
  std::optional<fs::path> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config || args.empty()) return args;
  if (!fs::is_regular_file(*config)) throw UsageError("config file not found: " + config->string());
  std::vector<std::string> spliced;
  for (const auto& [name, value] : read_key_value_file(*config)) {
    std::string key = name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    spliced.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, spliced.begin(), spliced.end());
  return args;
}

struct Common {
  std::string input;
  std::string output;
  std::uint64_t seed = 0;
  std::string config;
  int workers = 1;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& about, Common& c,
                      bool with_input = true) {
  CLI::App* sub = app.add_subcommand(name, about);
  sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  if (with_input) sub->add_option("--input", c.input, "Input path")->required();
  sub->add_option("--output", c.output, "Output path")->required();
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--config", c.config, "key=value file applied before the flags");
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::Range(1, 256));
  return sub;
}

// ---- phantom ----

const char* const kPhantomKeys[] = {
    "major_radius",    "tube_radius",          "arc_span", "half_separation", "shell_thickness",
    "canal_intensity", "bone_intensity", "background_intensity", "noise",    "dims",
    "spacing",         "skew_euler",     "skew_translation",
};

struct PhantomArgs {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_phantom_options(CLI::App* sub, PhantomArgs& a, const std::string& skip = {}) {
  for (const char* key : kPhantomKeys) {
    if (key == skip) continue;
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    a.options[key] = sub->add_option("--" + flag, a.values[key]);
  }
}

PhantomSpec phantom_spec(const PhantomArgs& a, std::uint64_t seed) {
  std::map<std::string, std::string> kv;
  for (const auto& [key, opt] : a.options) {
    if (opt->count() > 0) kv[key] = a.values.at(key);
  }
  kv["seed"] = std::to_string(seed);
  PhantomSpec spec;
  spec.apply(kv);
  spec.validate();
  return spec;
}

int cmd_phantom(const Common& c, const PhantomArgs& a, std::ostream& out) {
  const PhantomSpec spec = phantom_spec(a, c.seed);
  const Phantom ph = generate_phantom(spec);
  const fs::path dir(c.output);
  fs::create_directories(dir);
  write_mvol(ph.volume, dir / "volume.mvol");
  write_mvol(ph.mask, dir / "mask.mvol");
  write_text(dir / "pose.txt", pose_text(ph.pose));
  write_text(dir / "spec.txt", spec.to_text());
  out << "phantom: " << ph.mask.foreground_count() << " canal voxels written to " << dir.string() << '\n';
  return kOk;
}

// ---- segment-threshold ----

struct ThresholdArgs {
  float lo = 0.0f;
  float hi = 0.0f;
  std::size_t keep = 2;
};

int cmd_segment_threshold(const Common& c, const ThresholdArgs& a, std::ostream& out) {
  if (!(a.lo <= a.hi)) throw UsageError("--lo must not exceed --hi");
  const Volume vol = read_volume(c.input);
  const LabelMask mask = threshold_segment(vol, a.lo, a.hi, a.keep);
  ensure_parent(c.output);
  write_mvol(mask, c.output);
  out << "segment-threshold: " << mask.foreground_count() << " voxels\n";
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string mask;
  std::string log;
  int iterations = 500;
  int batch = 2;
  double lr = 1e-3;
  std::string lambda = "0.5,0.25";
  std::string ce_mode = "balanced";
  double smooth = 1.0;
  double max_rotation = 5.0;
};

void load_pair(const std::string& input, const std::string& mask_path, Volume& vol, LabelMask& mask) {
  fs::path vpath(input), mpath(mask_path);
  if (fs::is_directory(vpath)) {
    if (mpath.empty()) mpath = vpath / "mask.mvol";
    vpath /= "volume.mvol";
  }
  if (mpath.empty()) throw UsageError("--mask is required when --input is a file");
  vol = read_volume(vpath);
  mask = read_mask(mpath);
}

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  Volume vol;
  LabelMask mask;
  load_pair(c.input, a.mask, vol, mask);

  nn::NetworkConfig config;
  const auto lambda = parse_list("lambda", a.lambda, nn::NetworkConfig::kAuxHeads);
  config.lambda.assign(lambda.begin(), lambda.end());
  config.validate();

  TrainOptions opts;
  opts.iterations = a.iterations;
  opts.batch = a.batch;
  opts.lr = a.lr;
  opts.seed = c.seed;
  opts.loss.smooth = a.smooth;
  opts.loss.ce_mode = a.ce_mode == "foreground" ? CeMode::ForegroundOnly : CeMode::Balanced;
  opts.augment.max_rotation_deg = a.max_rotation;

  nn::MffNet<float> net(config, c.seed);
  nn::Adam<float> opt(net.parameters(), {.lr = a.lr});

  const fs::path ckpt(c.output);
  const fs::path log_path = a.log.empty() ? fs::path(ckpt.string() + ".loss.csv") : fs::path(a.log);
  ensure_parent(ckpt);
  ensure_parent(log_path);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  std::vector<JointLoss> curve;
  try {
    curve = train(net, opt, vol, mask, opts, &log);
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged at iteration " << e.iteration() << '\n';
    return kError;
  }
  nn::write_checkpoint(ckpt, nn::snapshot(net, &opt));
  out << "train: " << curve.size() << " iterations";
  if (!curve.empty()) out << ", final loss " << curve.back().total;
  out << ", checkpoint " << ckpt.string() << '\n';
  return kOk;
}

// ---- infer ----

struct InferArgs {
  std::string checkpoint;
  std::string probability;
  float threshold = 0.5f;
  int stride = kCuboidSide / 2;
};

int cmd_infer(const Common& c, const InferArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_regular_file(a.checkpoint)) throw std::runtime_error("checkpoint not found: " + a.checkpoint);
  const nn::MffNet<float> net = nn::restore_network(nn::read_checkpoint(a.checkpoint));
  const Volume vol = read_volume(c.input);
  InferOptions opts;
  opts.threshold = a.threshold;
  opts.stride = a.stride;
  opts.workers = c.workers;
  const InferResult r = infer(net, vol, opts);
  if (r.empty) err << "warning: empty segmentation\n";
  ensure_parent(c.output);
  write_mvol(r.mask, c.output);
  if (!a.probability.empty()) {
    ensure_parent(a.probability);
    write_mvol(r.probability, a.probability);
  }
  out << "infer: " << r.mask.foreground_count() << " voxels\n";
  return kOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string mask;
  CalibrationOptions opts;
};

int cmd_calibrate(const Common& c, const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  Volume vol;
  LabelMask mask;
  load_pair(c.input, a.mask, vol, mask);
  CalibrationOptions opts = a.opts;
  opts.workers = c.workers;
  const CalibrationResult r = calibrate(vol, mask, opts);

  const fs::path dir(c.output);
  fs::create_directories(dir);
  if (r.volume) write_mvol(*r.volume, dir / "calibrated_volume.mvol");
  if (r.mask) write_mvol(*r.mask, dir / "calibrated_mask.mvol");
  write_text(dir / "report.json", r.report.to_json() + "\n");

  out << "calibrate: rank " << to_string(r.report.rank.rank) << ", " << r.report.iterations
      << " iterations, L1 " << r.report.l1_mm << " mm\n";
  if (!r.report.error.empty()) err << "error: " << r.report.error << '\n';
  return r.report.rank.rank == Rank::Failed ? kRankFailed : kOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string truth;
  std::string pose;
  std::string report;
  int batch = 0;
  double max_skew = 15.0;
  double max_shift = 3.0;
  double noise = 0.0;
  std::string segment = "exact";
};

struct PoseError {
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
};

// `calibration` maps world to calibrated coordinates; `truth` maps the
// canonical phantom frame to world. A perfect calibration composes to identity.
PoseError pose_error(const RigidPose& calibration, const RigidPose& truth) {
  const RigidPose comp = calibration.compose(truth);
  return {rotation_angle_deg(comp.rotation, Mat3::Identity()), comp.translation.norm()};
}

json component_dsc(const LabelMask& pred, const LabelMask& truth) {
  const GridGeometry& g = truth.geometry();
  auto side_mask = [&](const std::vector<Index3>& voxels) {
    std::vector<std::uint8_t> v(g.dims.count(), 0);
    for (const Index3& p : voxels) v[g.linear(p.x, p.y, p.z)] = 1;
    return v;
  };
  json j;
  try {
    const CanalSplit t = split_components(truth, 1);
    std::optional<CanalSplit> p;
    try {
      p = split_components(pred, 1);
    } catch (const InsufficientAnchors&) {
    }
    const auto tl = side_mask(t.left), tr = side_mask(t.right);
    j["left"] = p ? dsc_metric(side_mask(p->left), tl) : 0.0;
    j["right"] = p ? dsc_metric(side_mask(p->right), tr) : 0.0;
  } catch (const InsufficientAnchors&) {
    j["left"] = nullptr;
    j["right"] = nullptr;
  }
  return j;
}

int cmd_evaluate_single(const Common& c, const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.truth.empty()) throw UsageError("--truth is required");
  const LabelMask pred = read_mask(c.input);
  const LabelMask truth = read_mask(a.truth);
  if (!(pred.geometry() == truth.geometry())) throw std::runtime_error("shape mismatch between prediction and truth");

  json j;
  if (pred.foreground_count() == 0) err << "warning: empty prediction\n";
  j["dsc"] = dsc_metric(pred, truth);
  j["component_dsc"] = component_dsc(pred, truth);

  std::optional<CalibrationReport> report;
  if (!a.report.empty()) {
    std::ifstream f(a.report);
    if (!f) throw std::runtime_error("cannot read report " + a.report);
    std::stringstream ss;
    ss << f.rdbuf();
    report = CalibrationReport::from_json(ss.str());
    j["rank"] = to_string(report->rank.rank);
  }
  if (report && !a.pose.empty()) {
    const PoseError e = pose_error(report->transform, read_pose(a.pose));
    j["rotation_error_deg"] = e.rotation_deg;
    j["translation_error_mm"] = e.translation_mm;
  }
  const std::string text = j.dump(2) + "\n";
  ensure_parent(c.output);
  write_text(c.output, text);
  out << text;
  return kOk;
}

int cmd_evaluate_batch(const Common& c, const EvaluateArgs& a, const PhantomArgs& pa, std::ostream& out) {
  if (a.segment != "exact" && a.segment != "threshold") throw UsageError("--segment must be exact or threshold");
  CalibrationOptions opts;
  opts.workers = c.workers;
  std::map<Rank, int> counts{{Rank::Excellent, 0}, {Rank::Good, 0}, {Rank::Failed, 0}};
  json cases = json::array();
  std::ostringstream table;
  table << std::fixed << std::setprecision(3);
  table << "case  rank        rot_err_deg  trans_err_mm  slice_gap  mirror_dsc\n";
  for (int i = 0; i < a.batch; ++i) {
    PhantomSpec spec = phantom_spec(pa, c.seed + std::uint64_t(i));
    auto draw = [&](int k) { return hashed_uniform(c.seed ^ 0x5eedULL, std::uint64_t(8 * i + k)); };
    spec.skew.rotation = rotation_from_euler_deg(a.max_skew * draw(0), a.max_skew * draw(1), a.max_skew * draw(2));
    spec.skew.translation = Vec3(a.max_shift * draw(3), a.max_shift * draw(4), a.max_shift * draw(5));
    spec.noise_amplitude = float(a.noise);
    const Phantom ph = generate_phantom(spec);

    LabelMask mask = ph.mask;
    if (a.segment == "threshold") {
      const float half = float(spec.intensity_gap() / 2.0);
      try {
        mask = threshold_segment(ph.volume, spec.canal_intensity - half, spec.canal_intensity + half);
      } catch (const EmptySegmentation&) {
        mask = LabelMask(ph.mask.geometry(), std::vector<std::uint8_t>(ph.mask.size(), 0));
      }
    }
    const CalibrationResult r = calibrate_mask(mask, opts);
    const PoseError e = pose_error(r.report.transform, ph.pose);
    const Rank rank = r.report.rank.rank;
    ++counts[rank];
    char line[160];
    std::snprintf(line, sizeof line, "%4d  %-10s  %11.3f  %12.3f  %9.3f  %10.3f\n", i, to_string(rank).c_str(),
                  e.rotation_deg, e.translation_mm, r.report.rank.centroid_gap_slices, r.report.rank.mirror_dsc);
    table << line;
    json cj;
    cj["case"] = i;
    cj["rank"] = to_string(rank);
    cj["rotation_error_deg"] = e.rotation_deg;
    cj["translation_error_mm"] = e.translation_mm;
    if (!r.report.error.empty()) cj["error"] = r.report.error;
    cases.push_back(cj);
  }
  table << "\nrank        count  percent\n";
  json summary;
  for (Rank rank : {Rank::Excellent, Rank::Good, Rank::Failed}) {
    const int n = counts[rank];
    const double pct = a.batch > 0 ? 100.0 * n / a.batch : 0.0;
    char line[80];
    std::snprintf(line, sizeof line, "%-10s  %5d  %6.2f%%\n", to_string(rank).c_str(), n, pct);
    table << line;
    summary[to_string(rank)] = n;
  }
  json j;
  j["cases"] = cases;
  j["rank_counts"] = summary;
  ensure_parent(c.output);
  write_text(c.output, j.dump(2) + "\n");
  out << table.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lateral semicircular canal segmentation and calibration", "lsc"};
  app.require_subcommand(1);

  Common common;

  PhantomArgs phantom_args;
  CLI::App* phantom = add_command(app, "phantom", "Generate a synthetic two-canal phantom", common, false);
  add_phantom_options(phantom, phantom_args);

  ThresholdArgs threshold_args;
  CLI::App* segment = add_command(app, "segment-threshold", "Intensity-band segmentation", common);
  segment->add_option("--lo", threshold_args.lo, "Lower intensity bound")->required();
  segment->add_option("--hi", threshold_args.hi, "Upper intensity bound")->required();
  segment->add_option("--keep", threshold_args.keep, "Largest components kept");

  TrainArgs train_args;
  CLI::App* trainc = add_command(app, "train", "Train the segmentation network", common);
  trainc->add_option("--mask", train_args.mask, "Label mask (defaults to mask.mvol next to the volume)");
  trainc->add_option("--log", train_args.log, "Loss CSV path");
  trainc->add_option("--iterations", train_args.iterations)->check(CLI::NonNegativeNumber);
  trainc->add_option("--batch", train_args.batch)->check(CLI::PositiveNumber);
  trainc->add_option("--lr", train_args.lr)->check(CLI::PositiveNumber);
  trainc->add_option("--lambda", train_args.lambda, "Aux head weights, comma separated");
  trainc->add_option("--ce-mode", train_args.ce_mode)->check(CLI::IsMember({"balanced", "foreground"}));
  trainc->add_option("--smooth", train_args.smooth)->check(CLI::NonNegativeNumber);
  trainc->add_option("--max-rotation", train_args.max_rotation, "Augmentation rotation bound, degrees");

  InferArgs infer_args;
  CLI::App* inferc = add_command(app, "infer", "Sliding-window network segmentation", common);
  inferc->add_option("--checkpoint", infer_args.checkpoint)->required();
  inferc->add_option("--probability", infer_args.probability, "Also write the fused probability volume");
  inferc->add_option("--threshold", infer_args.threshold)->check(CLI::Range(0.0, 1.0));
  inferc->add_option("--stride", infer_args.stride)->check(CLI::Range(1, kCuboidSide));

  CalibrateArgs calib_args;
  CLI::App* calib = add_command(app, "calibrate", "Align the canals to a calibrated frame", common);
  calib->add_option("--mask", calib_args.mask, "Label mask (defaults to mask.mvol next to the volume)");
  calib->add_option("--l0", calib_args.opts.l0_mm, "Convergence threshold, mm")->check(CLI::PositiveNumber);
  calib->add_option("--max-iter", calib_args.opts.max_iter)->check(CLI::PositiveNumber);
  calib->add_option("--spacing", calib_args.opts.spacing_mm, "Output spacing, mm")->check(CLI::PositiveNumber);
  calib->add_option("--anchor-cap", calib_args.opts.anchor_cap_mm, "Anchor averaging depth, mm")
      ->check(CLI::NonNegativeNumber);
  calib->add_option("--mask-interp", calib_args.opts.mask_interpolation, "Mask resampling: linear or nearest")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, MaskInterpolation>{{"linear", MaskInterpolation::Linear},
                                                   {"nearest", MaskInterpolation::Nearest}},
          CLI::ignore_case));

  EvaluateArgs eval_args;
  PhantomArgs eval_phantom;
  CLI::App* eval = add_command(app, "evaluate", "Segmentation and calibration metrics", common, false);
  eval->add_option("--input", common.input, "Predicted mask");
  eval->add_option("--truth", eval_args.truth, "Ground-truth mask");
  eval->add_option("--pose", eval_args.pose, "Ground-truth pose file");
  eval->add_option("--report", eval_args.report, "Calibration report");
  eval->add_option("--batch", eval_args.batch, "Run N seeded skewed phantoms instead")->check(CLI::NonNegativeNumber);
  eval->add_option("--max-skew", eval_args.max_skew, "Batch skew bound per axis, degrees");
  eval->add_option("--max-shift", eval_args.max_shift, "Batch shift bound per axis, mm");
  eval->add_option("--noise", eval_args.noise, "Batch noise amplitude");
  eval->add_option("--segment", eval_args.segment, "Batch masks: exact or threshold");
  add_phantom_options(eval, eval_phantom, "noise");

  try {
    std::vector<std::string> args = splice_config(raw_args);
    std::vector<const char*> argv{"lsc"};
    for (const auto& s : args) argv.push_back(s.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(common, phantom_args, out);
    if (segment->parsed()) return cmd_segment_threshold(common, threshold_args, out);
    if (trainc->parsed()) return cmd_train(common, train_args, out, err);
    if (inferc->parsed()) return cmd_infer(common, infer_args, out, err);
    if (calib->parsed()) return cmd_calibrate(common, calib_args, out, err);
    if (eval->parsed()) {
      if (eval_args.batch > 0) return cmd_evaluate_batch(common, eval_args, eval_phantom, out);
      if (common.input.empty()) throw UsageError("--input is required");
      return cmd_evaluate_single(common, eval_args, out, err);
    }
  } catch (const PhantomSpecError& e) {
    err << "error: invalid phantom " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace lsc::app
