#include "chainflow/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "chainflow/anchors.hpp"
#include "chainflow/errors.hpp"
#include "chainflow/metrics.hpp"
#include "chainflow/supervision.hpp"

namespace fs = std::filesystem;

namespace chainflow {

namespace {

const std::map<std::string, ReportFormat> kFormats = {
    {"table", ReportFormat::kTable},
    {"csv", ReportFormat::kCsv},
    {"json", ReportFormat::kJson}};

void add_seed(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void add_world(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--frames", c.frames, "Sequence length")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  cmd->add_option("--targets", c.targets, "Number of targets")
      ->capture_default_str()
      ->check(CLI::Range(0, 1000));
  cmd->add_option("--width", c.image_w, "Image width")
      ->capture_default_str()
      ->check(CLI::Range(64, 16384));
  cmd->add_option("--height", c.image_h, "Image height")
      ->capture_default_str()
      ->check(CLI::Range(64, 16384));
  cmd->add_option("--noise", c.noise, "Detection noise")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "typical"}));
  cmd->add_option("--occlude", c.occlusions,
                  "Hide a target: target:start:duration (1-based)");
}

void add_tracker(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--sigma", c.tracker.sigma, "Frames a lost tracklet is kept")
      ->capture_default_str()
      ->check(CLI::Range(0, 100000));
  cmd->add_option("--iou", c.tracker.iou_match_thresh, "Chaining IoU threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--nms", c.tracker.nms_thresh, "Soft-NMS IoU threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--conf", c.tracker.conf_thresh, "Confidence threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--fill-gaps", c.tracker.fill_gaps,
                "Interpolate boxes across retained gaps");
}

void add_eval(CLI::App* cmd, CliConfig& c, const char* iou_flag) {
  cmd->add_option(iou_flag, c.eval_iou, "Evaluation IoU threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--min-visibility", c.min_visibility,
                  "Drop ground truth at or below this visibility")
      ->capture_default_str()
      ->check(CLI::Range(-1.0, 1.0));
  cmd->add_option("--format", c.format, "Output format")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case))
      ->default_str("table");
}

std::vector<Occlusion> parse_occlusions(const std::vector<std::string>& specs) {
  std::vector<Occlusion> out;
  for (const auto& s : specs) {
    Occlusion o;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> o.target >> c1 >> o.start >> c2 >> o.duration) || c1 != ':' ||
        c2 != ':' || !(in >> std::ws).eof() || o.target < 1 || o.start < 1 ||
        o.duration < 1) {
      throw std::invalid_argument("--occlude expects target:start:duration "
                                  "with positive integers, got '" + s + "'");
    }
    --o.target;
    --o.start;
    out.push_back(o);
  }
  return out;
}

struct Simulated {
  std::vector<GroundTruthFrame> gt;
  std::vector<Node> pairs;
  SequenceInfo info;
};

Simulated simulate(const CliConfig& c) {
  WorldConfig world;
  world.frames = c.frames;
  world.n_targets = c.targets;
  world.image_w = c.image_w;
  world.image_h = c.image_h;
  world.occlusions = parse_occlusions(c.occlusions);
  const NoiseConfig noise =
      c.noise == "typical" ? NoiseConfig::typical() : NoiseConfig{};

  Simulated s;
  s.gt = gen_sequence(world, c.seed);
  s.pairs = corrupt_to_pairs(s.gt, noise, c.seed + 1);
  s.info = {"sim-" + std::to_string(c.seed), c.frames, c.image_w, c.image_h,
            30.0};
  return s;
}

int cmd_simulate(const CliConfig& c, std::ostream& out) {
  const Simulated s = simulate(c);
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_gt(dir / "gt.txt", s.gt);
  write_seqinfo(dir / "seqinfo.ini", s.info);
  write_pairs(dir / "pairs.csv", s.pairs);
  out << "wrote " << s.gt.size() << " frames to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_track(const CliConfig& c, std::ostream& out) {
  const std::vector<Node> nodes = parse_pairs(fs::path(c.pairs_path));
  const std::optional<int> frames =
      c.track_frames > 0 ? std::optional<int>(c.track_frames) : std::nullopt;
  const Trajectories tracks = run_tracker(nodes, c.tracker, frames);
  write_results(fs::path(c.out_path), tracks);
  std::set<int> ids;
  for (const auto& [f, row] : tracks) {
    for (const auto& b : row) ids.insert(b.identity);
  }
  out << "wrote " << box_count(tracks) << " boxes in " << ids.size()
      << " tracks to " << c.out_path << "\n";
  return kExitOk;
}

// Ground truth of a sequence directory: <dir>/gt/gt.txt or <dir>/gt.txt.
std::optional<fs::path> find_gt(const fs::path& dir) {
  for (const fs::path p : {dir / "gt" / "gt.txt", dir / "gt.txt"}) {
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

// seqinfo.ini next to the ground truth or one level up.
std::optional<FrameRange> find_range(const fs::path& gt_file) {
  for (const fs::path dir : {gt_file.parent_path(),
                             gt_file.parent_path().parent_path()}) {
    const fs::path ini = dir / "seqinfo.ini";
    if (fs::is_regular_file(ini)) {
      const SequenceInfo info = parse_seqinfo(ini);
      return FrameRange{0, info.frame_count - 1};
    }
  }
  return std::nullopt;
}

ClearReport eval_one(const std::string& name, const fs::path& gt_file,
                     const fs::path& res_file, const CliConfig& c) {
  const Trajectories gt =
      to_trajectories(parse_gt(gt_file, c.min_visibility));
  const Trajectories hyp = parse_results(res_file);
  return evaluate(name, gt, hyp, c.eval_iou, find_range(gt_file));
}

int cmd_eval(const CliConfig& c, std::ostream& out) {
  std::vector<ClearReport> rows;
  if (!c.reports_path.empty()) {
    rows = parse_report_table(fs::path(c.reports_path));
  } else {
    const fs::path gt(c.gt_path), res(c.res_path);
    if (fs::is_directory(gt)) {
      if (!fs::is_directory(res)) {
        throw IoError("--res must be a directory when --gt is one: " +
                      res.string());
      }
      std::vector<fs::path> seqs;
      for (const auto& entry : fs::directory_iterator(gt)) {
        if (entry.is_directory() && find_gt(entry.path())) {
          seqs.push_back(entry.path());
        }
      }
      std::sort(seqs.begin(), seqs.end());
      if (seqs.empty()) throw IoError("no sequences under " + gt.string());
      for (const auto& seq : seqs) {
        const std::string name = seq.filename().string();
        const fs::path res_file = res / (name + ".txt");
        if (!fs::is_regular_file(res_file)) {
          throw IoError("missing result file " + res_file.string());
        }
        rows.push_back(eval_one(name, *find_gt(seq), res_file, c));
      }
    } else {
      rows.push_back(eval_one(res.stem().string(), gt, res, c));
    }
  }
  const ClearReport total = aggregate(rows);
  out << format_reports(rows, total, c.format);
  return kExitOk;
}

int cmd_anchors(const CliConfig& c, std::ostream& out) {
  std::vector<Boxd> boxes;
  for (const auto& frame : parse_gt(fs::path(c.gt_path), c.min_visibility)) {
    boxes.insert(boxes.end(), frame.boxes.begin(), frame.boxes.end());
  }
  for (double s : kmeans_scales(boxes, c.k, c.seed)) {
    out << std::fixed << std::setprecision(2) << s << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck(const CliConfig& c, std::ostream& out) {
  const GradcheckReport r = gradient_check(c.seed, c.instances);
  out << (r.passed ? "PASS" : "FAIL") << " instances=" << r.instances
      << " coordinates=" << r.coordinates << " max_rel_error="
      << std::scientific << std::setprecision(3) << r.max_rel_error << "\n";
  return r.passed ? kExitOk : kExitValidation;
}

// Everything goes through the file formats in memory, so the pipeline sees
// exactly what simulate / track / eval would.
int cmd_pipeline(const CliConfig& c, std::ostream& out) {
  const Simulated s = simulate(c);

  std::stringstream gt_io, pairs_io, res_io;
  write_gt(gt_io, s.gt);
  write_pairs(pairs_io, s.pairs);
  const std::vector<Node> nodes = parse_pairs(pairs_io);
  write_results(res_io, run_tracker(nodes, c.tracker, s.info.frame_count));

  const Trajectories gt = to_trajectories(parse_gt(gt_io, c.min_visibility));
  const Trajectories hyp = parse_results(res_io);
  const std::vector<ClearReport> rows = {
      evaluate(s.info.name, gt, hyp, c.eval_iou,
               FrameRange{0, s.info.frame_count - 1})};
  out << format_reports(rows, aggregate(rows), c.format);
  return kExitOk;
}

}  // namespace

CliConfig parse_cli(const std::vector<std::string>& args) {
  CliConfig c;
  CLI::App app{"Chained box-pair multi-object tracking toolkit", "chainflow"};
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic sequence");
  add_seed(sim, c);
  add_world(sim, c);
  sim->add_option("--out", c.out_dir, "Output directory")->required();

  auto* track = app.add_subcommand("track", "Chain box pairs into tracks");
  track->add_option("--pairs", c.pairs_path, "Box-pair CSV")->required();
  track->add_option("--out", c.out_path, "Result file")->required();
  track->add_option("--frames", c.track_frames,
                    "Sequence length (default: last pair frame)")
      ->check(CLI::Range(1, 10000000));
  add_tracker(track, c);

  auto* eval = app.add_subcommand("eval", "Score results against ground truth");
  auto* gt_opt = eval->add_option("--gt", c.gt_path, "Ground-truth file or dir");
  auto* res_opt = eval->add_option("--res", c.res_path, "Result file or dir");
  auto* rep_opt = eval->add_option("--reports", c.reports_path,
                                   "Aggregate an existing per-sequence table");
  gt_opt->needs(res_opt);
  res_opt->needs(gt_opt);
  rep_opt->excludes(gt_opt)->excludes(res_opt);
  add_eval(eval, c, "--iou");

  auto* anchors = app.add_subcommand("anchors", "Cluster anchor scales");
  anchors->add_option("--gt", c.gt_path, "Ground-truth file")->required();
  anchors->add_option("--k", c.k, "Number of scales")
      ->capture_default_str()
      ->check(CLI::Range(1, 1000));
  anchors->add_option("--min-visibility", c.min_visibility,
                      "Drop ground truth at or below this visibility")
      ->capture_default_str()
      ->check(CLI::Range(-1.0, 1.0));
  add_seed(anchors, c);

  auto* grad = app.add_subcommand("gradcheck", "Check loss gradients");
  add_seed(grad, c);
  grad->add_option("--instances", c.instances, "Random instances")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));

  auto* pipe = app.add_subcommand("pipeline", "simulate, track and eval");
  add_seed(pipe, c);
  add_world(pipe, c);
  add_tracker(pipe, c);
  add_eval(pipe, c, "--eval-iou");

  app.require_subcommand(0, 1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw CliExit{kExitOk, app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw CliExit{kExitOk, app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw CliExit{kExitValidation, std::string("error: ") + e.what() + "\n" +
                                       "Run with --help for usage.\n"};
  }

  const auto chosen = app.get_subcommands();
  if (chosen.empty()) throw CliExit{kExitValidation, app.help()};
  c.subcommand = chosen.front()->get_name();
  if (c.subcommand == "eval" && c.reports_path.empty() && c.gt_path.empty()) {
    throw CliExit{kExitValidation,
                  "error: eval needs --gt and --res, or --reports\n"};
  }
  return c;
}

int run_command(const CliConfig& c, std::ostream& out, std::ostream& err) {
  try {
    c.tracker.validate();
    if (c.subcommand == "simulate") return cmd_simulate(c, out);
    if (c.subcommand == "track") return cmd_track(c, out);
    if (c.subcommand == "eval") return cmd_eval(c, out);
    if (c.subcommand == "anchors") return cmd_anchors(c, out);
    if (c.subcommand == "gradcheck") return cmd_gradcheck(c, out);
    if (c.subcommand == "pipeline") return cmd_pipeline(c, out);
    err << "error: unknown command '" << c.subcommand << "'\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CliConfig config;
  try {
    config = parse_cli(args);
  } catch (const CliExit& e) {
    (e.exit_code == kExitOk ? out : err) << e.message;
    return e.exit_code;
  }
  return run_command(config, out, err);
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace chainflow
