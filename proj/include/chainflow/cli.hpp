// Command-line surface: simulate, track, eval, anchors, gradcheck, pipeline.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "chainflow/chaining.hpp"
#include "chainflow/motio.hpp"
#include "chainflow/simulator.hpp"

namespace chainflow {

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct CliConfig {
  std::string subcommand;
  std::uint64_t seed = 0;

  // simulate / pipeline
  int frames = 100;
  int targets = 8;
  int image_w = 1920;
  int image_h = 1080;
  std::string out_dir;
  std::string noise = "none";
  std::vector<std::string> occlusions;  // "target:start:duration", 1-based

  // track
  std::string pairs_path;
  std::string out_path;
  int track_frames = 0;  // 0: infer from the pairs file
  TrackerParams tracker;

  // eval
  std::string gt_path;
  std::string res_path;
  std::string reports_path;
  double eval_iou = 0.5;
  double min_visibility = 0.1;
  ReportFormat format = ReportFormat::kTable;

  // anchors
  int k = 5;

  // gradcheck
  int instances = 100;
};

/// Thrown by parse_cli; `exit_code` is what run_cli returns and `message` is
/// the help or error text.
struct CliExit {
  int exit_code;
  std::string message;
};

/// Parses arguments (without the program name). Throws CliExit for --help,
/// a missing subcommand, unknown flags and out-of-range values.
CliConfig parse_cli(const std::vector<std::string>& args);

/// Runs a parsed command, writing normal output to `out` and diagnostics to
/// `err`.
int run_command(const CliConfig& config, std::ostream& out, std::ostream& err);

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace chainflow
