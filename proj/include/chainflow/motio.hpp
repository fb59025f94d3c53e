// Readers and writers for MOTChallenge ground truth, results and seqinfo.ini,
// the box-pair interchange CSV, and evaluation report tables.
//
// Frames are 1-based in files and 0-based in memory; the conversion happens
// only here. CSVs have no header row and use LF line endings.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "chainflow/chaining.hpp"
#include "chainflow/metrics.hpp"
#include "chainflow/sequence.hpp"

namespace chainflow {

struct SequenceInfo {
  std::string name;
  int frame_count = 0;
  int image_w = 0;
  int image_h = 0;
  double frame_rate = 30.0;

  friend bool operator==(const SequenceInfo&, const SequenceInfo&) = default;
};

/// Rows `frame,id,x,y,w,h,conf,class,visibility`; keeps rows whose visibility
/// is above `min_visibility`. Frames come back in ascending order with boxes
/// sorted by identity; frames without kept rows are omitted.
std::vector<GroundTruthFrame> parse_gt(std::istream& in,
                                       double min_visibility = 0.1,
                                       const std::string& source = "<gt>");
std::vector<GroundTruthFrame> parse_gt(const std::filesystem::path& path,
                                       double min_visibility = 0.1);

/// Writes ground truth as `frame,id,x,y,w,h,1,1,visibility`.
void write_gt(std::ostream& out, std::span<const GroundTruthFrame> frames);
void write_gt(const std::filesystem::path& path,
              std::span<const GroundTruthFrame> frames);

/// Rows `frame,id,x,y,w,h,conf,...`; columns after conf are ignored.
Trajectories parse_results(std::istream& in,
                           const std::string& source = "<results>");
Trajectories parse_results(const std::filesystem::path& path);

/// Rows `frame,id,x,y,w,h,conf,-1,-1,-1` with two decimals, ordered by
/// (frame, id).
void write_results(std::ostream& out, const Trajectories& tracks);
void write_results(const std::filesystem::path& path,
                   const Trajectories& tracks);

/// Rows `t,x1,y1,w1,h1,x2,y2,w2,h2,cls_score,id_score` grouped into nodes in
/// ascending t.
std::vector<Node> parse_pairs(std::istream& in,
                              const std::string& source = "<pairs>");
std::vector<Node> parse_pairs(const std::filesystem::path& path);

/// Shortest round-trip decimal representation, so parse_pairs recovers every
/// value exactly.
void write_pairs(std::ostream& out, std::span<const Node> nodes);
void write_pairs(const std::filesystem::path& path,
                 std::span<const Node> nodes);

/// `[Sequence]` section with name, seqLength, imWidth, imHeight, frameRate.
SequenceInfo parse_seqinfo(std::istream& in,
                           const std::string& source = "<seqinfo>");
SequenceInfo parse_seqinfo(const std::filesystem::path& path);
void write_seqinfo(std::ostream& out, const SequenceInfo& info);
void write_seqinfo(const std::filesystem::path& path, const SequenceInfo& info);

/// Per-sequence table with header
/// `sequence,MOTA,IDF1,MOTP,MT,ML,FP,FN,IDS,GT,tracks` (MT/ML in percent).
/// Match and MT/ML counts are reconstructed from the columns.
std::vector<ClearReport> parse_report_table(std::istream& in,
                                            const std::string& source = "<table>");
std::vector<ClearReport> parse_report_table(const std::filesystem::path& path);

enum class ReportFormat { kTable, kCsv, kJson };

/// Columns MOTA, IDF1, MOTP, MT, ML, FP, FN, IDS, one row per report followed
/// by the totals row.
std::string format_reports(std::span<const ClearReport> rows,
                           const ClearReport& total, ReportFormat format);

}  // namespace chainflow
