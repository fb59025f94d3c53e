#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "chainflow/errors.hpp"
#include "chainflow/motio.hpp"
#include "chainflow/simulator.hpp"
#include "json.hpp"

using chainflow::Boxd;

namespace {

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    chainflow::parse_gt(in);
  } catch (const chainflow::ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Gt, ParsesConvertsFramesAndFiltersVisibility) {
  std::istringstream in(
      "2,5,10,20,30,40,1,1,0.9\n"
      "1,3,1.5,2.5,3,4,1,1,1\n"
      "\n"
      "1,1,0,0,5,5,1,1,0.1\n"  // at the threshold: dropped
      "1,2,7,7,5,5,0,1,0.5\n");
  const auto frames = chainflow::parse_gt(in, 0.1);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].frame, 0);
  EXPECT_EQ(frames[0].identities, (std::vector<int>{2, 3}));
  EXPECT_EQ(frames[0].boxes[1], Boxd(1.5, 2.5, 3, 4));
  EXPECT_DOUBLE_EQ(frames[0].visibilities[0], 0.5);
  EXPECT_EQ(frames[1].frame, 1);
}

TEST(Gt, ReportsLineNumbers) {
  EXPECT_EQ(parse_error_line("1,1,0,0,5,5,1,1,1\n1,1,0,0,5\n"), 2u);
  EXPECT_EQ(parse_error_line("1,1,0,0,5,5,1,1,1\n\n1,2,x,0,5,5,1,1,1\n"), 3u);
  EXPECT_EQ(parse_error_line("0,1,0,0,5,5,1,1,1\n"), 1u);        // frame < 1
  EXPECT_EQ(parse_error_line("1,1,0,0,0,5,1,1,1\n"), 1u);        // w = 0
  EXPECT_EQ(parse_error_line("1,1,0,0,5,5,1,1,1.5\n"), 1u);      // visibility
  EXPECT_EQ(parse_error_line("1,1,0,0,5,5,1,1,1\n1,1,3,3,5,5,1,1,1\n"), 2u);
  EXPECT_EQ(parse_error_line("1.5,1,0,0,5,5,1,1,1\n"), 1u);
}

TEST(Gt, WriteParseRoundTrip) {
  chainflow::WorldConfig cfg;
  cfg.frames = 10;
  const auto seq = chainflow::gen_sequence(cfg, 12);
  std::stringstream io;
  chainflow::write_gt(io, seq);
  const auto back = chainflow::parse_gt(io, -1.0);
  ASSERT_EQ(back.size(), seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    EXPECT_EQ(back[f].frame, seq[f].frame);
    EXPECT_EQ(back[f].identities, seq[f].identities);
    for (std::size_t i = 0; i < seq[f].size(); ++i) {
      EXPECT_NEAR(back[f].boxes[i].x(), seq[f].boxes[i].x(), 0.005 + 1e-9);
      EXPECT_NEAR(back[f].boxes[i].h(), seq[f].boxes[i].h(), 0.005 + 1e-9);
    }
  }
}

TEST(Results, WriteFormatAndRoundTrip) {
  chainflow::Trajectories tracks;
  tracks[0].push_back({2, Boxd(1, 2, 3, 4), 0.5});
  tracks[0].push_back({1, Boxd(1.234, 2, 3, 4), 1.0});
  tracks[4].push_back({1, Boxd(5, 6, 7, 8), 0.25});
  std::ostringstream out;
  chainflow::write_results(out, tracks);
  EXPECT_EQ(out.str(),
            "1,1,1.23,2.00,3.00,4.00,1.00,-1,-1,-1\n"
            "1,2,1.00,2.00,3.00,4.00,0.50,-1,-1,-1\n"
            "5,1,5.00,6.00,7.00,8.00,0.25,-1,-1,-1\n");
  std::istringstream in(out.str());
  const auto back = chainflow::parse_results(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at(0)[0].identity, 1);
  EXPECT_DOUBLE_EQ(back.at(4)[0].score, 0.25);
}

TEST(Results, AcceptsSevenColumnsAndRejectsDuplicates) {
  std::istringstream ok("3,9,0,0,4,4,0.7\n");
  EXPECT_EQ(chainflow::parse_results(ok).at(2)[0].identity, 9);
  std::istringstream dup("1,1,0,0,4,4,1\n1,1,5,5,4,4,1\n");
  EXPECT_THROW(chainflow::parse_results(dup), chainflow::ParseError);
}

TEST(Pairs, RoundTripIsExact) {
  chainflow::WorldConfig cfg;
  cfg.frames = 15;
  const auto seq = chainflow::gen_sequence(cfg, 2);
  const auto nodes =
      chainflow::corrupt_to_pairs(seq, chainflow::NoiseConfig::typical(), 2);
  std::stringstream io;
  chainflow::write_pairs(io, nodes);
  const auto back = chainflow::parse_pairs(io);
  std::size_t i = 0;
  for (const auto& n : nodes) {
    if (n.pairs.empty()) continue;
    ASSERT_LT(i, back.size());
    EXPECT_EQ(back[i].t, n.t);
    EXPECT_EQ(back[i].pairs, n.pairs);
    ++i;
  }
  EXPECT_EQ(i, back.size());
}

TEST(Pairs, StrictColumnCountAndScoreRange) {
  std::istringstream ten("1,0,0,1,1,0,0,1,1,0.5\n");
  EXPECT_THROW(chainflow::parse_pairs(ten), chainflow::ParseError);
  std::istringstream score("1,0,0,1,1,0,0,1,1,0.5,1.2\n");
  EXPECT_THROW(chainflow::parse_pairs(score), chainflow::ParseError);
  std::istringstream grouped(
      "2,0,0,1,1,0,0,1,1,0.5,0.5\n"
      "1,0,0,1,1,0,0,1,1,0.5,0.5\n"
      "2,5,5,1,1,5,5,1,1,0.5,0.5\n");
  const auto nodes = chainflow::parse_pairs(grouped);
  ASSERT_EQ(nodes.size(), 2u);
  EXPECT_EQ(nodes[0].t, 0);
  EXPECT_EQ(nodes[1].pairs.size(), 2u);
}

TEST(Seqinfo, RoundTripAndMissingKey) {
  const chainflow::SequenceInfo info{"MOT16-02", 600, 1920, 1080, 30.0};
  std::stringstream io;
  chainflow::write_seqinfo(io, info);
  EXPECT_EQ(chainflow::parse_seqinfo(io), info);

  std::istringstream partial("[Sequence]\nname=x\nseqLength=5\nimWidth=10\n"
                             "frameRate=25\n");
  try {
    chainflow::parse_seqinfo(partial);
    FAIL() << "expected ParseError";
  } catch (const chainflow::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("imHeight"), std::string::npos);
  }

  std::istringstream other_section(
      "[Other]\nseqLength=1\n[Sequence]\nname=y\nseqLength=7\nimWidth=4\n"
      "imHeight=3\nframeRate=10\n");
  EXPECT_EQ(chainflow::parse_seqinfo(other_section).frame_count, 7);
}

TEST(Files, MissingFileIsIoError) {
  EXPECT_THROW(chainflow::parse_gt(std::filesystem::path("/nonexistent/gt.txt")),
               chainflow::IoError);
  EXPECT_THROW(chainflow::write_results(
                   std::filesystem::path("/nonexistent/dir/res.txt"), {}),
               chainflow::IoError);
}

TEST(ReportTable, ParsesFixture) {
  const auto rows = chainflow::parse_report_table(
      std::filesystem::path(CHAINFLOW_TEST_DATA) / "mot16_table.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].name, "MOT16-01");
  EXPECT_EQ(rows[0].fp, 713);
  EXPECT_EQ(rows[0].matches, 6395 - 2918);
  EXPECT_EQ(rows[0].mostly_tracked, 7);
  EXPECT_EQ(rows[0].mostly_lost, 7);
  std::istringstream bad("seq,MOTA\n");
  EXPECT_THROW(chainflow::parse_report_table(bad), chainflow::ParseError);
}

TEST(FormatReports, ColumnOrderInEveryFormat) {
  chainflow::ClearReport r;
  r.name = "s";
  r.mota = 50;
  r.idf1 = 60;
  r.motp = 70;
  r.mt = 10;
  r.ml = 20;
  r.fp = 1;
  r.fn = 2;
  r.ids = 3;
  const std::vector<chainflow::ClearReport> rows{r};
  const auto total = chainflow::aggregate(rows);

  const auto csv = chainflow::format_reports(rows, total,
                                             chainflow::ReportFormat::kCsv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "sequence,MOTA,IDF1,MOTP,MT,ML,FP,FN,IDS");
  EXPECT_NE(csv.find("s,50.0,60.0,70.0,10.0,20.0,1,2,3"), std::string::npos);

  const auto table = chainflow::format_reports(rows, total,
                                               chainflow::ReportFormat::kTable);
  const auto header = table.substr(0, table.find('\n'));
  std::size_t last = 0;
  for (const char* col : {"MOTA", "IDF1", "MOTP", "MT", "ML", "FP", "FN", "IDS"}) {
    const auto at = header.find(col, last);
    ASSERT_NE(at, std::string::npos) << col;
    last = at + 1;
  }

  const auto json = nlohmann::ordered_json::parse(chainflow::format_reports(
      rows, total, chainflow::ReportFormat::kJson));
  std::vector<std::string> keys;
  for (const auto& [k, v] : json["sequences"][0].items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"sequence", "MOTA", "IDF1", "MOTP",
                                            "MT", "ML", "FP", "FN", "IDS",
                                            "GT"}));
  EXPECT_EQ(json["total"]["IDS"], 3);
}
