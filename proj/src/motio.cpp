#include "chainflow/motio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "chainflow/errors.hpp"
#include "json.hpp"

namespace chainflow {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Reads non-blank lines, handing each to `fn` with its 1-based number.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    fn(std::string_view(line), number);
  }
}

class FieldReader {
 public:
  FieldReader(const std::string& source, std::size_t line,
              std::vector<std::string_view> fields)
      : source_(source), line_(line), fields_(std::move(fields)) {}

  std::size_t size() const { return fields_.size(); }

  void require(std::size_t n) const {
    if (fields_.size() < n) {
      fail("expected at least " + std::to_string(n) + " fields, got " +
           std::to_string(fields_.size()));
    }
  }

  double real(std::size_t i) const {
    double value = 0.0;
    const auto f = fields_[i];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
    if (ec != std::errc() || ptr != f.data() + f.size() ||
        !std::isfinite(value)) {
      fail("field " + std::to_string(i + 1) + " is not a number: '" +
           std::string(f) + "'");
    }
    return value;
  }

  int integer(std::size_t i) const {
    const double value = real(i);
    if (value != std::floor(value) || std::abs(value) > 2e9) {
      fail("field " + std::to_string(i + 1) + " is not an integer: '" +
           std::string(fields_[i]) + "'");
    }
    return static_cast<int>(value);
  }

  std::string_view text(std::size_t i) const { return fields_[i]; }

  Boxd box(std::size_t i) const {
    const double x = real(i), y = real(i + 1), w = real(i + 2), h = real(i + 3);
    if (!(w > 0.0) || !(h > 0.0)) {
      fail("box width and height must be positive");
    }
    return Boxd(x, y, w, h);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_, line_, what);
  }

 private:
  const std::string& source_;
  std::size_t line_;
  std::vector<std::string_view> fields_;
};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

int to_internal_frame(const FieldReader& row, std::size_t i) {
  const int frame = row.integer(i);
  if (frame < 1) row.fail("frame numbers start at 1");
  return frame - 1;
}

}  // namespace

std::vector<GroundTruthFrame> parse_gt(std::istream& in, double min_visibility,
                                       const std::string& source) {
  std::map<int, std::map<int, std::pair<Boxd, double>>> rows;
  for_each_line(in, [&](std::string_view line, std::size_t number) {
    FieldReader row(source, number, split(line, ','));
    row.require(9);
    const int frame = to_internal_frame(row, 0);
    const int id = row.integer(1);
    const Boxd box = row.box(2);
    row.real(6);
    row.real(7);
    const double visibility = row.real(8);
    if (visibility < 0.0 || visibility > 1.0) {
      row.fail("visibility must lie in [0, 1]");
    }
    if (!(visibility > min_visibility)) return;
    if (!rows[frame].emplace(id, std::make_pair(box, visibility)).second) {
      row.fail("identity " + std::to_string(id) + " repeated in frame " +
               std::to_string(frame + 1));
    }
  });

  std::vector<GroundTruthFrame> frames;
  for (const auto& [frame, boxes] : rows) {
    GroundTruthFrame f;
    f.frame = frame;
    for (const auto& [id, entry] : boxes) f.add(entry.first, id, entry.second);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<GroundTruthFrame> parse_gt(const std::filesystem::path& path,
                                       double min_visibility) {
  auto in = open_in(path);
  return parse_gt(in, min_visibility, path.string());
}

void write_gt(std::ostream& out, std::span<const GroundTruthFrame> frames) {
  std::vector<const GroundTruthFrame*> ordered;
  for (const auto& f : frames) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->frame < b->frame; });
  for (const auto* f : ordered) {
    std::vector<std::size_t> idx(f->size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return f->identities[a] < f->identities[b];
    });
    for (std::size_t i : idx) {
      const Boxd& b = f->boxes[i];
      out << (f->frame + 1) << ',' << f->identities[i] << ',' << fixed2(b.x())
          << ',' << fixed2(b.y()) << ',' << fixed2(b.w()) << ','
          << fixed2(b.h()) << ",1,1," << fixed2(f->visibilities[i]) << '\n';
    }
  }
}

void write_gt(const std::filesystem::path& path,
              std::span<const GroundTruthFrame> frames) {
  auto out = open_out(path);
  write_gt(out, frames);
  finish(out, path);
}

Trajectories parse_results(std::istream& in, const std::string& source) {
  Trajectories tracks;
  std::set<std::pair<int, int>> seen;
  for_each_line(in, [&](std::string_view line, std::size_t number) {
    FieldReader row(source, number, split(line, ','));
    row.require(7);
    const int frame = to_internal_frame(row, 0);
    const int id = row.integer(1);
    const Boxd box = row.box(2);
    const double conf = row.real(6);
    if (!seen.emplace(frame, id).second) {
      row.fail("identity " + std::to_string(id) + " repeated in frame " +
               std::to_string(frame + 1));
    }
    tracks[frame].push_back({id, box, conf});
  });
  normalize(tracks);
  return tracks;
}

Trajectories parse_results(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_results(in, path.string());
}

void write_results(std::ostream& out, const Trajectories& tracks) {
  for (const auto& [frame, row] : tracks) {
    std::vector<const TrackedBox*> ordered;
    for (const auto& b : row) ordered.push_back(&b);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) {
                       return a->identity < b->identity;
                     });
    for (const auto* b : ordered) {
      out << (frame + 1) << ',' << b->identity << ',' << fixed2(b->box.x())
          << ',' << fixed2(b->box.y()) << ',' << fixed2(b->box.w()) << ','
          << fixed2(b->box.h()) << ',' << fixed2(b->score) << ",-1,-1,-1\n";
    }
  }
}

void write_results(const std::filesystem::path& path,
                   const Trajectories& tracks) {
  auto out = open_out(path);
  write_results(out, tracks);
  finish(out, path);
}

std::vector<Node> parse_pairs(std::istream& in, const std::string& source) {
  std::map<int, Node> nodes;
  for_each_line(in, [&](std::string_view line, std::size_t number) {
    FieldReader row(source, number, split(line, ','));
    if (row.size() != 11) {
      row.fail("expected 11 fields, got " + std::to_string(row.size()));
    }
    const int t = to_internal_frame(row, 0);
    const Boxd first = row.box(1);
    const Boxd second = row.box(5);
    const double cls = row.real(9);
    const double id = row.real(10);
    if (cls < 0.0 || cls > 1.0 || id < 0.0 || id > 1.0) {
      row.fail("scores must lie in [0, 1]");
    }
    auto& node = nodes[t];
    node.t = t;
    node.pairs.push_back({first, second, cls, id});
  });
  std::vector<Node> out;
  out.reserve(nodes.size());
  for (auto& [t, node] : nodes) out.push_back(std::move(node));
  return out;
}

std::vector<Node> parse_pairs(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_pairs(in, path.string());
}

void write_pairs(std::ostream& out, std::span<const Node> nodes) {
  std::vector<const Node*> ordered;
  for (const auto& n : nodes) ordered.push_back(&n);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Node* a, const Node* b) { return a->t < b->t; });
  for (const Node* n : ordered) {
    for (const auto& p : n->pairs) {
      out << (n->t + 1);
      for (const Boxd* b : {&p.first, &p.second}) {
        out << ',' << shortest(b->x()) << ',' << shortest(b->y()) << ','
            << shortest(b->w()) << ',' << shortest(b->h());
      }
      out << ',' << shortest(p.cls_score) << ',' << shortest(p.id_score)
          << '\n';
    }
  }
}

void write_pairs(const std::filesystem::path& path,
                 std::span<const Node> nodes) {
  auto out = open_out(path);
  write_pairs(out, nodes);
  finish(out, path);
}

SequenceInfo parse_seqinfo(std::istream& in, const std::string& source) {
  std::map<std::string, std::pair<std::string, std::size_t>> values;
  bool in_sequence = false;
  for_each_line(in, [&](std::string_view line, std::size_t number) {
    const auto body = trim(line);
    if (body.front() == ';' || body.front() == '#') return;
    if (body.front() == '[') {
      if (body.back() != ']') {
        throw ParseError(source, number, "unterminated section header");
      }
      in_sequence = body == "[Sequence]";
      return;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source, number, "expected key=value");
    }
    if (!in_sequence) return;
    values[std::string(trim(body.substr(0, eq)))] = {
        std::string(trim(body.substr(eq + 1))), number};
  });

  auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>& {
    const auto it = values.find(key);
    if (it == values.end()) {
      throw ParseError(source + ": missing key '" + key +
                       "' in [Sequence] section");
    }
    return it->second;
  };
  auto number = [&](const std::string& key) {
    const auto& [text, line] = get(key);
    FieldReader row(source, line, {std::string_view(text)});
    return row.real(0);
  };
  auto positive_int = [&](const std::string& key) {
    const auto& [text, line] = get(key);
    FieldReader row(source, line, {std::string_view(text)});
    const int v = row.integer(0);
    if (v <= 0) row.fail(key + " must be positive");
    return v;
  };

  SequenceInfo info;
  info.name = get("name").first;
  info.frame_count = positive_int("seqLength");
  info.image_w = positive_int("imWidth");
  info.image_h = positive_int("imHeight");
  info.frame_rate = number("frameRate");
  if (!(info.frame_rate > 0.0)) {
    throw ParseError(source, get("frameRate").second,
                     "frameRate must be positive");
  }
  return info;
}

SequenceInfo parse_seqinfo(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_seqinfo(in, path.string());
}

void write_seqinfo(std::ostream& out, const SequenceInfo& info) {
  out << "[Sequence]\n"
      << "name=" << info.name << '\n'
      << "imDir=img1\n"
      << "frameRate=" << shortest(info.frame_rate) << '\n'
      << "seqLength=" << info.frame_count << '\n'
      << "imWidth=" << info.image_w << '\n'
      << "imHeight=" << info.image_h << '\n'
      << "imExt=.jpg\n";
}

void write_seqinfo(const std::filesystem::path& path,
                   const SequenceInfo& info) {
  auto out = open_out(path);
  write_seqinfo(out, info);
  finish(out, path);
}

std::vector<ClearReport> parse_report_table(std::istream& in,
                                            const std::string& source) {
  std::vector<ClearReport> reports;
  bool header = true;
  for_each_line(in, [&](std::string_view line, std::size_t number) {
    FieldReader row(source, number, split(line, ','));
    if (header) {
      header = false;
      if (row.size() != 11 || row.text(0) != "sequence") {
        row.fail(
            "expected header sequence,MOTA,IDF1,MOTP,MT,ML,FP,FN,IDS,GT,tracks");
      }
      return;
    }
    if (row.size() != 11) row.fail("expected 11 fields");
    ClearReport r;
    r.name = std::string(row.text(0));
    r.mota = row.real(1);
    r.idf1 = row.real(2);
    r.motp = row.real(3);
    r.mt = row.real(4);
    r.ml = row.real(5);
    r.fp = row.integer(6);
    r.fn = row.integer(7);
    r.ids = row.integer(8);
    r.gt_count = row.integer(9);
    r.gt_tracks = row.integer(10);
    if (r.fp < 0 || r.fn < 0 || r.ids < 0 || r.gt_count <= 0 ||
        r.gt_tracks <= 0 || r.fn > r.gt_count) {
      row.fail("inconsistent counts");
    }
    r.matches = r.gt_count - r.fn;
    r.mostly_tracked = std::lround(r.mt * static_cast<double>(r.gt_tracks) / 100.0);
    r.mostly_lost = std::lround(r.ml * static_cast<double>(r.gt_tracks) / 100.0);
    reports.push_back(std::move(r));
  });
  return reports;
}

std::vector<ClearReport> parse_report_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_report_table(in, path.string());
}

std::string format_reports(std::span<const ClearReport> rows,
                           const ClearReport& total, ReportFormat format) {
  std::vector<const ClearReport*> all;
  for (const auto& r : rows) all.push_back(&r);
  all.push_back(&total);

  std::ostringstream out;
  char buf[256];
  switch (format) {
    case ReportFormat::kTable: {
      std::size_t width = 8;
      for (const auto* r : all) width = std::max(width, r->name.size());
      const int w = static_cast<int>(width);
      std::snprintf(buf, sizeof(buf), "%-*s %6s %6s %6s %7s %7s %8s %8s %6s\n",
                    w, "Sequence", "MOTA", "IDF1", "MOTP", "MT", "ML", "FP",
                    "FN", "IDS");
      out << buf;
      for (const auto* r : all) {
        if (r == &total) out << std::string(width + 66, '-') << '\n';
        std::snprintf(buf, sizeof(buf),
                      "%-*s %6.1f %6.1f %6.1f %6.1f%% %6.1f%% %8ld %8ld %6ld\n",
                      w, r->name.c_str(), r->mota, r->idf1, r->motp, r->mt,
                      r->ml, r->fp, r->fn, r->ids);
        out << buf;
      }
      break;
    }
    case ReportFormat::kCsv: {
      out << "sequence,MOTA,IDF1,MOTP,MT,ML,FP,FN,IDS\n";
      for (const auto* r : all) {
        std::snprintf(buf, sizeof(buf), "%s,%.1f,%.1f,%.1f,%.1f,%.1f,%ld,%ld,%ld\n",
                      r->name.c_str(), r->mota, r->idf1, r->motp, r->mt, r->ml,
                      r->fp, r->fn, r->ids);
        out << buf;
      }
      break;
    }
    case ReportFormat::kJson: {
      auto to_json = [](const ClearReport& r) {
        return nlohmann::ordered_json{
            {"sequence", r.name}, {"MOTA", r.mota}, {"IDF1", r.idf1},
            {"MOTP", r.motp},     {"MT", r.mt},     {"ML", r.ml},
            {"FP", r.fp},         {"FN", r.fn},     {"IDS", r.ids},
            {"GT", r.gt_count}};
      };
      nlohmann::ordered_json doc;
      doc["sequences"] = nlohmann::ordered_json::array();
      for (const auto& r : rows) doc["sequences"].push_back(to_json(r));
      doc["total"] = to_json(total);
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace chainflow
