#include "notesplit/segmenter.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "notesplit/error.hpp"
#include "notesplit/utf8.hpp"

namespace notesplit {

namespace {

bool is_blank(std::u32string_view line) {
  for (char32_t cp : line)
    if (!utf8::is_space(cp)) return false;
  return true;
}

bool is_bullet(char32_t cp) { return cp == U'-' || cp == U'•' || cp == U'*'; }

struct Line {
  std::size_t byte_begin, byte_end;  // excluding the newline
  std::size_t char_begin, char_end;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t byte_begin = 0, char_begin = 0, chars = 0;
  const auto bounds = utf8::boundaries(text);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    if (text[bounds[i]] == '\n') {
      lines.push_back({byte_begin, bounds[i], char_begin, chars});
      byte_begin = bounds[i + 1];
      char_begin = chars + 1;
    }
    ++chars;
  }
  lines.push_back({byte_begin, text.size(), char_begin, chars});
  return lines;
}

}  // namespace

const char* to_string(LineKind kind) {
  switch (kind) {
    case LineKind::empty: return "empty";
    case LineKind::title_only: return "title_only";
    case LineKind::titled_content: return "titled_content";
    case LineKind::continuation_indent: return "continuation_indent";
    case LineKind::continuation_bullet: return "continuation_bullet";
    case LineKind::plain: return "plain";
  }
  return "?";
}

std::optional<std::string_view> title_candidate(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const std::string_view prefix = line.substr(0, colon);
  const std::u32string cps = utf8::decode(prefix);
  if (cps.empty() || cps.size() > kMaxTitleLength) return std::nullopt;
  if (cps.front() == U' ' || cps.front() == U'\t') return std::nullopt;
  bool letter = false;
  for (char32_t cp : cps) letter = letter || utf8::is_letter(cp);
  if (!letter) return std::nullopt;
  return prefix;
}

LineKind classify_line(std::string_view line) {
  const std::u32string cps = utf8::decode(line);
  if (is_blank(cps)) return LineKind::empty;
  if (cps.front() == U' ' || cps.front() == U'\t') return LineKind::continuation_indent;
  if (is_bullet(cps.front())) return LineKind::continuation_bullet;
  if (const auto title = title_candidate(line)) {
    const std::string_view rest = line.substr(title->size() + 1);
    return is_blank(utf8::decode(rest)) ? LineKind::title_only : LineKind::titled_content;
  }
  return LineKind::plain;
}

std::vector<Segment> segment_record(const Record& record) {
  const std::string_view text = record.text;
  const auto lines = split_lines(text);
  std::vector<LineKind> kinds;
  kinds.reserve(lines.size());
  for (const auto& l : lines) kinds.push_back(classify_line(text.substr(l.byte_begin, l.byte_end - l.byte_begin)));

  auto is_continuation = [&](std::size_t i) {
    return i < kinds.size() &&
           (kinds[i] == LineKind::continuation_indent || kinds[i] == LineKind::continuation_bullet);
  };

  std::vector<Segment> segments;
  bool open = false;
  Line first{}, last{};
  auto close = [&] {
    if (!open) return;
    Segment s;
    s.record_id = record.record_id;
    s.index = segments.size();
    s.char_start = first.char_begin;
    s.char_end = last.char_end;
    s.text = std::string(text.substr(first.byte_begin, last.byte_end - first.byte_begin));
    segments.push_back(std::move(s));
    open = false;
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (kinds[i] == LineKind::empty) {
      close();
      continue;
    }
    if (!open) {
      open = true;
      first = lines[i];
    }
    last = lines[i];
    const bool joins_next = kinds[i] == LineKind::title_only || is_continuation(i + 1);
    if (!joins_next) close();
  }
  close();
  return segments;
}

std::vector<Segment> segment_corpus(const Corpus& corpus) {
  std::vector<Segment> out;
  for (const auto& r : corpus.records) {
    auto segs = segment_record(r);
    std::move(segs.begin(), segs.end(), std::back_inserter(out));
  }
  return out;
}

BoundaryScore score_segmentation(const std::vector<Segment>& predicted, const GroundTruth& truth) {
  std::unordered_map<std::string, std::set<std::size_t>> predicted_starts;
  for (const auto& s : predicted) predicted_starts[s.record_id].insert(s.char_start);

  std::set<std::string> truth_ids;
  for (const auto& rt : truth) truth_ids.insert(rt.record_id);
  for (const auto& [id, _] : predicted_starts)
    if (!truth_ids.count(id)) throw InvalidArgument("record '" + id + "' has predictions but no ground truth");

  BoundaryScore score;
  for (const auto& rt : truth) {
    std::set<std::size_t> expected;
    for (const auto& span : rt.spans) expected.insert(span.start);
    score.expected += expected.size();
    auto it = predicted_starts.find(rt.record_id);
    if (it == predicted_starts.end()) {
      if (!predicted.empty()) throw InvalidArgument("record '" + rt.record_id + "' has ground truth but no predictions");
      continue;
    }
    score.predicted += it->second.size();
    for (auto start : it->second) score.true_positives += expected.count(start);
  }
  const auto tp = static_cast<double>(score.true_positives);
  score.precision = score.predicted == 0 ? 0.0 : tp / static_cast<double>(score.predicted);
  score.recall = score.expected == 0 ? 0.0 : tp / static_cast<double>(score.expected);
  const double denom = score.precision + score.recall;
  score.f1 = denom == 0.0 ? 0.0 : 2.0 * score.precision * score.recall / denom;
  return score;
}

void save_segments(const std::vector<Segment>& segments, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : segments) {
    nlohmann::json j = {{"record_id", s.record_id}, {"index", s.index}, {"start", s.char_start},
                        {"end", s.char_end},        {"text", s.text}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Segment> load_segments(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Segment> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("record_id").get<std::string>(), j.at("index").get<std::size_t>(),
                     j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(row, e.what());
    }
  }
  return out;
}

}  // namespace notesplit
