#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "notesplit/corpus.hpp"

namespace notesplit {

/// A contiguous span of a record. Offsets are Unicode scalar positions into
/// the record text, [char_start, char_end).
struct Segment {
  std::string record_id;
  std::size_t index = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string text;
};

enum class LineKind {
  empty,
  title_only,
  titled_content,
  continuation_indent,
  continuation_bullet,
  plain,
};

const char* to_string(LineKind kind);

/// Longest accepted title candidate, in scalar values.
inline constexpr std::size_t kMaxTitleLength = 60;

/// The title candidate of a line: the text before the first colon, if it is
/// at most kMaxTitleLength scalars and holds at least one letter. The line
/// must not start with whitespace.
std::optional<std::string_view> title_candidate(std::string_view line);

LineKind classify_line(std::string_view line);

std::vector<Segment> segment_record(const Record& record);
std::vector<Segment> segment_corpus(const Corpus& corpus);

struct BoundaryScore {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t expected = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Boundary agreement of predicted segment starts with ground-truth starts,
/// pooled over records. Throws InvalidArgument when the record sets differ.
BoundaryScore score_segmentation(const std::vector<Segment>& predicted, const GroundTruth& truth);

void save_segments(const std::vector<Segment>& segments, const std::filesystem::path& path);
std::vector<Segment> load_segments(const std::filesystem::path& path);

}  // namespace notesplit
