#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "notesplit/segmenter.hpp"

namespace notesplit {

struct RawTitle {
  std::string text;  // as matched, before the colon
  std::string record_id;
  std::size_t index = 0;
};

/// Title of the segment's first line, per the segmenter's title rule.
std::optional<RawTitle> extract_title(const Segment& segment);

/// Lowercase, strip combining marks after canonical decomposition, trim and
/// collapse whitespace runs to a single space.
std::string normalize_title(std::string_view raw);

std::size_t word_count(std::string_view normalized);

struct LabelVocabulary {
  std::vector<std::string> labels;  // id order: descending count, then lexicographic
  std::vector<std::size_t> counts;
  std::unordered_map<std::string, std::size_t> id_of;
  std::size_t min_count = 10;
  std::size_t max_words = 4;
  std::size_t labeled_segments = 0;  // segments with any extracted title
  std::size_t covered_segments = 0;  // segments whose title was kept

  std::size_t size() const { return labels.size(); }
  double coverage() const {
    return labeled_segments == 0 ? 0.0
                                 : static_cast<double>(covered_segments) / static_cast<double>(labeled_segments);
  }
  std::optional<std::size_t> find(const std::string& label) const;
};

/// Keeps titles with count >= min_count and at most max_words words.
LabelVocabulary build_vocabulary(const std::map<std::string, std::size_t>& title_counts, std::size_t min_count = 10,
                                 std::size_t max_words = 4);
LabelVocabulary build_vocabulary(const std::vector<std::string>& normalized_titles, std::size_t min_count = 10,
                                 std::size_t max_words = 4);

void save_vocabulary(const LabelVocabulary& vocab, const std::filesystem::path& path);
LabelVocabulary load_vocabulary(const std::filesystem::path& path);

enum class View { with_title, without_title };
enum class Fold { train, test };

const char* to_string(View view);
const char* to_string(Fold fold);
View parse_view(std::string_view name);
Fold parse_fold(std::string_view name);

struct LabeledInstance {
  std::string record_id;
  std::size_t index = 0;
  View view = View::with_title;
  Fold fold = Fold::train;
  std::size_t label_id = 0;
  std::string label;
  std::string text;
};

/// The segment text with its title, the colon and the whitespace right
/// after the colon removed.
std::string strip_title(const Segment& segment);

struct Dataset {
  std::vector<LabeledInstance> instances;
  std::vector<std::size_t> train_only_labels;  // strata too small to split
};

/// Stratified split per label (seeded shuffle, prefix to test), then two
/// views per segment. Throws InvalidArgument unless 0 < test_fraction < 1.
Dataset build_dataset(const std::vector<Segment>& segments, const LabelVocabulary& vocab, double test_fraction,
                      std::uint64_t seed);

void save_dataset(const std::vector<LabeledInstance>& instances, const std::filesystem::path& path);
std::vector<LabeledInstance> load_dataset(const std::filesystem::path& path);

}  // namespace notesplit
