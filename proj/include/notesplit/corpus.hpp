#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace notesplit {

/// One clinical note.
struct Record {
  std::string patient_id;
  std::string record_id;
  std::string text;  // LF line endings
};

enum class CorpusSource { ingested, synthetic };

struct Corpus {
  std::vector<Record> records;
  CorpusSource source = CorpusSource::ingested;
};

enum class CorpusFormat { jsonl, csv };

CorpusFormat parse_corpus_format(const std::string& name);

/// Reads a corpus file. Newlines inside texts are normalized to LF.
/// Throws ParseError for a malformed row, InvalidArgument for a duplicate
/// record_id or blank text, IoError when the file cannot be read.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

// Ground truth spans are in Unicode scalar offsets, [start, end).
struct TruthSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> title;  // normalized label, absent for untitled
};

struct RecordTruth {
  std::string record_id;
  std::vector<TruthSpan> spans;
};

using GroundTruth = std::vector<RecordTruth>;

GroundTruth load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);

struct GeneratorConfig {
  std::uint64_t seed = 42;
  std::size_t n_records = 1000;
  std::size_t title_vocab_size = 100;
  double zipf_exponent = 1.0;
  std::size_t segments_min = 5;
  std::size_t segments_max = 30;
  double p_title_only_line = 0.2;
  double p_continuation_dash = 0.15;
  double p_untitled_segment = 0.4;
  // Planted structure: titles are split into this many groups that share a
  // group-specific word pool. Zero disables groups.
  std::size_t planted_groups = 0;
  double p_title_word = 0.6;  // body word drawn from the title's own words
  double p_group_word = 0.25; // body word drawn from the group pool
  std::string accented_letters = "áéíóúýčďěňřšťůž";

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

/// The synthetic title inventory behind a generated corpus.
struct SyntheticTitles {
  std::vector<std::string> canonical;  // surface form before capitalization
  std::vector<std::string> normalized;
  std::vector<std::size_t> group;      // planted group per title
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
  SyntheticTitles titles;
};

/// Deterministic generator emitting segmenter-grammar text with
/// Zipf-distributed titles.
SyntheticCorpus generate_synthetic(const GeneratorConfig& config);

}  // namespace notesplit
