#include "notesplit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "notesplit/csv.hpp"
#include "notesplit/error.hpp"
#include "notesplit/utf8.hpp"

namespace notesplit {

namespace {

using nlohmann::json;

bool blank(std::string_view text) {
  for (char32_t cp : utf8::decode(text))
    if (!utf8::is_space(cp)) return false;
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

class RecordSink {
 public:
  explicit RecordSink(Corpus& corpus) : corpus_(corpus) {}

  void add(std::size_t row, std::string patient_id, std::string record_id, std::string_view text) {
    if (record_id.empty()) throw ParseError(row, "empty record_id");
    if (blank(text)) throw ParseError(row, "text is empty");
    if (!seen_.insert(record_id).second) throw InvalidArgument("duplicate record_id '" + record_id + "' at row " + std::to_string(row));
    corpus_.records.push_back({std::move(patient_id), std::move(record_id), utf8::normalize_newlines(text)});
  }

 private:
  Corpus& corpus_;
  std::unordered_set<std::string> seen_;
};

std::string string_field(const json& row, const char* key, std::size_t row_number) {
  auto it = row.find(key);
  if (it == row.end()) throw ParseError(row_number, std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw ParseError(row_number, std::string("field \"") + key + "\" is not a string");
  return it->get<std::string>();
}

Corpus load_jsonl(std::istream& in) {
  Corpus corpus;
  RecordSink sink(corpus);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(row, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(row, "expected a JSON object");
    sink.add(row, string_field(j, "patient_id", row), string_field(j, "record_id", row), string_field(j, "text", row));
  }
  return corpus;
}

Corpus load_csv(std::istream& in) {
  Corpus corpus;
  RecordSink sink(corpus);
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) return corpus;
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);
  std::size_t patient = SIZE_MAX, record = SIZE_MAX, text = SIZE_MAX;
  for (std::size_t i = 0; i < header->size(); ++i) {
    const auto& name = (*header)[i];
    if (name == "patient_id") patient = i;
    else if (name == "record_id") record = i;
    else if (name == "text") text = i;
  }
  if (patient == SIZE_MAX || record == SIZE_MAX || text == SIZE_MAX)
    throw ParseError(1, "header must contain patient_id,record_id,text");
  while (auto row = reader.next()) {
    if (row->size() == 1 && row->front().empty()) continue;
    const std::size_t needed = std::max({patient, record, text});
    if (row->size() <= needed) throw ParseError(reader.row(), "expected " + std::to_string(header->size()) + " fields");
    sink.add(reader.row(), (*row)[patient], (*row)[record], (*row)[text]);
  }
  return corpus;
}

}  // namespace

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  throw InvalidArgument("unknown corpus format '" + name + "' (expected jsonl or csv)");
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  auto in = open_input(path);
  Corpus corpus = format == CorpusFormat::jsonl ? load_jsonl(in) : load_csv(in);
  corpus.source = CorpusSource::ingested;
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  auto out = open_output(path);
  if (format == CorpusFormat::jsonl) {
    for (const auto& r : corpus.records) {
      json j = {{"patient_id", r.patient_id}, {"record_id", r.record_id}, {"text", r.text}};
      out << j.dump() << '\n';
    }
  } else {
    csv::write_row(out, {"patient_id", "record_id", "text"});
    for (const auto& r : corpus.records) csv::write_row(out, {r.patient_id, r.record_id, r.text});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  auto in = open_input(path);
  GroundTruth truth;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      RecordTruth rt;
      rt.record_id = j.at("record_id").get<std::string>();
      for (const auto& s : j.at("spans")) {
        TruthSpan span;
        span.start = s.at("start").get<std::size_t>();
        span.end = s.at("end").get<std::size_t>();
        if (s.contains("title") && !s["title"].is_null()) span.title = s["title"].get<std::string>();
        rt.spans.push_back(std::move(span));
      }
      truth.push_back(std::move(rt));
    } catch (const json::exception& e) {
      throw ParseError(row, e.what());
    }
  }
  return truth;
}

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& rt : truth) {
    json spans = json::array();
    for (const auto& s : rt.spans) {
      spans.push_back({{"start", s.start}, {"end", s.end}, {"title", s.title ? json(*s.title) : json(nullptr)}});
    }
    out << json{{"record_id", rt.record_id}, {"spans", spans}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void GeneratorConfig::validate() const {
  auto probability = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string(name) + " must be in [0, 1]");
  };
  if (n_records == 0) throw InvalidArgument("n_records must be positive");
  if (title_vocab_size == 0) throw InvalidArgument("title_vocab_size must be positive");
  if (!(zipf_exponent > 0.0)) throw InvalidArgument("zipf_exponent must be positive");
  if (segments_min == 0 || segments_min > segments_max)
    throw InvalidArgument("segments_per_record range must satisfy 1 <= min <= max");
  probability(p_title_only_line, "p_title_only_line");
  probability(p_continuation_dash, "p_continuation_dash");
  probability(p_untitled_segment, "p_untitled_segment");
  probability(p_title_word, "p_title_word");
  probability(p_group_word, "p_group_word");
  if (p_title_word + p_group_word > 1.0) throw InvalidArgument("p_title_word + p_group_word must not exceed 1");
  if (planted_groups > title_vocab_size) throw InvalidArgument("planted_groups exceeds title_vocab_size");
}

}  // namespace notesplit
