#include "notesplit/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "json.hpp"
#include "notesplit/csv.hpp"
#include "notesplit/error.hpp"
#include "notesplit/random.hpp"
#include "notesplit/utf8.hpp"

namespace notesplit {

std::optional<RawTitle> extract_title(const Segment& segment) {
  const std::string_view text = segment.text;
  const std::string_view first_line = text.substr(0, text.find('\n'));
  const LineKind kind = classify_line(first_line);
  if (kind != LineKind::title_only && kind != LineKind::titled_content) return std::nullopt;
  const auto title = title_candidate(first_line);
  if (!title) return std::nullopt;
  return RawTitle{std::string(*title), segment.record_id, segment.index};
}

std::string normalize_title(std::string_view raw) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFD normalizer unavailable");
  const icu::UnicodeString decomposed = nfd->normalize(s, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");

  std::string out;
  bool pending_space = false;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 cp = decomposed.char32At(i);
    i += U16_LENGTH(cp);
    const auto type = u_charType(cp);
    if (type == U_NON_SPACING_MARK || type == U_ENCLOSING_MARK || type == U_COMBINING_SPACING_MARK) continue;
    if (u_isUWhiteSpace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    utf8::append(out, static_cast<char32_t>(cp));
  }
  return out;
}

std::size_t word_count(std::string_view normalized) {
  std::size_t words = 0;
  bool in_word = false;
  for (char ch : normalized) {
    const bool space = ch == ' ';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& label) const {
  auto it = id_of.find(label);
  if (it == id_of.end()) return std::nullopt;
  return it->second;
}

LabelVocabulary build_vocabulary(const std::map<std::string, std::size_t>& title_counts, std::size_t min_count,
                                 std::size_t max_words) {
  if (min_count < 1 || max_words < 1) throw InvalidArgument("min_count and max_words must be at least 1");
  LabelVocabulary vocab;
  vocab.min_count = min_count;
  vocab.max_words = max_words;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [title, count] : title_counts) {
    vocab.labeled_segments += count;
    if (count >= min_count && word_count(title) <= max_words && !title.empty()) kept.emplace_back(title, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [title, count] : kept) {
    vocab.id_of.emplace(title, vocab.labels.size());
    vocab.labels.push_back(title);
    vocab.counts.push_back(count);
    vocab.covered_segments += count;
  }
  return vocab;
}

LabelVocabulary build_vocabulary(const std::vector<std::string>& normalized_titles, std::size_t min_count,
                                 std::size_t max_words) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : normalized_titles) ++counts[t];
  return build_vocabulary(counts, min_count, max_words);
}

void save_vocabulary(const LabelVocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"id", "label", "count"});
  for (std::size_t i = 0; i < vocab.size(); ++i)
    csv::write_row(out, {std::to_string(i), vocab.labels[i], std::to_string(vocab.counts[i])});
  if (!out) throw IoError("write failed: " + path.string());
}

LabelVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || *header != std::vector<std::string>{"id", "label", "count"})
    throw ParseError(1, "vocabulary header must be id,label,count");
  LabelVocabulary vocab;
  while (auto row = reader.next()) {
    if (row->size() != 3) throw ParseError(reader.row(), "expected 3 fields");
    try {
      if (std::stoul((*row)[0]) != vocab.size()) throw ParseError(reader.row(), "ids must be dense and ordered");
      vocab.id_of.emplace((*row)[1], vocab.size());
      vocab.labels.push_back((*row)[1]);
      vocab.counts.push_back(std::stoul((*row)[2]));
    } catch (const std::logic_error&) {
      throw ParseError(reader.row(), "non-numeric id or count");
    }
    vocab.covered_segments += vocab.counts.back();
  }
  vocab.labeled_segments = vocab.covered_segments;
  return vocab;
}

const char* to_string(View view) { return view == View::with_title ? "with_title" : "without_title"; }
const char* to_string(Fold fold) { return fold == Fold::train ? "train" : "test"; }

View parse_view(std::string_view name) {
  if (name == "with_title") return View::with_title;
  if (name == "without_title") return View::without_title;
  throw InvalidArgument("unknown view '" + std::string(name) + "'");
}

Fold parse_fold(std::string_view name) {
  if (name == "train") return Fold::train;
  if (name == "test") return Fold::test;
  throw InvalidArgument("unknown fold '" + std::string(name) + "'");
}

std::string strip_title(const Segment& segment) {
  const auto title = extract_title(segment);
  if (!title) return segment.text;
  const std::string_view rest = std::string_view(segment.text).substr(title->text.size() + 1);
  const auto bounds = utf8::boundaries(rest);
  const auto cps = utf8::decode(rest);
  std::size_t k = 0;
  while (k < cps.size() && utf8::is_space(cps[k])) ++k;
  return std::string(rest.substr(bounds[k]));
}

Dataset build_dataset(const std::vector<Segment>& segments, const LabelVocabulary& vocab, double test_fraction,
                      std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test_fraction must be in (0, 1)");

  std::vector<std::optional<std::size_t>> label_of(segments.size());
  std::vector<std::vector<std::size_t>> strata(vocab.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto title = extract_title(segments[i]);
    if (!title) continue;
    const auto id = vocab.find(normalize_title(title->text));
    if (!id) continue;
    label_of[i] = *id;
    strata[*id].push_back(i);
  }

  Dataset dataset;
  std::vector<Fold> fold_of(segments.size(), Fold::train);
  for (std::size_t label = 0; label < strata.size(); ++label) {
    auto& members = strata[label];
    if (members.empty()) continue;
    if (members.size() < 2) {
      dataset.train_only_labels.push_back(label);
      continue;
    }
    Rng rng(mix_seed(seed, label));
    rng.shuffle(members.begin(), members.end());
    const auto n = members.size();
    auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    n_test = std::min(n_test, n - 1);
    for (std::size_t k = 0; k < n_test; ++k) fold_of[members[k]] = Fold::test;
  }

  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!label_of[i]) continue;
    const auto& seg = segments[i];
    LabeledInstance with{seg.record_id, seg.index, View::with_title, fold_of[i], *label_of[i],
                         vocab.labels[*label_of[i]], seg.text};
    LabeledInstance without = with;
    without.view = View::without_title;
    without.text = strip_title(seg);
    dataset.instances.push_back(std::move(with));
    dataset.instances.push_back(std::move(without));
  }
  return dataset;
}

void save_dataset(const std::vector<LabeledInstance>& instances, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& inst : instances) {
    nlohmann::json j = {{"record_id", inst.record_id}, {"index", inst.index},       {"view", to_string(inst.view)},
                        {"fold", to_string(inst.fold)}, {"label_id", inst.label_id}, {"label", inst.label},
                        {"text", inst.text}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<LabeledInstance> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("record_id").get<std::string>(), j.at("index").get<std::size_t>(),
                     parse_view(j.at("view").get<std::string>()), parse_fold(j.at("fold").get<std::string>()),
                     j.at("label_id").get<std::size_t>(), j.at("label").get<std::string>(),
                     j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(row, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(row, e.what());
    }
  }
  return out;
}

}  // namespace notesplit
