#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include <unicode/uchar.h>

#include "notesplit/corpus.hpp"
#include "notesplit/labeler.hpp"
#include "notesplit/random.hpp"
#include "notesplit/utf8.hpp"

namespace notesplit {

namespace {

constexpr std::u32string_view kConsonants = U"bcdfghjklmnprstvz";
constexpr std::u32string_view kVowels = U"aeiouy";
constexpr std::size_t kTitleWords = 8;
constexpr std::size_t kGroupPoolSize = 30;
constexpr std::size_t kCommonPoolSize = 150;
constexpr std::size_t kMaxContinuations = 5;
constexpr double kPAccent = 0.15;

class WordFactory {
 public:
  WordFactory(Rng& rng, std::u32string accented) : rng_(rng), accented_(std::move(accented)) {}

  // A fresh pseudo-word whose normalized form was never produced before.
  std::string make(std::size_t min_syllables, std::size_t max_syllables) {
    for (;;) {
      std::u32string word;
      const auto syllables = static_cast<std::size_t>(
          rng_.between(static_cast<long long>(min_syllables), static_cast<long long>(max_syllables)));
      for (std::size_t s = 0; s < syllables; ++s) {
        word.push_back(letter(kConsonants));
        word.push_back(letter(kVowels));
      }
      std::string encoded = utf8::encode(word);
      if (seen_.insert(normalize_title(encoded)).second) return encoded;
    }
  }

 private:
  char32_t letter(std::u32string_view plain) {
    if (!accented_.empty() && rng_.bernoulli(kPAccent)) return accented_[rng_.below(accented_.size())];
    return plain[rng_.below(plain.size())];
  }

  Rng& rng_;
  std::u32string accented_;
  std::unordered_set<std::string> seen_;
};

std::vector<std::string> make_pool(WordFactory& words, std::size_t n) {
  std::vector<std::string> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.push_back(words.make(1, 3));
  return pool;
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += std::pow(static_cast<double>(r + 1), -exponent);
      cdf_[r] = total;
    }
    for (auto& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::string surface_form(const std::string& canonical, Rng& rng) {
  std::u32string s = utf8::decode(canonical);
  const double style = rng.uniform();
  if (style < 0.05) {
    for (auto& cp : s) cp = static_cast<char32_t>(u_toupper(static_cast<UChar32>(cp)));
  } else if (style < 0.65) {
    s[0] = static_cast<char32_t>(u_toupper(static_cast<UChar32>(s[0])));
  }
  if (rng.bernoulli(0.05)) {
    const auto space = s.find(U' ');
    if (space != std::u32string::npos) s.insert(space, 1, U' ');
  }
  std::string out = utf8::encode(s);
  if (rng.bernoulli(0.1)) out.push_back(' ');
  return out;
}

struct TextBuilder {
  std::string text;
  std::size_t length = 0;  // scalars

  void add(std::string_view piece) {
    text.append(piece);
    length += utf8::length(piece);
  }
};

}  // namespace

SyntheticCorpus generate_synthetic(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  WordFactory words(rng, utf8::decode(config.accented_letters));

  SyntheticCorpus out;
  out.corpus.source = CorpusSource::synthetic;
  const std::size_t n_titles = config.title_vocab_size;
  const std::size_t n_groups = config.planted_groups;

  std::vector<std::vector<std::string>> title_words(n_titles);
  for (std::size_t t = 0; t < n_titles; ++t) {
    const double shape = rng.uniform();
    const std::size_t n_words = shape < 0.5 ? 1 : (shape < 0.85 ? 2 : 3);
    std::string canonical;
    for (std::size_t w = 0; w < n_words; ++w) {
      if (w > 0) canonical.push_back(' ');
      canonical += words.make(2, 3);
    }
    out.titles.canonical.push_back(canonical);
    out.titles.normalized.push_back(normalize_title(canonical));
    out.titles.group.push_back(n_groups == 0 ? 0 : t % n_groups);
    title_words[t] = make_pool(words, kTitleWords);
  }
  std::vector<std::vector<std::string>> group_pools;
  for (std::size_t g = 0; g < n_groups; ++g) group_pools.push_back(make_pool(words, kGroupPoolSize));
  const std::vector<std::string> common = make_pool(words, kCommonPoolSize);

  const ZipfSampler zipf(n_titles, config.zipf_exponent);

  auto body_line = [&](std::size_t title) {
    const auto n = static_cast<std::size_t>(rng.between(3, 10));
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) line.push_back(' ');
      const double u = rng.uniform();
      const std::vector<std::string>* pool = &common;
      if (u < config.p_title_word) {
        pool = &title_words[title];
      } else if (n_groups > 0 && u < config.p_title_word + config.p_group_word) {
        pool = &group_pools[out.titles.group[title]];
      }
      line += (*pool)[rng.below(pool->size())];
    }
    return line;
  };

  static constexpr std::string_view kContinuationPrefixes[] = {"- ", "• ", "* ", "  ", "\t"};

  std::size_t patient = 0;
  char id_buffer[32];
  for (std::size_t r = 0; r < config.n_records; ++r) {
    if (r > 0 && rng.bernoulli(1.0 / 36.0)) ++patient;
    TextBuilder builder;
    RecordTruth truth;
    const auto n_segments = static_cast<std::size_t>(rng.between(static_cast<long long>(config.segments_min),
                                                                 static_cast<long long>(config.segments_max)));
    for (std::size_t s = 0; s < n_segments; ++s) {
      if (s > 0) builder.add(rng.bernoulli(0.5) ? "\n\n" : "\n");
      const std::size_t title = zipf(rng);
      const bool untitled = rng.bernoulli(config.p_untitled_segment);
      TruthSpan span;
      span.start = builder.length;
      if (untitled) {
        builder.add(body_line(title));
      } else {
        span.title = out.titles.normalized[title];
        builder.add(surface_form(out.titles.canonical[title], rng));
        if (rng.bernoulli(config.p_title_only_line)) {
          builder.add(":\n");
        } else {
          builder.add(": ");
        }
        builder.add(body_line(title));
      }
      for (std::size_t c = 0; c < kMaxContinuations && rng.bernoulli(config.p_continuation_dash); ++c) {
        builder.add("\n");
        builder.add(kContinuationPrefixes[rng.below(std::size(kContinuationPrefixes))]);
        builder.add(body_line(title));
      }
      span.end = builder.length;
      truth.spans.push_back(std::move(span));
    }
    std::snprintf(id_buffer, sizeof(id_buffer), "R%07zu", r);
    truth.record_id = id_buffer;
    std::string record_id = id_buffer;
    std::snprintf(id_buffer, sizeof(id_buffer), "P%05zu", patient);
    out.corpus.records.push_back({id_buffer, record_id, std::move(builder.text)});
    out.truth.push_back(std::move(truth));
  }
  return out;
}

}  // namespace notesplit
