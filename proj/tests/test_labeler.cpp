#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "notesplit/error.hpp"
#include "notesplit/labeler.hpp"
#include "notesplit/random.hpp"
#include "notesplit/segmenter.hpp"
#include "notesplit/utf8.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace notesplit;

namespace {

Segment seg(const std::string& text, std::size_t index = 0, const std::string& record = "r") {
  return {record, index, 0, utf8::length(text), text};
}

std::string random_unicode(Rng& rng) {
  std::u32string s;
  const auto n = rng.between(0, 24);
  for (long long i = 0; i < n; ++i) {
    char32_t cp;
    switch (rng.below(5)) {
      case 0: cp = static_cast<char32_t>(rng.between(0x20, 0x7e)); break;
      case 1: cp = static_cast<char32_t>(rng.between(0xa0, 0x24f)); break;            // Latin supplements
      case 2: cp = static_cast<char32_t>(rng.between(0x300, 0x36f)); break;           // combining marks
      case 3: cp = static_cast<char32_t>(rng.between(0x370, 0x52f)); break;           // Greek, Cyrillic
      default:
        do cp = static_cast<char32_t>(rng.below(0x110000));
        while (cp >= 0xd800 && cp <= 0xdfff);
    }
    s.push_back(cp);
  }
  return utf8::encode(s);
}

}  // namespace

TEST(ExtractTitle, Examples) {
  EXPECT_EQ(extract_title(seg("Dieta: bez omezení"))->text, "Dieta");
  EXPECT_FALSE(extract_title(seg("žádná potíž dnes")));
  EXPECT_EQ(extract_title(seg("TK: 120/80, P: 70"))->text, "TK");
  EXPECT_EQ(extract_title(seg("Doporučení:\nkontrola"))->text, "Doporučení");
  EXPECT_FALSE(extract_title(seg("12:30 odběr")));
}

TEST(NormalizeTitle, Examples) {
  EXPECT_EQ(normalize_title("Doporučení"), "doporuceni");
  EXPECT_EQ(normalize_title("Alergie "), "alergie");
  EXPECT_EQ(normalize_title("  Case   History\t"), "case history");
  EXPECT_EQ(normalize_title("ŘÍZENÍ ŽIVOTOSPRÁVY"), "rizeni zivotospravy");
  EXPECT_EQ(normalize_title("Ångström"), "angstrom");
  EXPECT_EQ(normalize_title(""), "");
}

TEST(NormalizeTitle, IdempotentOnRandomUnicode) {
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const std::string x = random_unicode(rng);
    const std::string once = normalize_title(x);
    ASSERT_EQ(normalize_title(once), once) << "input bytes: " << x;
  }
}

TEST(NormalizeTitle, AgreesWithCzechFoldingTable) {
  Rng rng(4);
  const std::u32string alphabet = U"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZáéíóúýčďěňřšťůžÁÉÍÓÚÝČĎĚŇŘŠŤŮŽ  \t";
  for (int i = 0; i < 2000; ++i) {
    std::u32string s;
    const auto n = rng.between(0, 20);
    for (long long k = 0; k < n; ++k) s.push_back(alphabet[rng.below(alphabet.size())]);
    EXPECT_EQ(normalize_title(utf8::encode(s)), utf8::encode(oracle::fold_czech(s)));
  }
}

TEST(WordCount, CountsSpaceSeparatedWords) {
  EXPECT_EQ(word_count(""), 0u);
  EXPECT_EQ(word_count("a"), 1u);
  EXPECT_EQ(word_count("one two three four five"), 5u);
}

TEST(BuildVocabulary, ThresholdAndWordRules) {
  const auto v = build_vocabulary(std::map<std::string, std::size_t>{
      {"a", 12}, {"b", 9}, {"x", 10}, {"one two three four five", 50}, {"one two three four", 11}});
  EXPECT_EQ(v.labels, (std::vector<std::string>{"a", "one two three four", "x"}));
  EXPECT_EQ(v.counts, (std::vector<std::size_t>{12, 11, 10}));
  EXPECT_EQ(v.labeled_segments, 92u);
  EXPECT_EQ(v.covered_segments, 33u);
  EXPECT_DOUBLE_EQ(v.coverage(), 33.0 / 92.0);
}

TEST(BuildVocabulary, DenseIdsDescendingCountTiesLexicographic) {
  const auto v = build_vocabulary(std::map<std::string, std::size_t>{{"b", 20}, {"a", 20}, {"c", 30}, {"d", 15}}, 1);
  EXPECT_EQ(v.labels, (std::vector<std::string>{"c", "a", "b", "d"}));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.id_of.at(v.labels[i]), i);
}

TEST(BuildVocabulary, EmptyResultAllowed) {
  const auto v = build_vocabulary(std::map<std::string, std::size_t>{{"a", 2}});
  EXPECT_EQ(v.size(), 0u);
  EXPECT_EQ(v.coverage(), 0.0);
  EXPECT_THROW(build_vocabulary(std::map<std::string, std::size_t>{}, 0, 4), InvalidArgument);
}

TEST(BuildVocabulary, SaveLoadRoundTrip) {
  testing_util::TempDir dir;
  const auto v = build_vocabulary(std::map<std::string, std::size_t>{{"b, with comma", 20}, {"a", 30}}, 1);
  save_vocabulary(v, dir / "v.csv");
  const auto back = load_vocabulary(dir / "v.csv");
  EXPECT_EQ(back.labels, v.labels);
  EXPECT_EQ(back.counts, v.counts);
}

TEST(StripTitle, RemovesTitleColonAndWhitespace) {
  EXPECT_EQ(strip_title(seg("Dieta: bez omezení")), "bez omezení");
  EXPECT_EQ(strip_title(seg("Doporučení:\nkontrola za 3 měsíce")), "kontrola za 3 měsíce");
  EXPECT_EQ(strip_title(seg("Medikace:\n- Paralen")), "- Paralen");
  EXPECT_EQ(strip_title(seg("plain text")), "plain text");
}

TEST(BuildDataset, TenSegmentLabelSplitsTwoToTest) {
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < 10; ++i) segs.push_back(seg("Dieta: text " + std::to_string(i), i));
  const auto vocab = build_vocabulary(std::vector<std::string>(10, "dieta"));
  const auto ds = build_dataset(segs, vocab, 0.2, 1);
  ASSERT_EQ(ds.instances.size(), 20u);
  std::size_t test = 0;
  for (const auto& inst : ds.instances) test += inst.fold == Fold::test;
  EXPECT_EQ(test, 4u);
}

TEST(BuildDataset, InvalidFractionRejected) {
  const LabelVocabulary v;
  EXPECT_THROW(build_dataset({}, v, 0.0, 1), InvalidArgument);
  EXPECT_THROW(build_dataset({}, v, 1.0, 1), InvalidArgument);
}

TEST(BuildDataset, SingletonStratumGoesToTrain) {
  std::vector<Segment> segs = {seg("A: x", 0)};
  const auto vocab = build_vocabulary(std::vector<std::string>{"a"}, 1);
  const auto ds = build_dataset(segs, vocab, 0.5, 1);
  ASSERT_EQ(ds.train_only_labels, (std::vector<std::size_t>{0}));
  for (const auto& inst : ds.instances) EXPECT_EQ(inst.fold, Fold::train);
}

TEST(BuildDataset, StratifiedFoldAgreementNoLeakageDeterminism) {
  GeneratorConfig cfg;
  cfg.n_records = 400;
  const auto segs = segment_corpus(generate_synthetic(cfg).corpus);
  std::vector<std::string> titles;
  for (const auto& s : segs)
    if (auto t = extract_title(s)) titles.push_back(normalize_title(t->text));
  const auto vocab = build_vocabulary(titles);
  const auto ds = build_dataset(segs, vocab, 0.2, 9);

  std::map<std::pair<std::string, std::size_t>, std::set<Fold>> folds;
  std::map<std::size_t, std::size_t> total, test;
  for (const auto& inst : ds.instances) {
    folds[{inst.record_id, inst.index}].insert(inst.fold);
    if (inst.view == View::with_title) {
      ++total[inst.label_id];
      test[inst.label_id] += inst.fold == Fold::test;
    }
  }
  for (const auto& [key, f] : folds) EXPECT_EQ(f.size(), 1u);
  for (const auto& [label, n] : total)
    EXPECT_LE(std::abs(static_cast<double>(test[label]) - std::round(0.2 * static_cast<double>(n))), 1.0);

  const auto again = build_dataset(segs, vocab, 0.2, 9);
  ASSERT_EQ(again.instances.size(), ds.instances.size());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) EXPECT_EQ(again.instances[i].fold, ds.instances[i].fold);
}

TEST(BuildDataset, SaveLoadRoundTrip) {
  testing_util::TempDir dir;
  std::vector<Segment> segs;
  for (std::size_t i = 0; i < 12; ++i) segs.push_back(seg("Dieta: \"text\"\n- " + std::to_string(i), i));
  const auto vocab = build_vocabulary(std::vector<std::string>(12, "dieta"));
  const auto ds = build_dataset(segs, vocab, 0.2, 3);
  save_dataset(ds.instances, dir / "d.jsonl");
  const auto back = load_dataset(dir / "d.jsonl");
  ASSERT_EQ(back.size(), ds.instances.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].text, ds.instances[i].text);
    EXPECT_EQ(back[i].fold, ds.instances[i].fold);
    EXPECT_EQ(back[i].view, ds.instances[i].view);
    EXPECT_EQ(back[i].label, ds.instances[i].label);
  }
}
