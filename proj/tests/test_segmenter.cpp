#include <gtest/gtest.h>

#include "notesplit/error.hpp"
#include "notesplit/random.hpp"
#include "notesplit/segmenter.hpp"
#include "notesplit/utf8.hpp"
#include "oracles.hpp"

using namespace notesplit;

namespace {

std::vector<std::string> texts(const std::vector<Segment>& segs) {
  std::vector<std::string> out;
  for (const auto& s : segs) out.push_back(s.text);
  return out;
}

std::vector<Segment> run(const std::string& text) { return segment_record({"p", "r", text}); }

// Random text over the pieces the line grammar reacts to.
std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "Dieta", "TK", "ž", "ř", "x y", "12", ":", ":", " ", "  ", "\t", "-", "•", "*", "12:30", "a",
      "Doporučení", std::string(61, 'a'), std::string(60, 'b'), "é"};
  std::string out;
  const auto lines = rng.between(1, 12);
  for (long long l = 0; l < lines; ++l) {
    if (l > 0) out += '\n';
    const auto n = rng.between(0, 5);
    for (long long k = 0; k < n; ++k) out += pieces[rng.below(pieces.size())];
  }
  return out;
}

}  // namespace

TEST(ClassifyLine, Examples) {
  EXPECT_EQ(classify_line("Dieta: bez omezení"), LineKind::titled_content);
  EXPECT_EQ(classify_line("   pokračování textu"), LineKind::continuation_indent);
  EXPECT_EQ(classify_line("- Paralen 500mg"), LineKind::continuation_bullet);
  EXPECT_EQ(classify_line("• Ibalgin"), LineKind::continuation_bullet);
  EXPECT_EQ(classify_line("* Ibalgin"), LineKind::continuation_bullet);
  EXPECT_EQ(classify_line("\tindented"), LineKind::continuation_indent);
  EXPECT_EQ(classify_line("Doporučení:"), LineKind::title_only);
  EXPECT_EQ(classify_line("Doporučení:   "), LineKind::title_only);
  EXPECT_EQ(classify_line(""), LineKind::empty);
  EXPECT_EQ(classify_line(" \t "), LineKind::empty);
  EXPECT_EQ(classify_line("žádná potíž dnes"), LineKind::plain);
}

TEST(ClassifyLine, TitleRuleBounds) {
  EXPECT_EQ(classify_line("12:30 odběr"), LineKind::plain);  // no letter before the colon
  EXPECT_EQ(classify_line(std::string(60, 'a') + ": x"), LineKind::titled_content);
  EXPECT_EQ(classify_line(std::string(61, 'a') + ": x"), LineKind::plain);
  EXPECT_EQ(classify_line(std::string(30, 'a') + std::string("ž") + ": x"), LineKind::titled_content);
  EXPECT_EQ(classify_line(": x"), LineKind::plain);
  EXPECT_EQ(classify_line("TK: 120/80, P: 70"), LineKind::titled_content);
}

TEST(ClassifyLine, TrailingWhitespaceIgnored) {
  EXPECT_EQ(classify_line("Dieta: x   "), classify_line("Dieta: x"));
  EXPECT_EQ(classify_line("plain text \t"), LineKind::plain);
}

TEST(TitleCandidate, FirstColon) {
  EXPECT_EQ(title_candidate("TK: 120/80, P: 70").value(), "TK");
  EXPECT_FALSE(title_candidate("no colon"));
}

TEST(SegmentRecord, EmptyLineSeparates) {
  EXPECT_EQ(texts(run("Dieta: bez omezení\n\nDoporučení: kontrola")),
            (std::vector<std::string>{"Dieta: bez omezení", "Doporučení: kontrola"}));
}

TEST(SegmentRecord, TitleOnlyJoinsNextLine) {
  EXPECT_EQ(texts(run("Doporučení:\nkontrola za 3 měsíce")),
            (std::vector<std::string>{"Doporučení:\nkontrola za 3 měsíce"}));
}

TEST(SegmentRecord, BulletListChains) {
  const auto segs = run("Medikace:\n- Paralen\n- Ibalgin\nZávěr: OK");
  EXPECT_EQ(texts(segs), (std::vector<std::string>{"Medikace:\n- Paralen\n- Ibalgin", "Závěr: OK"}));
  EXPECT_EQ(segs[1].char_start, 30u);
  EXPECT_EQ(segs[1].char_end, 39u);
}

TEST(SegmentRecord, ConsecutiveTitledLinesAreSeparate) {
  EXPECT_EQ(texts(run("A: 1\nB: 2\nplain\n  more")),
            (std::vector<std::string>{"A: 1", "B: 2", "plain\n  more"}));
}

TEST(SegmentRecord, OffsetsAreScalarValues) {
  const std::string text = "Žádné: ř\n\nÚčel: x";
  const auto segs = run(text);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].char_start, 0u);
  EXPECT_EQ(segs[0].char_end, 8u);
  EXPECT_EQ(segs[1].char_start, 10u);
  EXPECT_EQ(segs[1].char_end, 17u);
  EXPECT_EQ(segs[1].index, 1u);
}

TEST(SegmentRecord, WhitespaceOnlyTextHasNoSegments) {
  EXPECT_TRUE(run("\n \n\t\n").empty());
}

TEST(SegmentRecord, MatchesLineWalkOracleOnRandomText) {
  Rng rng(2024);
  auto letter = [](char32_t c) { return utf8::is_letter(c); };
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string text = random_text(rng);
    const auto segs = run(text);
    const auto expected = oracle::segment_spans(utf8::decode(text), letter);
    ASSERT_EQ(segs.size(), expected.size()) << text;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      EXPECT_EQ(segs[i].char_start, expected[i].start) << text;
      EXPECT_EQ(segs[i].char_end, expected[i].end) << text;
    }
  }
}

TEST(SegmentRecord, CoverageAndReconstruction) {
  Rng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string text = random_text(rng);
    const auto cps = utf8::decode(text);
    const auto segs = run(text);
    std::size_t pos = 0;
    std::u32string rebuilt;
    for (const auto& s : segs) {
      ASSERT_LT(s.char_start, s.char_end);
      ASSERT_GE(s.char_start, pos);
      // Everything between segments is separator whitespace.
      for (std::size_t i = pos; i < s.char_start; ++i) ASSERT_TRUE(utf8::is_space(cps[i]) || cps[i] == U'\n') << text;
      rebuilt += cps.substr(pos, s.char_start - pos);
      EXPECT_EQ(utf8::encode(cps.substr(s.char_start, s.char_end - s.char_start)), s.text);
      rebuilt += utf8::decode(s.text);
      pos = s.char_end;
    }
    for (std::size_t i = pos; i < cps.size(); ++i) ASSERT_TRUE(utf8::is_space(cps[i]) || cps[i] == U'\n');
    rebuilt += cps.substr(pos);
    EXPECT_EQ(rebuilt, cps);
  }
}

TEST(SegmentRecord, ResegmentingASegmentGivesOne) {
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    for (const auto& s : run(random_text(rng))) {
      bool has_empty = false;
      std::size_t b = 0;
      const std::string& t = s.text;
      for (std::size_t i = 0; i <= t.size(); ++i) {
        if (i == t.size() || t[i] == '\n') {
          if (classify_line(std::string_view(t).substr(b, i - b)) == LineKind::empty) has_empty = true;
          b = i + 1;
        }
      }
      if (!has_empty) EXPECT_EQ(run(t).size(), 1u) << t;
    }
  }
}

TEST(ScoreSegmentation, HandCount) {
  std::vector<Segment> pred = {{"r", 0, 0, 5, ""}, {"r", 1, 30, 35, ""}, {"r", 2, 40, 45, ""}};
  GroundTruth truth = {{"r", {{0, 9, {}}, {10, 29, {}}, {30, 39, {}}}}};
  const auto s = score_segmentation(pred, truth);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
}

TEST(ScoreSegmentation, IdentityAndEmpty) {
  GroundTruth truth = {{"r", {{0, 4, {}}, {6, 9, {}}}}};
  std::vector<Segment> pred = {{"r", 0, 0, 4, ""}, {"r", 1, 6, 9, ""}};
  auto s = score_segmentation(pred, truth);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);
  s = score_segmentation({}, truth);
  EXPECT_EQ(s.recall, 0.0);
  EXPECT_EQ(s.f1, 0.0);
}

TEST(ScoreSegmentation, MismatchedRecordsRejected) {
  GroundTruth truth = {{"r", {{0, 4, {}}}}};
  std::vector<Segment> pred = {{"other", 0, 0, 4, ""}};
  EXPECT_THROW(score_segmentation(pred, truth), InvalidArgument);
}

TEST(Segments, SaveLoadRoundTrip) {
  const auto segs = run("Dieta: x\n\nPlán:\n- a\n- b");
  const auto path = std::filesystem::temp_directory_path() / "notesplit_segments_test.jsonl";
  save_segments(segs, path);
  const auto back = load_segments(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_EQ(back[i].text, segs[i].text);
    EXPECT_EQ(back[i].char_start, segs[i].char_start);
    EXPECT_EQ(back[i].char_end, segs[i].char_end);
  }
}
