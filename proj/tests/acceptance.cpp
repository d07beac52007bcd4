// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "notesplit/classifier.hpp"
#include "notesplit/doc2vec.hpp"
#include "notesplit/evaluation.hpp"
#include "notesplit/labeler.hpp"
#include "notesplit/lsa.hpp"
#include "notesplit/mapping.hpp"
#include "notesplit/pipeline.hpp"
#include "notesplit/segmenter.hpp"
#include "notesplit/titlespace.hpp"
#include "notesplit/utf8.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace notesplit;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::string failures;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      failures += (pass ? " [failed: " : "; ") + what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

std::string random_unicode(Rng& rng) {
  std::u32string s;
  const auto n = rng.between(0, 24);
  for (long long i = 0; i < n; ++i) {
    char32_t cp;
    switch (rng.below(5)) {
      case 0: cp = static_cast<char32_t>(rng.between(0x20, 0x7e)); break;
      case 1: cp = static_cast<char32_t>(rng.between(0xa0, 0x24f)); break;
      case 2: cp = static_cast<char32_t>(rng.between(0x300, 0x36f)); break;
      case 3: cp = static_cast<char32_t>(rng.between(0x370, 0x52f)); break;
      default:
        do cp = static_cast<char32_t>(rng.below(0x110000));
        while (cp >= 0xd800 && cp <= 0xdfff);
    }
    s.push_back(cp);
  }
  return utf8::encode(s);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(json::parse(line));
  return rows;
}

// ------------------------------------------------------------------ 1

Outcome segmenter_exactness() {
  Outcome o;
  const auto start = Clock::now();
  std::size_t records = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.n_records = 1000;
    const auto synthetic = generate_synthetic(cfg);
    const auto segments = segment_corpus(synthetic.corpus);
    const auto score = score_segmentation(segments, synthetic.truth);
    o.check(score.precision == 1.0 && score.recall == 1.0,
            "seed " + std::to_string(seed) + " P=" + std::to_string(score.precision) +
                " R=" + std::to_string(score.recall));

    std::map<std::string, std::vector<const Segment*>> by_record;
    for (const auto& s : segments) by_record[s.record_id].push_back(&s);
    for (const auto& rec : synthetic.corpus.records) {
      ++records;
      const auto cps = utf8::decode(rec.text);
      std::u32string rebuilt;
      std::size_t pos = 0;
      bool ok = true;
      for (const auto* s : by_record[rec.record_id]) {
        for (std::size_t i = pos; i < s->char_start; ++i) ok &= utf8::is_space(cps[i]) || cps[i] == U'\n';
        rebuilt += cps.substr(pos, s->char_start - pos);
        ok &= utf8::encode(cps.substr(s->char_start, s->char_end - s->char_start)) == s->text;
        rebuilt += utf8::decode(s->text);
        pos = s->char_end;
      }
      for (std::size_t i = pos; i < cps.size(); ++i) ok &= utf8::is_space(cps[i]) || cps[i] == U'\n';
      rebuilt += cps.substr(std::min(pos, cps.size()));
      ok &= rebuilt == cps;
      if (!ok) o.check(false, "reconstruction of " + rec.record_id);
    }
  }
  const double secs = seconds_since(start);
  o.check(secs < 10.0, "runtime " + std::to_string(secs) + " s");
  o.detail << " 5 seeds, " << records << " records, P=R=1, " << secs << " s";
  return o;
}

// ------------------------------------------------------------------ 2

Outcome labeler_correctness() {
  Outcome o;
  GeneratorConfig cfg;
  cfg.seed = 11;
  cfg.n_records = 2000;
  const auto synthetic = generate_synthetic(cfg);
  const auto segments = segment_corpus(synthetic.corpus);
  std::vector<std::string> titles;
  for (const auto& s : segments)
    if (auto t = extract_title(s)) titles.push_back(normalize_title(t->text));
  const auto vocab = build_vocabulary(titles, 10, 4);

  // Recount from the generator's ground truth, not from the segmenter.
  std::map<std::string, std::size_t> counts;
  std::size_t labeled = 0;
  for (const auto& rt : synthetic.truth)
    for (const auto& span : rt.spans)
      if (span.title) {
        ++counts[*span.title];
        ++labeled;
      }
  std::vector<std::pair<std::string, std::size_t>> kept;
  std::size_t covered = 0;
  for (const auto& [t, c] : counts)
    if (c >= 10 && oracle::count_words(t) <= 4) {
      kept.emplace_back(t, c);
      covered += c;
    }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  bool same = kept.size() == vocab.size();
  for (std::size_t i = 0; same && i < kept.size(); ++i)
    same = kept[i].first == vocab.labels[i] && kept[i].second == vocab.counts[i];
  o.check(same, "vocabulary differs from recount");
  o.check(vocab.labeled_segments == labeled && vocab.covered_segments == covered, "coverage differs from recount");

  Rng rng(5);
  std::size_t not_idempotent = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto once = normalize_title(random_unicode(rng));
    if (normalize_title(once) != once) ++not_idempotent;
  }
  o.check(not_idempotent == 0, std::to_string(not_idempotent) + " non-idempotent strings");

  const auto ds = build_dataset(segments, vocab, 0.2, 3);
  std::map<std::pair<std::string, std::size_t>, std::set<Fold>> folds;
  std::map<std::pair<std::string, std::size_t>, std::set<View>> views;
  std::map<std::size_t, std::size_t> total, test;
  for (const auto& inst : ds.instances) {
    folds[{inst.record_id, inst.index}].insert(inst.fold);
    views[{inst.record_id, inst.index}].insert(inst.view);
    if (inst.view == View::with_title) {
      ++total[inst.label_id];
      test[inst.label_id] += inst.fold == Fold::test;
    }
  }
  double worst = 0;
  for (const auto& [label, n] : total)
    worst = std::max(worst, std::abs(static_cast<double>(test[label]) - 0.2 * static_cast<double>(n)));
  o.check(worst <= 1.0, "stratification deviation " + std::to_string(worst));
  std::size_t disagree = 0, missing_view = 0;
  for (const auto& [key, f] : folds) disagree += f.size() != 1;
  for (const auto& [key, v] : views) missing_view += v.size() != 2;
  o.check(disagree == 0, std::to_string(disagree) + " segments split across folds");
  o.check(missing_view == 0, std::to_string(missing_view) + " segments missing a view");
  o.check(folds.size() == covered, "dataset does not hold every covered segment");
  o.detail << " " << vocab.size() << " labels, coverage " << vocab.coverage() << ", max |test-0.2n| " << worst
           << ", 10000 strings idempotent";
  return o;
}

// ------------------------------------------------------------------ 3

Outcome metric_oracle() {
  Outcome o;
  Rng rng(17);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = static_cast<std::size_t>(rng.between(2, 50));
    const auto n = static_cast<std::size_t>(rng.between(1, 1000));
    std::vector<std::vector<std::size_t>> ranked;
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = rng.below(c);
      std::vector<std::size_t> perm(c);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm.begin(), perm.end());
      if (rng.bernoulli(0.4)) std::iter_swap(perm.begin(), std::find(perm.begin(), perm.end(), t));
      truth.push_back(t);
      ranked.push_back(std::move(perm));
    }
    const auto r = evaluate(ranked, truth, std::vector<std::size_t>(c, 1));
    const auto m = oracle::confusion_metrics(ranked, truth);
    for (auto [a, b] : {std::pair{r.accuracy, m.accuracy}, {r.macro_f1, m.macro_f1}, {r.weighted_f1, m.weighted_f1},
                        {r.micro_f1, m.micro_f1}, {r.acc_at_5, m.acc_at_5}, {r.acc_at_10, m.acc_at_10}})
      worst = std::max(worst, std::abs(a - b));
    for (const auto& [label, f1] : m.per_class_f1) worst = std::max(worst, std::abs(r.per_class_f1.at(label) - f1));
    o.check(r.per_class_f1.size() == m.per_class_f1.size(), "per-class key sets differ");
    o.check(r.accuracy <= r.acc_at_5 && r.acc_at_5 <= r.acc_at_10, "top-k not monotone");
  }
  o.check(worst <= 1e-12, "max oracle deviation " + std::to_string(worst));
  const std::vector<std::vector<std::size_t>> ranked = {{0, 1}, {1, 0}, {1, 0}};
  const auto hand = evaluate(ranked, std::vector<std::size_t>{0, 0, 1}, std::vector<std::size_t>{2, 1});
  const double third = 2.0 / 3.0;
  o.check(std::abs(hand.accuracy - third) <= 1e-12 && std::abs(hand.macro_f1 - third) <= 1e-12 &&
              std::abs(hand.weighted_f1 - third) <= 1e-12,
          "hand case");
  o.detail << " 100 random cases, max deviation " << worst << "; hand case acc=MF1=wF1=" << hand.accuracy;
  return o;
}

// ------------------------------------------------------------------ 4

Outcome numerical_kernels() {
  Outcome o;
  Rng rng(23);
  double svd_worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.between(10, 100));
    const auto cols = static_cast<std::size_t>(rng.between(10, 100));
    const Matrix a = random_matrix(rng, rows, cols);
    const auto svd = randomized_svd(a, 5, 10, 7, static_cast<std::uint64_t>(trial));
    const auto exact = oracle::singular_values_via_gram(a);
    for (Eigen::Index i = 0; i < 5; ++i)
      svd_worst = std::max(svd_worst, std::abs(svd.singular_values(i) - exact(i)) / exact(i));
  }
  o.check(svd_worst <= 1e-6, "rSVD relative error " + std::to_string(svd_worst));

  double mlp_worst = 0;
  {
    auto m = init_mlp(6, 8, 4, 3);
    for (Eigen::Index j = 0; j < m.b1.size(); ++j) m.b1(j) = rng.uniform(-0.3, 0.3);
    for (Eigen::Index j = 0; j < m.b2.size(); ++j) m.b2(j) = rng.uniform(-0.3, 0.3);
    const Matrix x = random_matrix(rng, 5, 6);
    const std::vector<std::size_t> y = {0, 3, 1, 2, 3};
    MlpModel grad;
    mlp_loss(m, x, y, &grad);
    auto to_ld = [](const Matrix& mat) {
      oracle::MatLD out(static_cast<std::size_t>(mat.rows()));
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        for (Eigen::Index j = 0; j < mat.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(mat(i, j));
      return out;
    };
    auto vec_ld = [](const Vector& v) { return std::vector<oracle::LD>(v.data(), v.data() + v.size()); };
    auto w1 = to_ld(m.w1), w2 = to_ld(m.w2), xs = to_ld(x);
    auto b1 = vec_ld(m.b1), b2 = vec_ld(m.b2);
    const oracle::LD h = 1e-6L;
    auto probe = [&](oracle::LD& p, double analytic) {
      const auto saved = p;
      p = saved + h;
      const auto up = oracle::mlp_loss(w1, b1, w2, b2, xs, y);
      p = saved - h;
      const auto down = oracle::mlp_loss(w1, b1, w2, b2, xs, y);
      p = saved;
      mlp_worst = std::max(mlp_worst, oracle::relative_error(analytic, static_cast<double>((up - down) / (2 * h))));
    };
    for (std::size_t i = 0; i < w1.size(); ++i)
      for (std::size_t j = 0; j < w1[i].size(); ++j) probe(w1[i][j], grad.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < b1.size(); ++j) probe(b1[j], grad.b1(static_cast<Eigen::Index>(j)));
    for (std::size_t i = 0; i < w2.size(); ++i)
      for (std::size_t j = 0; j < w2[i].size(); ++j) probe(w2[i][j], grad.w2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < b2.size(); ++j) probe(b2[j], grad.b2(static_cast<Eigen::Index>(j)));
  }
  o.check(mlp_worst <= 1e-4, "MLP gradient relative error " + std::to_string(mlp_worst));

  double d2v_worst = 0;
  {
    const std::size_t dim = 6, n_in = 4, n_out = 4;
    std::vector<std::vector<double>> in(n_in, std::vector<double>(dim)), out(n_out, std::vector<double>(dim));
    for (auto* m : {&in, &out})
      for (auto& row : *m)
        for (auto& v : row) v = rng.uniform(-0.8, 0.8);
    std::vector<const double*> ip, op;
    for (auto& r : in) ip.push_back(r.data());
    for (auto& r : out) op.push_back(r.data());
    std::vector<double> ig(dim), og(n_out * dim), hidden(dim);
    detail::window_loss_gradient(ip, op, dim, ig.data(), og.data(), hidden.data());
    auto as_ld = [](const std::vector<std::vector<double>>& m) {
      oracle::MatLD r;
      for (const auto& row : m) r.emplace_back(row.begin(), row.end());
      return r;
    };
    const oracle::LD h = 1e-6L;
    for (int which = 0; which < 2; ++which)
      for (std::size_t r = 0; r < (which == 0 ? n_in : n_out); ++r)
        for (std::size_t k = 0; k < dim; ++k) {
          auto pi = as_ld(in), mi = as_ld(in), po = as_ld(out), mo = as_ld(out);
          (which == 0 ? pi : po)[r][k] += h;
          (which == 0 ? mi : mo)[r][k] -= h;
          const auto fd = static_cast<double>((oracle::window_loss(pi, po) - oracle::window_loss(mi, mo)) / (2 * h));
          d2v_worst = std::max(d2v_worst, oracle::relative_error(which == 0 ? ig[k] : og[r * dim + k], fd));
        }
  }
  o.check(d2v_worst <= 1e-4, "doc2vec gradient relative error " + std::to_string(d2v_worst));

  Adam adam;
  std::vector<double> params = {0.5, -1.25, 3e8, 0.0, -7e-9};
  const auto before = params;
  for (int i = 0; i < 10; ++i) adam.step(params, std::vector<double>(params.size(), 0.0));
  o.check(params == before, "Adam moved under a zero gradient");
  o.detail << " rSVD max rel err " << svd_worst << " (20 matrices), MLP grad " << mlp_worst << ", doc2vec grad "
           << d2v_worst << ", Adam fixpoint exact";
  return o;
}

// ------------------------------------------------------------------ 5

Outcome desk_scale() {
  Outcome o;
  testing_util::TempDir dir;
  PipelineConfig c;
  c.seed = 2024;
  c.generator.n_records = 1900;
  c.generator.title_vocab_size = 50;
  std::ostringstream log;
  const auto start = Clock::now();
  Pipeline p(c, dir.path(), log);
  for (Stage s : {Stage::generate, Stage::segment, Stage::label, Stage::embed, Stage::train, Stage::evaluate}) p.run(s);
  const double secs = seconds_since(start);

  const auto report = json::parse(testing_util::slurp(dir / "report.json"));
  const auto vocab = load_vocabulary(dir / "vocabulary.csv");
  const auto data = load_dataset(dir / "dataset.jsonl");
  std::size_t segments = 0;
  for (const auto& inst : data) segments += inst.view == View::with_title;
  const double mlp = report["models"]["mlp"]["joint"]["accuracy"];
  const double base = report["models"]["baseline"]["joint"]["accuracy"];
  const double with_title = report["models"]["mlp"]["with_title"]["accuracy"];
  const double without_title = report["models"]["mlp"]["without_title"]["accuracy"];

  const auto baseline = BaselineModel::from_container(load_container(dir / "baseline.bin"));
  std::size_t n_test = 0, top_hits = 0;
  for (const auto& inst : data)
    if (inst.fold == Fold::test) {
      ++n_test;
      top_hits += inst.label_id == baseline.ranking[0];
    }
  const double top_freq = static_cast<double>(top_hits) / static_cast<double>(n_test);

  o.check(vocab.size() == 50, std::to_string(vocab.size()) + " labels");
  o.check(segments >= 18000 && segments <= 22000, std::to_string(segments) + " labeled segments");
  o.check(mlp >= base + 0.30, "MLP " + std::to_string(mlp) + " vs baseline " + std::to_string(base));
  o.check(with_title >= without_title, "with-title accuracy below without-title");
  o.check(base == top_freq, "baseline accuracy differs from top-class test frequency");
  o.check(secs < 300.0, "runtime " + std::to_string(secs) + " s");
  o.detail << " " << vocab.size() << " labels, " << segments << " segments x2 views; LSA+MLP acc " << mlp
           << " vs baseline " << base << " (top-class freq " << top_freq << "); with/without title " << with_title
           << "/" << without_title << "; " << secs << " s";
  return o;
}

// ------------------------------------------------------------------ 6

Outcome long_tail() {
  Outcome o;
  GeneratorConfig cfg;
  cfg.seed = 31;
  cfg.n_records = 5000;
  const auto synthetic = generate_synthetic(cfg);
  std::map<std::string, std::size_t> counts;
  for (const auto& rt : synthetic.truth)
    for (const auto& span : rt.spans)
      if (span.title) ++counts[*span.title];
  std::vector<double> freq;
  for (const auto& [t, c] : counts) freq.push_back(static_cast<double>(c));
  std::sort(freq.rbegin(), freq.rend());
  const auto n = static_cast<double>(freq.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t r = 0; r < freq.size(); ++r) {
    const double x = std::log(static_cast<double>(r + 1)), y = std::log(freq[r]);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double corr = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  o.check(corr <= -0.95, "correlation " + std::to_string(corr));
  o.detail << " " << freq.size() << " titles over 5000 records, log-log correlation " << corr;
  return o;
}

// ------------------------------------------------------------------ 7

Outcome clustering() {
  Outcome o;
  Rng rng(41);
  std::size_t increases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_matrix(rng, static_cast<std::size_t>(rng.between(10, 80)), static_cast<std::size_t>(rng.between(1, 6)));
    const std::size_t k = static_cast<std::size_t>(rng.between(1, 8));
    const auto c = kmeans(x, {.k = k, .seed = static_cast<std::uint64_t>(trial), .max_iter = 300, .n_init = 1});
    for (std::size_t i = 1; i < c.inertia_history.size(); ++i) increases += c.inertia_history[i] > c.inertia_history[i - 1];
  }
  o.check(increases == 0, std::to_string(increases) + " inertia increases");

  std::size_t exhaustive_mismatch = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(rng, static_cast<std::size_t>(rng.between(3, 8)), 2);
    const auto [labels, best] = oracle::best_two_partition(x);
    const auto c = kmeans(x, {.k = 2, .seed = 5, .max_iter = 300, .n_init = 10});
    if (c.assignment != labels || std::abs(c.inertia - best) > 1e-9 * std::max(1.0, best)) ++exhaustive_mismatch;
  }
  o.check(exhaustive_mismatch == 0, std::to_string(exhaustive_mismatch) + " of 20 differ from the exhaustive oracle");

  std::size_t planted_miss = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20;
    Matrix x(static_cast<Eigen::Index>(n), 3);
    std::vector<int> truth;
    const Matrix centres = random_matrix(rng, 2, 3) * 10.0 + Matrix::Constant(2, 3, 0.0);
    const Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(3, 15.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int g = static_cast<int>(rng.below(2));
      truth.push_back(g);
      x.row(static_cast<Eigen::Index>(i)) = centres.row(g) + (g == 1 ? shift : Eigen::RowVectorXd::Zero(3));
      for (Eigen::Index j = 0; j < 3; ++j) x(static_cast<Eigen::Index>(i), j) += 0.05 * rng.normal();
    }
    truth = oracle::first_appearance(truth);
    if (kmeans(x, {.k = 2, .seed = 1}).assignment != truth) ++planted_miss;
    if (agglomerative(x, 2, Linkage::average, Metric::euclidean).assignment != truth) ++planted_miss;
  }
  o.check(planted_miss == 0, std::to_string(planted_miss) + " planted recoveries failed");

  const auto x = random_matrix(rng, 60, 4);
  const auto a = kmeans(x, {.k = 6, .seed = 77});
  const auto b = kmeans(x, {.k = 6, .seed = 77});
  const auto ag1 = agglomerative(x, 6);
  const auto ag2 = agglomerative(x, 6);
  o.check(a.assignment == b.assignment && a.inertia == b.inertia && a.inertia_history == b.inertia_history &&
              ag1.assignment == ag2.assignment,
          "reruns differ");
  o.detail << " 100 inertia traces monotone, 20/20 exhaustive matches, 40 planted recoveries, deterministic";
  return o;
}

// ------------------------------------------------------------------ 8

Outcome neighbor_sanity() {
  Outcome o;
  testing_util::TempDir dir;
  PipelineConfig c;
  c.seed = 7;
  c.generator.n_records = 1500;
  c.generator.title_vocab_size = 50;
  c.generator.planted_groups = 5;
  c.label_min_count = 10;
  std::ostringstream log;
  Pipeline p(c, dir.path(), log);
  for (Stage s : {Stage::generate, Stage::segment, Stage::label, Stage::embed}) p.run(s);
  const auto space = p.title_space();

  GeneratorConfig gen = c.generator;
  gen.seed = c.generator_seed();
  const auto titles = generate_synthetic(gen).titles;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < titles.normalized.size(); ++i) group_of[titles.normalized[i]] = titles.group[i];

  std::size_t below = 0, shared = 0, total = 0;
  double worst = 1.0;
  for (std::size_t id = 0; id < space.size(); ++id) {
    const auto g = group_of.at(space.titles[id]);
    std::size_t same = 0;
    const auto nn = nearest_titles(space, id, 5);
    for (const auto& n : nn) same += group_of.at(n.title) == g;
    const double frac = static_cast<double>(same) / static_cast<double>(nn.size());
    worst = std::min(worst, frac);
    below += frac < 0.8;
    shared += same;
    total += nn.size();
  }
  o.check(space.size() >= 30, std::to_string(space.size()) + " titles in the space");
  o.check(below == 0, std::to_string(below) + " titles with fewer than 4 of 5 neighbours in their group");
  o.detail << " " << space.size() << " titles in 5 planted groups; worst title " << worst << ", overall "
           << static_cast<double>(shared) / static_cast<double>(total);
  return o;
}

// ------------------------------------------------------------------ 9

Outcome projector_export() {
  Outcome o;
  testing_util::TempDir dir;
  Rng rng(53);
  TitleSpace space;
  space.vectors = random_matrix(rng, 40, 7);
  space.vectors(0, 0) = 1e-300;
  space.vectors(1, 1) = -0.1;
  space.vectors(2, 2) = 1.0 / 3.0;
  space.vectors(3, 3) = 123456789.123456789;
  for (std::size_t i = 0; i < 40; ++i) {
    space.titles.push_back("titul " + std::to_string(i) + (i % 3 ? "" : " čř"));
    space.counts.push_back(1000 - i * 7);
  }
  const auto clustering = kmeans(space.vectors, {.k = 4, .seed = 2});
  export_projector(space, &clustering, dir / "vectors.tsv", dir / "metadata.tsv");
  const auto back = load_projector_vectors(dir / "vectors.tsv");
  o.check(back.rows() == space.vectors.rows() && back.cols() == space.vectors.cols() && back == space.vectors,
          "vectors differ after round trip");
  std::ifstream meta(dir / "metadata.tsv");
  std::string line;
  std::getline(meta, line);
  o.check(line == "title\tcount\tcluster", "metadata header");
  std::size_t rows = 0, misaligned = 0;
  while (std::getline(meta, line)) {
    std::istringstream fields(line);
    std::string title, count, cluster;
    std::getline(fields, title, '\t');
    std::getline(fields, count, '\t');
    std::getline(fields, cluster, '\t');
    if (rows >= space.size() || title != space.titles[rows] || count != std::to_string(space.counts[rows]) ||
        cluster != std::to_string(clustering.assignment[rows]))
      ++misaligned;
    ++rows;
  }
  o.check(rows == space.size(), "metadata rows " + std::to_string(rows));
  o.check(misaligned == 0, std::to_string(misaligned) + " misaligned metadata rows");
  o.detail << " 40x7 vectors bit-exact, " << rows << " aligned metadata rows";
  return o;
}

// ------------------------------------------------------------------ 10

Outcome mapping_service() {
  Outcome o;
  testing_util::TempDir dir;
  Rng rng(61);
  TitleSpace space;
  for (std::size_t r = 1; r <= 2078; ++r) {
    space.titles.push_back("t" + std::to_string(r));
    space.counts.push_back(static_cast<std::size_t>(50000.0 / static_cast<double>(r)) + 1);
  }
  space.vectors = random_matrix(rng, 2078, 8);
  Ontology ontology;
  for (const char* code : {"A", "B", "C"}) ontology.add({code, code});

  {
    MappingService svc(space, ontology, dir / "zipf.jsonl");
    for (std::size_t i = 0; i < 100; ++i) svc.assign(i, "A", "x");
    std::size_t covered = 0, total = 0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      total += space.counts[i];
      if (i < 100) covered += space.counts[i];
    }
    o.check(svc.coverage().coverage == static_cast<double>(covered) / static_cast<double>(total),
            "coverage differs from recount");
    std::size_t self = 0;
    for (std::size_t id = 0; id < space.size(); id += 7)
      for (const auto& s : svc.suggest(id, 50)) self += s.id == id;
    o.check(self == 0, "suggest returned the query title");
  }

  TitleSpace small;
  small.vectors = random_matrix(rng, 12, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    small.titles.push_back("s" + std::to_string(i));
    small.counts.push_back(1 + rng.below(40));
  }
  std::vector<std::map<std::size_t, std::string>> expected{{}};
  {
    MappingService svc(small, ontology, dir / "log.jsonl");
    const char* codes[] = {"A", "B", "C"};
    for (int step = 0; step < 60; ++step) {
      const std::size_t id = rng.below(12);
      if (rng.bernoulli(0.3) && svc.state().assignments.count(id)) svc.unassign(id);
      else svc.assign(id, codes[rng.below(3)], "u");
      std::map<std::size_t, std::string> snapshot;
      for (const auto& [k, a] : svc.state().assignments) snapshot[k] = a.code;
      expected.push_back(std::move(snapshot));
    }
  }
  const auto log = testing_util::slurp(dir / "log.jsonl");
  std::vector<std::size_t> ends{0};
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i] == '\n') ends.push_back(i + 1);
  std::size_t replay_mismatch = 0, crashes = 0;
  for (std::size_t e = 0; e < ends.size(); ++e) {
    std::vector<std::size_t> cuts{ends[e]};
    if (e + 1 < ends.size()) cuts.push_back(ends[e] + (ends[e + 1] - ends[e]) / 2);
    for (auto cut : cuts) {
      ++crashes;
      testing_util::spit(dir / "crash.jsonl", log.substr(0, cut));
      MappingService back(small, ontology, dir / "crash.jsonl");
      std::map<std::size_t, std::string> got;
      for (const auto& [k, a] : back.state().assignments) got[k] = a.code;
      replay_mismatch += e >= expected.size() || got != expected[e];
    }
  }
  o.check(ends.size() == expected.size(), "log holds " + std::to_string(ends.size() - 1) + " events");
  o.check(replay_mismatch == 0, std::to_string(replay_mismatch) + " replays differ");

  TitleSpace ties;
  ties.vectors = Matrix(6, 2);
  ties.vectors << 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1;
  ties.titles = {"q", "a", "b", "c", "d", "e"};
  ties.counts = {1, 3, 30, 7, 30, 500};
  MappingService tie_svc(ties, ontology, dir / "ties.jsonl");
  std::vector<std::size_t> order;
  for (const auto& s : tie_svc.suggest(0, 5)) order.push_back(s.id);
  o.check(order == std::vector<std::size_t>({2, 4, 3, 1, 5}), "equal-similarity ranking not by count then id");
  o.detail << " coverage recount exact (top-100 of 2078), " << crashes << " crash points replayed, no self suggestions,"
           << " count tie-break holds";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"segmenter exactness", segmenter_exactness},
      {"labeler correctness", labeler_correctness},
      {"metric oracle equivalence", metric_oracle},
      {"numerical kernels", numerical_kernels},
      {"desk-scale classification", desk_scale},
      {"long-tail fidelity", long_tail},
      {"clustering", clustering},
      {"neighbor sanity", neighbor_sanity},
      {"projector export", projector_export},
      {"mapping service", mapping_service},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ":" << o.detail.str() << (o.pass ? "" : o.failures + "]") << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
