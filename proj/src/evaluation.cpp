#include "notesplit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "notesplit/error.hpp"

namespace notesplit {

namespace {

std::size_t count_of(std::span<const std::size_t> counts, std::size_t label) {
  return label < counts.size() ? counts[label] : 0;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

}  // namespace

double accuracy_at(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> truth,
                   std::size_t k) {
  if (ranked.size() != truth.size()) throw InvalidArgument("rankings and truths differ in length");
  if (truth.empty()) throw InvalidArgument("empty test set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = ranked[i];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    hits += std::find(r.begin(), end, truth[i]) != end;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

EvalReport evaluate(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> truth,
                    std::span<const std::size_t> class_counts, std::size_t bucket) {
  if (truth.empty()) throw InvalidArgument("evaluate: empty test set");
  if (ranked.size() != truth.size()) throw InvalidArgument("evaluate: rankings and truths differ in length");

  EvalReport report;
  report.n = truth.size();
  std::map<std::size_t, std::size_t> true_pos, predicted;
  std::size_t correct = 0, made = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++report.support[truth[i]];
    if (ranked[i].empty()) continue;
    const std::size_t top = ranked[i].front();
    ++made;
    ++predicted[top];
    if (top == truth[i]) {
      ++correct;
      ++true_pos[truth[i]];
    }
  }

  const double n = static_cast<double>(report.n);
  double macro = 0.0, weighted = 0.0;
  for (const auto& [label, support] : report.support) {
    const double tp = static_cast<double>(true_pos[label]);
    const double pred = static_cast<double>(predicted[label]);
    const double precision = pred == 0.0 ? 0.0 : tp / pred;
    const double recall = tp / static_cast<double>(support);
    const double f1 = f1_score(precision, recall);
    report.per_class_f1[label] = f1;
    macro += f1;
    weighted += f1 * static_cast<double>(support);
  }
  report.accuracy = static_cast<double>(correct) / n;
  report.macro_f1 = macro / static_cast<double>(report.support.size());
  report.weighted_f1 = weighted / n;
  const double micro_p = made == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(made);
  report.micro_f1 = f1_score(micro_p, report.accuracy);
  report.acc_at_5 = accuracy_at(ranked, truth, 5);
  report.acc_at_10 = accuracy_at(ranked, truth, 10);
  report.buckets = bucket_report(report.per_class_f1, class_counts, bucket);
  return report;
}

FiveNumber five_number(std::vector<double> values) {
  FiveNumber out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
  };
  out.min = values.front();
  out.q1 = quantile(0.25);
  out.median = quantile(0.5);
  out.q3 = quantile(0.75);
  out.max = values.back();
  return out;
}

BucketReport bucket_report(const std::map<std::size_t, double>& per_class_f1, std::span<const std::size_t> class_counts,
                           std::size_t bucket) {
  if (bucket == 0) throw InvalidArgument("bucket size must be positive");
  BucketReport report;
  report.histogram.assign(kHistogramBins, 0);
  std::vector<std::size_t> labels;
  for (const auto& [label, f1] : per_class_f1) {
    labels.push_back(label);
    const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(std::floor(f1 * kHistogramBins)));
    ++report.histogram[bin];
  }
  std::stable_sort(labels.begin(), labels.end(), [&](std::size_t a, std::size_t b) {
    return count_of(class_counts, a) > count_of(class_counts, b);
  });
  for (std::size_t start = 0; start < labels.size(); start += bucket) {
    BucketStats stats;
    stats.first_rank = start;
    stats.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(start),
                        labels.begin() + static_cast<std::ptrdiff_t>(std::min(labels.size(), start + bucket)));
    std::vector<double> f1s;
    for (auto l : stats.labels) f1s.push_back(per_class_f1.at(l));
    stats.f1 = five_number(std::move(f1s));
    report.buckets.push_back(std::move(stats));
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label, f1] : report.per_class_f1)
    per_class[std::to_string(label)] = {{"f1", f1}, {"support", report.support.at(label)}};
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : report.buckets.buckets) {
    buckets.push_back({{"first_rank", b.first_rank},
                       {"size", b.labels.size()},
                       {"min", b.f1.min},
                       {"q1", b.f1.q1},
                       {"median", b.f1.median},
                       {"q3", b.f1.q3},
                       {"max", b.f1.max}});
  }
  return {{"n", report.n},
          {"accuracy", report.accuracy},
          {"macro_f1", report.macro_f1},
          {"weighted_f1", report.weighted_f1},
          {"micro_f1", report.micro_f1},
          {"acc_at_5", report.acc_at_5},
          {"acc_at_10", report.acc_at_10},
          {"per_class", per_class},
          {"bucket_stats", buckets},
          {"f1_histogram", report.buckets.histogram}};
}

std::string bucket_csv_rows(const BucketReport& report, const std::string& prefix) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < report.buckets.size(); ++i) {
    const auto& b = report.buckets[i];
    out << prefix << i << ',' << b.first_rank << ',' << b.labels.size() << ',' << b.f1.min << ',' << b.f1.q1 << ','
        << b.f1.median << ',' << b.f1.q3 << ',' << b.f1.max << "\n";
  }
  return out.str();
}

}  // namespace notesplit
