#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace notesplit {

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct BucketStats {
  std::size_t first_rank = 0;  // position of the bucket's first class in count order
  std::vector<std::size_t> labels;
  FiveNumber f1;
};

struct BucketReport {
  std::vector<BucketStats> buckets;
  std::vector<std::size_t> histogram;  // 20 equal-width bins over [0, 1]
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double micro_f1 = 0.0;
  double acc_at_5 = 0.0;
  double acc_at_10 = 0.0;
  std::map<std::size_t, double> per_class_f1;    // classes present in the test set
  std::map<std::size_t, std::size_t> support;
  BucketReport buckets;
};

inline constexpr std::size_t kHistogramBins = 20;

/// Top-k hit rate; rankings may be truncated.
double accuracy_at(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> truth,
                   std::size_t k);

/// Metrics from full or truncated rankings (top-1 drives the confusion
/// counts). `class_counts` are train counts, used to order the buckets.
/// Throws InvalidArgument on an empty or mismatched test set.
EvalReport evaluate(const std::vector<std::vector<std::size_t>>& ranked, std::span<const std::size_t> truth,
                    std::span<const std::size_t> class_counts, std::size_t bucket = 100);

/// Quartiles with linear interpolation between order statistics.
FiveNumber five_number(std::vector<double> values);

BucketReport bucket_report(const std::map<std::size_t, double>& per_class_f1,
                           std::span<const std::size_t> class_counts, std::size_t bucket = 100);

nlohmann::json to_json(const EvalReport& report);
/// CSV rows: bucket,first_rank,size,min,q1,median,q3,max (no header).
std::string bucket_csv_rows(const BucketReport& report, const std::string& prefix);

}  // namespace notesplit
