#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "notesplit/container.hpp"
#include "notesplit/linalg.hpp"

namespace notesplit {

struct Doc2VecConfig {
  std::size_t dim = 50;
  std::size_t window = 5;      // context radius
  std::size_t negatives = 5;
  std::size_t epochs = 20;
  std::size_t min_count = 2;
  double alpha = 0.025;        // linear decay alpha -> min_alpha
  double min_alpha = 0.0001;
  std::uint64_t seed = 1;
  double sample = 0.0;         // frequent-word downsampling threshold, 0 = off
  std::size_t threads = 1;     // > 1: hogwild updates, not reproducible
};

/// One training document: tokens tagged with a document id (a label).
struct TaggedTokens {
  std::size_t doc_id = 0;
  std::vector<std::string> tokens;
};

struct Inferred {
  Vector vector;
  bool all_out_of_vocabulary = false;
};

/// Distributed-memory paragraph vectors with mean combination, trained by
/// negative sampling against the unigram^0.75 noise distribution.
class Doc2VecModel {
 public:
  Doc2VecModel() = default;

  std::size_t dim() const { return static_cast<std::size_t>(word_vectors_.cols()); }
  std::size_t n_docs() const { return static_cast<std::size_t>(doc_vectors_.rows()); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::size_t>& word_counts() const { return word_counts_; }
  const Matrix& word_vectors() const { return word_vectors_; }
  const Matrix& output_vectors() const { return output_vectors_; }
  const Matrix& doc_vectors() const { return doc_vectors_; }
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }
  const Doc2VecConfig& config() const { return config_; }
  std::optional<std::size_t> word_index(const std::string& word) const;
  /// Inverse-CDF draw from the unigram^0.75 noise distribution, u in [0, 1).
  std::size_t sample_noise(double u) const;

  /// Fits a fresh document vector with the word and output vectors frozen.
  /// Out-of-vocabulary tokens are dropped; none left gives the zero vector.
  Inferred infer(const std::vector<std::string>& tokens, std::size_t steps, std::uint64_t seed) const;

  ModelContainer to_container() const;
  static Doc2VecModel from_container(const ModelContainer& container);

 private:
  friend Doc2VecModel fit_doc2vec(const std::vector<TaggedTokens>&, std::size_t, const Doc2VecConfig&);

  void build_noise_table();

  Doc2VecConfig config_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> word_counts_;
  std::vector<double> noise_cdf_;
  Matrix word_vectors_;
  Matrix output_vectors_;
  Matrix doc_vectors_;
  std::vector<double> epoch_loss_;
};

/// Every doc id in [0, n_docs) needs at least one instance. Throws
/// InvalidArgument when min-count pruning leaves no vocabulary.
Doc2VecModel fit_doc2vec(const std::vector<TaggedTokens>& instances, std::size_t n_docs, const Doc2VecConfig& config);

namespace detail {

/// Negative-sampling loss of one window. The hidden vector is the mean of
/// the `inputs` rows; outputs[0] is the positive target, the rest are
/// negatives. Writes dLoss/dinput (identical for every input row) into
/// `input_grad` and dLoss/doutput_j into row j of `output_grad`.
double window_loss_gradient(std::span<const double* const> inputs, std::span<const double* const> outputs,
                            std::size_t dim, double* input_grad, double* output_grad, double* hidden_scratch);

}  // namespace detail

}  // namespace notesplit
