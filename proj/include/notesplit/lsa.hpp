#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "notesplit/container.hpp"
#include "notesplit/error.hpp"
#include "notesplit/linalg.hpp"
#include "notesplit/random.hpp"
#include "notesplit/tokenizer.hpp"

namespace notesplit {

using SparseRow = std::vector<std::pair<std::size_t, double>>;

/// Smooth-idf TF-IDF: idf(t) = ln((1 + N) / (1 + df(t))) + 1, rows L2-normalized.
class TfidfModel {
 public:
  TfidfModel() = default;
  TfidfModel(std::vector<std::string> terms, Vector idf, Tokenizer tokenizer = Tokenizer{});

  /// Raw tf * idf weights, sorted by column, not normalized.
  SparseRow weights(std::string_view text) const;
  /// L2-normalized TF-IDF row; empty for texts without known terms.
  SparseRow transform(std::string_view text) const;
  SparseMatrix transform(const std::vector<std::string>& texts) const;

  std::size_t n_terms() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const Vector& idf() const { return idf_; }
  std::optional<std::size_t> column(const std::string& term) const;
  const Tokenizer& tokenizer() const { return tokenizer_; }

 private:
  std::vector<std::string> terms_;  // lexicographic
  std::unordered_map<std::string, std::size_t> column_;
  Vector idf_;
  Tokenizer tokenizer_;
};

/// Throws InvalidArgument when no document has a token.
TfidfModel fit_tfidf(const std::vector<std::string>& texts, Tokenizer tokenizer = Tokenizer{});

struct SvdResult {
  Vector singular_values;  // descending
  Matrix right_vectors;    // n × k, orthonormal columns
  std::size_t rank = 0;    // numerical rank observed in the sketch
};

/// Top-k right singular triplets of `a` by randomized block Krylov
/// iteration: a Gaussian start block of k + oversampling columns, then
/// `power_iterations` rounds of AᵀA, every round's orthonormalized block
/// kept in the basis. A Rayleigh-Ritz step (thin SVD of A·basis) extracts
/// the singular pairs. k is reduced to the numerical rank when larger.
template <class MatrixType>
SvdResult randomized_svd(const MatrixType& a, std::size_t k, std::size_t oversampling, std::size_t power_iterations,
                         std::uint64_t seed) {
  using Dense = Eigen::MatrixXd;
  const auto m = static_cast<Eigen::Index>(a.rows());
  const auto n = static_cast<Eigen::Index>(a.cols());
  if (k == 0) throw InvalidArgument("randomized_svd: k must be positive");
  if (m == 0 || n == 0) throw InvalidArgument("randomized_svd: empty matrix");

  const auto block = std::min<Eigen::Index>(static_cast<Eigen::Index>(k + oversampling), n);
  Rng rng(seed);
  Dense omega(m, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < m; ++i) omega(i, j) = rng.normal();

  auto orthonormalize = [](const Dense& y) {
    Eigen::HouseholderQR<Dense> qr(y);
    const auto cols = std::min(y.rows(), y.cols());
    return Dense(qr.householderQ() * Dense::Identity(y.rows(), cols));
  };

  std::vector<Dense> blocks;
  Dense q = orthonormalize(a.transpose() * omega);
  blocks.push_back(q);
  for (std::size_t it = 0; it < power_iterations; ++it) {
    const Dense z = orthonormalize(a * q);
    q = orthonormalize(a.transpose() * z);
    blocks.push_back(q);
  }

  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.cols();
  Dense krylov(n, total);
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    krylov.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  const Dense basis = orthonormalize(krylov);

  const Dense projected = a * basis;
  Eigen::BDCSVD<Dense> svd(projected, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();

  std::size_t rank = 0;
  const double tol = s.size() > 0 ? s(0) * 1e-10 : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol && s(i) > 0.0) ++rank;

  const auto keep = static_cast<Eigen::Index>(std::min(k, rank));
  SvdResult out;
  out.rank = rank;
  out.singular_values = s.head(keep);
  out.right_vectors = basis * svd.matrixV().leftCols(keep);
  // Sign convention: the largest-magnitude entry of each vector is positive.
  for (Eigen::Index j = 0; j < keep; ++j) {
    Eigen::Index arg = 0;
    out.right_vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.right_vectors(arg, j) < 0) out.right_vectors.col(j) *= -1.0;
  }
  return out;
}

struct LsaConfig {
  std::size_t dim = 50;
  std::size_t oversampling = 10;
  std::size_t power_iterations = 7;
  std::uint64_t seed = 0;
};

class LsaModel {
 public:
  LsaModel() = default;
  LsaModel(TfidfModel tfidf, Matrix basis, Vector singular_values);

  Vector embed(std::string_view text) const;
  Matrix embed(const std::vector<std::string>& texts) const;

  std::size_t dim() const { return static_cast<std::size_t>(basis_.cols()); }
  const TfidfModel& tfidf() const { return tfidf_; }
  const Matrix& basis() const { return basis_; }
  const Vector& singular_values() const { return singular_values_; }

  ModelContainer to_container() const;
  static LsaModel from_container(const ModelContainer& container);

 private:
  TfidfModel tfidf_;
  Matrix basis_;  // terms × d
  Vector singular_values_;
};

struct LsaFit {
  LsaModel model;
  std::vector<std::string> warnings;
};

/// Throws InvalidArgument when dim is zero or the corpus has no tokens.
LsaFit fit_lsa(const std::vector<std::string>& texts, const LsaConfig& config);

}  // namespace notesplit
