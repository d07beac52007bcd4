#include "notesplit/lsa.hpp"

#include <cmath>
#include <map>

namespace notesplit {

TfidfModel::TfidfModel(std::vector<std::string> terms, Vector idf, Tokenizer tokenizer)
    : terms_(std::move(terms)), idf_(std::move(idf)), tokenizer_(tokenizer) {
  if (static_cast<std::size_t>(idf_.size()) != terms_.size()) throw InvalidArgument("idf size does not match vocabulary");
  for (std::size_t i = 0; i < terms_.size(); ++i) column_.emplace(terms_[i], i);
}

std::optional<std::size_t> TfidfModel::column(const std::string& term) const {
  auto it = column_.find(term);
  if (it == column_.end()) return std::nullopt;
  return it->second;
}

SparseRow TfidfModel::weights(std::string_view text) const {
  std::map<std::size_t, double> tf;
  for (const auto& token : tokenizer_(text)) {
    auto it = column_.find(token);
    if (it != column_.end()) tf[it->second] += 1.0;
  }
  SparseRow row;
  row.reserve(tf.size());
  for (const auto& [col, count] : tf) row.emplace_back(col, count * idf_(static_cast<Eigen::Index>(col)));
  return row;
}

SparseRow TfidfModel::transform(std::string_view text) const {
  SparseRow row = weights(text);
  double norm = 0.0;
  for (const auto& [_, w] : row) norm += w * w;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& [_, w] : row) w /= norm;
  return row;
}

SparseMatrix TfidfModel::transform(const std::vector<std::string>& texts) const {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < texts.size(); ++i)
    for (const auto& [col, w] : transform(texts[i]))
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(col), w);
  SparseMatrix m(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(terms_.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

TfidfModel fit_tfidf(const std::vector<std::string>& texts, Tokenizer tokenizer) {
  std::map<std::string, std::size_t> df;
  for (const auto& text : texts) {
    auto tokens = tokenizer(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }
  if (df.empty()) throw InvalidArgument("fit_tfidf: corpus has no tokens");
  const auto n_docs = static_cast<double>(texts.size());
  std::vector<std::string> terms;
  Vector idf(static_cast<Eigen::Index>(df.size()));
  Eigen::Index i = 0;
  for (const auto& [term, count] : df) {
    terms.push_back(term);
    idf(i++) = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0;
  }
  return TfidfModel(std::move(terms), std::move(idf), tokenizer);
}

LsaModel::LsaModel(TfidfModel tfidf, Matrix basis, Vector singular_values)
    : tfidf_(std::move(tfidf)), basis_(std::move(basis)), singular_values_(std::move(singular_values)) {}

Vector LsaModel::embed(std::string_view text) const {
  Vector out = Vector::Zero(basis_.cols());
  for (const auto& [col, w] : tfidf_.transform(text)) out += w * basis_.row(static_cast<Eigen::Index>(col)).transpose();
  return out;
}

Matrix LsaModel::embed(const std::vector<std::string>& texts) const {
  Matrix out(static_cast<Eigen::Index>(texts.size()), basis_.cols());
  for (std::size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embed(texts[i]).transpose();
  return out;
}

ModelContainer LsaModel::to_container() const {
  ModelContainer c;
  c.kind = "lsa";
  c.meta = {{"dim", dim()}, {"lowercase", tfidf_.tokenizer().lowercase()}, {"vocab", tfidf_.terms()}};
  c.matrices["idf"] = tfidf_.idf().transpose();
  c.matrices["basis"] = basis_;
  c.matrices["singular_values"] = singular_values_.transpose();
  return c;
}

LsaModel LsaModel::from_container(const ModelContainer& c) {
  if (c.kind != "lsa") throw InvalidArgument("expected an lsa model, got '" + c.kind + "'");
  auto terms = c.meta.at("vocab").get<std::vector<std::string>>();
  Vector idf = c.matrix("idf").row(0).transpose();
  TfidfModel tfidf(std::move(terms), std::move(idf), Tokenizer(c.meta.at("lowercase").get<bool>()));
  return LsaModel(std::move(tfidf), c.matrix("basis"), c.matrix("singular_values").row(0).transpose());
}

LsaFit fit_lsa(const std::vector<std::string>& texts, const LsaConfig& config) {
  if (config.dim == 0) throw InvalidArgument("fit_lsa: d must be at least 1");
  LsaFit fit;
  TfidfModel tfidf = fit_tfidf(texts);
  const SparseMatrix a = tfidf.transform(texts);
  SvdResult svd = randomized_svd(a, config.dim, config.oversampling, config.power_iterations, config.seed);
  if (static_cast<std::size_t>(svd.singular_values.size()) < config.dim) {
    fit.warnings.push_back("LSA dimension reduced from " + std::to_string(config.dim) + " to matrix rank " +
                           std::to_string(svd.singular_values.size()));
  }
  fit.model = LsaModel(std::move(tfidf), std::move(svd.right_vectors), std::move(svd.singular_values));
  return fit;
}

}  // namespace notesplit
