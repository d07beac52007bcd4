#include "notesplit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "notesplit/error.hpp"
#include "notesplit/random.hpp"

namespace notesplit {

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw InvalidArgument("Adam: gradient size mismatch");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

bool MlpModel::finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

namespace {

void softmax_rows(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    row.array() -= row.maxCoeff();
    // Scalar exp: Eigen's packet exp rounds differently from its tail loop,
    // which would break ties between equal logits.
    for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = std::exp(row(j));
    row /= row.sum();
  }
}

void check_dims(const MlpModel& model, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != model.input_dim())
    throw InvalidArgument("embedding dimension " + std::to_string(inputs.cols()) + " does not match model input " +
                          std::to_string(model.input_dim()));
}

template <class Params>
std::span<double> flat(Params& p) {
  return {p.data(), static_cast<std::size_t>(p.size())};
}

template <class Params>
std::span<const double> flat_const(const Params& p) {
  return {p.data(), static_cast<std::size_t>(p.size())};
}

}  // namespace

Matrix MlpModel::probabilities(const Matrix& inputs) const {
  check_dims(*this, inputs);
  Matrix hidden = ((inputs * w1).rowwise() + b1.transpose()).cwiseMax(0.0);
  Matrix logits = (hidden * w2).rowwise() + b2.transpose();
  softmax_rows(logits);
  return logits;
}

MlpModel init_mlp(std::size_t input_dim, std::size_t hidden, std::size_t n_classes, std::uint64_t seed) {
  Rng rng(seed);
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    return w;
  };
  MlpModel m;
  m.w1 = glorot(input_dim, hidden);
  m.b1 = Vector::Zero(static_cast<Eigen::Index>(hidden));
  m.w2 = glorot(hidden, n_classes);
  m.b2 = Vector::Zero(static_cast<Eigen::Index>(n_classes));
  return m;
}

double mlp_loss(const MlpModel& model, const Matrix& inputs, std::span<const std::size_t> labels, MlpModel* grad) {
  check_dims(model, inputs);
  const auto n = inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw InvalidArgument("inputs and labels differ in length");
  const Matrix pre = (inputs * model.w1).rowwise() + model.b1.transpose();
  const Matrix hidden = pre.cwiseMax(0.0);
  Matrix probs = (hidden * model.w2).rowwise() + model.b2.transpose();
  softmax_rows(probs);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    if (y >= probs.cols()) throw InvalidArgument("label out of range");
    loss -= std::log(std::max(probs(i, y), 1e-300));
  }
  loss /= static_cast<double>(n);
  if (!grad) return loss;

  Matrix d_logits = probs;
  for (Eigen::Index i = 0; i < n; ++i) d_logits(i, static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) -= 1.0;
  d_logits /= static_cast<double>(n);
  grad->w2 = hidden.transpose() * d_logits;
  grad->b2 = d_logits.colwise().sum().transpose();
  Matrix d_pre = (d_logits * model.w2.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  grad->w1 = inputs.transpose() * d_pre;
  grad->b1 = d_pre.colwise().sum().transpose();
  return loss;
}

TrainResult train_mlp(const Matrix& inputs, std::span<const std::size_t> labels, std::size_t n_classes,
                      const TrainConfig& config) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw InvalidArgument("train_mlp: " + std::to_string(inputs.rows()) + " inputs but " +
                          std::to_string(labels.size()) + " labels");
  if (inputs.rows() == 0 || inputs.cols() == 0) throw InvalidArgument("train_mlp: empty training set");
  if (config.epochs < 1 || config.batch_size < 1) throw InvalidArgument("train_mlp: epochs and batch_size must be >= 1");
  if (n_classes == 0) throw InvalidArgument("train_mlp: no classes");

  TrainResult result;
  std::vector<std::size_t> seen(n_classes, 0);
  for (auto y : labels) {
    if (y >= n_classes) throw InvalidArgument("train_mlp: label " + std::to_string(y) + " out of range");
    ++seen[y];
  }
  const auto missing = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 0));
  if (missing > 0) result.warnings.push_back(std::to_string(missing) + " classes have no training examples");

  result.model = init_mlp(static_cast<std::size_t>(inputs.cols()), config.hidden, n_classes, config.seed);
  MlpModel& model = result.model;
  Adam adam_w1(config.adam), adam_b1(config.adam), adam_w2(config.adam), adam_b2(config.adam);
  Rng rng(mix_seed(config.seed, 1));

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  MlpModel grad;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Matrix batch(static_cast<Eigen::Index>(end - begin), inputs.cols());
      std::vector<std::size_t> batch_labels(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        batch.row(static_cast<Eigen::Index>(i - begin)) = inputs.row(static_cast<Eigen::Index>(order[i]));
        batch_labels[i - begin] = labels[order[i]];
      }
      const double loss = mlp_loss(model, batch, batch_labels, &grad);
      if (!std::isfinite(loss))
        throw Error("train_mlp: non-finite loss in epoch " + std::to_string(epoch + 1) + " at example " +
                    std::to_string(begin));
      epoch_loss += loss * static_cast<double>(end - begin);
      adam_w1.step(flat(model.w1), flat_const(grad.w1));
      adam_b1.step(flat(model.b1), flat_const(grad.b1));
      adam_w2.step(flat(model.w2), flat_const(grad.w2));
      adam_b2.step(flat(model.b2), flat_const(grad.b2));
      if (!model.finite()) throw Error("train_mlp: weights became non-finite in epoch " + std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

ModelContainer MlpModel::to_container() const {
  ModelContainer c;
  c.kind = "mlp";
  c.meta = {{"input_dim", input_dim()}, {"hidden", hidden()}, {"classes", n_classes()}, {"activation", "relu"}};
  c.matrices["w1"] = w1;
  c.matrices["b1"] = b1.transpose();
  c.matrices["w2"] = w2;
  c.matrices["b2"] = b2.transpose();
  return c;
}

MlpModel MlpModel::from_container(const ModelContainer& c) {
  if (c.kind != "mlp") throw InvalidArgument("expected an mlp model, got '" + c.kind + "'");
  MlpModel m;
  m.w1 = c.matrix("w1");
  m.b1 = c.matrix("b1").row(0).transpose();
  m.w2 = c.matrix("w2");
  m.b2 = c.matrix("b2").row(0).transpose();
  return m;
}

BaselineModel BaselineModel::fit(std::span<const std::size_t> labels, std::size_t n_classes) {
  BaselineModel b;
  b.counts.assign(n_classes, 0);
  for (auto y : labels) {
    if (y >= n_classes) throw InvalidArgument("baseline: label out of range");
    ++b.counts[y];
  }
  b.ranking.resize(n_classes);
  std::iota(b.ranking.begin(), b.ranking.end(), 0);
  std::stable_sort(b.ranking.begin(), b.ranking.end(),
                   [&](std::size_t a, std::size_t c) { return b.counts[a] > b.counts[c]; });
  return b;
}

ModelContainer BaselineModel::to_container() const {
  ModelContainer c;
  c.kind = "baseline";
  c.meta = {{"ranking", ranking}, {"counts", counts}};
  return c;
}

BaselineModel BaselineModel::from_container(const ModelContainer& c) {
  if (c.kind != "baseline") throw InvalidArgument("expected a baseline model, got '" + c.kind + "'");
  BaselineModel b;
  b.ranking = c.meta.at("ranking").get<std::vector<std::size_t>>();
  b.counts = c.meta.at("counts").get<std::vector<std::size_t>>();
  return b;
}

Ranking rank_scores(std::span<const double> scores) {
  Ranking r;
  r.labels.resize(scores.size());
  std::iota(r.labels.begin(), r.labels.end(), 0);
  std::stable_sort(r.labels.begin(), r.labels.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores.reserve(scores.size());
  for (auto l : r.labels) r.scores.push_back(scores[l]);
  return r;
}

Ranking predict_ranked(const MlpModel& model, const Vector& embedding) {
  Matrix row = embedding.transpose();
  const Matrix probs = model.probabilities(row);
  return rank_scores({probs.data(), static_cast<std::size_t>(probs.cols())});
}

std::vector<Ranking> predict_ranked(const MlpModel& model, const Matrix& embeddings) {
  const Matrix probs = model.probabilities(embeddings);
  std::vector<Ranking> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    out.push_back(rank_scores({probs.row(i).data(), static_cast<std::size_t>(probs.cols())}));
  return out;
}

Ranking predict_ranked(const BaselineModel& model) {
  Ranking r;
  r.labels = model.ranking;
  const double total = static_cast<double>(std::accumulate(model.counts.begin(), model.counts.end(), std::size_t{0}));
  for (auto l : r.labels) r.scores.push_back(total == 0 ? 0.0 : static_cast<double>(model.counts[l]) / total);
  return r;
}

}  // namespace notesplit
