#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "notesplit/container.hpp"
#include "notesplit/linalg.hpp"

namespace notesplit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over one flat parameter block.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t hidden = 64;
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
};

/// One hidden ReLU layer followed by a softmax output layer.
struct MlpModel {
  Matrix w1;  // d × h
  Vector b1;
  Matrix w2;  // h × C
  Vector b2;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t n_classes() const { return static_cast<std::size_t>(w2.cols()); }
  bool finite() const;

  /// Row-wise softmax probabilities, n × C.
  Matrix probabilities(const Matrix& inputs) const;

  ModelContainer to_container() const;
  static MlpModel from_container(const ModelContainer& container);
};

/// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_mlp(std::size_t input_dim, std::size_t hidden, std::size_t n_classes, std::uint64_t seed);

/// Mean softmax cross-entropy over the rows of `inputs`; when `grad` is not
/// null it receives the gradient with the model's shapes.
double mlp_loss(const MlpModel& model, const Matrix& inputs, std::span<const std::size_t> labels,
                MlpModel* grad = nullptr);

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

/// Mini-batch Adam on softmax cross-entropy. Throws InvalidArgument on a
/// dimension mismatch and Error when the loss becomes non-finite.
TrainResult train_mlp(const Matrix& inputs, std::span<const std::size_t> labels, std::size_t n_classes,
                      const TrainConfig& config);

/// Most-frequent-label classifier.
struct BaselineModel {
  std::vector<std::size_t> ranking;  // labels by descending train count, ties by id
  std::vector<std::size_t> counts;   // train count per label

  static BaselineModel fit(std::span<const std::size_t> labels, std::size_t n_classes);

  ModelContainer to_container() const;
  static BaselineModel from_container(const ModelContainer& container);
};

struct Ranking {
  std::vector<std::size_t> labels;
  std::vector<double> scores;
};

/// Labels by descending probability, ties by ascending id.
Ranking rank_scores(std::span<const double> scores);
Ranking predict_ranked(const MlpModel& model, const Vector& embedding);
std::vector<Ranking> predict_ranked(const MlpModel& model, const Matrix& embeddings);
/// Ignores the input; scores are train frequencies.
Ranking predict_ranked(const BaselineModel& model);

}  // namespace notesplit
