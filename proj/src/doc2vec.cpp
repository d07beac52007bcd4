#include "notesplit/doc2vec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "notesplit/error.hpp"
#include "notesplit/random.hpp"

namespace notesplit {

namespace detail {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

double window_loss_gradient(std::span<const double* const> inputs, std::span<const double* const> outputs,
                            std::size_t dim, double* input_grad, double* output_grad, double* hidden) {
  const double scale = 1.0 / static_cast<double>(inputs.size());
  std::fill(hidden, hidden + dim, 0.0);
  for (const double* in : inputs)
    for (std::size_t k = 0; k < dim; ++k) hidden[k] += in[k];
  for (std::size_t k = 0; k < dim; ++k) hidden[k] *= scale;

  std::fill(input_grad, input_grad + dim, 0.0);
  double loss = 0.0;
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const double* out = outputs[j];
    double dot = 0.0;
    for (std::size_t k = 0; k < dim; ++k) dot += out[k] * hidden[k];
    const double label = j == 0 ? 1.0 : 0.0;
    loss += j == 0 ? softplus(-dot) : softplus(dot);
    const double g = sigmoid(dot) - label;
    double* og = output_grad + j * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      input_grad[k] += g * out[k];
      og[k] = g * hidden[k];
    }
  }
  for (std::size_t k = 0; k < dim; ++k) input_grad[k] *= scale;
  return loss;
}

}  // namespace detail

namespace {

// Scratch buffers and the update step shared by training and inference.
struct WindowTrainer {
  std::size_t dim;
  std::vector<const double*> inputs;
  std::vector<double*> input_rows;
  std::vector<const double*> outputs;
  std::vector<double*> output_rows;
  std::vector<double> input_grad, output_grad, hidden;

  explicit WindowTrainer(std::size_t d) : dim(d), input_grad(d), hidden(d) {}

  void clear() {
    inputs.clear();
    input_rows.clear();
    outputs.clear();
    output_rows.clear();
  }

  void add_input(double* row) {
    inputs.push_back(row);
    input_rows.push_back(row);
  }

  void add_output(double* row) {
    outputs.push_back(row);
    output_rows.push_back(row);
  }

  // Applies one SGD step; with update_words false only the first input row
  // (the document vector) moves.
  double step(double alpha, bool update_words) {
    output_grad.resize(outputs.size() * dim);
    const double loss =
        detail::window_loss_gradient(inputs, outputs, dim, input_grad.data(), output_grad.data(), hidden.data());
    if (update_words) {
      for (std::size_t j = 0; j < output_rows.size(); ++j)
        for (std::size_t k = 0; k < dim; ++k) output_rows[j][k] -= alpha * output_grad[j * dim + k];
    }
    const std::size_t n_update = update_words ? input_rows.size() : 1;
    for (std::size_t i = 0; i < n_update; ++i)
      for (std::size_t k = 0; k < dim; ++k) input_rows[i][k] -= alpha * input_grad[k];
    return loss;
  }
};

double decayed(double alpha, double min_alpha, double progress) {
  return std::max(min_alpha, alpha - (alpha - min_alpha) * progress);
}

}  // namespace

std::optional<std::size_t> Doc2VecModel::word_index(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Doc2VecModel::build_noise_table() {
  noise_cdf_.assign(words_.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    total += std::pow(static_cast<double>(word_counts_[i]), 0.75);
    noise_cdf_[i] = total;
  }
  for (auto& c : noise_cdf_) c /= total;
  index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
}

std::size_t Doc2VecModel::sample_noise(double u) const {
  const auto it = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - noise_cdf_.begin()), noise_cdf_.size() - 1);
}

namespace {

// Fills the trainer for the window centred at `pos` of `ids`.
void load_window(WindowTrainer& trainer, double* doc_row, Matrix& words, Matrix& outputs,
                 const std::vector<std::size_t>& ids, std::size_t pos, std::size_t window, std::size_t negatives,
                 Rng& rng, const Doc2VecModel& model) {
  trainer.clear();
  trainer.add_input(doc_row);
  const std::size_t lo = pos >= window ? pos - window : 0;
  const std::size_t hi = std::min(ids.size(), pos + window + 1);
  for (std::size_t c = lo; c < hi; ++c)
    if (c != pos) trainer.add_input(words.row(static_cast<Eigen::Index>(ids[c])).data());
  const std::size_t target = ids[pos];
  trainer.add_output(outputs.row(static_cast<Eigen::Index>(target)).data());
  for (std::size_t n = 0; n < negatives; ++n) {
    const std::size_t noise = model.sample_noise(rng.uniform());
    if (noise == target) continue;
    trainer.add_output(outputs.row(static_cast<Eigen::Index>(noise)).data());
  }
}

}  // namespace

Inferred Doc2VecModel::infer(const std::vector<std::string>& tokens, std::size_t steps, std::uint64_t seed) const {
  const std::size_t d = dim();
  Inferred result;
  result.vector = Vector::Zero(static_cast<Eigen::Index>(d));
  std::vector<std::size_t> ids;
  for (const auto& t : tokens)
    if (auto id = word_index(t)) ids.push_back(*id);
  if (ids.empty()) {
    result.all_out_of_vocabulary = true;
    return result;
  }

  Rng rng(seed);
  Matrix doc(1, static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) doc(0, static_cast<Eigen::Index>(k)) = (rng.uniform() - 0.5) / static_cast<double>(d);

  // Word and output rows are only read: step() is called with update_words false.
  auto& words = const_cast<Matrix&>(word_vectors_);
  auto& outputs = const_cast<Matrix&>(output_vectors_);
  WindowTrainer trainer(d);
  const double total = static_cast<double>(steps * ids.size());
  std::size_t done = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
      const double alpha = decayed(config_.alpha, config_.min_alpha, static_cast<double>(done++) / total);
      load_window(trainer, doc.data(), words, outputs, ids, pos, config_.window, config_.negatives, rng, *this);
      trainer.step(alpha, false);
    }
  }
  result.vector = doc.row(0).transpose();
  return result;
}

ModelContainer Doc2VecModel::to_container() const {
  ModelContainer c;
  c.kind = "doc2vec";
  c.meta = {{"dim", dim()},
            {"window", config_.window},
            {"negatives", config_.negatives},
            {"epochs", config_.epochs},
            {"min_count", config_.min_count},
            {"alpha", config_.alpha},
            {"min_alpha", config_.min_alpha},
            {"seed", config_.seed},
            {"vocab", words_},
            {"word_counts", word_counts_},
            {"epoch_loss", epoch_loss_}};
  c.matrices["word_vectors"] = word_vectors_;
  c.matrices["output_vectors"] = output_vectors_;
  c.matrices["doc_vectors"] = doc_vectors_;
  return c;
}

Doc2VecModel Doc2VecModel::from_container(const ModelContainer& c) {
  if (c.kind != "doc2vec") throw InvalidArgument("expected a doc2vec model, got '" + c.kind + "'");
  Doc2VecModel m;
  m.config_.dim = c.meta.at("dim").get<std::size_t>();
  m.config_.window = c.meta.at("window").get<std::size_t>();
  m.config_.negatives = c.meta.at("negatives").get<std::size_t>();
  m.config_.epochs = c.meta.at("epochs").get<std::size_t>();
  m.config_.min_count = c.meta.at("min_count").get<std::size_t>();
  m.config_.alpha = c.meta.at("alpha").get<double>();
  m.config_.min_alpha = c.meta.at("min_alpha").get<double>();
  m.config_.seed = c.meta.at("seed").get<std::uint64_t>();
  m.words_ = c.meta.at("vocab").get<std::vector<std::string>>();
  m.word_counts_ = c.meta.at("word_counts").get<std::vector<std::size_t>>();
  m.epoch_loss_ = c.meta.at("epoch_loss").get<std::vector<double>>();
  m.word_vectors_ = c.matrix("word_vectors");
  m.output_vectors_ = c.matrix("output_vectors");
  m.doc_vectors_ = c.matrix("doc_vectors");
  m.build_noise_table();
  return m;
}

Doc2VecModel fit_doc2vec(const std::vector<TaggedTokens>& instances, std::size_t n_docs, const Doc2VecConfig& config) {
  if (config.dim == 0) throw InvalidArgument("fit_doc2vec: dim must be positive");
  std::vector<std::size_t> per_doc(n_docs, 0);
  std::map<std::string, std::size_t> counts;
  for (const auto& inst : instances) {
    if (inst.doc_id >= n_docs) throw InvalidArgument("fit_doc2vec: doc id out of range");
    ++per_doc[inst.doc_id];
    for (const auto& t : inst.tokens) ++counts[t];
  }
  for (std::size_t d = 0; d < n_docs; ++d)
    if (per_doc[d] == 0) throw InvalidArgument("fit_doc2vec: doc id " + std::to_string(d) + " has no instances");

  Doc2VecModel model;
  model.config_ = config;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [word, count] : counts)
    if (count >= config.min_count) kept.emplace_back(word, count);
  if (kept.empty()) throw InvalidArgument("fit_doc2vec: vocabulary is empty after min-count pruning");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [word, count] : kept) {
    model.words_.push_back(word);
    model.word_counts_.push_back(count);
  }
  model.build_noise_table();

  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto v = static_cast<Eigen::Index>(model.words_.size());
  Rng rng(config.seed);
  auto init = [&](Matrix& m, Eigen::Index rows) {
    m.resize(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index k = 0; k < d; ++k) m(i, k) = (rng.uniform() - 0.5) / static_cast<double>(d);
  };
  init(model.word_vectors_, v);
  init(model.doc_vectors_, static_cast<Eigen::Index>(n_docs));
  model.output_vectors_ = Matrix::Zero(v, d);

  std::vector<std::vector<std::size_t>> encoded(instances.size());
  std::size_t words_per_epoch = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (const auto& t : instances[i].tokens)
      if (auto id = model.word_index(t)) encoded[i].push_back(*id);
    words_per_epoch += encoded[i].size();
  }
  const double total = static_cast<double>(std::max<std::size_t>(1, words_per_epoch * config.epochs));
  std::vector<double> keep(model.words_.size(), 1.0);
  if (config.sample > 0.0) {
    double corpus = 0.0;
    for (auto c : model.word_counts_) corpus += static_cast<double>(c);
    for (std::size_t w = 0; w < keep.size(); ++w) {
      const double f = static_cast<double>(model.word_counts_[w]) / (config.sample * corpus);
      keep[w] = std::min(1.0, (std::sqrt(f) + 1.0) / f);
    }
  }
  std::atomic<std::size_t> processed{0};
  const std::size_t n_threads = std::max<std::size_t>(1, config.threads);

  std::vector<std::size_t> order(instances.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());

    auto run = [&](std::size_t begin, std::size_t end, Rng& local, double& loss, std::size_t& windows) {
      WindowTrainer trainer(config.dim);
      std::vector<std::size_t> ids;
      for (std::size_t o = begin; o < end; ++o) {
        const std::size_t inst = order[o];
        ids.clear();
        for (auto id : encoded[inst])
          if (keep[id] >= 1.0 || local.uniform() < keep[id]) ids.push_back(id);
        double* doc_row = model.doc_vectors_.row(static_cast<Eigen::Index>(instances[inst].doc_id)).data();
        for (std::size_t pos = 0; pos < ids.size(); ++pos) {
          const double alpha = decayed(config.alpha, config.min_alpha, static_cast<double>(processed++) / total);
          load_window(trainer, doc_row, model.word_vectors_, model.output_vectors_, ids, pos, config.window,
                      config.negatives, local, model);
          loss += trainer.step(alpha, true);
          ++windows;
        }
      }
    };

    double loss = 0.0;
    std::size_t windows = 0;
    if (n_threads == 1) {
      run(0, order.size(), rng, loss, windows);
    } else {
      std::vector<double> losses(n_threads, 0.0);
      std::vector<std::size_t> counts_per(n_threads, 0);
      std::vector<Rng> rngs;
      for (std::size_t t = 0; t < n_threads; ++t) rngs.emplace_back(mix_seed(config.seed, epoch * n_threads + t));
      std::vector<std::thread> workers;
      const std::size_t chunk = (order.size() + n_threads - 1) / n_threads;
      for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t begin = std::min(order.size(), t * chunk);
        const std::size_t end = std::min(order.size(), begin + chunk);
        workers.emplace_back([&, t, begin, end] { run(begin, end, rngs[t], losses[t], counts_per[t]); });
      }
      for (auto& w : workers) w.join();
      for (std::size_t t = 0; t < n_threads; ++t) {
        loss += losses[t];
        windows += counts_per[t];
      }
    }
    model.epoch_loss_.push_back(windows == 0 ? 0.0 : loss / static_cast<double>(windows));
  }
  return model;
}

}  // namespace notesplit
