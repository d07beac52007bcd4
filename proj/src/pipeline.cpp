#include "notesplit/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "notesplit/container.hpp"
#include "notesplit/evaluation.hpp"
#include "notesplit/labeler.hpp"
#include "notesplit/segmenter.hpp"
#include "notesplit/tokenizer.hpp"

namespace notesplit {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty())
    throw InvalidArgument("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

struct KeySpec {
  ConfigKey key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T, typename Access>
KeySpec entry(const char* name, const char* help, Access access) {
  KeySpec spec;
  spec.key = {name, help};
  spec.get = [access](const PipelineConfig& c) -> std::string {
    const T& v = access(const_cast<PipelineConfig&>(c));
    if constexpr (std::is_same_v<T, std::string>) return v;
    else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else return format_number(v);
  };
  spec.set = [access, name](PipelineConfig& c, const std::string& value) {
    T& v = access(c);
    if constexpr (std::is_same_v<T, std::string>) {
      if (value.find_first_of("#\n") != std::string::npos)
        throw InvalidArgument(std::string("config key '") + name + "': value may not contain '#' or newlines");
      v = value;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (value == "true") v = true;
      else if (value == "false") v = false;
      else throw InvalidArgument(std::string("config key '") + name + "': expected true or false");
    } else {
      v = parse_number<T>(name, value);
    }
  };
  return spec;
}

#define NS_KEY(type, name, help, expr) entry<type>(name, help, [](PipelineConfig& c) -> type& { return expr; })

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> table = {
      NS_KEY(std::uint64_t, "seed", "master seed; every module seed is derived from it", c.seed),
      NS_KEY(std::size_t, "generator.n_records", "synthetic records", c.generator.n_records),
      NS_KEY(std::size_t, "generator.title_vocab_size", "distinct synthetic titles", c.generator.title_vocab_size),
      NS_KEY(double, "generator.zipf_exponent", "title frequency exponent", c.generator.zipf_exponent),
      NS_KEY(std::size_t, "generator.segments_min", "segments per record, lower bound", c.generator.segments_min),
      NS_KEY(std::size_t, "generator.segments_max", "segments per record, upper bound", c.generator.segments_max),
      NS_KEY(double, "generator.p_title_only_line", "titled segment puts its title on its own line",
             c.generator.p_title_only_line),
      NS_KEY(double, "generator.p_continuation_dash", "continuation line starts with a dash",
             c.generator.p_continuation_dash),
      NS_KEY(double, "generator.p_untitled_segment", "segment without a title", c.generator.p_untitled_segment),
      NS_KEY(std::size_t, "generator.planted_groups", "title groups sharing body words (0 = none)",
             c.generator.planted_groups),
      NS_KEY(double, "generator.p_title_word", "body word from the title's own pool", c.generator.p_title_word),
      NS_KEY(double, "generator.p_group_word", "body word from the group pool", c.generator.p_group_word),
      NS_KEY(std::string, "generator.accented_letters", "extra letters of the pseudo-word alphabet",
             c.generator.accented_letters),
      NS_KEY(std::string, "corpus.input", "corpus file to ingest; empty generates a synthetic corpus",
             c.corpus_input),
      NS_KEY(std::string, "corpus.format", "jsonl or csv", c.corpus_format),
      NS_KEY(std::size_t, "label.min_count", "keep titles seen at least this often", c.label_min_count),
      NS_KEY(std::size_t, "label.max_words", "keep titles with at most this many words", c.label_max_words),
      NS_KEY(double, "split.test_fraction", "stratified test share", c.split_test_fraction),
      NS_KEY(std::string, "embed.method", "segment embedding: lsa or doc2vec", c.embed_method),
      NS_KEY(std::size_t, "embed.dim", "embedding dimension", c.embed_dim),
      NS_KEY(std::size_t, "lsa.oversampling", "randomized SVD oversampling", c.lsa_oversampling),
      NS_KEY(std::size_t, "lsa.power_iterations", "randomized SVD power iterations", c.lsa_power_iterations),
      NS_KEY(std::size_t, "doc2vec.window", "context radius", c.doc2vec.window),
      NS_KEY(std::size_t, "doc2vec.negatives", "negative samples per target", c.doc2vec.negatives),
      NS_KEY(std::size_t, "doc2vec.epochs", "training epochs", c.doc2vec.epochs),
      NS_KEY(std::size_t, "doc2vec.min_count", "minimum word frequency", c.doc2vec.min_count),
      NS_KEY(double, "doc2vec.alpha", "initial learning rate", c.doc2vec.alpha),
      NS_KEY(double, "doc2vec.min_alpha", "final learning rate", c.doc2vec.min_alpha),
      NS_KEY(double, "doc2vec.sample", "frequent-word downsampling threshold; 0 disables", c.doc2vec.sample),
      NS_KEY(std::size_t, "doc2vec.threads", "worker threads; above 1 training is not reproducible",
             c.doc2vec.threads),
      NS_KEY(std::size_t, "doc2vec.infer_steps", "passes when inferring a segment vector", c.doc2vec_infer_steps),
      NS_KEY(std::size_t, "mlp.hidden", "hidden units", c.mlp.hidden),
      NS_KEY(std::size_t, "mlp.epochs", "training epochs", c.mlp.epochs),
      NS_KEY(std::size_t, "mlp.batch_size", "mini-batch size", c.mlp.batch_size),
      NS_KEY(double, "mlp.learning_rate", "Adam step size", c.mlp.adam.learning_rate),
      NS_KEY(double, "mlp.beta1", "Adam first-moment decay", c.mlp.adam.beta1),
      NS_KEY(double, "mlp.beta2", "Adam second-moment decay", c.mlp.adam.beta2),
      NS_KEY(double, "mlp.epsilon", "Adam denominator offset", c.mlp.adam.epsilon),
      NS_KEY(std::size_t, "evaluate.bucket", "classes per F1 bucket", c.evaluate_bucket),
      NS_KEY(std::size_t, "evaluate.top_k", "labels kept per prediction row", c.evaluate_top_k),
      NS_KEY(std::string, "cluster.method", "kmeans, agglomerative or dbscan", c.cluster_method),
      NS_KEY(std::size_t, "cluster.k", "clusters (kmeans, agglomerative)", c.cluster_k),
      NS_KEY(std::size_t, "cluster.max_iter", "kmeans Lloyd iterations", c.cluster_max_iter),
      NS_KEY(std::size_t, "cluster.n_init", "kmeans restarts", c.cluster_n_init),
      NS_KEY(bool, "cluster.normalize", "unit-normalize vectors before kmeans", c.cluster_normalize),
      NS_KEY(std::string, "cluster.linkage", "average, single or complete", c.cluster_linkage),
      NS_KEY(std::string, "cluster.metric", "cosine or euclidean (agglomerative, dbscan)", c.cluster_metric),
      NS_KEY(double, "cluster.eps", "dbscan radius; required for dbscan", c.cluster_eps),
      NS_KEY(std::size_t, "cluster.min_pts", "dbscan core size; required for dbscan", c.cluster_min_pts),
      NS_KEY(std::string, "serve.host", "bind address", c.serve_host),
      NS_KEY(int, "serve.port", "listen port", c.serve_port),
      NS_KEY(std::string, "serve.ontology", "ontology CSV (code,display)", c.serve_ontology),
      NS_KEY(std::string, "serve.static_dir", "frontend assets mounted at /", c.serve_static_dir),
      NS_KEY(std::string, "serve.event_log", "assignment log; empty uses the run directory", c.serve_event_log),
  };
  return table;
}

#undef NS_KEY

const KeySpec& find_spec(const std::string& key) {
  for (const auto& s : specs())
    if (s.key.name == key) return s;
  throw InvalidArgument("unknown config key '" + key + "'");
}

void check_probability(const char* name, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument(std::string(name) + " must lie strictly between 0 and 1");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw IoError("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* stage_manifest(Stage stage) {
  switch (stage) {
    case Stage::generate: return "generate.manifest.json";
    case Stage::segment: return "segment.manifest.json";
    case Stage::label: return "label.manifest.json";
    case Stage::embed: return "embed.manifest.json";
    case Stage::train: return "train.manifest.json";
    case Stage::evaluate: return "evaluate.manifest.json";
    case Stage::cluster: return "cluster.manifest.json";
    case Stage::export_projector: return "export-projector.manifest.json";
  }
  return "";
}

std::vector<std::size_t> rows_where(const std::vector<LabeledInstance>& data,
                                    const std::function<bool(const LabeledInstance&)>& keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep(data[i])) rows.push_back(i);
  return rows;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

ModelContainer title_space_container(const TitleSpace& space) {
  ModelContainer c;
  c.kind = "titlespace";
  c.meta["titles"] = space.titles;
  c.meta["counts"] = space.counts;
  c.matrices["vectors"] = space.vectors;
  return c;
}

}  // namespace

void PipelineConfig::validate() const {
  generator.validate();
  parse_corpus_format(corpus_format);
  if (label_min_count == 0) throw InvalidArgument("label.min_count must be at least 1");
  if (label_max_words == 0) throw InvalidArgument("label.max_words must be at least 1");
  check_probability("split.test_fraction", split_test_fraction);
  if (embed_method != "lsa" && embed_method != "doc2vec") throw InvalidArgument("embed.method must be lsa or doc2vec");
  if (embed_dim == 0) throw InvalidArgument("embed.dim must be at least 1");
  if (doc2vec.window == 0 || doc2vec.epochs == 0 || doc2vec.threads == 0 || doc2vec.min_count == 0)
    throw InvalidArgument("doc2vec.window, epochs, min_count and threads must be at least 1");
  if (!(doc2vec.alpha > 0.0) || !(doc2vec.min_alpha >= 0.0) || doc2vec.min_alpha > doc2vec.alpha)
    throw InvalidArgument("doc2vec learning rates must satisfy 0 <= min_alpha <= alpha, alpha > 0");
  if (mlp.hidden == 0 || mlp.epochs == 0 || mlp.batch_size == 0)
    throw InvalidArgument("mlp.hidden, epochs and batch_size must be at least 1");
  if (!(mlp.adam.learning_rate > 0.0) || !(mlp.adam.epsilon > 0.0))
    throw InvalidArgument("mlp.learning_rate and mlp.epsilon must be positive");
  if (!(mlp.adam.beta1 >= 0.0 && mlp.adam.beta1 < 1.0) || !(mlp.adam.beta2 >= 0.0 && mlp.adam.beta2 < 1.0))
    throw InvalidArgument("mlp.beta1 and mlp.beta2 must lie in [0, 1)");
  if (evaluate_bucket == 0 || evaluate_top_k == 0) throw InvalidArgument("evaluate.bucket and top_k must be positive");
  const auto method = parse_cluster_method(cluster_method);
  parse_linkage(cluster_linkage);
  parse_metric(cluster_metric);
  if (method != ClusterMethod::dbscan && cluster_k == 0) throw InvalidArgument("cluster.k must be at least 1");
  if (method == ClusterMethod::dbscan && (!(cluster_eps > 0.0) || cluster_min_pts == 0))
    throw InvalidArgument("dbscan needs cluster.eps > 0 and cluster.min_pts >= 1");
  if (cluster_n_init == 0 || cluster_max_iter == 0)
    throw InvalidArgument("cluster.n_init and cluster.max_iter must be at least 1");
  if (serve_port < 0 || serve_port > 65535) throw InvalidArgument("serve.port out of range");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& s : specs()) out.push_back(s.key);
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  find_spec(key).set(config, value);
}

std::string get_config_value(const PipelineConfig& config, const std::string& key) {
  return find_spec(key).get(config);
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(line_no, "repeated key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string render_config(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& s : specs()) {
    const auto dot = s.key.name.find('.');
    const std::string prefix = dot == std::string::npos ? "" : s.key.name.substr(0, dot);
    if (prefix != section && !out.empty()) out += '\n';
    section = prefix;
    out += "# " + s.key.help + "\n";
    out += s.key.name + " = " + s.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const PipelineConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : specs()) {
    if (s.key.name.rfind("serve.", 0) == 0) continue;
    const std::string line = s.key.name + "=" + s.get(config) + "\n";
    for (unsigned char ch : line) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::generate: return "generate";
    case Stage::segment: return "segment";
    case Stage::label: return "label";
    case Stage::embed: return "embed";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::cluster: return "cluster";
    case Stage::export_projector: return "export-projector";
  }
  return "?";
}

Pipeline::Pipeline(PipelineConfig config, std::filesystem::path run_dir, std::ostream& log,
                   bool allow_config_mismatch)
    : config_(std::move(config)), run_dir_(std::move(run_dir)), log_(log),
      allow_config_mismatch_(allow_config_mismatch) {
  config_.validate();
  hash_ = config_hash(config_);
}

std::filesystem::path Pipeline::default_run_dir(const PipelineConfig& config, const std::filesystem::path& root) {
  return root / config_hash(config);
}

void Pipeline::require(Stage stage) const {
  const auto path = artifact(stage_manifest(stage));
  if (!std::filesystem::exists(path)) throw MissingStage(stage);
  const auto manifest = json::parse(read_text(path));
  const auto recorded = manifest.value("config_hash", std::string{});
  if (recorded != hash_) {
    const std::string msg = std::string("stage '") + to_string(stage) + "' was produced with config " + recorded +
                            ", current config is " + hash_;
    if (!allow_config_mismatch_) throw Error(msg + " (pass --allow-config-mismatch to proceed)");
    log_ << "warning: " << msg << "\n";
  }
}

void Pipeline::finish(Stage stage, const std::vector<std::string>& artifacts) const {
  write_text(artifact("config.resolved"), render_config(config_));
  json manifest = {{"stage", to_string(stage)}, {"config_hash", hash_}, {"artifacts", artifacts}};
  write_text(artifact(stage_manifest(stage)), manifest.dump(2) + "\n");
  log_ << to_string(stage) << ": wrote";
  for (const auto& a : artifacts) log_ << ' ' << a;
  log_ << "\n";
}

void Pipeline::run(Stage stage) {
  std::filesystem::create_directories(run_dir_);
  switch (stage) {
    case Stage::generate: generate(); break;
    case Stage::segment: segment(); break;
    case Stage::label: label(); break;
    case Stage::embed: embed(); break;
    case Stage::train: train(); break;
    case Stage::evaluate: evaluate(); break;
    case Stage::cluster: cluster(); break;
    case Stage::export_projector: export_projector(); break;
  }
}

void Pipeline::run_all() {
  for (Stage s : {Stage::generate, Stage::segment, Stage::label, Stage::embed, Stage::train, Stage::evaluate,
                  Stage::cluster, Stage::export_projector})
    run(s);
}

void Pipeline::generate() {
  std::vector<std::string> written = {"corpus.jsonl"};
  if (config_.corpus_input.empty()) {
    GeneratorConfig gen = config_.generator;
    gen.seed = config_.generator_seed();
    const auto synthetic = generate_synthetic(gen);
    save_corpus(synthetic.corpus, artifact("corpus.jsonl"), CorpusFormat::jsonl);
    save_ground_truth(synthetic.truth, artifact("truth.jsonl"));
    written.push_back("truth.jsonl");
  } else {
    const auto corpus = load_corpus(config_.corpus_input, parse_corpus_format(config_.corpus_format));
    save_corpus(corpus, artifact("corpus.jsonl"), CorpusFormat::jsonl);
    std::filesystem::remove(artifact("truth.jsonl"));
  }
  finish(Stage::generate, written);
}

void Pipeline::segment() {
  require(Stage::generate);
  const auto corpus = load_corpus(artifact("corpus.jsonl"), CorpusFormat::jsonl);
  const auto segments = segment_corpus(corpus);
  save_segments(segments, artifact("segments.jsonl"));
  std::vector<std::string> written = {"segments.jsonl"};
  if (std::filesystem::exists(artifact("truth.jsonl"))) {
    const auto score = score_segmentation(segments, load_ground_truth(artifact("truth.jsonl")));
    const json j = {{"true_positives", score.true_positives}, {"predicted", score.predicted},
                    {"expected", score.expected},           {"precision", score.precision},
                    {"recall", score.recall},               {"f1", score.f1}};
    write_text(artifact("segmentation_score.json"), j.dump(2) + "\n");
    written.push_back("segmentation_score.json");
  }
  finish(Stage::segment, written);
}

void Pipeline::label() {
  require(Stage::segment);
  const auto segments = load_segments(artifact("segments.jsonl"));
  std::vector<std::string> titles;
  for (const auto& s : segments)
    if (auto raw = extract_title(s)) titles.push_back(normalize_title(raw->text));
  const auto vocab = build_vocabulary(titles, config_.label_min_count, config_.label_max_words);
  const auto dataset = build_dataset(segments, vocab, config_.split_test_fraction, config_.split_seed());
  save_vocabulary(vocab, artifact("vocabulary.csv"));
  save_dataset(dataset.instances, artifact("dataset.jsonl"));

  std::size_t train = 0, test = 0;
  for (const auto& inst : dataset.instances)
    if (inst.view == View::with_title) (inst.fold == Fold::train ? train : test) += 1;
  json small = json::array();
  for (auto id : dataset.train_only_labels) small.push_back(vocab.labels[id]);
  const json report = {{"segments", segments.size()},
                       {"titled_segments", vocab.labeled_segments},
                       {"covered_segments", vocab.covered_segments},
                       {"coverage", vocab.coverage()},
                       {"labels", vocab.size()},
                       {"train_segments", train},
                       {"test_segments", test},
                       {"train_only_labels", small}};
  write_text(artifact("label_report.json"), report.dump(2) + "\n");
  if (vocab.size() == 0) log_ << "warning: label vocabulary is empty\n";
  for (const auto& name : small) log_ << "warning: label '" << name.get<std::string>() << "' too small to split\n";
  finish(Stage::label, {"vocabulary.csv", "dataset.jsonl", "label_report.json"});
}

Matrix Pipeline::embed_texts(const std::vector<std::string>& texts) const {
  if (config_.embed_method == "lsa") {
    return LsaModel::from_container(load_container(artifact("lsa.bin"))).embed(texts);
  }
  const auto model = Doc2VecModel::from_container(load_container(artifact("doc2vec.bin")));
  const Tokenizer tokenize;
  Matrix out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(model.dim()));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto inferred = model.infer(tokenize(texts[i]), config_.doc2vec_infer_steps, mix_seed(config_.infer_seed(), i));
    out.row(static_cast<Eigen::Index>(i)) = inferred.vector.transpose();
  }
  return out;
}

void Pipeline::embed() {
  require(Stage::label);
  const auto vocab = load_vocabulary(artifact("vocabulary.csv"));
  const auto data = load_dataset(artifact("dataset.jsonl"));
  if (vocab.size() == 0) throw Error("embed: the label vocabulary is empty");
  std::vector<std::string> train_texts, all_texts;
  std::vector<TaggedTokens> tagged;
  const Tokenizer tokenize;
  for (const auto& inst : data) {
    all_texts.push_back(inst.text);
    if (inst.fold != Fold::train) continue;
    train_texts.push_back(inst.text);
    tagged.push_back({inst.label_id, tokenize(inst.text)});
  }
  std::vector<std::string> written;

  Doc2VecConfig d2v = config_.doc2vec;
  d2v.dim = config_.embed_dim;
  d2v.seed = config_.doc2vec_seed();
  const auto doc2vec = fit_doc2vec(tagged, vocab.size(), d2v);
  save_container(doc2vec.to_container(), artifact("doc2vec.bin"));
  written.push_back("doc2vec.bin");

  if (config_.embed_method == "lsa") {
    auto fit = fit_lsa(train_texts, {config_.embed_dim, config_.lsa_oversampling, config_.lsa_power_iterations,
                                     config_.lsa_seed()});
    for (const auto& w : fit.warnings) log_ << "warning: " << w << "\n";
    save_container(fit.model.to_container(), artifact("lsa.bin"));
    written.push_back("lsa.bin");
  }

  ModelContainer embeddings;
  embeddings.kind = "embeddings";
  embeddings.meta["method"] = config_.embed_method;
  embeddings.matrices["embeddings"] = embed_texts(all_texts);
  save_container(embeddings, artifact("embeddings.bin"));
  written.push_back("embeddings.bin");

  TitleSpace space{vocab.labels, doc2vec.doc_vectors(), vocab.counts};
  save_container(title_space_container(space), artifact("titlespace.bin"));
  written.push_back("titlespace.bin");
  finish(Stage::embed, written);
}

void Pipeline::train() {
  require(Stage::embed);
  const auto vocab = load_vocabulary(artifact("vocabulary.csv"));
  const auto data = load_dataset(artifact("dataset.jsonl"));
  const Matrix all = load_container(artifact("embeddings.bin")).matrix("embeddings");
  if (static_cast<std::size_t>(all.rows()) != data.size())
    throw Error("embeddings.bin does not match dataset.jsonl; rerun embed");
  const auto rows = rows_where(data, [](const LabeledInstance& i) { return i.fold == Fold::train; });
  std::vector<std::size_t> labels;
  for (auto r : rows) labels.push_back(data[r].label_id);

  TrainConfig tc = config_.mlp;
  tc.seed = config_.mlp_seed();
  auto result = train_mlp(take_rows(all, rows), labels, vocab.size(), tc);
  const auto baseline = BaselineModel::fit(labels, vocab.size());
  save_container(result.model.to_container(), artifact("mlp.bin"));
  save_container(baseline.to_container(), artifact("baseline.bin"));
  for (const auto& w : result.warnings) log_ << "warning: " << w << "\n";
  const json log = {{"examples", rows.size()}, {"epoch_loss", result.epoch_loss}, {"warnings", result.warnings}};
  write_text(artifact("train_log.json"), log.dump(2) + "\n");
  finish(Stage::train, {"mlp.bin", "baseline.bin", "train_log.json"});
}

void Pipeline::evaluate() {
  require(Stage::train);
  const auto data = load_dataset(artifact("dataset.jsonl"));
  const Matrix all = load_container(artifact("embeddings.bin")).matrix("embeddings");
  const auto mlp = MlpModel::from_container(load_container(artifact("mlp.bin")));
  const auto baseline = BaselineModel::from_container(load_container(artifact("baseline.bin")));
  const auto test_rows = rows_where(data, [](const LabeledInstance& i) { return i.fold == Fold::test; });
  if (test_rows.empty()) throw Error("evaluate: the test fold is empty");

  const auto mlp_rankings = predict_ranked(mlp, take_rows(all, test_rows));
  const auto baseline_ranking = predict_ranked(baseline);

  json report = {{"config_hash", hash_}};
  std::string buckets = "model,view,bucket,first_rank,size,min,q1,median,q3,max\n";
  const std::pair<const char*, std::function<bool(View)>> views[] = {
      {"with_title", [](View v) { return v == View::with_title; }},
      {"without_title", [](View v) { return v == View::without_title; }},
      {"joint", [](View) { return true; }}};
  for (const char* model : {"mlp", "baseline"}) {
    for (const auto& [view_name, keep] : views) {
      std::vector<std::vector<std::size_t>> ranked;
      std::vector<std::size_t> truth;
      for (std::size_t k = 0; k < test_rows.size(); ++k) {
        const auto& inst = data[test_rows[k]];
        if (!keep(inst.view)) continue;
        truth.push_back(inst.label_id);
        ranked.push_back(std::string(model) == "mlp" ? mlp_rankings[k].labels : baseline_ranking.labels);
      }
      if (truth.empty()) continue;
      const auto r = notesplit::evaluate(ranked, truth, baseline.counts, config_.evaluate_bucket);
      report["models"][model][view_name] = to_json(r);
      buckets += bucket_csv_rows(r.buckets, std::string(model) + "," + view_name + ",");
    }
  }
  write_text(artifact("report.json"), report.dump(2) + "\n");
  write_text(artifact("buckets.csv"), buckets);

  std::string lines;
  const auto k = std::min(config_.evaluate_top_k, mlp.n_classes());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const auto& inst = data[test_rows[i]];
    const auto& r = mlp_rankings[i];
    json row = {{"record_id", inst.record_id},
                {"index", inst.index},
                {"view", to_string(inst.view)},
                {"label_id", inst.label_id},
                {"ranked_label_ids", std::vector<std::size_t>(r.labels.begin(), r.labels.begin() + k)},
                {"scores", std::vector<double>(r.scores.begin(), r.scores.begin() + k)}};
    lines += row.dump() + "\n";
  }
  write_text(artifact("predictions.jsonl"), lines);
  finish(Stage::evaluate, {"report.json", "buckets.csv", "predictions.jsonl"});
}

TitleSpace Pipeline::title_space() const {
  require(Stage::embed);
  const auto c = load_container(artifact("titlespace.bin"));
  TitleSpace space;
  space.titles = c.meta.at("titles").get<std::vector<std::string>>();
  space.counts = c.meta.at("counts").get<std::vector<std::size_t>>();
  space.vectors = c.matrix("vectors");
  space.validate();
  return space;
}

std::filesystem::path Pipeline::event_log_path() const {
  return config_.serve_event_log.empty() ? artifact("mapping_events.jsonl")
                                         : std::filesystem::path(config_.serve_event_log);
}

void Pipeline::cluster() {
  const auto space = title_space();
  const auto method = parse_cluster_method(config_.cluster_method);
  Clustering result;
  switch (method) {
    case ClusterMethod::kmeans:
      result = kmeans(space.vectors, {config_.cluster_k, config_.cluster_seed(), config_.cluster_max_iter,
                                      config_.cluster_n_init, config_.cluster_normalize});
      break;
    case ClusterMethod::agglomerative:
      result = agglomerative(space.vectors, config_.cluster_k, parse_linkage(config_.cluster_linkage),
                             parse_metric(config_.cluster_metric));
      break;
    case ClusterMethod::dbscan:
      result = dbscan(space.vectors, config_.cluster_eps, config_.cluster_min_pts, parse_metric(config_.cluster_metric));
      break;
  }
  save_clustering_csv(space, result, artifact("clustering.csv"));
  json summary = {{"method", to_string(result.method)},
                  {"clusters", result.n_clusters()},
                  {"iterations", result.iterations}};
  if (method == ClusterMethod::kmeans) {
    summary["inertia"] = result.inertia;
    summary["inertia_history"] = result.inertia_history;
  }
  write_text(artifact("clustering.json"), summary.dump(2) + "\n");
  finish(Stage::cluster, {"clustering.csv", "clustering.json"});
}

void Pipeline::export_projector() {
  const auto space = title_space();
  std::optional<Clustering> clustering;
  if (std::filesystem::exists(artifact(stage_manifest(Stage::cluster)))) {
    require(Stage::cluster);
    std::ifstream in(artifact("clustering.csv"), std::ios::binary);
    std::string line;
    std::getline(in, line);
    Clustering c;
    // clustering.csv rows follow title-space order: title,cluster,count
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto last = line.rfind(',');
      const auto mid = last == std::string::npos || last == 0 ? std::string::npos : line.rfind(',', last - 1);
      if (mid == std::string::npos) throw IoError("malformed clustering.csv");
      c.assignment.push_back(std::stoi(line.substr(mid + 1, last - mid - 1)));
    }
    if (c.assignment.size() != space.size()) throw Error("clustering.csv does not match the title space; rerun cluster");
    clustering = std::move(c);
  }
  notesplit::export_projector(space, clustering ? &*clustering : nullptr, artifact("vectors.tsv"),
                              artifact("metadata.tsv"));
  finish(Stage::export_projector, {"vectors.tsv", "metadata.tsv"});
}

void Pipeline::predict(const std::filesystem::path& input, const std::filesystem::path& output, std::size_t k) const {
  require(Stage::train);
  const auto data = load_dataset(input);
  std::vector<std::string> texts;
  for (const auto& inst : data) texts.push_back(inst.text);
  const auto mlp = MlpModel::from_container(load_container(artifact("mlp.bin")));
  const auto rankings = predict_ranked(mlp, embed_texts(texts));
  k = std::min(k, mlp.n_classes());
  std::string lines;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = rankings[i];
    json row = {{"record_id", data[i].record_id},
                {"index", data[i].index},
                {"view", to_string(data[i].view)},
                {"ranked_label_ids", std::vector<std::size_t>(r.labels.begin(), r.labels.begin() + k)},
                {"scores", std::vector<double>(r.scores.begin(), r.scores.begin() + k)}};
    lines += row.dump() + "\n";
  }
  write_text(output, lines);
}

}  // namespace notesplit
