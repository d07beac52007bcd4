#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "notesplit/classifier.hpp"
#include "notesplit/corpus.hpp"
#include "notesplit/doc2vec.hpp"
#include "notesplit/error.hpp"
#include "notesplit/lsa.hpp"
#include "notesplit/titlespace.hpp"

namespace notesplit {

/// Every tunable of a run. Module seeds are derived from `seed`.
struct PipelineConfig {
  std::uint64_t seed = 42;
  GeneratorConfig generator;
  std::string corpus_input;  // empty: synthetic corpus
  std::string corpus_format = "jsonl";
  std::size_t label_min_count = 10;
  std::size_t label_max_words = 4;
  double split_test_fraction = 0.2;
  std::string embed_method = "lsa";  // lsa | doc2vec
  std::size_t embed_dim = 50;
  std::size_t lsa_oversampling = 10;
  std::size_t lsa_power_iterations = 7;
  Doc2VecConfig doc2vec;  // dim and seed come from embed_dim and seed
  std::size_t doc2vec_infer_steps = 50;
  TrainConfig mlp;        // seed comes from seed
  std::size_t evaluate_bucket = 100;
  std::size_t evaluate_top_k = 10;
  std::string cluster_method = "kmeans";
  std::size_t cluster_k = 20;
  std::size_t cluster_max_iter = 300;
  std::size_t cluster_n_init = 10;
  bool cluster_normalize = false;
  std::string cluster_linkage = "average";
  std::string cluster_metric = "cosine";
  double cluster_eps = 0.0;  // dbscan needs both eps and min_pts
  std::size_t cluster_min_pts = 0;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::string serve_ontology;
  std::string serve_static_dir;
  std::string serve_event_log;  // empty: <run dir>/mapping_events.jsonl

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;

  std::uint64_t generator_seed() const { return mix_seed(seed, 1); }
  std::uint64_t split_seed() const { return mix_seed(seed, 2); }
  std::uint64_t lsa_seed() const { return mix_seed(seed, 3); }
  std::uint64_t doc2vec_seed() const { return mix_seed(seed, 4); }
  std::uint64_t mlp_seed() const { return mix_seed(seed, 5); }
  std::uint64_t cluster_seed() const { return mix_seed(seed, 6); }
  std::uint64_t infer_seed() const { return mix_seed(seed, 7); }
};

struct ConfigKey {
  std::string name;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

/// Throws InvalidArgument for an unknown key or an unparsable value.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

/// Flat "key = value" lines; '#' starts a comment, blank lines are ignored.
/// Unknown or repeated keys are rejected with the line number.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Every key with its help text, in a form parse_config reads back.
std::string render_config(const PipelineConfig& config);

/// FNV-1a over the resolved keys, serve.* excluded; 16 hex digits.
std::string config_hash(const PipelineConfig& config);

enum class Stage { generate, segment, label, embed, train, evaluate, cluster, export_projector };

const char* to_string(Stage stage);

/// A stage ran before the stage it reads from.
class MissingStage : public Error {
 public:
  explicit MissingStage(Stage stage)
      : Error(std::string("missing upstream stage '") + to_string(stage) + "': run `notesplit " + to_string(stage) +
              "` first"),
        stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path run_dir, std::ostream& log,
           bool allow_config_mismatch = false);

  static std::filesystem::path default_run_dir(const PipelineConfig& config,
                                               const std::filesystem::path& root = "runs");

  void run(Stage stage);
  /// Every stage from generate through export-projector.
  void run_all();

  /// Ranks the instances of a dataset JSONL with the trained MLP.
  void predict(const std::filesystem::path& input, const std::filesystem::path& output, std::size_t k) const;

  /// Title vectors written by the embed stage.
  TitleSpace title_space() const;
  std::filesystem::path event_log_path() const;

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  std::filesystem::path artifact(const std::string& name) const { return run_dir_ / name; }

 private:
  void generate();
  void segment();
  void label();
  void embed();
  void train();
  void evaluate();
  void cluster();
  void export_projector();

  void require(Stage stage) const;
  void finish(Stage stage, const std::vector<std::string>& artifacts) const;
  Matrix embed_texts(const std::vector<std::string>& texts) const;

  PipelineConfig config_;
  std::filesystem::path run_dir_;
  std::ostream& log_;
  bool allow_config_mismatch_;
  std::string hash_;
};

}  // namespace notesplit
