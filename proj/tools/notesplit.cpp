#include <csignal>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "notesplit/mapping.hpp"
#include "notesplit/mapping_http.hpp"
#include "notesplit/pipeline.hpp"

#include "CLI11.hpp"
#include "httplib.h"

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int serve(const notesplit::Pipeline& pipeline) {
  const auto& config = pipeline.config();
  if (config.serve_ontology.empty()) throw notesplit::InvalidArgument("serve needs serve.ontology");
  notesplit::MappingService service(pipeline.title_space(), notesplit::load_ontology(config.serve_ontology),
                                    pipeline.event_log_path());
  httplib::Server server;
  notesplit::register_mapping_routes(server, service, config.serve_static_dir);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  std::cerr << "serving " << service.space().size() << " titles on http://" << config.serve_host << ':'
            << config.serve_port << "\n";
  if (!server.listen(config.serve_host, config.serve_port)) {
    std::cerr << "error: cannot listen on " << config.serve_host << ':' << config.serve_port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using notesplit::Stage;

  CLI::App app{"Clinical note segmentation, title labeling and title-space tools"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string run_dir;
  std::string runs_root = "runs";
  std::optional<std::uint64_t> seed;
  bool allow_mismatch = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--run-dir", run_dir, "artifact directory (default: <runs-root>/<config hash>)");
  app.add_option("--runs-root", runs_root, "parent of hash-keyed run directories");
  app.add_option("--seed", seed, "override every module seed");
  app.add_flag("--allow-config-mismatch", allow_mismatch, "proceed when upstream artifacts used another config");
  app.add_option("--set", overrides, "key=value override (repeatable)");

  std::map<std::string, std::string> key_values;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
  for (const auto& key : notesplit::config_keys()) {
    if (key.name == "seed") continue;  // --seed above
    auto* opt = app.add_option("--" + key.name, key_values[key.name], key.help)->group("Config keys");
    key_options.emplace_back(key.name, opt);
  }

  const std::pair<const char*, Stage> stages[] = {
      {"generate", Stage::generate},   {"segment", Stage::segment},
      {"label", Stage::label},         {"embed", Stage::embed},
      {"train", Stage::train},         {"evaluate", Stage::evaluate},
      {"cluster", Stage::cluster},     {"export-projector", Stage::export_projector}};
  std::map<CLI::App*, Stage> stage_of;
  for (const auto& [name, stage] : stages)
    stage_of[app.add_subcommand(name, std::string("run the ") + name + " stage")] = stage;
  auto* all_cmd = app.add_subcommand("pipeline", "run generate through export-projector");
  auto* serve_cmd = app.add_subcommand("serve", "serve the ontology mapping API");
  auto* predict_cmd = app.add_subcommand("predict", "rank labels for a dataset JSONL with the trained MLP");
  std::string predict_input, predict_output;
  std::size_t predict_k = 10;
  predict_cmd->add_option("--input", predict_input, "dataset JSONL")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--output", predict_output, "predictions JSONL")->required();
  predict_cmd->add_option("--k", predict_k, "labels kept per row")->check(CLI::PositiveNumber);
  auto* config_cmd = app.add_subcommand("config", "print the resolved config");

  CLI11_PARSE(app, argc, argv);

  try {
    notesplit::PipelineConfig config = config_path.empty() ? notesplit::PipelineConfig{}
                                                           : notesplit::load_config(config_path);
    for (const auto& [name, opt] : key_options)
      if (opt->count() > 0) notesplit::set_config_value(config, name, key_values[name]);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw notesplit::InvalidArgument("--set expects key=value, got '" + kv + "'");
      notesplit::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;

    if (config_cmd->parsed()) {
      config.validate();
      std::cout << notesplit::render_config(config);
      return 0;
    }

    const std::filesystem::path dir =
        run_dir.empty() ? notesplit::Pipeline::default_run_dir(config, runs_root) : std::filesystem::path(run_dir);
    notesplit::Pipeline pipeline(config, dir, std::cerr, allow_mismatch);

    for (const auto& [cmd, stage] : stage_of)
      if (cmd->parsed()) {
        pipeline.run(stage);
        return 0;
      }
    if (all_cmd->parsed()) {
      pipeline.run_all();
      std::cout << pipeline.run_dir().string() << "\n";
      return 0;
    }
    if (predict_cmd->parsed()) {
      pipeline.predict(predict_input, predict_output, predict_k);
      return 0;
    }
    if (serve_cmd->parsed()) return serve(pipeline);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
