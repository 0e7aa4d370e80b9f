#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "catlab/error.hpp"
#include "catlab/runner.hpp"

namespace {

struct SubArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int jobs = 0;
};

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream f(path);
  if (!f) throw catlab::Error(catlab::ErrorKind::InvalidConfig, "cannot open config " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw catlab::Error(catlab::ErrorKind::InvalidConfig, path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catlab: convolution-augmented attention experiments"};
  app.set_version_flag("--version", std::string(CATLAB_VERSION));
  app.require_subcommand(1);

  std::vector<std::pair<CLI::App*, std::unique_ptr<SubArgs>>> subs;
  const std::map<std::string, std::string> blurb = {
      {"verify-constructions", "check the exact NAR, AR and selective-copy constructions"},
      {"lengen-sweep", "error and accuracy of an audited model across lengths"},
      {"lcat-phase", "landmark retrieval phase transition over block sizes"},
      {"gen-tasks", "write train/test jsonl for a synthetic recall task"},
      {"sc-demo", "decode one selective-copy example"},
      {"audit", "length-generalisation audit of a model in audit form"},
  };
  for (const auto& name : catlab::command_names()) {
    auto args = std::make_unique<SubArgs>();
    CLI::App* sub = app.add_subcommand(name, blurb.count(name) ? blurb.at(name) : "");
    sub->add_option("--config", args->config, "JSON config file");
    sub->add_option("--seed", args->seed, "overrides CATLAB_SEED and the config seed");
    sub->add_option("--out", args->out, "output directory");
    sub->add_option("--jobs", args->jobs, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
    subs.emplace_back(sub, std::move(args));
  }

  CLI11_PARSE(app, argc, argv);

  for (auto& [sub, args] : subs) {
    if (!sub->parsed()) continue;
    try {
      catlab::RunOptions opts;
      opts.seed = args->seed;
      opts.out_dir = args->out;
      opts.jobs = args->jobs;
      const auto res = catlab::run_command(sub->get_name(), load_config(args->config), opts, std::cerr);
      for (const auto& p : res.outputs) std::cout << p.string() << "\n";
      return res.exit_code;
    } catch (const catlab::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
