#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "catlab/lcat.hpp"
#include "catlab/tasks.hpp"

namespace catlab {

/// Reads a JSON object field by field and rejects fields nobody asked for.
class ConfigReader {
 public:
  explicit ConfigReader(const nlohmann::json& j, std::string where = "config");

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail("field '" + key + "': " + e.what());
    }
  }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const nlohmann::json& raw(const std::string& key);
  // Throws InvalidConfig naming the first unknown field.
  void finish() const;
  [[noreturn]] void fail(const std::string& why) const;

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

/// --seed beats CATLAB_SEED beats the config's seed; 0 when none is given.
std::uint64_t resolve_seed(std::optional<std::uint64_t> cli, const char* env, std::optional<std::uint64_t> config);

// 16 hex digits of FNV-1a over the canonical config dump.
std::string make_run_id(const nlohmann::json& canonical_config);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = ".";
  int jobs = 0;  // 0 keeps the OpenMP default
};

struct CommandResult {
  int exit_code = 0;
  std::string run_id;
  std::vector<std::filesystem::path> outputs;
  nlohmann::json report;
};

struct ScSuiteConfig {
  std::vector<int> signal_sizes{8, 16};
  int max_signals = 16;
  int max_noise = 240;
  int noise_ids = 16;
  int instances = 1000;
};

struct VerifyConfig {
  std::uint64_t seed = 0;
  int vocab_size = 64;
  std::vector<int> ngram{1, 2, 3};
  std::vector<int> lengths{16, 64, 128, 512};
  int instances = 1000;
  std::optional<std::vector<double>> f_q;  // random verified filter when absent
  bool ar_1d = true;
  bool mqar = true;
  ScSuiteConfig sc;
};

// Value filter, softmax setting and vocabulary of an audited model.
struct AuditModelConfig {
  std::vector<double> f_v_taps{1.0};
  int f_v_t_min = -1;
  std::optional<double> eps0_target;  // Soft(c) tuned for this eps0 at build length; Hard when absent
  int vocab_size = 64;
};

struct LengenConfig {
  std::uint64_t seed = 0;
  AuditModelConfig model;
  int build_length = 128;
  std::vector<int> lengths{32, 128, 512, 1024, 4096};
  int instances = 1000;
  std::optional<double> expect_accuracy = 1.0;
};

struct AuditConfig {
  std::uint64_t seed = 0;
  AuditModelConfig model;
  int build_length = 128;
  std::vector<int> lengths{128, 256, 512, 1024, 2048};
  int instances = 200;
};

struct PhaseConfig {
  std::uint64_t seed = 0;
  long L = 1L << 20;
  std::vector<int> block_sizes{16, 32, 64, 128, 256, 512, 1024};
  double sigma2 = 1.0;
  LcatFilter filter = LcatFilter::BlockMean;
  SimMode mode = SimMode::Reduced;
  long trials = 1000;
};

struct GenTasksConfig {
  std::uint64_t seed = 0;
  std::string preset;  // informational once expanded
  TaskKind kind = TaskKind::MQAR;
  int N = 1;
  int L = 64;
  int k = 16;
  int vocab_size = 8092;
  int train = 100000;
  int test = 3000;
  double no_match_fraction = 0.0;
  int num_signal = 8;
  int num_noise = 1;
  int n_signal = 4;
  int n_noise = 12;
};

struct ScDemoConfig {
  std::uint64_t seed = 0;
  int num_signal = 8;
  int max_signals = 8;
  int max_noise = 24;
  int instances = 8;
};

// Parsing applies defaults, presets and validation; to_json gives the
// canonical snapshot that the run id hashes.
VerifyConfig parse_verify_config(const nlohmann::json& j);
LengenConfig parse_lengen_config(const nlohmann::json& j);
AuditConfig parse_audit_config(const nlohmann::json& j);
PhaseConfig parse_phase_config(const nlohmann::json& j);
GenTasksConfig parse_gen_tasks_config(const nlohmann::json& j);
ScDemoConfig parse_sc_demo_config(const nlohmann::json& j);

nlohmann::json to_json(const VerifyConfig& c);
nlohmann::json to_json(const LengenConfig& c);
nlohmann::json to_json(const AuditConfig& c);
nlohmann::json to_json(const PhaseConfig& c);
nlohmann::json to_json(const GenTasksConfig& c);
nlohmann::json to_json(const ScDemoConfig& c);

// Names accepted by gen-tasks: mqar-L64/128/256/512, mqnar-L64/128/256.
std::vector<std::string> gen_task_presets();

// Deterministic train/test instances for a gen-tasks config.
std::vector<TaskInstance> generate_split(const GenTasksConfig& c, bool train);

const std::vector<std::string>& command_names();

/// Parse `config`, resolve the seed, run, write outputs and the manifest into
/// opts.out_dir. Library errors propagate as catlab::Error.
CommandResult run_command(const std::string& name, const nlohmann::json& config, const RunOptions& opts,
                          std::ostream& log);

}  // namespace catlab
