#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace catlab {

enum class TaskKind { AR, NAR, MQAR, MQNAR, SC };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct Query {
  int position = 0;  // index of the last token of the (N-gram) query
  int ngram = 1;
  bool operator==(const Query&) const = default;
};

/// Discrete task sequence with query positions and expected answers.
struct TaskInstance {
  TaskKind kind = TaskKind::AR;
  std::vector<int> tokens;
  std::vector<Query> queries;
  std::vector<int> answers;
  std::uint64_t seed = 0;

  bool operator==(const TaskInstance&) const = default;
};

// Token-id layout for selective copying: signal ids [0, S), noise ids
// [S, S + noise), then the start-of-decode symbol.
struct ScLayout {
  int num_signal = 8;
  int num_noise = 1;

  int bot() const noexcept { return num_signal + num_noise; }
  int vocab_size() const noexcept { return num_signal + num_noise + 1; }
  bool is_signal(int id) const noexcept { return id >= 0 && id < num_signal; }
};

struct MqOptions {
  double no_match_fraction = 0.0;
};

TaskInstance gen_ar(int L, int vocab_size, std::uint64_t seed);

struct NarOptions {
  // Reject instances that start with the query's token when the query is a
  // single repeated token; under zero padding such a prefix has the same
  // normalized signature as the query.
  bool avoid_boundary_alias = true;
};
TaskInstance gen_nar(int N, int L, int vocab_size, std::uint64_t seed, NarOptions opts = {});

// Sentinel answer id for unmatched multi-query lookups.
inline int mq_sentinel(int vocab_size) { return vocab_size; }
TaskInstance gen_mq(int N, int L, int k, int vocab_size, std::uint64_t seed, MqOptions opts = {});

TaskInstance gen_sc(int n_signal, int n_noise, const ScLayout& layout, std::uint64_t seed, bool unique = true);

// Fraction of queries answered exactly. Throws LengthMismatch.
double verify(const TaskInstance& instance, const std::vector<int>& predicted);

/// Brute-force validity check, independent of the generators: uniqueness of
/// the planted match and correctness of every recorded answer.
/// `vocab_size` is needed for the MQ sentinel and `layout` for SC.
bool check_instance(const TaskInstance& instance, int vocab_size, const ScLayout& layout = {});

// Unique signal tokens of an SC prompt, in order of first appearance.
std::vector<int> sc_unique_signals(const std::vector<int>& tokens, const ScLayout& layout);

nlohmann::json to_json(const TaskInstance& instance);
TaskInstance instance_from_json(const nlohmann::json& j);

void write_jsonl(std::ostream& os, const std::vector<TaskInstance>& instances);
std::vector<TaskInstance> read_jsonl(std::istream& is);

}  // namespace catlab
