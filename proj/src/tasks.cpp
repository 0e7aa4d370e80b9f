#include "catlab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "catlab/error.hpp"
#include "catlab/rng.hpp"

namespace catlab {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::AR: return "AR";
    case TaskKind::NAR: return "NAR";
    case TaskKind::MQAR: return "MQAR";
    case TaskKind::MQNAR: return "MQNAR";
    case TaskKind::SC: return "SC";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  for (TaskKind k : {TaskKind::AR, TaskKind::NAR, TaskKind::MQAR, TaskKind::MQNAR, TaskKind::SC}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::InvalidInput, "unknown task kind '" + s + "'");
}

namespace {

int draw_excluding(Rng& rng, int vocab_size, int excluded) {
  int r = static_cast<int>(rng.uniform_int(0, vocab_size - 2));
  return r >= excluded ? r + 1 : r;
}

bool matches_at(const std::vector<int>& x, const std::vector<int>& z, int start) {
  for (size_t i = 0; i < z.size(); ++i) {
    if (x[static_cast<size_t>(start) + i] != z[i]) return false;
  }
  return true;
}

// Start indices s <= last_start where z occurs in x.
std::vector<int> occurrences(const std::vector<int>& x, const std::vector<int>& z, int last_start) {
  std::vector<int> out;
  for (int s = 0; s <= last_start; ++s) {
    if (matches_at(x, z, s)) out.push_back(s);
  }
  return out;
}

constexpr int kMaxAttempts = 1000;

}  // namespace

TaskInstance gen_ar(int L, int vocab_size, std::uint64_t seed) {
  if (L < 3) throw Error(ErrorKind::InfeasibleSpec, "AR needs L >= 3");
  if (vocab_size < 3) throw Error(ErrorKind::InfeasibleSpec, "AR needs at least 3 tokens");
  Rng rng(seed);
  TaskInstance inst;
  inst.kind = TaskKind::AR;
  inst.seed = seed;
  const int q = static_cast<int>(rng.uniform_int(0, vocab_size - 1));
  const int i = static_cast<int>(rng.uniform_int(0, L - 3));
  inst.tokens.resize(static_cast<size_t>(L));
  for (auto& t : inst.tokens) t = draw_excluding(rng, vocab_size, q);
  inst.tokens[static_cast<size_t>(i)] = q;
  inst.tokens[static_cast<size_t>(L - 1)] = q;
  inst.queries = {{L - 1, 1}};
  inst.answers = {inst.tokens[static_cast<size_t>(i + 1)]};
  return inst;
}

TaskInstance gen_nar(int N, int L, int vocab_size, std::uint64_t seed, NarOptions opts) {
  if (N < 1) throw Error(ErrorKind::InfeasibleSpec, "N-gram length must be positive");
  if (L < 2 * N + 1) throw Error(ErrorKind::InfeasibleSpec, "NAR needs L >= 2N + 1");
  if (vocab_size < 2) throw Error(ErrorKind::InfeasibleSpec, "NAR needs at least 2 tokens");
  Rng rng(seed);
  const auto Ls = static_cast<size_t>(L);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<int> z(static_cast<size_t>(N));
    for (auto& t : z) t = static_cast<int>(rng.uniform_int(0, vocab_size - 1));
    const bool homogeneous = N >= 2 && std::all_of(z.begin(), z.end(), [&](int t) { return t == z[0]; });
    const bool guard_alias = opts.avoid_boundary_alias && homogeneous;
    const int lo = guard_alias ? 1 : 0;
    const int hi = L - 2 * N - 1;
    if (lo > hi) continue;
    const int i = static_cast<int>(rng.uniform_int(lo, hi));

    std::vector<int> x(Ls);
    std::vector<bool> fixed(Ls, false);
    for (int k = 0; k < N; ++k) {
      x[static_cast<size_t>(i + k)] = z[static_cast<size_t>(k)];
      x[static_cast<size_t>(L - N + k)] = z[static_cast<size_t>(k)];
      fixed[static_cast<size_t>(i + k)] = true;
      fixed[static_cast<size_t>(L - N + k)] = true;
    }
    auto draw_free = [&](size_t pos) {
      if (N == 1) {
        x[pos] = draw_excluding(rng, vocab_size, z[0]);
      } else if (pos == 0 && guard_alias) {
        x[pos] = draw_excluding(rng, vocab_size, z[0]);
      } else {
        x[pos] = static_cast<int>(rng.uniform_int(0, vocab_size - 1));
      }
    };
    for (size_t p = 0; p < Ls; ++p) {
      if (!fixed[p]) draw_free(p);
    }

    // Resample free tokens inside any accidental extra occurrence.
    bool ok = false;
    for (int repair = 0; repair < kMaxAttempts; ++repair) {
      std::vector<int> bad;
      for (int s : occurrences(x, z, L - N - 1)) {
        if (s != i) bad.push_back(s);
      }
      if (bad.empty()) {
        ok = true;
        break;
      }
      bool repaired = false;
      for (int s : bad) {
        std::vector<size_t> free;
        for (int k = 0; k < N; ++k) {
          if (!fixed[static_cast<size_t>(s + k)]) free.push_back(static_cast<size_t>(s + k));
        }
        if (free.empty()) continue;
        draw_free(free[static_cast<size_t>(rng.uniform_int(0, static_cast<long>(free.size()) - 1))]);
        repaired = true;
      }
      if (!repaired) break;
    }
    if (!ok) continue;

    TaskInstance inst;
    inst.kind = TaskKind::NAR;
    inst.seed = seed;
    inst.tokens = std::move(x);
    inst.queries = {{L - 1, N}};
    inst.answers = {inst.tokens[static_cast<size_t>(i + N)]};
    return inst;
  }
  throw Error(ErrorKind::InfeasibleSpec, "could not plant a unique N-gram");
}

TaskInstance gen_mq(int N, int L, int k, int vocab_size, std::uint64_t seed, MqOptions opts) {
  if (N < 1 || k < 1) throw Error(ErrorKind::InfeasibleSpec, "MQ needs N >= 1 and k >= 1");
  if (opts.no_match_fraction < 0.0) throw Error(ErrorKind::InfeasibleSpec, "negative no-match fraction");
  const int unmatched = static_cast<int>(opts.no_match_fraction * k + 0.5);
  const int n_queries = k + unmatched;
  const int separators = N >= 2 ? n_queries - 1 : 0;
  const int needed = k * (N + 1) + n_queries * N + separators;
  if (L < needed) {
    throw Error(ErrorKind::InfeasibleSpec, "L=" + std::to_string(L) + " cannot hold the pairs and queries (need " +
                                               std::to_string(needed) + ")");
  }
  // Key pool, reserve for unmatched single-token queries, value/filler pool.
  // N >= 2: widen the key pool until it spans the queried N-grams
  int key_pool = k;
  if (N >= 2)
    while (std::pow(double(key_pool), N) < n_queries) ++key_pool;
  const int reserve = N == 1 ? unmatched : 0;
  if (vocab_size < 2 * k || vocab_size - key_pool - reserve < 1) {
    throw Error(ErrorKind::InfeasibleSpec, "vocabulary too small for k keys");
  }

  Rng rng(seed);
  std::vector<int> perm(static_cast<size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) perm[static_cast<size_t>(i)] = i;
  rng.shuffle(perm);
  const std::vector<int> pool_keys(perm.begin(), perm.begin() + key_pool);
  const std::vector<int> pool_reserve(perm.begin() + key_pool, perm.begin() + key_pool + reserve);
  const std::vector<int> pool_values(perm.begin() + key_pool + reserve, perm.end());
  auto draw_value = [&] { return pool_values[static_cast<size_t>(rng.uniform_int(0, static_cast<long>(pool_values.size()) - 1))]; };

  // k keys plus `unmatched` absent N-grams, all distinct.
  std::vector<std::vector<int>> grams;
  std::set<std::vector<int>> seen;
  if (N == 1) {
    for (int t : pool_keys) grams.push_back({t});
    for (int t : pool_reserve) grams.push_back({t});
  } else {
    while (static_cast<int>(grams.size()) < n_queries) {
      std::vector<int> g(static_cast<size_t>(N));
      for (auto& t : g) t = pool_keys[static_cast<size_t>(rng.uniform_int(0, key_pool - 1))];
      if (seen.insert(g).second) grams.push_back(std::move(g));
    }
  }
  std::vector<int> values(static_cast<size_t>(k));
  for (auto& v : values) v = draw_value();

  TaskInstance inst;
  inst.kind = N == 1 ? TaskKind::MQAR : TaskKind::MQNAR;
  inst.seed = seed;
  std::vector<int> pair_order(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) pair_order[static_cast<size_t>(i)] = i;
  rng.shuffle(pair_order);
  for (int idx : pair_order) {
    for (int t : grams[static_cast<size_t>(idx)]) inst.tokens.push_back(t);
    inst.tokens.push_back(values[static_cast<size_t>(idx)]);
  }

  std::vector<int> query_order(static_cast<size_t>(n_queries));
  for (int i = 0; i < n_queries; ++i) query_order[static_cast<size_t>(i)] = i;
  rng.shuffle(query_order);
  // gaps[0] before the first query, gaps[n_queries] after the last.
  std::vector<int> gaps(static_cast<size_t>(n_queries + 1), 0);
  for (int g = 1; g < n_queries; ++g) gaps[static_cast<size_t>(g)] = N >= 2 ? 1 : 0;
  const int slack = L - needed;
  for (int s = 0; s < slack; ++s) ++gaps[static_cast<size_t>(rng.uniform_int(0, n_queries))];

  for (int qi = 0; qi < n_queries; ++qi) {
    for (int g = 0; g < gaps[static_cast<size_t>(qi)]; ++g) inst.tokens.push_back(draw_value());
    const int idx = query_order[static_cast<size_t>(qi)];
    for (int t : grams[static_cast<size_t>(idx)]) inst.tokens.push_back(t);
    inst.queries.push_back({static_cast<int>(inst.tokens.size()) - 1, N});
    inst.answers.push_back(idx < k ? values[static_cast<size_t>(idx)] : mq_sentinel(vocab_size));
  }
  for (int g = 0; g < gaps.back(); ++g) inst.tokens.push_back(draw_value());

  if (!check_instance(inst, vocab_size)) throw Error(ErrorKind::InfeasibleSpec, "generated MQ instance failed validation");
  return inst;
}

TaskInstance gen_sc(int n_signal, int n_noise, const ScLayout& layout, std::uint64_t seed, bool unique) {
  if (n_signal < 0 || n_noise < 0) throw Error(ErrorKind::InfeasibleSpec, "negative token counts");
  if (layout.num_signal < 1) throw Error(ErrorKind::InfeasibleSpec, "empty signal vocabulary");
  if (n_noise > 0 && layout.num_noise < 1) throw Error(ErrorKind::InfeasibleSpec, "no noise ids");
  if (unique && n_signal > layout.num_signal) {
    throw Error(ErrorKind::InfeasibleSpec, "unique selective copy needs n_signal <= |S|");
  }
  Rng rng(seed);
  std::vector<char> is_signal(static_cast<size_t>(n_signal + n_noise), 0);
  std::fill(is_signal.begin(), is_signal.begin() + n_signal, 1);
  rng.shuffle(is_signal);

  std::vector<int> signals(static_cast<size_t>(n_signal));
  if (unique) {
    std::vector<int> ids(static_cast<size_t>(layout.num_signal));
    for (int i = 0; i < layout.num_signal; ++i) ids[static_cast<size_t>(i)] = i;
    rng.shuffle(ids);
    std::copy_n(ids.begin(), n_signal, signals.begin());
  } else {
    for (auto& s : signals) s = static_cast<int>(rng.uniform_int(0, layout.num_signal - 1));
  }

  TaskInstance inst;
  inst.kind = TaskKind::SC;
  inst.seed = seed;
  size_t next_signal = 0;
  for (char sig : is_signal) {
    if (sig) {
      inst.tokens.push_back(signals[next_signal++]);
      inst.answers.push_back(inst.tokens.back());
    } else {
      inst.tokens.push_back(layout.num_signal + static_cast<int>(rng.uniform_int(0, layout.num_noise - 1)));
    }
  }
  inst.tokens.push_back(layout.bot());
  for (size_t t = 0; t < inst.answers.size(); ++t) {
    inst.queries.push_back({static_cast<int>(inst.tokens.size() - 1 + t), 1});
  }
  return inst;
}

double verify(const TaskInstance& instance, const std::vector<int>& predicted) {
  if (predicted.size() != instance.answers.size()) {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(instance.answers.size()) + " predictions, got " +
                                               std::to_string(predicted.size()));
  }
  if (predicted.empty()) return 1.0;
  size_t hits = 0;
  for (size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == instance.answers[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<int> sc_unique_signals(const std::vector<int>& tokens, const ScLayout& layout) {
  std::vector<int> out;
  std::vector<char> seen(static_cast<size_t>(layout.num_signal), 0);
  for (int t : tokens) {
    if (t == layout.bot()) break;
    if (layout.is_signal(t) && !seen[static_cast<size_t>(t)]) {
      seen[static_cast<size_t>(t)] = 1;
      out.push_back(t);
    }
  }
  return out;
}

bool check_instance(const TaskInstance& inst, int vocab_size, const ScLayout& layout) {
  const auto& x = inst.tokens;
  const int L = static_cast<int>(x.size());
  if (inst.queries.size() != inst.answers.size()) return false;

  if (inst.kind == TaskKind::SC) {
    if (L < 1 || x.back() != layout.bot()) return false;
    if (std::count(x.begin(), x.end(), layout.bot()) != 1) return false;
    std::vector<int> all;
    for (int t : x) {
      if (t < 0 || t >= layout.vocab_size()) return false;
      if (layout.is_signal(t)) all.push_back(t);
    }
    return inst.answers == all || inst.answers == sc_unique_signals(x, layout);
  }

  for (int t : x) {
    if (t < 0 || t >= vocab_size) return false;
  }
  const bool single = inst.kind == TaskKind::AR || inst.kind == TaskKind::NAR;
  if (single && inst.queries.size() != 1) return false;
  std::set<std::vector<int>> keys_seen;
  for (size_t qi = 0; qi < inst.queries.size(); ++qi) {
    const auto [pos, n] = inst.queries[qi];
    if (n < 1 || pos - n + 1 < 0 || pos >= L) return false;
    if (single && pos != L - 1) return false;
    const std::vector<int> z(x.begin() + pos - n + 1, x.begin() + pos + 1);
    // Earlier occurrences: end index e < pos.
    std::vector<int> ends;
    for (int e = n - 1; e < pos; ++e) {
      if (matches_at(x, z, e - n + 1)) ends.push_back(e);
    }
    if (ends.size() > 1) return false;
    if (ends.empty()) {
      if (single || inst.answers[qi] != mq_sentinel(vocab_size)) return false;
      continue;
    }
    if (!keys_seen.insert(z).second) return false;
    if (ends[0] + 1 >= L || inst.answers[qi] != x[static_cast<size_t>(ends[0] + 1)]) return false;
  }
  return true;
}

nlohmann::json to_json(const TaskInstance& instance) {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& query : instance.queries) q.push_back({query.position, query.ngram});
  return {{"kind", to_string(instance.kind)},
          {"tokens", instance.tokens},
          {"queries", q},
          {"answers", instance.answers},
          {"seed", instance.seed}};
}

TaskInstance instance_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "tokens" && key != "queries" && key != "answers" && key != "seed") {
      throw Error(ErrorKind::InvalidInput, "unknown instance field '" + key + "'");
    }
  }
  TaskInstance inst;
  inst.kind = task_kind_from_string(j.at("kind").get<std::string>());
  inst.tokens = j.at("tokens").get<std::vector<int>>();
  for (const auto& q : j.at("queries")) inst.queries.push_back({q.at(0).get<int>(), q.at(1).get<int>()});
  inst.answers = j.at("answers").get<std::vector<int>>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  return inst;
}

void write_jsonl(std::ostream& os, const std::vector<TaskInstance>& instances) {
  for (const auto& inst : instances) os << to_json(inst).dump() << '\n';
}

std::vector<TaskInstance> read_jsonl(std::istream& is) {
  std::vector<TaskInstance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(instance_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace catlab
