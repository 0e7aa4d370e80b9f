#include "catlab/runner.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <ostream>

#include "catlab/audit.hpp"
#include "catlab/constructions.hpp"
#include "catlab/rng.hpp"

namespace catlab {

using nlohmann::json;

ConfigReader::ConfigReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
  if (!j_.is_object()) fail("expected a JSON object");
}

const json& ConfigReader::raw(const std::string& key) {
  seen_.insert(key);
  return j_.at(key);
}

void ConfigReader::finish() const {
  for (const auto& [key, _] : j_.items()) {
    if (!seen_.count(key)) fail("unknown field '" + key + "'");
  }
}

void ConfigReader::fail(const std::string& why) const { throw Error(ErrorKind::InvalidConfig, where_ + ": " + why); }

std::uint64_t resolve_seed(std::optional<std::uint64_t> cli, const char* env, std::optional<std::uint64_t> config) {
  if (cli) return *cli;
  if (env && *env) {
    try {
      size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return s;
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, std::string("CATLAB_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return config.value_or(0);
}

std::string make_run_id(const json& canonical_config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

template <class T>
void require(bool ok, const std::string& why) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, why);
}

void require_positive(long v, const std::string& name) { require<void>(v > 0, name + " must be positive"); }

void require_nonempty(const std::vector<int>& v, const std::string& name) {
  require<void>(!v.empty(), name + " is empty");
  for (int x : v) require<void>(x > 0, name + " entries must be positive");
}

AuditModelConfig read_model(ConfigReader& r) {
  AuditModelConfig m;
  if (r.has("f_v")) {
    ConfigReader f(r.raw("f_v"), "f_v");
    m.f_v_taps = f.get<std::vector<double>>("taps", m.f_v_taps);
    m.f_v_t_min = f.get<int>("t_min", m.f_v_t_min);
    f.finish();
  }
  r.get<json>("f_v", nullptr);
  if (r.has("eps0_target")) m.eps0_target = r.get<double>("eps0_target", 0.0);
  r.get<json>("eps0_target", nullptr);
  m.vocab_size = r.get<int>("vocab_size", m.vocab_size);
  require<void>(!m.f_v_taps.empty(), "f_v needs at least one tap");
  require<void>(m.vocab_size >= 3, "vocab_size must be at least 3");
  require<void>(!m.eps0_target || *m.eps0_target > 0.0, "eps0_target must be positive");
  return m;
}

void write_model(json& j, const AuditModelConfig& m) {
  j["f_v"] = {{"taps", m.f_v_taps}, {"t_min", m.f_v_t_min}};
  j["eps0_target"] = m.eps0_target ? json(*m.eps0_target) : json(nullptr);
  j["vocab_size"] = m.vocab_size;
}

std::uint64_t read_seed(ConfigReader& r) { return r.get<std::uint64_t>("seed", 0); }

struct GenPreset {
  const char* name;
  TaskKind kind;
  int N, L, k, train, test;
};

constexpr GenPreset kPresets[] = {
    {"mqar-L64", TaskKind::MQAR, 1, 64, 16, 100000, 3000},
    {"mqar-L128", TaskKind::MQAR, 1, 128, 32, 100000, 3000},
    {"mqar-L256", TaskKind::MQAR, 1, 256, 64, 100000, 3000},
    {"mqar-L512", TaskKind::MQAR, 1, 512, 128, 100000, 3000},
    {"mqnar-L64", TaskKind::MQNAR, 2, 64, 10, 200000, 3000},
    {"mqnar-L128", TaskKind::MQNAR, 2, 128, 20, 200000, 3000},
    {"mqnar-L256", TaskKind::MQNAR, 2, 256, 40, 200000, 3000},
};

}  // namespace

VerifyConfig parse_verify_config(const json& j) {
  ConfigReader r(j);
  VerifyConfig c;
  c.seed = read_seed(r);
  c.vocab_size = r.get("vocab_size", c.vocab_size);
  c.ngram = r.get("ngram", c.ngram);
  c.lengths = r.get("lengths", c.lengths);
  c.instances = r.get("instances", c.instances);
  if (r.has("f_q")) c.f_q = r.get<std::vector<double>>("f_q", {});
  r.get<json>("f_q", nullptr);
  c.ar_1d = r.get("ar_1d", c.ar_1d);
  c.mqar = r.get("mqar", c.mqar);
  if (r.has("sc")) {
    ConfigReader s(r.raw("sc"), "sc");
    c.sc.signal_sizes = s.get("signal_sizes", c.sc.signal_sizes);
    c.sc.max_signals = s.get("max_signals", c.sc.max_signals);
    c.sc.max_noise = s.get("max_noise", c.sc.max_noise);
    c.sc.noise_ids = s.get("noise_ids", c.sc.noise_ids);
    c.sc.instances = s.get("instances", c.sc.instances);
    s.finish();
  } else {
    r.get<json>("sc", nullptr);
  }
  r.finish();

  require_nonempty(c.ngram, "ngram");
  require_nonempty(c.lengths, "lengths");
  require_positive(c.instances, "instances");
  require<void>(c.vocab_size >= 3, "vocab_size must be at least 3");
  if (c.f_q) {
    require<void>(!c.f_q->empty(), "f_q is empty");
    require<void>(c.ngram.size() == 1 && c.ngram[0] == static_cast<int>(c.f_q->size()),
                  "an explicit f_q needs ngram = [len(f_q)]");
  }
  for (int N : c.ngram) {
    for (int L : c.lengths) require<void>(L >= 2 * N + 1, "length " + std::to_string(L) + " too short for N=" + std::to_string(N));
  }
  for (int S : c.sc.signal_sizes) require<void>(S >= 1, "signal sizes must be positive");
  require<void>(c.sc.max_signals >= 0 && c.sc.max_noise >= 0 && c.sc.noise_ids >= 1, "invalid sc suite");
  require<void>(c.sc.signal_sizes.empty() || c.sc.instances > 0, "sc suite is empty");
  return c;
}

json to_json(const VerifyConfig& c) {
  json j = {{"seed", c.seed},
            {"vocab_size", c.vocab_size},
            {"ngram", c.ngram},
            {"lengths", c.lengths},
            {"instances", c.instances},
            {"f_q", c.f_q ? json(*c.f_q) : json(nullptr)},
            {"ar_1d", c.ar_1d},
            {"mqar", c.mqar}};
  j["sc"] = {{"signal_sizes", c.sc.signal_sizes},
             {"max_signals", c.sc.max_signals},
             {"max_noise", c.sc.max_noise},
             {"noise_ids", c.sc.noise_ids},
             {"instances", c.sc.instances}};
  return j;
}

LengenConfig parse_lengen_config(const json& j) {
  ConfigReader r(j);
  LengenConfig c;
  c.seed = read_seed(r);
  c.model = read_model(r);
  c.build_length = r.get("build_length", c.build_length);
  c.lengths = r.get("lengths", c.lengths);
  c.instances = r.get("instances", c.instances);
  if (r.has("expect_accuracy")) {
    c.expect_accuracy = r.get<double>("expect_accuracy", 1.0);
  } else if (j.contains("expect_accuracy")) {
    c.expect_accuracy.reset();
  }
  r.get<json>("expect_accuracy", nullptr);
  r.finish();
  require<void>(c.build_length >= 3, "build_length must be at least 3");
  require_nonempty(c.lengths, "lengths");
  for (int L : c.lengths) require<void>(L >= 3, "lengths must be at least 3");
  require_positive(c.instances, "instances");
  return c;
}

json to_json(const LengenConfig& c) {
  json j = {{"seed", c.seed}, {"build_length", c.build_length}, {"lengths", c.lengths}, {"instances", c.instances}};
  write_model(j, c.model);
  j["expect_accuracy"] = c.expect_accuracy ? json(*c.expect_accuracy) : json(nullptr);
  return j;
}

AuditConfig parse_audit_config(const json& j) {
  ConfigReader r(j);
  AuditConfig c;
  c.seed = read_seed(r);
  c.model = read_model(r);
  c.build_length = r.get("build_length", c.build_length);
  c.lengths = r.get("lengths", c.lengths);
  c.instances = r.get("instances", c.instances);
  r.finish();
  require<void>(c.build_length >= 3, "build_length must be at least 3");
  require_nonempty(c.lengths, "lengths");
  for (int L : c.lengths) require<void>(L >= 3, "lengths must be at least 3");
  require_positive(c.instances, "instances");
  return c;
}

json to_json(const AuditConfig& c) {
  json j = {{"seed", c.seed}, {"build_length", c.build_length}, {"lengths", c.lengths}, {"instances", c.instances}};
  write_model(j, c.model);
  return j;
}

PhaseConfig parse_phase_config(const json& j) {
  ConfigReader r(j);
  PhaseConfig c;
  c.seed = read_seed(r);
  c.L = r.get("L", c.L);
  c.block_sizes = r.get("block_sizes", c.block_sizes);
  c.sigma2 = r.get("sigma2", c.sigma2);
  c.filter = lcat_filter_from_string(r.get<std::string>("filter_kind", to_string(c.filter)));
  c.mode = sim_mode_from_string(r.get<std::string>("mode", to_string(c.mode)));
  c.trials = r.get("trials", c.trials);
  r.finish();
  require_nonempty(c.block_sizes, "block_sizes");
  require_positive(c.trials, "trials");
  for (int B : c.block_sizes) {
    LcatConfig l;
    l.L = c.L;
    l.B = B;
    l.sigma2 = c.sigma2;
    l.mode = c.mode;
    l.validate();
  }
  return c;
}

json to_json(const PhaseConfig& c) {
  return {{"seed", c.seed},       {"L", c.L},
          {"block_sizes", c.block_sizes}, {"sigma2", c.sigma2},
          {"filter_kind", to_string(c.filter)}, {"mode", to_string(c.mode)},
          {"trials", c.trials}};
}

std::vector<std::string> gen_task_presets() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

GenTasksConfig parse_gen_tasks_config(const json& j) {
  ConfigReader r(j);
  GenTasksConfig c;
  c.seed = read_seed(r);
  c.preset = r.get<std::string>("preset", "");
  if (!c.preset.empty()) {
    const GenPreset* found = nullptr;
    for (const auto& p : kPresets) {
      if (c.preset == p.name) found = &p;
    }
    if (!found) r.fail("unknown preset '" + c.preset + "'");
    c.kind = found->kind;
    c.N = found->N;
    c.L = found->L;
    c.k = found->k;
    c.train = found->train;
    c.test = found->test;
  }
  if (r.has("kind")) {
    try {
      c.kind = task_kind_from_string(r.get<std::string>("kind", ""));
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  r.get<json>("kind", nullptr);
  c.N = r.get("N", c.N);
  c.L = r.get("L", c.L);
  c.k = r.get("k", c.k);
  c.vocab_size = r.get("vocab_size", c.vocab_size);
  c.train = r.get("train", c.train);
  c.test = r.get("test", c.test);
  c.no_match_fraction = r.get("no_match_fraction", c.no_match_fraction);
  c.num_signal = r.get("num_signal", c.num_signal);
  c.num_noise = r.get("num_noise", c.num_noise);
  c.n_signal = r.get("n_signal", c.n_signal);
  c.n_noise = r.get("n_noise", c.n_noise);
  r.finish();
  require<void>(c.train >= 0 && c.test >= 0 && c.train + c.test > 0, "no instances requested");
  require<void>(c.N >= 1 && c.L >= 1 && c.k >= 1 && c.vocab_size >= 1, "task sizes must be positive");
  return c;
}

json to_json(const GenTasksConfig& c) {
  return {{"seed", c.seed},
          {"preset", c.preset},
          {"kind", to_string(c.kind)},
          {"N", c.N},
          {"L", c.L},
          {"k", c.k},
          {"vocab_size", c.vocab_size},
          {"train", c.train},
          {"test", c.test},
          {"no_match_fraction", c.no_match_fraction},
          {"num_signal", c.num_signal},
          {"num_noise", c.num_noise},
          {"n_signal", c.n_signal},
          {"n_noise", c.n_noise}};
}

ScDemoConfig parse_sc_demo_config(const json& j) {
  ConfigReader r(j);
  ScDemoConfig c;
  c.seed = read_seed(r);
  c.num_signal = r.get("num_signal", c.num_signal);
  c.max_signals = r.get("max_signals", c.max_signals);
  c.max_noise = r.get("max_noise", c.max_noise);
  c.instances = r.get("instances", c.instances);
  r.finish();
  require_positive(c.num_signal, "num_signal");
  require<void>(c.max_signals >= 0 && c.max_noise >= 0, "sizes must be nonnegative");
  require_positive(c.instances, "instances");
  return c;
}

json to_json(const ScDemoConfig& c) {
  return {{"seed", c.seed},
          {"num_signal", c.num_signal},
          {"max_signals", c.max_signals},
          {"max_noise", c.max_noise},
          {"instances", c.instances}};
}

std::vector<TaskInstance> generate_split(const GenTasksConfig& c, bool train) {
  const int n = train ? c.train : c.test;
  const std::uint64_t stream = train ? 100 : 101;
  std::vector<TaskInstance> out(static_cast<size_t>(n));
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 64)
  for (int i = 0; i < n; ++i) {
    try {
      const std::uint64_t s = derive_seed(c.seed, stream, static_cast<std::uint64_t>(i));
      TaskInstance inst;
      switch (c.kind) {
        case TaskKind::AR: inst = gen_ar(c.L, c.vocab_size, s); break;
        case TaskKind::NAR: inst = gen_nar(c.N, c.L, c.vocab_size, s); break;
        case TaskKind::MQAR:
        case TaskKind::MQNAR: inst = gen_mq(c.N, c.L, c.k, c.vocab_size, s, {c.no_match_fraction}); break;
        case TaskKind::SC: inst = gen_sc(c.n_signal, c.n_noise, {c.num_signal, c.num_noise}, s); break;
      }
      out[static_cast<size_t>(i)] = std::move(inst);
    } catch (...) {
#pragma omp critical(catlab_gen_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

namespace {

// Fraction of `n` items for which `ok(i)` holds; OpenMP over items.
template <class F>
double suite_accuracy(long n, F&& ok) {
  long hits = 0;
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : hits)
  for (long i = 0; i < n; ++i) {
    try {
      hits += ok(i) ? 1 : 0;
    } catch (...) {
#pragma omp critical(catlab_suite_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return static_cast<double>(hits) / static_cast<double>(n);
}

Filter verified_filter(const VerifyConfig& c, int N, const Vocab& vocab) {
  if (c.f_q) return Filter::causal(*c.f_q);
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    Filter f = random_causal_filter(N, derive_seed(c.seed, 10, static_cast<std::uint64_t>(N) * 64 + attempt));
    if (signature_check(f, vocab, N, derive_seed(c.seed, 11, static_cast<std::uint64_t>(N))).unique) return f;
  }
  throw Error(ErrorKind::SignatureNotUnique, "no random filter separated the " + std::to_string(N) + "-grams");
}

std::filesystem::path output_path(const RunOptions& opts, const std::string& stem, const std::string& id,
                                  const std::string& ext) {
  return opts.out_dir / (stem + "-" + id + "." + ext);
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write " + p.string());
  f << s;
}

CommandResult cmd_verify(const VerifyConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  const Vocab vocab = Vocab::orthonormal(c.vocab_size, c.vocab_size);
  json suites = json::array();
  bool pass = true;
  auto record = [&](const std::string& name, int N, int L, long n, double acc) {
    suites.push_back({{"suite", name}, {"N", N}, {"L", L}, {"instances", n}, {"accuracy", acc}});
    log << name << " N=" << N << " L=" << L << " accuracy=" << acc << "\n";
    pass = pass && acc == 1.0;
  };

  for (int N : c.ngram) {
    const Filter f = verified_filter(c, N, vocab);
    const CatModel value = build_nar_value_delay(f, vocab, AttnMode::hard());
    const CatModel key = build_nar_key_delay(f, vocab, AttnMode::hard());
    for (int L : c.lengths) {
      const std::uint64_t s = derive_seed(c.seed, 20 + static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(L));
      auto inst = [&](long i) { return gen_nar(N, L, c.vocab_size, derive_seed(s, 0, static_cast<std::uint64_t>(i))); };
      record("nar_value_delay", N, L, c.instances, suite_accuracy(c.instances, [&](long i) {
               const auto x = inst(i);
               return predict_last(value, vocab, x) == x.answers[0];
             }));
      record("nar_key_delay", N, L, c.instances, suite_accuracy(c.instances, [&](long i) {
               const auto x = inst(i);
               return predict_last(key, vocab, x) == x.answers[0];
             }));
    }
  }
  if (c.ar_1d) {
    const CatModel ar = build_ar_1d(c.vocab_size, AttnMode::hard());
    for (int L : c.lengths) {
      if (L < 3) continue;
      const std::uint64_t s = derive_seed(c.seed, 30, static_cast<std::uint64_t>(L));
      record("ar_1d", 1, L, c.instances, suite_accuracy(c.instances, [&](long i) {
               const auto x = gen_ar(L, c.vocab_size, derive_seed(s, 0, static_cast<std::uint64_t>(i)));
               return predict_last(ar, vocab, x) == x.answers[0];
             }));
    }
  }
  if (c.mqar) {
    const CatModel ar = build_ar_1d(c.vocab_size, AttnMode::hard());
    for (int L : c.lengths) {
      const int k = std::min(L / 4, c.vocab_size / 2);
      if (k < 1) continue;
      const std::uint64_t s = derive_seed(c.seed, 31, static_cast<std::uint64_t>(L));
      record("mqar_ar_1d", 1, L, c.instances, suite_accuracy(c.instances, [&](long i) {
               const auto x = gen_mq(1, L, k, c.vocab_size, derive_seed(s, 0, static_cast<std::uint64_t>(i)));
               return verify(x, predict_all(ar, vocab, x)) == 1.0;
             }));
    }
  }
  for (int S : c.sc.signal_sizes) {
    const int max_sig = std::min(S, c.sc.max_signals);
    const ScLayout layout{S, c.sc.noise_ids};
    const int T = c.sc.max_noise + 2 * max_sig + 2;
    for (ScVariant v : {ScVariant::InfiniteFilterNoPE, ScVariant::WindowNWithPE}) {
      const ScModel m = build_sc_model(S, 1, v, T, std::max(1, max_sig));
      const std::uint64_t s = derive_seed(c.seed, 40, static_cast<std::uint64_t>(S));
      const double acc = suite_accuracy(c.sc.instances, [&](long i) {
        Rng rng(derive_seed(s, 1, static_cast<std::uint64_t>(i)));
        const int n_sig = static_cast<int>(rng.uniform_int(0, max_sig));
        const int n_noise = static_cast<int>(rng.uniform_int(0, c.sc.max_noise));
        const auto x = gen_sc(n_sig, n_noise, layout, derive_seed(s, 0, static_cast<std::uint64_t>(i)));
        return decode_sc(m, layout, x) == x.answers;
      });
      record(std::string("sc_") + to_string(v), S, c.sc.max_noise + max_sig + 1, c.sc.instances, acc);
    }
  }

  res.report = {{"run_id", id}, {"suites", suites}, {"pass", pass}};
  const auto path = output_path(opts, "verify", id, "json");
  write_text(path, res.report.dump(2) + "\n");
  res.outputs.push_back(path);
  res.exit_code = pass ? 0 : 1;
  return res;
}

CatModel make_audit_model(const AuditModelConfig& mc, int build_length, const Vocab& vocab) {
  const Filter f(mc.f_v_taps, mc.f_v_t_min);
  if (!mc.eps0_target) return build_audit_model(f, vocab.dim(), AttnMode::hard());
  const double gap = std::min(1.0, cosine_gap(vocab));
  return build_audit_model(f, vocab.dim(), AttnMode::soft(nar_temperature(gap, build_length, *mc.eps0_target)));
}

CommandResult cmd_lengen(const LengenConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  const Vocab vocab = Vocab::orthonormal(c.model.vocab_size, c.model.vocab_size);
  const CatModel m = make_audit_model(c.model, c.build_length, vocab);
  const EpsilonResult build = measure_epsilon(m, vocab, c.build_length, c.instances, true, derive_seed(c.seed, 0));
  const double eps0 = epsilon0(build.epsilon, vocab);
  const auto curve = length_gen_curve(m, vocab, c.lengths, c.instances, eps0, c.seed);
  bool pass = true;
  json pts = json::array();
  for (const auto& p : curve) {
    log << "L'=" << p.L_prime << " max_error=" << p.max_error << " accuracy=" << p.accuracy << "\n";
    if (c.expect_accuracy) pass = pass && p.accuracy == *c.expect_accuracy;
    pts.push_back({{"L_prime", p.L_prime}, {"max_error", p.max_error}, {"accuracy", p.accuracy}});
  }
  std::ostringstream csv;
  write_lengen_csv(csv, curve);
  const auto path = output_path(opts, "lengen", id, "csv");
  write_text(path, csv.str());
  res.outputs.push_back(path);
  res.report = {{"run_id", id}, {"epsilon_at_build", build.epsilon}, {"epsilon0", eps0}, {"curve", pts}, {"pass", pass}};
  res.exit_code = pass ? 0 : 1;
  return res;
}

CommandResult cmd_audit(const AuditConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  const Vocab vocab = Vocab::orthonormal(c.model.vocab_size, c.model.vocab_size);
  const CatModel m = make_audit_model(c.model, c.build_length, vocab);
  const AuditReport r = run_audit(m, vocab, c.build_length, c.lengths, c.instances, c.seed);
  const bool pass = r.lemma_regime && check_filter_bound(r) && check_golden_map_bound(r);
  res.report = to_json(r);
  res.report["run_id"] = id;
  res.report["pass"] = pass;
  log << "epsilon=" << r.epsilon << " epsilon0=" << r.epsilon0 << " filter_l1=" << r.filter_l1_to_delay
      << " r_hat=" << r.r_hat << (pass ? " PASS" : " FAIL") << "\n";
  const auto path = output_path(opts, "audit", id, "json");
  write_text(path, res.report.dump(2) + "\n");
  res.outputs.push_back(path);
  res.exit_code = pass ? 0 : 1;
  return res;
}

CommandResult cmd_phase(const PhaseConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  LcatConfig base;
  base.L = c.L;
  base.sigma2 = c.sigma2;
  base.filter = c.filter;
  base.mode = c.mode;
  const auto points = phase_transition(base, c.block_sizes, c.trials, c.seed);
  bool pass = true;
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    log << "B=" << p.B << " d_10=" << p.d_10 << " d_50=" << p.d_50 << " d_90=" << p.d_90 << " d_theory=" << p.d_theory
        << (p.non_monotone ? " NonMonotone" : "") << "\n";
    pass = pass && !p.non_monotone;
    if (i > 0 && points[i - 1].B < p.B) pass = pass && points[i - 1].d_50 <= p.d_50;
  }
  std::ostringstream csv;
  write_phase_csv(csv, points);
  const auto path = output_path(opts, "lcat-phase", id, "csv");
  write_text(path, csv.str());
  res.outputs.push_back(path);
  res.report = {{"run_id", id}, {"points", points.size()}, {"pass", pass}};
  res.exit_code = pass ? 0 : 1;
  return res;
}

CommandResult cmd_gen_tasks(const GenTasksConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  const ScLayout layout{c.num_signal, c.num_noise};
  long invalid = 0;
  for (bool train : {true, false}) {
    if ((train ? c.train : c.test) == 0) continue;
    const auto split = generate_split(c, train);
    for (const auto& inst : split) invalid += check_instance(inst, c.vocab_size, layout) ? 0 : 1;
    const auto path = output_path(opts, train ? "train" : "test", id, "jsonl");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
    write_jsonl(f, split);
    res.outputs.push_back(path);
    log << (train ? "train" : "test") << ": " << split.size() << " instances -> " << path.string() << "\n";
  }
  res.report = {{"run_id", id}, {"invalid", invalid}, {"pass", invalid == 0}};
  res.exit_code = invalid == 0 ? 0 : 1;
  return res;
}

CommandResult cmd_sc_demo(const ScDemoConfig& c, const RunOptions& opts, const std::string& id, std::ostream& log) {
  CommandResult res;
  const int max_sig = std::min(c.num_signal, c.max_signals);
  const ScLayout layout{c.num_signal, 4};
  const int T = c.max_noise + 2 * max_sig + 2;
  json rows = json::array();
  bool pass = true;
  for (ScVariant v : {ScVariant::InfiniteFilterNoPE, ScVariant::WindowNWithPE}) {
    const ScModel m = build_sc_model(c.num_signal, 1, v, T, std::max(1, max_sig));
    for (int i = 0; i < c.instances; ++i) {
      Rng rng(derive_seed(c.seed, 50, static_cast<std::uint64_t>(i)));
      const int n_sig = static_cast<int>(rng.uniform_int(0, max_sig));
      const int n_noise = static_cast<int>(rng.uniform_int(0, c.max_noise));
      const auto x = gen_sc(n_sig, n_noise, layout, derive_seed(c.seed, 51, static_cast<std::uint64_t>(i)));
      const auto y = decode_sc(m, layout, x);
      const bool ok = y == x.answers;
      pass = pass && ok;
      rows.push_back({{"variant", to_string(v)}, {"prompt", x.tokens}, {"expected", x.answers}, {"decoded", y}, {"exact", ok}});
      log << to_string(v) << " #" << i << " signals=" << x.answers.size() << (ok ? " exact" : " MISMATCH") << "\n";
    }
  }
  res.report = {{"run_id", id}, {"bot", layout.bot()}, {"instances", rows}, {"pass", pass}};
  const auto path = output_path(opts, "sc-demo", id, "json");
  write_text(path, res.report.dump(2) + "\n");
  res.outputs.push_back(path);
  res.exit_code = pass ? 0 : 1;
  return res;
}

template <class Config, class Parse, class Run>
CommandResult dispatch(const std::string& name, const json& config, const RunOptions& opts, std::ostream& log,
                       Parse&& parse, Run&& run) {
  const auto start = std::chrono::steady_clock::now();
  Config c = parse(config);
  const std::optional<std::uint64_t> cfg_seed =
      config.is_object() && config.contains("seed") ? std::optional<std::uint64_t>(c.seed) : std::nullopt;
  c.seed = resolve_seed(opts.seed, std::getenv("CATLAB_SEED"), cfg_seed);
  const json canonical = to_json(c);
  const std::string id = make_run_id(json{{"command", name}, {"config", canonical}});
  std::filesystem::create_directories(opts.out_dir);
  if (opts.jobs > 0) omp_set_num_threads(opts.jobs);

  CommandResult res = run(c, opts, id, log);
  res.run_id = id;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json outputs = json::array();
  for (const auto& p : res.outputs) outputs.push_back(p.filename().string());
  const json manifest = {{"run_id", id},
                         {"command", name},
                         {"version", CATLAB_VERSION},
                         {"config", canonical},
                         {"outputs", outputs},
                         {"exit_code", res.exit_code},
                         {"wall_clock_seconds", wall}};
  const auto mpath = output_path(opts, "manifest", id, "json");
  write_text(mpath, manifest.dump(2) + "\n");
  res.outputs.push_back(mpath);
  log << "run " << id << " manifest " << mpath.string() << "\n";
  return res;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"verify-constructions", "lengen-sweep", "lcat-phase",
                                              "gen-tasks",            "sc-demo",      "audit"};
  return names;
}

CommandResult run_command(const std::string& name, const json& config, const RunOptions& opts, std::ostream& log) {
  if (name == "verify-constructions") return dispatch<VerifyConfig>(name, config, opts, log, parse_verify_config, cmd_verify);
  if (name == "lengen-sweep") return dispatch<LengenConfig>(name, config, opts, log, parse_lengen_config, cmd_lengen);
  if (name == "lcat-phase") return dispatch<PhaseConfig>(name, config, opts, log, parse_phase_config, cmd_phase);
  if (name == "gen-tasks") return dispatch<GenTasksConfig>(name, config, opts, log, parse_gen_tasks_config, cmd_gen_tasks);
  if (name == "sc-demo") return dispatch<ScDemoConfig>(name, config, opts, log, parse_sc_demo_config, cmd_sc_demo);
  if (name == "audit") return dispatch<AuditConfig>(name, config, opts, log, parse_audit_config, cmd_audit);
  throw Error(ErrorKind::InvalidConfig, "unknown command '" + name + "'");
}

}  // namespace catlab
