#include "catlab/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "catlab/rng.hpp"

namespace catlab {

void check_audit_form(const CatModel& m) {
  m.validate();
  auto fail = [](const std::string& why) { throw Error(ErrorKind::StructureViolation, why); };
  if (!(m.f_k == Filter::delay(0)) || !(m.f_q == Filter::delay(0)) || m.key_post_delay != 0) {
    fail("audited models use identity key and query filters");
  }
  if (m.normalize_k || m.normalize_q || m.normalize_v) fail("audited models do not normalize");
  const double s = m.w_v(0, 0);
  if ((m.w_v - s * Matrix::Identity(m.dim(), m.dim())).cwiseAbs().maxCoeff() > 0.0) {
    fail("value weight must be a multiple of the identity");
  }
  for (double t : m.f_v.taps()) {
    if (t < 0.0) fail("value filter has a negative tap");
  }
}

CatModel build_audit_model(const Filter& f_v, int d, AttnMode temp) {
  CatModel m;
  m.f_v = f_v;
  m.w_v = 2.0 * Matrix::Identity(d, d);
  if (temp.is_hard()) {
    m.w_k = Matrix::Identity(d, d);
    m.w_q = Matrix::Identity(d, d);
  } else {
    m.w_k = std::sqrt(temp.c) * Matrix::Identity(d, d);
    m.w_q = std::sqrt(temp.c) * Matrix::Identity(d, d);
    m.attn = AttnMode::soft(1.0);
  }
  check_audit_form(m);
  return m;
}

double filter_l1_to_delay(const CatModel& m) {
  const double s = m.w_v(0, 0) / 2.0;
  std::vector<double> taps = m.f_v.taps();
  for (double& t : taps) t *= s;
  return l1_distance(Filter(std::move(taps), m.f_v.t_min()), Filter::delay(-1));
}

std::vector<TaskInstance> adversarial_family(const CatModel& m, const Vocab& vocab, int L) {
  if (vocab.size() < 2) throw Error(ErrorKind::InvalidInput, "adversarial family needs two tokens");
  if (L < 2) throw Error(ErrorKind::InvalidInput, "adversarial family needs L >= 2");
  const Matrix w = m.w_k * m.w_q.transpose();
  const Matrix wq_all = vocab.embeddings() * w * vocab.embeddings().transpose();  // (x, q) -> x^T W q

  std::vector<int> positions;
  if (L <= kAdversarialFullUpTo) {
    for (int i = 0; i <= L - 2; ++i) positions.push_back(i);
  } else {
    for (int k = 0; k < kAdversarialSampled; ++k) {
      positions.push_back(static_cast<int>(std::llround(static_cast<double>(k) * (L - 2) / (kAdversarialSampled - 1))));
    }
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  }

  std::vector<TaskInstance> out;
  for (int q = 0; q < std::min(kAdversarialQueries, vocab.size()); ++q) {
    int v = q == 0 ? 1 : 0;
    for (int x = 0; x < vocab.size(); ++x) {
      if (x != q && wq_all(x, q) > wq_all(v, q)) v = x;
    }
    for (int i : positions) {
      TaskInstance inst;
      inst.kind = TaskKind::AR;
      inst.tokens.assign(static_cast<size_t>(L), v);
      inst.tokens[static_cast<size_t>(i)] = q;
      inst.tokens[static_cast<size_t>(L - 1)] = q;
      inst.queries = {{L - 1, 1}};
      inst.answers = {inst.tokens[static_cast<size_t>(i + 1)]};
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::vector<double> golden_map(const TaskInstance& inst) {
  std::vector<double> g(inst.tokens.size(), 0.0);
  const int q = inst.tokens.back();
  for (size_t j = 0; j < g.size(); ++j) {
    if (inst.tokens[j] == q) g[j] = 0.5;
  }
  return g;
}

namespace {

struct InstanceEval {
  double error;
  double map_l1;
  bool correct;
};

InstanceEval evaluate(const CatModel& m, const Vocab& vocab, const TaskInstance& inst) {
  const int L = static_cast<int>(inst.tokens.size());
  const CatProjections p = cat_project(embed(inst.tokens, vocab), m);
  const std::vector<double> a = cat_attention_map(p, m, L - 1);
  const Vector out = p.values.transpose() * Eigen::Map<const Vector>(a.data(), L);
  const std::vector<double> g = golden_map(inst);
  double l1 = 0.0;
  for (int j = 0; j < L; ++j) l1 += std::abs(a[static_cast<size_t>(j)] - g[static_cast<size_t>(j)]);
  const int ans = inst.answers.front();
  return {(vocab.row(ans).transpose() - out).norm(), l1, nearest_token(out, vocab) == ans};
}

EpsilonResult measure(const CatModel& m, const Vocab& vocab, int L, int suite_size, bool include_adversarial,
                      std::uint64_t seed, bool parallel) {
  check_audit_form(m);
  if (suite_size < 1) throw Error(ErrorKind::InvalidInput, "suite must be nonempty");
  std::vector<TaskInstance> adv;
  if (include_adversarial) adv = adversarial_family(m, vocab, L);
  const long n_random = suite_size;
  const long n_total = n_random + static_cast<long>(adv.size());

  double eps = 0.0;
  double map_max = 0.0;
  long hits = 0;
#pragma omp parallel for schedule(dynamic, 8) reduction(max : eps, map_max) reduction(+ : hits) if (parallel)
  for (long k = 0; k < n_total; ++k) {
    const InstanceEval e = k < n_random
                               ? evaluate(m, vocab, gen_ar(L, vocab.size(), derive_seed(seed, 0, static_cast<std::uint64_t>(k))))
                               : evaluate(m, vocab, adv[static_cast<size_t>(k - n_random)]);
    eps = std::max(eps, e.error);
    map_max = std::max(map_max, e.map_l1);
    if (k < n_random && e.correct) ++hits;
  }
  return {eps, static_cast<double>(hits) / static_cast<double>(n_random), map_max, n_total};
}

}  // namespace

EpsilonResult measure_epsilon(const CatModel& m, const Vocab& vocab, int L, int suite_size, bool include_adversarial,
                              std::uint64_t seed) {
  return measure(m, vocab, L, suite_size, include_adversarial, seed, true);
}

EpsilonResult measure_epsilon_serial(const CatModel& m, const Vocab& vocab, int L, int suite_size,
                                     bool include_adversarial, std::uint64_t seed) {
  return measure(m, vocab, L, suite_size, include_adversarial, seed, false);
}

double golden_map_distance(const CatModel& m, const Vocab& vocab, const TaskInstance& inst) {
  return evaluate(m, vocab, inst).map_l1;
}

double epsilon0(double eps, const Vocab& vocab) {
  const double delta = min_embedding_distance(vocab);
  if (!(delta > 0.0)) throw Error(ErrorKind::DegenerateVocab, "minimum embedding distance is zero");
  return eps / delta;
}

double epsilon0(double eps, int N, const std::vector<Vector>& tokens) {
  const double delta = gram_schmidt_delta(tokens);
  if (!(delta > 0.0)) throw Error(ErrorKind::DegenerateVocab, "tokens are linearly dependent");
  return eps * std::exp(2.0 * N / delta) / delta;
}

bool check_filter_bound(const AuditReport& r) {
  return r.filter_l1_to_delay <= r.build_length * r.epsilon0;
}

bool check_golden_map_bound(const AuditReport& r) {
  return std::all_of(r.lengen.begin(), r.lengen.end(),
                     [&](const LengenPoint& p) { return p.map_l1_max <= p.L_prime * r.epsilon0; });
}

std::vector<LengenPoint> length_gen_curve(const CatModel& m, const Vocab& vocab, const std::vector<int>& lengths,
                                          int suite_size, double eps0, std::uint64_t seed) {
  std::vector<LengenPoint> out;
  for (int Lp : lengths) {
    const EpsilonResult e = measure_epsilon(m, vocab, Lp, suite_size, true, derive_seed(seed, 1, static_cast<std::uint64_t>(Lp)));
    LengenPoint p;
    p.L_prime = Lp;
    p.max_error = e.epsilon;
    p.accuracy = e.accuracy;
    p.map_l1_max = e.map_l1_max;
    p.r_hat = eps0 > 0.0 ? e.epsilon / (Lp * eps0) : 0.0;
    out.push_back(p);
  }
  return out;
}

AuditReport run_audit(const CatModel& m, const Vocab& vocab, int build_length, const std::vector<int>& lengths,
                      int suite_size, std::uint64_t seed) {
  AuditReport r;
  r.build_length = build_length;
  const EpsilonResult e = measure_epsilon(m, vocab, build_length, suite_size, true, derive_seed(seed, 0));
  r.epsilon = e.epsilon;
  r.epsilon0 = epsilon0(e.epsilon, vocab);
  r.filter_l1_to_delay = filter_l1_to_delay(m);
  r.lengen = length_gen_curve(m, vocab, lengths, suite_size, r.epsilon0, seed);
  r.map_l1_max = e.map_l1_max;
  for (const auto& p : r.lengen) {
    r.map_l1_max = std::max(r.map_l1_max, p.map_l1_max);
    r.r_hat = std::max(r.r_hat, p.r_hat);
  }
  r.lemma_regime = r.epsilon0 <= kR0;
  r.theorem_regime = r.epsilon0 <= kR0 / build_length;
  return r;
}

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.lengen) {
    curve.push_back({{"L_prime", p.L_prime}, {"max_error", p.max_error}, {"accuracy", p.accuracy},
                     {"map_l1_max", p.map_l1_max}, {"r_hat", p.r_hat}});
  }
  return {{"build_length", r.build_length},
          {"epsilon", r.epsilon},
          {"epsilon0", r.epsilon0},
          {"filter_l1_to_delay", r.filter_l1_to_delay},
          {"map_l1_max", r.map_l1_max},
          {"r_hat", r.r_hat},
          {"lemma_regime", r.lemma_regime},
          {"theorem_regime", r.theorem_regime},
          {"filter_bound_holds", check_filter_bound(r)},
          {"golden_map_bound_holds", check_golden_map_bound(r)},
          {"lengen", curve}};
}

void write_lengen_csv(std::ostream& os, const std::vector<LengenPoint>& curve) {
  os << "L_prime,max_error,accuracy\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", p.L_prime, p.max_error, p.accuracy);
    os << buf;
  }
}

}  // namespace catlab
