#include "catlab/lcat.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "catlab/rng.hpp"

namespace catlab {

namespace {

constexpr double kValueTol = 1e-6;
// Full mode materializes L x d; beyond this it is not practical.
constexpr long kFullModeMaxL = 1L << 16;

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

// Max of n i.i.d. standard normals from one uniform: Phi^{-1}(u^{1/n}),
// evaluated through the upper tail to keep precision near 1.
double sample_normal_max(Rng& rng, long n) {
  double u = rng.uniform01();
  if (u <= 0.0) u = 0x1p-60;
  const double upper = -std::expm1(std::log(u) / static_cast<double>(n));
  return boost::math::quantile(boost::math::complement(kStdNormal, upper));
}

long draw_planted(const LcatConfig& cfg, Rng& rng) {
  return rng.uniform_int(0, (cfg.num_blocks() - 1) * cfg.B - 1);
}

EmbeddedSeq sample_noise(const LcatConfig& cfg, Rng& rng) {
  const double s = std::sqrt(cfg.sigma2 / cfg.d);
  EmbeddedSeq x(cfg.L, cfg.d);
  for (long i = 0; i < cfg.L; ++i) {
    for (int j = 0; j < cfg.d; ++j) x(i, j) = s * rng.normal();
  }
  return x;
}

long argmax_lowest(const Vector& g) {
  long best = 0;
  for (long b = 1; b < g.size(); ++b) {
    if (g[b] > g[best]) best = b;
  }
  return best;
}

AttnMode local_mode(const LcatConfig& cfg) {
  return cfg.local_c > 0.0 ? AttnMode::soft(cfg.local_c) : AttnMode::hard();
}

// Token j of a context whose rows `p` and L-1 are replaced by `q`.
struct QueryView {
  const EmbeddedSeq& x;
  const Vector& q;
  long planted;

  Vector row(long j) const {
    const long L = x.rows();
    if (j >= L) return Vector::Zero(x.cols());
    if (j == planted || j == L - 1) return q;
    return x.row(j).transpose();
  }
};

// Hard block retrieval and local attention for one query; the landmark scores
// `g` already reflect the planted copy.
bool answer_query(const LcatConfig& cfg, const QueryView& v, const Vector& g, long* retrieved, OpCounter* ops) {
  const long nb = cfg.num_blocks();
  const long b = argmax_lowest(g);
  if (retrieved) *retrieved = b;
  std::vector<long> keys;
  for (long j = cfg.block_begin(nb - 1); j < cfg.L; ++j) keys.push_back(j);
  for (long j = cfg.block_begin(b); j < cfg.block_end(b); ++j) keys.push_back(j);
  std::vector<double> scores(keys.size());
  for (size_t k = 0; k < keys.size(); ++k) scores[k] = v.row(keys[k]).dot(v.q);
  const std::vector<double> w = attention_weights(scores, local_mode(cfg));
  Vector y = Vector::Zero(cfg.d);
  for (size_t k = 0; k < keys.size(); ++k) y += w[k] * 2.0 * v.row(keys[k] + 1);
  if (ops) ops->macs += 2LL * cfg.d * static_cast<long long>(keys.size());
  return (y - v.row(v.planted + 1)).norm() <= kValueTol;
}

TrialOutcome run_full(const LcatConfig& cfg, std::uint64_t seed, OpCounter* ops) {
  const RandomContext ctx = sample_random_context(cfg, seed);
  const Matrix lm = build_landmarks(ctx.x, cfg);
  const long nb = cfg.num_blocks();
  const Vector q = ctx.x.row(ctx.query).transpose();
  const Vector g = lm.topRows(nb - 1) * q;
  if (ops) ops->macs += static_cast<long long>(cfg.d) * (nb - 1);

  TrialOutcome out;
  out.seed = seed;
  out.planted = ctx.planted;
  const QueryView view{ctx.x, q, ctx.planted};
  out.value_correct = answer_query(cfg, view, g, &out.retrieved_block, ops);
  out.block_correct = out.retrieved_block == ctx.planted / cfg.B;
  return out;
}

TrialOutcome run_reduced(const LcatConfig& cfg, std::uint64_t seed) {
  if (cfg.local_c > 0.0) throw Error(ErrorKind::InvalidConfig, "Reduced mode simulates hard local attention only");
  Rng rng(seed);
  const long nb = cfg.num_blocks();
  const double s = std::sqrt(cfg.sigma2 / cfg.d);
  TrialOutcome out;
  out.seed = seed;
  out.planted = draw_planted(cfg, rng);
  const long beta = out.planted / cfg.B;

  // Correlations with q of the other tokens in the planted block.
  double local_max = -INFINITY;
  auto planted_block_noise = [&](auto&& weight) {
    double acc = 0.0;
    for (long j = cfg.block_begin(beta); j < cfg.block_end(beta); ++j) {
      if (j == out.planted) continue;
      const double c = s * rng.normal();
      local_max = std::max(local_max, c);
      acc += weight(j) * c;
    }
    return acc;
  };

  bool block_ok = false;
  if (cfg.filter == LcatFilter::BlockMean) {
    const double noise_max = nb > 2 ? s * std::sqrt(static_cast<double>(cfg.B)) * sample_normal_max(rng, nb - 2) : -INFINITY;
    const double g_beta = 1.0 + planted_block_noise([](long) { return 1.0; });
    block_ok = g_beta > noise_max;
    out.retrieved_block = block_ok ? beta : -1;
  } else {
    const double rho = cfg.decay();
    const double rho_b = std::pow(rho, cfg.B);
    const double innov_sd = s * std::sqrt((1.0 - std::pow(rho, 2.0 * cfg.B)) / (1.0 - rho * rho));
    double g = 0.0;
    double g_beta = 0.0;
    double other_max = -INFINITY;
    long other_arg = -1;
    for (long b = 0; b + 1 < nb; ++b) {
      const long end = cfg.block_end(b) - 1;
      double innov;
      if (b == beta) {
        innov = std::pow(rho, static_cast<double>(end - out.planted)) +
                planted_block_noise([&](long j) { return std::pow(rho, static_cast<double>(end - j)); });
      } else {
        innov = innov_sd * rng.normal();
      }
      g = rho_b * g + innov;
      if (b == beta) {
        g_beta = g;
      } else if (g > other_max) {
        other_max = g;
        other_arg = b;
      }
    }
    // Ties go to the lower index.
    block_ok = g_beta > other_max || (g_beta == other_max && beta < other_arg);
    out.retrieved_block = block_ok ? beta : other_arg;
  }
  const long final_others = cfg.L - cfg.block_begin(nb - 1) - 1;
  if (final_others > 0) local_max = std::max(local_max, s * sample_normal_max(rng, final_others));
  out.block_correct = block_ok;
  out.value_correct = block_ok && local_max < 1.0;
  return out;
}

SuccessCounts counts(const LcatConfig& cfg, long trials, std::uint64_t seed, bool parallel) {
  cfg.validate();
  long block = 0;
  long value = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : block, value) if (parallel)
  for (long k = 0; k < trials; ++k) {
    const TrialOutcome o = run_trial(cfg, derive_seed(seed, 0, static_cast<std::uint64_t>(k)));
    block += o.block_correct;
    value += o.value_correct;
  }
  return {trials, block, value};
}

}  // namespace

const char* to_string(LcatFilter f) { return f == LcatFilter::BlockMean ? "BlockMean" : "ExpSmoothing"; }
const char* to_string(SimMode m) { return m == SimMode::Full ? "Full" : "Reduced"; }

LcatFilter lcat_filter_from_string(const std::string& s) {
  if (s == "BlockMean") return LcatFilter::BlockMean;
  if (s == "ExpSmoothing") return LcatFilter::ExpSmoothing;
  throw Error(ErrorKind::InvalidConfig, "unknown filter kind '" + s + "'");
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "Full") return SimMode::Full;
  if (s == "Reduced") return SimMode::Reduced;
  throw Error(ErrorKind::InvalidConfig, "unknown simulation mode '" + s + "'");
}

double LcatConfig::decay() const { return rho > 0.0 ? rho : std::exp(-1.0 / B); }

void LcatConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::InvalidConfig, why); };
  if (B < 1) fail("block size must be positive");
  if (B > L) fail("block size " + std::to_string(B) + " exceeds context length " + std::to_string(L));
  if (num_blocks() < 2) fail("need at least two blocks");
  if (d < 1) fail("embedding dimension must be positive");
  if (!(sigma2 > 0.0)) fail("noise variance must be positive");
  if (rho < 0.0 || rho >= 1.0) fail("decay must lie in (0, 1)");
  if (local_c < 0.0) fail("local attention scale must be nonnegative");
  if (mode == SimMode::Full && L > kFullModeMaxL) fail("Full mode is limited to L <= 65536");
}

RandomContext sample_random_context(const LcatConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  RandomContext ctx;
  ctx.planted = draw_planted(cfg, rng);
  ctx.query = cfg.L - 1;
  ctx.x = sample_noise(cfg, rng);
  ctx.x.row(ctx.planted).setZero();
  ctx.x(ctx.planted, 0) = 1.0;
  ctx.x.row(ctx.query) = ctx.x.row(ctx.planted);
  return ctx;
}

Matrix build_landmarks(const EmbeddedSeq& x, const LcatConfig& cfg) {
  if (x.rows() != cfg.L || x.cols() != cfg.d) throw Error(ErrorKind::InvalidInput, "context shape does not match config");
  const long nb = cfg.num_blocks();
  Matrix lm = Matrix::Zero(nb, cfg.d);
  if (cfg.filter == LcatFilter::BlockMean) {
    for (long b = 0; b < nb; ++b) {
      const long end = cfg.block_end(b);
      const long begin = std::max(0L, end - cfg.B);
      lm.row(b) = x.middleRows(begin, end - begin).colwise().sum();
    }
    return lm;
  }
  const double rho = cfg.decay();
  Eigen::RowVectorXd k = Eigen::RowVectorXd::Zero(cfg.d);
  long b = 0;
  for (long t = 0; t < cfg.L; ++t) {
    k = rho * k + x.row(t);
    if (t == cfg.block_end(b) - 1) lm.row(b++) = k;
  }
  return lm;
}

TrialOutcome run_trial(const LcatConfig& cfg, std::uint64_t seed, OpCounter* ops) {
  cfg.validate();
  return cfg.mode == SimMode::Full ? run_full(cfg, seed, ops) : run_reduced(cfg, seed);
}

SuccessCounts success_counts(const LcatConfig& cfg, long trials, std::uint64_t seed) {
  return counts(cfg, trials, seed, true);
}

SuccessCounts success_counts_serial(const LcatConfig& cfg, long trials, std::uint64_t seed) {
  return counts(cfg, trials, seed, false);
}

long theoretical_threshold(const LcatConfig& cfg, double t, ThresholdKind kind, double eps, int r) {
  const long nb = cfg.num_blocks();
  if (nb < 2) throw Error(ErrorKind::InvalidConfig, "threshold needs at least two blocks");
  const double log_nb = std::log(static_cast<double>(nb));
  const double scale = 2.0 * cfg.sigma2 * cfg.B;
  auto up = [](double v) { return static_cast<long>(std::ceil(v - 1e-9)); };
  switch (kind) {
    case ThresholdKind::Sufficient: return up(scale * std::pow(std::sqrt(log_nb) + t, 2));
    case ThresholdKind::Converse: {
      const double a = std::max(0.0, std::sqrt((1.0 - eps) * log_nb) - t);
      return static_cast<long>(std::floor(scale * a * a + 1e-9));
    }
    case ThresholdKind::Uniform: return up(scale * std::pow(std::sqrt(log_nb) + std::sqrt(static_cast<double>(r)) + t, 2));
    case ThresholdKind::ExpSmoothing: return up(25.0 * scale * std::pow(std::sqrt(log_nb) + t, 2));
  }
  return 0;
}

long critical_dimension(const LcatConfig& cfg, double target, long trials, std::uint64_t seed, bool* non_monotone) {
  std::map<long, double> cache;
  auto rate = [&](long d) {
    auto it = cache.find(d);
    if (it != cache.end()) return it->second;
    LcatConfig c = cfg;
    c.d = static_cast<int>(d);
    return cache[d] = success_counts(c, trials, seed).rate();
  };
  if (non_monotone) *non_monotone = false;
  if (rate(1) >= target) return 1;
  const ThresholdKind kind = cfg.filter == LcatFilter::BlockMean ? ThresholdKind::Sufficient : ThresholdKind::ExpSmoothing;
  long hi = std::max(2L, 2 * theoretical_threshold(cfg, 2.0, kind));
  int widen = 0;
  while (rate(hi) < target) {
    if (widen == 2) {
      if (non_monotone) *non_monotone = true;
      return -1;
    }
    hi *= 4;
    ++widen;
  }
  long lo = 1;
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    (rate(mid) >= target ? hi : lo) = mid;
  }
  return hi;
}

std::vector<PhasePoint> phase_transition(const LcatConfig& base, const std::vector<int>& block_sizes, long trials,
                                         std::uint64_t seed) {
  std::vector<PhasePoint> out;
  for (int B : block_sizes) {
    LcatConfig cfg = base;
    cfg.B = B;
    cfg.validate();
    const std::uint64_t s = derive_seed(seed, 2, static_cast<std::uint64_t>(B));
    PhasePoint p;
    p.B = B;
    p.L = cfg.L;
    p.sigma2 = cfg.sigma2;
    p.filter = cfg.filter;
    p.trials = trials;
    bool nm = false;
    p.d_10 = critical_dimension(cfg, 0.1, trials, s, &nm);
    p.non_monotone |= nm;
    p.d_50 = critical_dimension(cfg, 0.5, trials, s, &nm);
    p.non_monotone |= nm;
    p.d_90 = critical_dimension(cfg, 0.9, trials, s, &nm);
    p.non_monotone |= nm;
    p.d_theory = theoretical_threshold(
        cfg, 0.0, cfg.filter == LcatFilter::BlockMean ? ThresholdKind::Sufficient : ThresholdKind::ExpSmoothing);
    out.push_back(p);
  }
  return out;
}

void write_phase_csv(std::ostream& os, const std::vector<PhasePoint>& points) {
  os << "B,L,sigma2,filter_kind,d_10,d_50,d_90,d_theory,trials\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.12g,%s,%ld,%ld,%ld,%ld,%ld\n", p.B, p.L, p.sigma2, to_string(p.filter),
                  p.d_10, p.d_50, p.d_90, p.d_theory, p.trials);
    os << buf;
  }
}

double uniform_query_rate(const LcatConfig& cfg_in, int r, int M, long trials, std::uint64_t seed) {
  LcatConfig cfg = cfg_in;
  cfg.mode = SimMode::Full;
  cfg.validate();
  if (r < 0 || r > cfg.d) throw Error(ErrorKind::InvalidConfig, "subspace dimension must lie in [0, d]");
  if (M < 1 || trials < 1) throw Error(ErrorKind::InvalidConfig, "need M >= 1 and trials >= 1");
  const long nb = cfg.num_blocks();
  const double rho = cfg.decay();
  long ok = 0;
#pragma omp parallel for schedule(dynamic, 4) reduction(+ : ok)
  for (long k = 0; k < trials; ++k) {
    const std::uint64_t trial_seed = derive_seed(seed, 0, static_cast<std::uint64_t>(k));
    // Noise-only context; query rows are substituted per query.
    Rng noise_rng(trial_seed);
    const EmbeddedSeq x = sample_noise(cfg, noise_rng);
    const Matrix lm = build_landmarks(x, cfg);
    bool all = true;
    for (int m = 0; m < M && all; ++m) {
      Rng rng(derive_seed(trial_seed, 1, static_cast<std::uint64_t>(m)));
      Vector q = Vector::Zero(cfg.d);
      if (r == 0) {
        q[0] = 1.0;
      } else {
        for (int i = 0; i < r; ++i) q[i] = rng.normal();
        q.normalize();
      }
      const long p = draw_planted(cfg, rng);
      Vector g = lm.topRows(nb - 1) * q;
      // Replace x_p by q in the affected landmarks.
      const double shift = 1.0 - x.row(p).dot(q);
      const long beta = p / cfg.B;
      if (cfg.filter == LcatFilter::BlockMean) {
        g[beta] += shift;
      } else {
        for (long b = beta; b + 1 < nb; ++b) g[b] += std::pow(rho, static_cast<double>(cfg.block_end(b) - 1 - p)) * shift;
      }
      all = answer_query(cfg, QueryView{x, q, p}, g, nullptr, nullptr);
    }
    ok += all;
  }
  return static_cast<double>(ok) / static_cast<double>(trials);
}

Complexity complexity_count(const LcatConfig& cfg) {
  cfg.validate();
  const long nb = cfg.num_blocks();
  const long final_size = cfg.L - cfg.block_begin(nb - 1);
  Complexity c;
  c.lcat_ops = static_cast<long long>(cfg.d) * (nb - 1) + 2LL * cfg.d * (final_size + cfg.B);
  c.dense_ops = 2LL * cfg.d * cfg.L;
  c.capacity = static_cast<long long>(cfg.d) * nb;
  c.capacity_ok = c.capacity >= cfg.L;
  return c;
}

double two_proportion_p(long x1, long n1, long x2, long n2) {
  if (n1 < 1 || n2 < 1) throw Error(ErrorKind::InvalidInput, "z-test needs nonempty samples");
  const double p1 = static_cast<double>(x1) / n1;
  const double p2 = static_cast<double>(x2) / n2;
  const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (!(se > 0.0)) return p1 == p2 ? 1.0 : 0.0;
  const double z = std::abs(p1 - p2) / se;
  return 2.0 * boost::math::cdf(boost::math::complement(kStdNormal, z));
}

}  // namespace catlab
