#include "catlab/constructions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "catlab/rng.hpp"

namespace catlab {

namespace {

constexpr double kMaxGapSignatures = 2e4;
constexpr int kProjections = 4;
// |r.(a - b)| <= |a - b| <= sqrt(2 (1 - kParallelCos)) for unit r.
const double kProjWindow = std::sqrt(2.0 * (1.0 - kParallelCos)) * 1.01;
constexpr std::uint64_t kProjectionSeed = 0x5167a7u;

void check_filter(const Filter& f, int N) {
  if (N < 1) throw Error(ErrorKind::InvalidInput, "N must be positive");
  if (!f.is_causal() || f.t_max() >= N) {
    throw Error(ErrorKind::InvalidInput, "signature filter must be causal with support inside [0, N)");
  }
}

double ipow(double base, int exp) {
  double r = 1.0;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::vector<int> decode_index(long long idx, int V, int N) {
  std::vector<int> g(static_cast<size_t>(N));
  for (int i = N - 1; i >= 0; --i) {
    g[static_cast<size_t>(i)] = static_cast<int>(idx % V);
    idx /= V;
  }
  return g;
}

// Unnormalized sum_{j} f(j) x_{m-1-j} over a token window of length m.
Vector window_sum(const Filter& f, const Vocab& vocab, const std::vector<int>& tokens) {
  const int m = static_cast<int>(tokens.size());
  Vector s = Vector::Zero(vocab.dim());
  for (int j = 0; j < m; ++j) {
    const double w = f.at(j);
    if (w != 0.0) s += w * vocab.row(tokens[static_cast<size_t>(m - 1 - j)]).transpose();
  }
  return s;
}

Matrix scaled_identity(int d, double s) { return s * Matrix::Identity(d, d); }

void set_temperature(CatModel& m, int d, AttnMode temp) {
  if (temp.is_hard()) {
    m.w_k = Matrix::Identity(d, d);
    m.w_q = Matrix::Identity(d, d);
    m.attn = AttnMode::hard();
  } else {
    m.w_k = scaled_identity(d, std::sqrt(temp.c));
    m.w_q = scaled_identity(d, std::sqrt(temp.c));
    m.attn = AttnMode::soft(1.0);
  }
}

void require_unique(const Filter& f_q, const Vocab& vocab) {
  const int N = f_q.t_max() + 1;
  if (!signature_check(f_q, vocab, N, kProjectionSeed).unique) {
    throw Error(ErrorKind::SignatureNotUnique, "filter maps two distinct " + std::to_string(N) +
                                                   "-grams to parallel signatures");
  }
}

}  // namespace

Vector ngram_signature(const Filter& f, const Vocab& vocab, const std::vector<int>& ngram) {
  Vector s = window_sum(f, vocab, ngram);
  const double n = s.norm();
  if (!(n >= kNormFloor)) throw ZeroRowError(static_cast<long>(ngram.size()) - 1);
  return s / n;
}

bool check_signature_uniqueness(const Filter& f, const Vocab& vocab, int N) {
  check_filter(f, N);
  const int V = vocab.size();
  if (V == 0) throw Error(ErrorKind::EmptyVocab, "signature check on empty vocabulary");
  const double count_d = ipow(V, N);
  if (count_d > kMaxExhaustiveNgrams) {
    throw Error(ErrorKind::TooLarge, "|V|^N = " + std::to_string(count_d) + " exceeds the exhaustive guard");
  }
  const auto count = static_cast<long long>(count_d);

  Rng rng(kProjectionSeed);
  Matrix dirs(kProjections, vocab.dim());
  for (int k = 0; k < kProjections; ++k) {
    for (int j = 0; j < vocab.dim(); ++j) dirs(k, j) = rng.normal();
    dirs.row(k).normalize();
  }
  // Sort by the first projection and sweep a window wide enough to contain
  // every parallel partner; the other projections prune candidates cheaply.
  std::vector<std::array<double, kProjections>> proj(static_cast<size_t>(count));
  for (long long idx = 0; idx < count; ++idx) {
    const Vector s = ngram_signature(f, vocab, decode_index(idx, V, N));
    const Vector p = dirs * s;
    for (int k = 0; k < kProjections; ++k) proj[static_cast<size_t>(idx)][static_cast<size_t>(k)] = p[k];
  }
  std::vector<long long> order(static_cast<size_t>(count));
  for (long long i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long long a, long long b) {
    return proj[static_cast<size_t>(a)][0] < proj[static_cast<size_t>(b)][0];
  });
  for (size_t a = 0; a < order.size(); ++a) {
    const auto& pa = proj[static_cast<size_t>(order[a])];
    for (size_t b = a + 1; b < order.size(); ++b) {
      const auto& pb = proj[static_cast<size_t>(order[b])];
      if (pb[0] - pa[0] > kProjWindow) break;
      bool close = true;
      for (int k = 1; k < kProjections && close; ++k) close = std::abs(pb[static_cast<size_t>(k)] - pa[static_cast<size_t>(k)]) <= kProjWindow;
      if (!close) continue;
      const Vector sa = ngram_signature(f, vocab, decode_index(order[a], V, N));
      const Vector sb = ngram_signature(f, vocab, decode_index(order[b], V, N));
      if (sa.dot(sb) >= kParallelCos) return false;
    }
  }
  return true;
}

bool check_signature_uniqueness_sampled(const Filter& f, const Vocab& vocab, int N, std::uint64_t seed, long pairs) {
  check_filter(f, N);
  const int V = vocab.size();
  if (V == 0) throw Error(ErrorKind::EmptyVocab, "signature check on empty vocabulary");
  if (V == 1) return true;
  Rng rng(seed);
  auto draw = [&] {
    std::vector<int> g(static_cast<size_t>(N));
    for (auto& t : g) t = static_cast<int>(rng.uniform_int(0, V - 1));
    return g;
  };
  for (long p = 0; p < pairs; ++p) {
    const auto a = draw();
    auto b = draw();
    while (b == a) b = draw();
    if (ngram_signature(f, vocab, a).dot(ngram_signature(f, vocab, b)) >= kParallelCos) return false;
  }
  return true;
}

SignatureCheck signature_check(const Filter& f, const Vocab& vocab, int N, std::uint64_t seed) {
  if (ipow(vocab.size(), N) <= kMaxExhaustiveNgrams) return {check_signature_uniqueness(f, vocab, N), false};
  return {check_signature_uniqueness_sampled(f, vocab, N, seed), true};
}

double signature_gap(const Filter& f, const Vocab& vocab, int N) {
  check_filter(f, N);
  const int V = vocab.size();
  if (V == 0) throw Error(ErrorKind::EmptyVocab, "signature gap on empty vocabulary");
  double total = 0.0;
  for (int m = 1; m <= N; ++m) total += ipow(V, m);
  if (total > kMaxGapSignatures) {
    throw Error(ErrorKind::TooLarge, std::to_string(total) + " signatures exceed the gap guard");
  }
  const auto n_full = static_cast<Eigen::Index>(ipow(V, N));
  std::vector<Vector> rows;
  rows.reserve(static_cast<size_t>(total));
  for (Eigen::Index idx = 0; idx < n_full; ++idx) rows.push_back(ngram_signature(f, vocab, decode_index(idx, V, N)));
  for (int m = 1; m < N; ++m) {
    const auto n = static_cast<long long>(ipow(V, m));
    for (long long idx = 0; idx < n; ++idx) {
      const Vector s = window_sum(f, vocab, decode_index(idx, V, m));
      const double norm = s.norm();
      if (norm >= kNormFloor) rows.push_back(s / norm);
    }
  }
  Matrix all(static_cast<Eigen::Index>(rows.size()), vocab.dim());
  for (size_t i = 0; i < rows.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();

  double max_cos = -std::numeric_limits<double>::infinity();
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index lo = 0; lo < n_full; lo += kChunk) {
    const Eigen::Index n = std::min(kChunk, n_full - lo);
    const Matrix g = all.middleRows(lo, n) * all.transpose();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const double c = g(i, j);
        if (c < kParallelCos) max_cos = std::max(max_cos, c);
      }
    }
  }
  if (!std::isfinite(max_cos)) return 1.0;
  return std::min(1.0, 1.0 - max_cos);
}

double nar_temperature(double gap, int L, double eps0) {
  if (!(gap > 0.0) || !(eps0 > 0.0) || L < 2) throw Error(ErrorKind::InvalidInput, "temperature needs gap, eps0 > 0, L >= 2");
  return std::log(2.0 * L / eps0) / gap;
}

Filter random_causal_filter(int N, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> taps(static_cast<size_t>(N));
  for (auto& t : taps) t = rng.normal();
  return Filter::causal(std::move(taps));
}

CatModel build_nar_value_delay(const Filter& f_q, int d, AttnMode temp) {
  if (!f_q.is_causal()) throw Error(ErrorKind::InvalidInput, "query filter must be causal");
  CatModel m;
  m.f_k = f_q;
  m.f_q = f_q;
  m.f_v = Filter::delay(-1);
  m.normalize_k = true;
  m.normalize_q = true;
  m.w_v = scaled_identity(d, 2.0);
  set_temperature(m, d, temp);
  return m;
}

CatModel build_nar_key_delay(const Filter& f_q, int d, AttnMode temp) {
  if (!f_q.is_causal()) throw Error(ErrorKind::InvalidInput, "query filter must be causal");
  CatModel m;
  m.f_k = f_q;
  m.key_post_delay = 1;
  m.f_q = f_q;
  m.f_v = Filter::delay(0);
  m.normalize_k = true;
  m.normalize_q = true;
  m.w_v = Matrix::Identity(d, d);
  set_temperature(m, d, temp);
  return m;
}

CatModel build_nar_value_delay(const Filter& f_q, const Vocab& vocab, AttnMode temp) {
  require_unique(f_q, vocab);
  return build_nar_value_delay(f_q, vocab.dim(), temp);
}

CatModel build_nar_key_delay(const Filter& f_q, const Vocab& vocab, AttnMode temp) {
  require_unique(f_q, vocab);
  return build_nar_key_delay(f_q, vocab.dim(), temp);
}

CatModel build_ar_1d(int d, AttnMode temp) {
  CatModel m;
  m.f_k = Filter::delay(1);
  m.f_q = Filter::delay(0);
  m.f_v = Filter::delay(0);
  m.w_v = Matrix::Identity(d, d);
  set_temperature(m, d, temp);
  return m;
}

int predict_last(const CatModel& m, const Vocab& vocab, const TaskInstance& inst) {
  const EmbeddedSeq x = embed(inst.tokens, vocab);
  return nearest_token(cat_forward(x, m, static_cast<int>(x.rows()) - 1), vocab);
}

std::vector<int> predict_all(const CatModel& m, const Vocab& vocab, const TaskInstance& inst) {
  CatModel causal = m;
  causal.causal_mask = true;
  const CatProjections p = cat_project(embed(inst.tokens, vocab), causal);
  std::vector<int> out;
  out.reserve(inst.queries.size());
  for (const auto& q : inst.queries) out.push_back(nearest_token(cat_forward(p, causal, q.position), vocab));
  return out;
}

const char* to_string(ScVariant v) {
  return v == ScVariant::InfiniteFilterNoPE ? "InfiniteFilterNoPE" : "WindowNWithPE";
}

ScModel build_sc_model(int num_signal, int noise_dims, ScVariant variant, int T, int max_signals) {
  if (num_signal < 1) throw Error(ErrorKind::InvalidInput, "need at least one signal token");
  if (noise_dims < 1) throw Error(ErrorKind::InvalidInput, "noise subspace needs dimension >= 1");
  if (T < 3) throw Error(ErrorKind::InvalidInput, "T must be at least 3");
  if (variant == ScVariant::WindowNWithPE && max_signals < 1) {
    throw Error(ErrorKind::InvalidInput, "window variant needs max_signals >= 1");
  }
  ScModel m;
  m.variant = variant;
  m.num_signal = num_signal;
  m.noise_dims = noise_dims;
  m.T = T;
  m.window = variant == ScVariant::WindowNWithPE ? max_signals : 0;
  m.rho = std::pow(2.0, -1.0 / T);
  m.theta = 1.0;
  if (variant == ScVariant::WindowNWithPE) {
    // stopping needs alpha rho^N (1 - rho) above theta times the position mass (<= N)
    m.alpha = 16.0 * T * m.window;
    m.beta = 8.0 * m.window * m.alpha;
  } else {
    m.alpha = 8.0 * T;
    m.beta = 8.0 * T * m.alpha;
  }
  const int d = m.dim();
  m.w = Matrix::Zero(d, d);
  for (int i = 0; i < m.base_dim(); ++i) m.w(i, i) = -m.alpha;
  m.w(m.base_dim(), m.base_dim()) = m.beta;
  if (variant == ScVariant::WindowNWithPE) m.w(d - 1, d - 1) = -m.theta;
  return m;
}

namespace {

int base_index(const ScModel& m, const ScLayout& layout, int token) {
  if (layout.is_signal(token)) return token;
  if (token == layout.bot()) return m.num_signal;
  if (token >= layout.num_signal && token < layout.bot()) return m.num_signal + 1 + (token - layout.num_signal) % m.noise_dims;
  throw Error(ErrorKind::InvalidInput, "token " + std::to_string(token) + " outside the selective-copy layout");
}

}  // namespace

Vector sc_embedding(const ScModel& m, const ScLayout& layout, int token, int position) {
  Vector e = Vector::Zero(m.dim());
  e[base_index(m, layout, token)] = 1.0;
  e[m.base_dim()] = (layout.is_signal(token) || token == layout.bot()) ? 1.0 : 0.0;
  if (m.variant == ScVariant::WindowNWithPE) e[m.dim() - 1] = static_cast<double>(position) / m.T;
  return e;
}

std::vector<int> decode_sc(const ScModel& m, const ScLayout& layout, const TaskInstance& inst, AttnMode attn) {
  if (layout.num_signal != m.num_signal) throw Error(ErrorKind::InvalidInput, "layout does not match the model");
  if (inst.tokens.empty() || inst.tokens.back() != layout.bot()) {
    throw Error(ErrorKind::InvalidInput, "prompt must end with the start-of-decode token");
  }
  const auto n_unique = sc_unique_signals(inst.tokens, layout).size();
  if (inst.tokens.size() + n_unique > static_cast<size_t>(m.T)) {
    throw Error(ErrorKind::InvalidInput, "prompt and answer exceed the model's design length T=" + std::to_string(m.T));
  }

  std::vector<int> context = inst.tokens;
  Matrix emb(m.T, m.dim());
  for (size_t i = 0; i < context.size(); ++i) {
    emb.row(static_cast<Eigen::Index>(i)) = sc_embedding(m, layout, context[i], static_cast<int>(i)).transpose();
  }
  // Running query state for the infinite filter.
  Vector z = Vector::Zero(m.dim());
  if (m.variant == ScVariant::InfiniteFilterNoPE) {
    for (size_t i = 0; i < context.size(); ++i) z = m.rho * z + emb.row(static_cast<Eigen::Index>(i)).transpose();
  }
  const Vocab base = Vocab::orthonormal(m.base_dim(), m.base_dim());
  const auto bot_pos = static_cast<Eigen::Index>(inst.tokens.size()) - 1;

  std::vector<int> out;
  for (;;) {
    const auto t = static_cast<Eigen::Index>(context.size());
    if (t > m.T) throw Error(ErrorKind::NonTermination, "decoding did not stop within T steps");
    if (m.variant == ScVariant::WindowNWithPE) {
      z.setZero();
      double w = 1.0;
      // the window starts at the prompt's final bot and never reaches into X
      for (Eigen::Index i = 0; i < m.window && t - 1 - i >= bot_pos; ++i, w *= m.rho) z += w * emb.row(t - 1 - i).transpose();
    }
    const Vector wz = m.w * z;
    std::vector<double> scores(static_cast<size_t>(t));
    Eigen::Map<Vector>(scores.data(), t) = emb.topRows(t) * wz;
    const std::vector<double> a = attention_weights(scores, attn);
    const Vector y = emb.topRows(t).transpose() * Eigen::Map<const Vector>(a.data(), t);
    const int k = nearest_token(y.head(m.base_dim()), base);
    if (k == m.num_signal) break;
    const int token = k < m.num_signal ? k : layout.num_signal + (k - m.num_signal - 1);
    if (t == m.T) throw Error(ErrorKind::NonTermination, "decoding did not stop within T steps");
    out.push_back(token);
    context.push_back(token);
    emb.row(t) = sc_embedding(m, layout, token, static_cast<int>(t)).transpose();
    if (m.variant == ScVariant::InfiniteFilterNoPE) z = m.rho * z + emb.row(t).transpose();
  }
  return out;
}

nlohmann::json to_json(const Filter& f) { return {{"taps", f.taps()}, {"t_min", f.t_min()}}; }

Filter filter_from_json(const nlohmann::json& j) {
  return Filter(j.at("taps").get<std::vector<double>>(), j.at("t_min").get<int>());
}

namespace {

nlohmann::json matrix_json(const Matrix& w) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    std::vector<double> r(w.row(i).data(), w.row(i).data() + w.cols());
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const CatModel& m) {
  return {{"f_k", to_json(m.f_k)},
          {"f_q", to_json(m.f_q)},
          {"f_v", to_json(m.f_v)},
          {"w_k", matrix_json(m.w_k)},
          {"w_q", matrix_json(m.w_q)},
          {"w_v", matrix_json(m.w_v)},
          {"normalize_k", m.normalize_k},
          {"normalize_q", m.normalize_q},
          {"normalize_v", m.normalize_v},
          {"key_post_delay", m.key_post_delay},
          {"attn", {{"kind", m.attn.is_hard() ? "Hard" : "Soft"}, {"c", m.attn.c}}},
          {"causal_mask", m.causal_mask}};
}

nlohmann::json to_json(const ScModel& m) {
  return {{"variant", to_string(m.variant)}, {"num_signal", m.num_signal}, {"noise_dims", m.noise_dims},
          {"T", m.T}, {"window", m.window}, {"rho", m.rho}, {"alpha", m.alpha}, {"beta", m.beta},
          {"theta", m.theta}, {"w", matrix_json(m.w)}};
}

}  // namespace catlab
