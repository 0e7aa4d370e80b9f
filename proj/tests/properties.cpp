// Randomized invariants, 100+ cases each. Shared by the unit and acceptance binaries.
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "catlab/error.hpp"
#include "catlab/audit.hpp"
#include "catlab/constructions.hpp"
#include "catlab/lcat.hpp"
#include "catlab/rng.hpp"
#include "catlab/runner.hpp"

using namespace catlab;

namespace {

constexpr int kCases = 100;

Matrix random_matrix(Rng& rng, long r, long c) {
  Matrix m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Filter random_filter(Rng& rng, int lo, int hi) {
  const int t_min = static_cast<int>(rng.uniform_int(lo, hi));
  const int n = static_cast<int>(rng.uniform_int(1, 4));
  std::vector<double> taps(static_cast<size_t>(n));
  for (double& t : taps) t = rng.normal();
  return Filter(taps, t_min);
}

// Independent convolution oracle.
Matrix conv_oracle(const Matrix& x, const Filter& f) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (long i = 0; i < x.rows(); ++i) {
    for (int j = f.t_min(); j <= f.t_max(); ++j) {
      const long k = i - j;
      if (k >= 0 && k < x.rows()) y.row(i) += f.at(j) * x.row(k);
    }
  }
  return y;
}

Vocab random_vocab(Rng& rng, int n, int d) {
  Matrix e = random_matrix(rng, n, d);
  for (int i = 0; i < n; ++i) e.row(i).normalize();
  return Vocab(e);
}

CatModel random_model(Rng& rng, int d, bool causal_filters) {
  CatModel m = CatModel::identity(d);
  m.w_k = random_matrix(rng, d, d);
  m.w_q = random_matrix(rng, d, d);
  m.w_v = random_matrix(rng, d, d);
  const int lo = causal_filters ? 0 : -2;
  m.f_k = random_filter(rng, lo, 2);
  m.f_q = random_filter(rng, lo, 2);
  m.f_v = random_filter(rng, lo, 2);
  m.attn = rng.uniform01() < 0.5 ? AttnMode::hard() : AttnMode::soft(0.1 + rng.uniform01());
  return m;
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("convolution is linear") {
  Rng rng(1);
  for (int c = 0; c < kCases; ++c) {
    const long L = rng.uniform_int(1, 20), d = rng.uniform_int(1, 5);
    const Matrix x = random_matrix(rng, L, d), y = random_matrix(rng, L, d);
    const double a = rng.normal(), b = rng.normal();
    const Filter f = random_filter(rng, -3, 3);
    const Matrix lhs = convolve(a * x + b * y, f);
    const Matrix rhs = a * convolve(x, f) + b * convolve(y, f);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((convolve(x, f) - conv_oracle(x, f)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("delay filters compose") {
  Rng rng(2);
  for (int c = 0; c < kCases; ++c) {
    const long L = rng.uniform_int(1, 16);
    const int i = static_cast<int>(rng.uniform_int(0, 5)), j = static_cast<int>(rng.uniform_int(0, 5));
    const Matrix x = random_matrix(rng, L, 3);
    CHECK(convolve(convolve(x, Filter::delay(i)), Filter::delay(j)).isApprox(convolve(x, Filter::delay(i + j)), 1e-12));
    CHECK(compose(Filter::delay(i), Filter::delay(j)) == Filter::delay(i + j));
    // general composition agrees whenever both filters are causal
    const Filter f = random_filter(rng, 0, 2), g = random_filter(rng, 0, 2);
    const Matrix lhs = convolve(convolve(x, f), g), rhs = convolve(x, compose(f, g));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("attention weights are probabilities and hard is the soft limit") {
  Rng rng(3);
  for (int c = 0; c < kCases; ++c) {
    const int m = static_cast<int>(rng.uniform_int(1, 30));
    std::vector<double> s(static_cast<size_t>(m));
    for (double& v : s) v = 3.0 * rng.normal();
    for (AttnMode mode : {AttnMode::hard(), AttnMode::soft(0.5 + 4 * rng.uniform01())}) {
      const auto w = attention_weights(s, mode);
      double sum = 0.0;
      for (double v : w) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= kProbSumTol);
    }
    std::vector<double> sorted = s;
    std::sort(sorted.rbegin(), sorted.rend());
    const double gap = m > 1 ? sorted[0] - sorted[1] : 1.0;
    if (gap < 1e-6) continue;
    const double cc = 1.0 + 10.0 * rng.uniform01();
    const auto soft = attention_weights(s, AttnMode::soft(cc));
    const auto hard = attention_weights(s, AttnMode::hard());
    double l1 = 0.0;
    for (int i = 0; i < m; ++i) l1 += std::abs(soft[i] - hard[i]);
    CHECK(l1 <= 2.0 * (m - 1) * std::exp(-cc * gap) + 1e-12);
  }
}

TEST_CASE("vocab geometry matches brute force") {
  Rng rng(4);
  for (int c = 0; c < kCases; ++c) {
    const int n = static_cast<int>(rng.uniform_int(2, 7)), d = static_cast<int>(rng.uniform_int(2, 6));
    const Vocab v = random_vocab(rng, n, d);
    double mx = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) mx = std::max(mx, std::pow(v.row(a).dot(v.row(b)), 2));
    CHECK(min_embedding_distance(v) == doctest::Approx(std::sqrt(1.0 - mx)).epsilon(1e-9));

    // delta oracle: |b_j . u_j| is the distance from b_j to span(b_0..b_{j-1}), via least squares
    const int k = std::min(n, d);
    std::vector<Vector> toks;
    for (int i = 0; i < k; ++i) toks.push_back(v.row(i).transpose());
    double delta = 1.0;
    for (int j = 1; j < k; ++j) {
      Matrix a(d, j);
      for (int i = 0; i < j; ++i) a.col(i) = toks[static_cast<size_t>(i)];
      const Vector coef = a.colPivHouseholderQr().solve(toks[static_cast<size_t>(j)]);
      delta = std::min(delta, (toks[static_cast<size_t>(j)] - a * coef).norm());
    }
    CHECK(gram_schmidt_delta(toks) == doctest::Approx(delta).epsilon(1e-7));
  }
}

TEST_CASE("permutation property without filters or mask") {
  Rng rng(5);
  for (int c = 0; c < kCases; ++c) {
    const int L = static_cast<int>(rng.uniform_int(2, 12)), d = static_cast<int>(rng.uniform_int(1, 4));
    CatModel m = random_model(rng, d, true);
    m.f_k = m.f_q = m.f_v = Filter::delay(0);
    m.attn = AttnMode::soft(1.0);
    const Matrix x = random_matrix(rng, L, d);
    std::vector<int> perm(static_cast<size_t>(L - 1));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix xp = x;
    for (int i = 0; i < L - 1; ++i) xp.row(i) = x.row(perm[static_cast<size_t>(i)]);
    const auto a = cat_attention_map(x, m, L - 1), ap = cat_attention_map(xp, m, L - 1);
    for (int i = 0; i < L - 1; ++i) CHECK(ap[static_cast<size_t>(i)] == doctest::Approx(a[static_cast<size_t>(perm[static_cast<size_t>(i)])]).epsilon(1e-9));
    CHECK((cat_forward(x, m, L - 1) - cat_forward(xp, m, L - 1)).norm() <= 1e-9);
  }
}

TEST_CASE("attention maps are probabilities and weights only enter through W_k W_q^T") {
  Rng rng(6);
  for (int c = 0; c < kCases; ++c) {
    const int L = static_cast<int>(rng.uniform_int(1, 15)), d = static_cast<int>(rng.uniform_int(1, 4));
    CatModel m = random_model(rng, d, false);
    m.causal_mask = rng.uniform01() < 0.5;
    const Matrix x = random_matrix(rng, L, d);
    const int q = static_cast<int>(rng.uniform_int(0, L - 1));
    const auto a = cat_attention_map(x, m, q);
    CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0) <= kProbSumTol);
    for (double v : a) CHECK(v >= 0.0);

    m.attn = AttnMode::soft(1.0);
    CatModel scaled = m;
    const double s = 0.2 + 3.0 * rng.uniform01();
    scaled.w_k *= s;
    scaled.w_q /= s;
    CHECK((cat_forward(x, m, q) - cat_forward(x, scaled, q)).norm() <= 1e-9 * (1.0 + cat_forward(x, m, q).norm()));
  }
}

TEST_CASE("causal outputs depend only on the prefix") {
  Rng rng(7);
  for (int c = 0; c < kCases; ++c) {
    const int L = static_cast<int>(rng.uniform_int(2, 14)), d = static_cast<int>(rng.uniform_int(1, 4));
    CatModel m = random_model(rng, d, true);
    m.causal_mask = true;
    const Matrix x = random_matrix(rng, L, d);
    const int t = static_cast<int>(rng.uniform_int(0, L - 2));
    Matrix y = x;
    y.bottomRows(L - t - 1) = random_matrix(rng, L - t - 1, d);
    const Matrix ox = cat_forward_all(x, m), oy = cat_forward_all(y, m);
    CHECK((ox.topRows(t + 1) - oy.topRows(t + 1)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((ox - cat_forward_all_serial(x, m)).cwiseAbs().maxCoeff() == 0.0);
    const int r = static_cast<int>(rng.uniform_int(0, L - 1));
    CHECK((ox.row(r).transpose() - cat_forward(x, m, r)).norm() <= 1e-12);
  }
}

TEST_CASE("generators pass their brute-force verifier and are deterministic") {
  for (int c = 0; c < kCases; ++c) {
    const std::uint64_t s = derive_seed(8, 0, c);
    Rng rng(s);
    const int L = static_cast<int>(rng.uniform_int(3, 80));
    const int V = static_cast<int>(rng.uniform_int(3, 40));
    const auto ar = gen_ar(L, V, s);
    CHECK(check_instance(ar, V));
    CHECK(ar == gen_ar(L, V, s));

    const int N = static_cast<int>(rng.uniform_int(1, 3));
    const auto nar = gen_nar(N, std::max(L, 2 * N + 1), std::max(V, 4), s);
    CHECK(check_instance(nar, std::max(V, 4)));
    CHECK(nar == gen_nar(N, std::max(L, 2 * N + 1), std::max(V, 4), s));

    const int k = static_cast<int>(rng.uniform_int(1, 8));
    const int Nm = static_cast<int>(rng.uniform_int(1, 2));
    const double frac = rng.uniform01() < 0.5 ? 0.0 : 0.25;
    const int nq = k + static_cast<int>(frac * k + 0.5);
    const int Lm = k * (Nm + 1) + nq * Nm + (Nm >= 2 ? nq - 1 : 0) + static_cast<int>(rng.uniform_int(0, 20));
    const auto mq = gen_mq(Nm, Lm, k, 64, s, {frac});
    CHECK(check_instance(mq, 64));
    CHECK(mq == gen_mq(Nm, Lm, k, 64, s, {frac}));

    const ScLayout layout{8, 4};
    const auto sc = gen_sc(static_cast<int>(rng.uniform_int(0, 8)), static_cast<int>(rng.uniform_int(0, 30)), layout, s);
    CHECK(check_instance(sc, layout.vocab_size(), layout));
    std::vector<int> oracle;
    for (int t : sc.tokens)
      if (layout.is_signal(t)) oracle.push_back(t);
    CHECK(sc.answers == oracle);

    std::stringstream ss;
    write_jsonl(ss, {ar, nar, mq, sc});
    const auto back = read_jsonl(ss);
    REQUIRE(back.size() == 4);
    CHECK(back[2] == mq);
  }
}

TEST_CASE("constructions are exact for random separating filters") {
  const Vocab vocab = Vocab::orthonormal(12, 12);
  int drawn_unique = 0;
  for (int c = 0; c < kCases; ++c) {
    const int N = 1 + c % 3;
    const Filter f = random_causal_filter(N, derive_seed(9, 0, c));
    if (!check_signature_uniqueness(f, vocab, N)) continue;
    ++drawn_unique;
    const CatModel value = build_nar_value_delay(f, vocab, AttnMode::hard());
    const CatModel key = build_nar_key_delay(f, vocab, AttnMode::hard());
    const int L = 2 * N + 1 + c;
    const auto x = gen_nar(N, L, 12, derive_seed(9, 1, c));
    CHECK(predict_last(value, vocab, x) == x.answers[0]);
    CHECK(predict_last(key, vocab, x) == x.answers[0]);
  }
  CHECK(drawn_unique >= 99);
}

TEST_CASE("soft constructions stay within the temperature bound") {
  const Vocab vocab = Vocab::orthonormal(10, 10);
  for (int c = 0; c < kCases; ++c) {
    const int N = 1 + c % 2;
    const Filter f = random_causal_filter(N, derive_seed(10, 0, c));
    if (!check_signature_uniqueness(f, vocab, N)) continue;
    const int L = 5 + c;
    const double eps0 = c % 2 ? 1e-2 : 1e-3;
    const CatModel m = build_nar_value_delay(f, vocab, AttnMode::soft(nar_temperature(signature_gap(f, vocab, N), L, eps0)));
    const auto x = gen_nar(N, L, 10, derive_seed(10, 1, c));
    const Vector y = cat_forward(embed(x.tokens, vocab), m, L - 1);
    CHECK((y - vocab.row(x.answers[0]).transpose()).norm() <= eps0);
  }
}

TEST_CASE("selective copy emits the leftmost pending signal at every step") {
  for (int c = 0; c < kCases; ++c) {
    Rng rng(derive_seed(11, 0, c));
    const int S = static_cast<int>(rng.uniform_int(2, 10));
    const ScLayout layout{S, 5};
    const int ns = static_cast<int>(rng.uniform_int(0, S)), nn = static_cast<int>(rng.uniform_int(0, 40));
    const auto x = gen_sc(ns, nn, layout, derive_seed(11, 1, c));
    const auto v = c % 2 ? ScVariant::WindowNWithPE : ScVariant::InfiniteFilterNoPE;
    const ScModel m = build_sc_model(S, 1, v, 40 + 2 * S + 2, S);
    // oracle: first appearances in order
    std::vector<int> oracle;
    for (int t : x.tokens)
      if (layout.is_signal(t) && std::find(oracle.begin(), oracle.end(), t) == oracle.end()) oracle.push_back(t);
    CHECK(decode_sc(m, layout, x) == oracle);
  }
}

TEST_CASE("golden map distance does not increase with temperature") {
  const Vocab vocab = Vocab::orthonormal(16, 16);
  for (int c = 0; c < kCases; ++c) {
    const auto x = gen_ar(8 + c, 16, derive_seed(12, 0, c));
    double prev = 1e300;
    for (double t : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const double g = golden_map_distance(build_audit_model(Filter::delay(-1), 16, AttnMode::soft(t)), vocab, x);
      CHECK(g <= prev + 1e-12);
      prev = g;
    }
  }
}

TEST_CASE("epsilon measurement is deterministic and schedule independent") {
  const Vocab vocab = Vocab::orthonormal(8, 8);
  for (int c = 0; c < kCases; ++c) {
    const CatModel m = build_audit_model(Filter({1.0, 0.01 * (c % 5)}, -1), 8, AttnMode::soft(2.0 + c % 7));
    const auto a = measure_epsilon(m, vocab, 6 + c % 20, 5, c % 2 == 0, derive_seed(13, 0, c));
    const auto b = measure_epsilon_serial(m, vocab, 6 + c % 20, 5, c % 2 == 0, derive_seed(13, 0, c));
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.map_l1_max == b.map_l1_max);
  }
}

TEST_CASE("lcat success is monotone in d and sigma2 and parallel equals serial") {
  for (int c = 0; c < kCases; ++c) {
    Rng rng(derive_seed(14, 0, c));
    LcatConfig cfg;
    cfg.B = static_cast<int>(rng.uniform_int(2, 16));
    cfg.L = cfg.B * rng.uniform_int(2, 32);
    cfg.filter = c % 2 ? LcatFilter::ExpSmoothing : LcatFilter::BlockMean;
    cfg.d = static_cast<int>(rng.uniform_int(1, 40));
    cfg.sigma2 = 0.2 + rng.uniform01();
    const std::uint64_t seed = derive_seed(14, 1, c);
    const auto base = success_counts(cfg, 40, seed);
    LcatConfig more_d = cfg;
    more_d.d += static_cast<int>(rng.uniform_int(1, 40));
    LcatConfig more_noise = cfg;
    more_noise.sigma2 *= 1.5;
    CHECK(success_counts(more_d, 40, seed).value >= base.value);
    CHECK(success_counts(more_noise, 40, seed).value <= base.value);
    const auto serial = success_counts_serial(cfg, 40, seed);
    CHECK(serial.value == base.value);
    CHECK(serial.block == base.block);
  }
}

TEST_CASE("command outputs are byte-identical across reruns and thread counts") {
  const auto root = std::filesystem::temp_directory_path() / "catlab_props";
  std::filesystem::remove_all(root);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  const int threads_before = omp_get_max_threads();
  for (int c = 0; c < kCases; ++c) {
    std::ostringstream log;
    nlohmann::json cfg;
    std::string cmd;
    switch (c % 3) {
      case 0:
        cmd = "gen-tasks";
        cfg = {{"kind", "MQAR"}, {"L", 32}, {"k", 4}, {"vocab_size", 50}, {"train", 20}, {"test", 5}};
        break;
      case 1:
        cmd = "lcat-phase";
        cfg = {{"L", 1024}, {"block_sizes", {8, 16}}, {"trials", 30}};
        break;
      default:
        cmd = "lengen-sweep";
        cfg = {{"lengths", {8, 16}}, {"instances", 5}, {"vocab_size", 8}, {"eps0_target", 0.01}};
        break;
    }
    RunOptions a, b;
    a.seed = b.seed = static_cast<std::uint64_t>(c);
    a.out_dir = root / ("a" + std::to_string(c));
    b.out_dir = root / ("b" + std::to_string(c));
    a.jobs = 1;
    b.jobs = 4;
    const auto ra = run_command(cmd, cfg, a, log);
    const auto rb = run_command(cmd, cfg, b, log);
    CHECK(ra.run_id == rb.run_id);
    REQUIRE(ra.outputs.size() == rb.outputs.size());
    for (size_t i = 0; i + 1 < ra.outputs.size(); ++i) CHECK(slurp(ra.outputs[i]) == slurp(rb.outputs[i]));
  }
  omp_set_num_threads(threads_before);
  std::filesystem::remove_all(root);
}

}  // TEST_SUITE
