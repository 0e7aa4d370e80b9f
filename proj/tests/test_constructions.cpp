#include <doctest.h>

#include <cmath>

#include "catlab/error.hpp"
#include "catlab/constructions.hpp"
#include "catlab/rng.hpp"

using namespace catlab;

TEST_CASE("signature uniqueness") {
  const Vocab ab = Vocab::orthonormal(2, 2);
  CHECK_FALSE(check_signature_uniqueness(Filter::causal({1, 1}), ab, 2));
  CHECK(check_signature_uniqueness(Filter::causal({2, 1}), ab, 2));
  CHECK(check_signature_uniqueness(Filter::causal({-0.3}), Vocab::orthonormal(5, 5), 1));
  CHECK(check_signature_uniqueness_sampled(Filter::causal({2, 1}), ab, 2, 1));
  const auto sc = signature_check(Filter::causal({0.7, -1.3, 0.4}), Vocab::orthonormal(8, 8), 3, 1);
  CHECK(sc.unique);
  CHECK_FALSE(sc.probabilistic);
  CHECK(signature_check(Filter::causal({0.7, -1.3, 0.4}), Vocab::orthonormal(128, 128), 3, 1).probabilistic);
}

TEST_CASE("signature oracle: pairwise enumeration") {
  const Vocab v = Vocab::orthonormal(4, 4);
  for (int c = 0; c < 20; ++c) {
    const Filter f = random_causal_filter(2, c);
    bool unique = true;
    std::vector<Vector> sigs;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) sigs.push_back(ngram_signature(f, v, {a, b}));
    for (size_t i = 0; i < sigs.size(); ++i)
      for (size_t j = 0; j < i; ++j) unique = unique && sigs[i].dot(sigs[j]) < kParallelCos;
    CHECK(check_signature_uniqueness(f, v, 2) == unique);
  }
}

TEST_CASE("value-delay construction") {
  enum { a, b, two, q, four, V };
  const Vocab v = Vocab::orthonormal(V, V);
  TaskInstance t;
  t.tokens = {a, b, two, b, a, q, a, a, four, b, a};
  t.kind = TaskKind::NAR;
  t.queries = {{10, 2}};
  t.answers = {q};
  CHECK(predict_last(build_nar_value_delay(Filter::causal({2, 1}), v, AttnMode::hard()), v, t) == q);
  CHECK(predict_last(build_nar_key_delay(Filter::causal({2, 1}), v, AttnMode::hard()), v, t) == q);
  CHECK_THROWS_AS(build_nar_value_delay(Filter::causal({1, 1}), v, AttnMode::hard()), Error);
  try {
    build_nar_key_delay(Filter::causal({1, 1}), v, AttnMode::hard());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SignatureNotUnique);
  }

  const Vocab v16 = Vocab::orthonormal(16, 16);
  const CatModel m = build_nar_value_delay(Filter::causal({1.0}), v16, AttnMode::hard());
  for (int s = 0; s < 300; ++s) {
    const auto x = gen_ar(8 + s, 16, s);
    REQUIRE(predict_last(m, v16, x) == x.answers[0]);
  }
}

TEST_CASE("soft value delay obeys the temperature bound") {
  const Vocab v = Vocab::orthonormal(16, 16);
  const Filter f = Filter::causal({1.0, -0.6});
  const double gap = signature_gap(f, v, 2);
  CHECK(gap > 0.0);
  CHECK(gap <= 1.0);
  const int L = 64;
  const double eps = 1e-3;
  const CatModel soft = build_nar_value_delay(f, v, AttnMode::soft(nar_temperature(gap, L, eps)));
  const CatModel hard = build_nar_value_delay(f, v, AttnMode::hard());
  for (int s = 0; s < 200; ++s) {
    const auto x = gen_nar(2, L, 16, s);
    const Matrix e = embed(x.tokens, v);
    CHECK((cat_forward(e, soft, L - 1) - cat_forward(e, hard, L - 1)).norm() <= eps);
  }
  CHECK(nar_temperature(1.0, 128, 1e-2) == doctest::Approx(std::log(2 * 128 / 1e-2)));
}

TEST_CASE("key and value delay agree") {
  const Vocab v = Vocab::orthonormal(10, 10);
  const Filter f = Filter::causal({0.9, -0.4, 1.7});
  REQUIRE(check_signature_uniqueness(f, v, 3));
  const CatModel kd = build_nar_key_delay(f, v, AttnMode::hard());
  const CatModel vd = build_nar_value_delay(f, v, AttnMode::hard());
  for (int s = 0; s < 1000; ++s) {
    const auto x = gen_nar(3, 7 + s % 200, 10, derive_seed(4, 0, s));
    REQUIRE(predict_last(kd, v, x) == predict_last(vd, v, x));
  }
  for (int s = 0; s < 100; ++s) {
    const auto x = gen_ar(30, 10, s);
    CHECK(predict_last(build_nar_key_delay(Filter::causal({1.0}), v, AttnMode::hard()), v, x) == x.answers[0]);
  }
}

TEST_CASE("1-D AR construction") {
  const Vocab v = Vocab::orthonormal(4, 4);
  TaskInstance t;
  t.tokens = {0, 1, 2, 3, 0};
  t.answers = {1};
  t.queries = {{4, 1}};
  CHECK(predict_last(build_ar_1d(4, AttnMode::hard()), v, t) == 1);
  t.tokens = {0, 1, 0};
  CHECK(predict_last(build_ar_1d(4, AttnMode::hard()), v, t) == 1);
  const Vocab v32 = Vocab::orthonormal(32, 32);
  for (int L : {8, 16, 64, 128, 512}) {
    for (int s = 0; s < 50; ++s) {
      const auto x = gen_ar(L, 32, derive_seed(5, L, s));
      REQUIRE(predict_last(build_ar_1d(32, AttnMode::hard()), v32, x) == x.answers[0]);
    }
  }
}

TEST_CASE("selective copy model layout") {
  const ScModel inf = build_sc_model(8, 1, ScVariant::InfiniteFilterNoPE, 50, 8);
  const ScModel win = build_sc_model(8, 1, ScVariant::WindowNWithPE, 50, 8);
  CHECK(inf.dim() == 8 + 3);
  CHECK(win.dim() == 8 + 4);
  CHECK(std::pow(inf.rho, 50) == doctest::Approx(0.5));
  const ScLayout layout{8, 2};
  CHECK(sc_embedding(win, layout, 3, 5)[win.base_dim()] == 1.0);
  CHECK(sc_embedding(win, layout, layout.bot(), 5)[win.base_dim()] == 1.0);
  CHECK(sc_embedding(win, layout, 8, 5)[win.base_dim()] == 0.0);
  CHECK(sc_embedding(win, layout, 8, 10)[win.dim() - 1] == doctest::Approx(10.0 / 50));
  CHECK(win.w(0, 0) < 0.0);
  CHECK(win.w(win.base_dim(), win.base_dim()) > 0.0);
  CHECK(win.w(win.dim() - 1, win.dim() - 1) == -1.0);
}

TEST_CASE("decode_sc") {
  // a [n] [n] c [n] k bot
  const ScLayout layout{11, 1};
  TaskInstance t;
  t.kind = TaskKind::SC;
  t.tokens = {0, 11, 11, 2, 11, 10, layout.bot()};
  t.answers = {0, 2, 10};
  for (auto v : {ScVariant::InfiniteFilterNoPE, ScVariant::WindowNWithPE}) {
    const ScModel m = build_sc_model(11, 1, v, 12, 3);
    CHECK(decode_sc(m, layout, t) == t.answers);
    TaskInstance sorted;
    sorted.tokens = {1, 4, 7, layout.bot()};
    CHECK(decode_sc(m, layout, sorted) == std::vector<int>{1, 4, 7});
  }
  CHECK_THROWS_AS(decode_sc(build_sc_model(11, 1, ScVariant::InfiniteFilterNoPE, 8, 3), layout, t), Error);

  for (int S : {8, 16}) {
    const ScLayout l{S, 16};
    for (auto v : {ScVariant::InfiniteFilterNoPE, ScVariant::WindowNWithPE}) {
      const ScModel m = build_sc_model(S, 1, v, 60 + 2 * S + 2, S);
      for (int s = 0; s < 1000; ++s) {
        Rng rng(derive_seed(6, S, s));
        const auto x = gen_sc(static_cast<int>(rng.uniform_int(0, S)), static_cast<int>(rng.uniform_int(0, 60)), l, s);
        REQUIRE(decode_sc(m, l, x) == x.answers);
      }
    }
  }
}

TEST_CASE("model json") {
  const auto j = to_json(build_nar_value_delay(Filter::causal({2, 1}), 3, AttnMode::hard()));
  CHECK(j["f_v"]["t_min"] == -1);
  CHECK(filter_from_json(j["f_q"]) == Filter::causal({2, 1}));
  CHECK(to_json(build_sc_model(4, 1, ScVariant::WindowNWithPE, 10, 4))["variant"] == "WindowNWithPE");
}
