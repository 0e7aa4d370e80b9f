#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "catlab/cat_layer.hpp"
#include "catlab/numerics.hpp"
#include "catlab/tasks.hpp"

namespace catlab {

// Signatures are compared as parallel when their cosine reaches this value.
inline constexpr double kParallelCos = 1.0 - 1e-9;
inline constexpr double kMaxExhaustiveNgrams = 1e6;
inline constexpr long kSampledPairs = 100000;

/// s(Z) = normalize(sum_{i<N} f(N-1-i) z_i): the query-side convolution of an
/// N-gram evaluated at its last token.
Vector ngram_signature(const Filter& f, const Vocab& vocab, const std::vector<int>& ngram);

/// True iff all |V|^N signatures are pairwise non-parallel. f must be causal
/// with support inside [0, N). Throws TooLarge when |V|^N exceeds the guard.
bool check_signature_uniqueness(const Filter& f, const Vocab& vocab, int N);

// Monte Carlo substitute: `pairs` random distinct N-gram pairs.
bool check_signature_uniqueness_sampled(const Filter& f, const Vocab& vocab, int N, std::uint64_t seed,
                                        long pairs = kSampledPairs);

struct SignatureCheck {
  bool unique = false;
  bool probabilistic = false;
};
// Exhaustive when within the guard, sampled otherwise.
SignatureCheck signature_check(const Filter& f, const Vocab& vocab, int N, std::uint64_t seed);

/// 1 - max cosine between an N-gram signature and any other signature a key can
/// take (other N-grams and the zero-padded prefixes of length < N), skipping
/// exactly parallel pairs. Clamped to at most 1.
double signature_gap(const Filter& f, const Vocab& vocab, int N);

// c = log(2L / eps0) / gap.
double nar_temperature(double gap, int L, double eps0);

// Filter with i.i.d. standard normal taps at offsets [0, N).
Filter random_causal_filter(int N, std::uint64_t seed);

/// Value delay: F_k = F_q = f_q, F_v = D_{-1}, W_v = 2I, keys and queries
/// normalized. `temp` Hard gives identity key/query weights; Soft(c) gives
/// sqrt(c) I with unit softmax scale. N is the support length of f_q.
CatModel build_nar_value_delay(const Filter& f_q, int d, AttnMode temp);
/// Key delay: keys are the normalized query-side signatures delayed by one
/// step, F_v = D_0, W_v = I.
CatModel build_nar_key_delay(const Filter& f_q, int d, AttnMode temp);
// Throw SignatureNotUnique unless the filter separates all N-grams of `vocab`.
CatModel build_nar_value_delay(const Filter& f_q, const Vocab& vocab, AttnMode temp);
CatModel build_nar_key_delay(const Filter& f_q, const Vocab& vocab, AttnMode temp);

// F_k = D_1, F_q = F_v = D_0, no normalization.
CatModel build_ar_1d(int d, AttnMode temp);

// Decode the final-position output of a single-query AR/NAR instance.
int predict_last(const CatModel& m, const Vocab& vocab, const TaskInstance& inst);
// Decode every query of an MQ instance with one causal pass.
std::vector<int> predict_all(const CatModel& m, const Vocab& vocab, const TaskInstance& inst);

enum class ScVariant { InfiniteFilterNoPE, WindowNWithPE };
const char* to_string(ScVariant v);

/// Selective-copy model. Token embedding [x', s, p]: x' is a one-hot base
/// embedding (signals, then the start-of-decode token, then D_noisy noise
/// directions), s marks signals and the start token, p = i/T is the position
/// (WindowNWithPE only). Scores are x_i^T W z*_t with
/// W = diag(-alpha I, beta, -theta).
struct ScModel {
  ScVariant variant = ScVariant::InfiniteFilterNoPE;
  int num_signal = 0;
  int noise_dims = 1;
  int T = 0;
  int window = 0;  // query filter length for WindowNWithPE
  double rho = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double theta = 0.0;
  Matrix w;

  int base_dim() const noexcept { return num_signal + 1 + noise_dims; }
  int dim() const noexcept { return base_dim() + (variant == ScVariant::WindowNWithPE ? 2 : 1); }
};

/// T = L + N + 1 where L is the longest prompt before the start token and N the
/// most signal tokens per prompt; `max_signals` sets the window for the
/// positional variant.
ScModel build_sc_model(int num_signal, int noise_dims, ScVariant variant, int T, int max_signals);

Vector sc_embedding(const ScModel& m, const ScLayout& layout, int token, int position);

/// Autoregressive decoding after the prompt until the model emits the start
/// token again. Hard attention unless `attn` is Soft(gamma), which softmaxes
/// gamma * score. Throws InvalidInput when the prompt does not fit in T and
/// NonTermination when decoding reaches T.
std::vector<int> decode_sc(const ScModel& m, const ScLayout& layout, const TaskInstance& inst,
                           AttnMode attn = AttnMode::hard());

nlohmann::json to_json(const Filter& f);
Filter filter_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CatModel& m);
nlohmann::json to_json(const ScModel& m);

}  // namespace catlab
