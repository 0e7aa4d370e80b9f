#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "catlab/numerics.hpp"

namespace catlab {

enum class LcatFilter { BlockMean, ExpSmoothing };
enum class SimMode { Full, Reduced };

const char* to_string(LcatFilter f);
const char* to_string(SimMode m);
LcatFilter lcat_filter_from_string(const std::string& s);
SimMode sim_mode_from_string(const std::string& s);

/// Landmark-CAT experiment under the random context model: every token is
/// N(0, sigma2/d) per entry except the query e_0, which sits at L-1 and at one
/// planted position outside the final block.
struct LcatConfig {
  long L = 4096;
  int B = 64;
  int d = 64;
  double sigma2 = 1.0;
  LcatFilter filter = LcatFilter::BlockMean;
  double rho = 0.0;  // ExpSmoothing decay; 0 selects e^{-1/B}
  SimMode mode = SimMode::Reduced;
  // Local attention scale; 0 is hard attention. Soft local attention is
  // only simulated in Full mode.
  double local_c = 0.0;

  long num_blocks() const noexcept { return (L + B - 1) / B; }
  double decay() const;
  long block_begin(long b) const noexcept { return b * B; }
  long block_end(long b) const noexcept { return std::min((b + 1) * static_cast<long>(B), L); }
  // Throws InvalidConfig.
  void validate() const;
};

struct RandomContext {
  EmbeddedSeq x;
  long query = 0;
  long planted = 0;
};

RandomContext sample_random_context(const LcatConfig& cfg, std::uint64_t seed);

/// One landmark per block, sampled at the block's last position: block sums
/// (all-ones filter of width B) or the exponentially smoothed prefix.
Matrix build_landmarks(const EmbeddedSeq& x, const LcatConfig& cfg);

// Multiply-accumulate counter for one query.
struct OpCounter {
  long long macs = 0;
};

struct TrialOutcome {
  bool block_correct = false;
  bool value_correct = false;
  std::uint64_t seed = 0;
  long planted = 0;
  long retrieved_block = -1;
};

/// Full: materialize the context, retrieve the block whose landmark scores
/// highest against the query (final block excluded, ties to the lowest index),
/// then hard attention over the raw tokens of the final and retrieved blocks
/// with values 2 x_{t+1}. Reduced: sample only the query correlations that
/// decide both stages, with the same joint distribution.
TrialOutcome run_trial(const LcatConfig& cfg, std::uint64_t seed, OpCounter* ops = nullptr);

struct SuccessCounts {
  long trials = 0;
  long block = 0;
  long value = 0;
  double rate() const noexcept { return trials ? static_cast<double>(value) / trials : 0.0; }
};

// Trial k uses derive_seed(seed, 0, k) regardless of d, so counts are monotone
// in d and sigma2 in Reduced mode. OpenMP over trials.
SuccessCounts success_counts(const LcatConfig& cfg, long trials, std::uint64_t seed);
// Serial reference for success_counts.
SuccessCounts success_counts_serial(const LcatConfig& cfg, long trials, std::uint64_t seed);

enum class ThresholdKind { Sufficient, Converse, Uniform, ExpSmoothing };
/// Sufficient: 2 s2 B (sqrt(ln Lbar) + t)^2, rounded up.
/// Converse: 2 s2 B (max(0, sqrt((1 - eps) ln Lbar) - t))^2, rounded down.
/// Uniform: 2 s2 B (sqrt(ln Lbar) + sqrt(r) + t)^2, rounded up.
/// ExpSmoothing: 50 s2 B (sqrt(ln Lbar) + t)^2, rounded up.
long theoretical_threshold(const LcatConfig& cfg, double t, ThresholdKind kind, double eps = 0.1, int r = 0);

struct PhasePoint {
  int B = 0;
  long L = 0;
  double sigma2 = 0.0;
  LcatFilter filter = LcatFilter::BlockMean;
  long d_10 = 0;
  long d_50 = 0;
  long d_90 = 0;
  long d_theory = 0;
  long trials = 0;
  bool non_monotone = false;
};

/// Smallest d whose success rate reaches `target`, by integer bisection with
/// common random numbers. The upper bracket starts at twice the t = 2
/// sufficiency threshold and is widened (x4) at most twice; failure sets
/// `non_monotone` and returns -1.
long critical_dimension(const LcatConfig& cfg, double target, long trials, std::uint64_t seed, bool* non_monotone);

// d_10, d_50, d_90 per B; d_theory is the t = 0 sufficiency threshold.
std::vector<PhasePoint> phase_transition(const LcatConfig& base, const std::vector<int>& block_sizes, long trials,
                                         std::uint64_t seed);

// Columns B,L,sigma2,filter_kind,d_10,d_50,d_90,d_theory,trials.
void write_phase_csv(std::ostream& os, const std::vector<PhasePoint>& points);

/// Full-mode rate at which a shared noise context answers all M queries, each
/// a random unit vector of span(e_0..e_{r-1}) with its own planted copy
/// (r = 0: the fixed query e_0). Query m of trial k depends only on (k, m).
double uniform_query_rate(const LcatConfig& cfg, int r, int M, long trials, std::uint64_t seed);

struct Complexity {
  long long lcat_ops = 0;
  long long dense_ops = 0;
  long long capacity = 0;  // d * Lbar
  bool capacity_ok = false;  // d * Lbar >= L
};
/// Per-query multiply-accumulates: d (Lbar - 1) landmark scores plus
/// 2 d (|final block| + B) for local scores and the weighted value sum,
/// against 2 d L for dense attention. Landmark construction is amortized
/// across queries and not counted.
Complexity complexity_count(const LcatConfig& cfg);

// Two-sided pooled two-proportion z-test p-value.
double two_proportion_p(long x1, long n1, long x2, long n2);

}  // namespace catlab
