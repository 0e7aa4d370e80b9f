#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "catlab/cat_layer.hpp"
#include "catlab/numerics.hpp"
#include "catlab/tasks.hpp"

namespace catlab {

// Gate on eps0 under which the filter lemma applies.
inline constexpr double kR0 = 0.125;
// Adversarial family: query ids tried and position cap before subsampling.
inline constexpr int kAdversarialQueries = 8;
inline constexpr int kAdversarialFullUpTo = 256;
inline constexpr int kAdversarialSampled = 64;

/// Audited models have the form f(X) = X_v^T softmax(X W x_{L-1}) with
/// X_v = (X * F_v) s I: identity-filter keys and queries, no normalization,
/// a nonnegative value filter and a scalar value weight s. The filter that
/// the bound talks about is (s / 2) F_v, so the ideal model is F_v = D_{-1},
/// s = 2. Throws StructureViolation otherwise.
void check_audit_form(const CatModel& m);

// The audited family with W = c I (Hard when temp is Hard).
CatModel build_audit_model(const Filter& f_v, int d, AttnMode temp);

// ||(s/2) F_v - D_{-1}||_1.
double filter_l1_to_delay(const CatModel& m);

/// The sequences driving the filter lemma: query q at position i and at L-1,
/// the token v maximizing x^T W q (x != q) everywhere else. Queries are the
/// first few vocabulary ids; positions are all i in [0, L-2], or an evenly
/// spaced subset including both ends for long sequences.
std::vector<TaskInstance> adversarial_family(const CatModel& m, const Vocab& vocab, int L);

struct EpsilonResult {
  double epsilon = 0.0;        // max ||y - f(X)|| over random and adversarial sequences
  double accuracy = 0.0;       // exact decode rate on the random suite
  double map_l1_max = 0.0;     // max distance to the golden map
  long evaluated = 0;
};

EpsilonResult measure_epsilon(const CatModel& m, const Vocab& vocab, int L, int suite_size, bool include_adversarial,
                              std::uint64_t seed);
// Serial reference for measure_epsilon.
EpsilonResult measure_epsilon_serial(const CatModel& m, const Vocab& vocab, int L, int suite_size,
                                     bool include_adversarial, std::uint64_t seed);

// 1/2 at every occurrence of the final token, 0 elsewhere.
std::vector<double> golden_map(const TaskInstance& inst);
double golden_map_distance(const CatModel& m, const Vocab& vocab, const TaskInstance& inst);

enum class Assumption { A, B };
/// A: eps / Delta. B: eps e^{2N/delta} / delta with delta from Gram-Schmidt
/// over `tokens`. Throws DegenerateVocab when Delta or delta is zero.
double epsilon0(double eps, const Vocab& vocab);
double epsilon0(double eps, int N, const std::vector<Vector>& tokens);

struct LengenPoint {
  int L_prime = 0;
  double max_error = 0.0;
  double accuracy = 0.0;
  double map_l1_max = 0.0;
  double r_hat = 0.0;  // max_error / (L_prime eps0); 0 when eps0 == 0
};

struct AuditReport {
  int build_length = 0;
  double epsilon = 0.0;
  double epsilon0 = 0.0;
  double filter_l1_to_delay = 0.0;
  double map_l1_max = 0.0;
  std::vector<LengenPoint> lengen;
  double r_hat = 0.0;
  bool lemma_regime = false;    // eps0 <= R0
  bool theorem_regime = false;  // eps0 <= R0 / L
};

// filter_l1_to_delay <= L eps0 with unit constant.
bool check_filter_bound(const AuditReport& report);
// Every point satisfies map_l1_max <= L' eps0.
bool check_golden_map_bound(const AuditReport& report);

std::vector<LengenPoint> length_gen_curve(const CatModel& m, const Vocab& vocab, const std::vector<int>& lengths,
                                          int suite_size, double eps0, std::uint64_t seed);

/// Measure eps at `build_length`, derive eps0 under assumption A and evaluate
/// the curve at `lengths`.
AuditReport run_audit(const CatModel& m, const Vocab& vocab, int build_length, const std::vector<int>& lengths,
                      int suite_size, std::uint64_t seed);

nlohmann::json to_json(const AuditReport& r);
// Columns L_prime,max_error,accuracy.
void write_lengen_csv(std::ostream& os, const std::vector<LengenPoint>& curve);

}  // namespace catlab
