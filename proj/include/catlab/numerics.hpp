#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "catlab/error.hpp"

namespace catlab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// L x d token embeddings, one row per position.
using EmbeddedSeq = Matrix;

inline constexpr double kNormFloor = 1e-12;
inline constexpr double kProbSumTol = 1e-9;
inline constexpr double kGramSchmidtFloor = 1e-9;

/// Finite convolution filter with taps at integer offsets [t_min, t_max].
///
/// Offset j multiplies x_{i-j}: positive offsets look back (delay), negative
/// offsets look ahead.
class Filter {
 public:
  Filter(std::vector<double> taps, int t_min);

  static Filter delay(int i);
  static Filter causal(std::vector<double> taps) { return Filter(std::move(taps), 0); }
  // Exponential smoothing rho^i, i in [0, width).
  static Filter exponential(double rho, int width);
  static Filter ones(int width);

  const std::vector<double>& taps() const noexcept { return taps_; }
  int t_min() const noexcept { return t_min_; }
  int t_max() const noexcept { return t_min_ + static_cast<int>(taps_.size()) - 1; }
  int size() const noexcept { return static_cast<int>(taps_.size()); }
  bool is_causal() const noexcept { return t_min_ >= 0; }

  // Tap at an offset; zero outside the support.
  double at(int offset) const noexcept;

  bool operator==(const Filter&) const = default;

 private:
  std::vector<double> taps_;
  int t_min_;
};

// f * g as filters: (f * g)(t) = sum_s f(s) g(t - s).
Filter compose(const Filter& f, const Filter& g);

// Sum of |f(t) - g(t)| over the union of supports.
double l1_distance(const Filter& f, const Filter& g);

// Rows are token embeddings indexed by id.
class Vocab {
 public:
  explicit Vocab(Matrix embeddings, bool unit_norm = true);

  static Vocab orthonormal(int n, int d);
  // Random unit vectors with pairwise |cos| <= max_abs_cos, by rejection.
  static Vocab random_unit(int n, int d, double max_abs_cos, unsigned long long seed);

  int size() const noexcept { return static_cast<int>(embeddings_.rows()); }
  int dim() const noexcept { return static_cast<int>(embeddings_.cols()); }
  bool unit_norm() const noexcept { return unit_norm_; }
  const Matrix& embeddings() const noexcept { return embeddings_; }
  auto row(int id) const { return embeddings_.row(id); }

 private:
  Matrix embeddings_;
  bool unit_norm_;
};

EmbeddedSeq embed(std::span<const int> tokens, const Vocab& vocab);

/// Output row i = sum_{j=t_min..t_max} f(j) x_{i-j}, rows outside [0, L) are zero.
EmbeddedSeq convolve(const EmbeddedSeq& x, const Filter& f);

// Throws ZeroRowError if any row norm is below `floor`.
EmbeddedSeq row_normalize(const EmbeddedSeq& x, double floor = kNormFloor);

struct AttnMode {
  enum class Kind { Soft, Hard };
  Kind kind = Kind::Hard;
  double c = 1.0;

  static AttnMode soft(double c);
  static AttnMode hard() { return {}; }
  bool is_hard() const noexcept { return kind == Kind::Hard; }
};

/// Soft(c): softmax(c * scores). Hard: uniform over the argmax set, which is
/// the c -> infinity limit of Soft(c).
std::vector<double> attention_weights(std::span<const double> scores, const AttnMode& mode);

// argmin_id ||v - e_id||, ties to the smallest id.
int nearest_token(const Eigen::Ref<const Vector>& v, const Vocab& vocab);

// (1 - max_{a != b} (a.b)^2)^{1/2} by pairwise enumeration.
double min_embedding_distance(const Vocab& vocab);

// 1 - max_{a != b} a.b, the softmax temperature gap used by the constructions.
double cosine_gap(const Vocab& vocab);

/// Gram-Schmidt in the given order; returns min_j |<b_j, u_j>|, or 0 when a
/// vector lies (numerically) in the span of its predecessors.
double gram_schmidt_delta(const std::vector<Vector>& tokens);

}  // namespace catlab
