#include "catlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "catlab/rng.hpp"

namespace catlab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroRow: return "ZeroRow";
    case ErrorKind::EmptyVocab: return "EmptyVocab";
    case ErrorKind::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::SignatureNotUnique: return "SignatureNotUnique";
    case ErrorKind::NonTermination: return "NonTermination";
    case ErrorKind::StructureViolation: return "StructureViolation";
    case ErrorKind::DegenerateVocab: return "DegenerateVocab";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

Filter::Filter(std::vector<double> taps, int t_min) : taps_(std::move(taps)), t_min_(t_min) {
  if (taps_.empty()) throw Error(ErrorKind::InvalidInput, "filter needs at least one tap");
  for (double t : taps_) {
    if (!std::isfinite(t)) throw Error(ErrorKind::InvalidInput, "filter tap is not finite");
  }
}

Filter Filter::delay(int i) { return Filter({1.0}, i); }

Filter Filter::exponential(double rho, int width) {
  std::vector<double> taps(static_cast<size_t>(width));
  double w = 1.0;
  for (auto& t : taps) {
    t = w;
    w *= rho;
  }
  return Filter(std::move(taps), 0);
}

Filter Filter::ones(int width) { return Filter(std::vector<double>(static_cast<size_t>(width), 1.0), 0); }

double Filter::at(int offset) const noexcept {
  const int k = offset - t_min_;
  if (k < 0 || k >= size()) return 0.0;
  return taps_[static_cast<size_t>(k)];
}

Filter compose(const Filter& f, const Filter& g) {
  std::vector<double> taps(static_cast<size_t>(f.size() + g.size() - 1), 0.0);
  for (int i = 0; i < f.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) {
      taps[static_cast<size_t>(i + j)] += f.taps()[static_cast<size_t>(i)] * g.taps()[static_cast<size_t>(j)];
    }
  }
  return Filter(std::move(taps), f.t_min() + g.t_min());
}

double l1_distance(const Filter& f, const Filter& g) {
  const int lo = std::min(f.t_min(), g.t_min());
  const int hi = std::max(f.t_max(), g.t_max());
  double s = 0.0;
  for (int t = lo; t <= hi; ++t) s += std::abs(f.at(t) - g.at(t));
  return s;
}

Vocab::Vocab(Matrix embeddings, bool unit_norm) : embeddings_(std::move(embeddings)), unit_norm_(unit_norm) {
  if (!embeddings_.allFinite()) throw Error(ErrorKind::InvalidInput, "vocabulary has non-finite entries");
  if (unit_norm_) {
    for (Eigen::Index i = 0; i < embeddings_.rows(); ++i) {
      if (std::abs(embeddings_.row(i).norm() - 1.0) > 1e-9) {
        throw Error(ErrorKind::InvalidInput, "embedding " + std::to_string(i) + " is not unit norm");
      }
    }
  }
}

Vocab Vocab::orthonormal(int n, int d) {
  if (d < n) throw Error(ErrorKind::InvalidInput, "orthonormal vocabulary needs d >= n");
  return Vocab(Matrix::Identity(n, d));
}

Vocab Vocab::random_unit(int n, int d, double max_abs_cos, unsigned long long seed) {
  Rng rng(seed);
  Matrix e(n, d);
  constexpr int kMaxAttempts = 100000;
  for (int i = 0; i < n; ++i) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxAttempts) {
        throw Error(ErrorKind::InfeasibleSpec, "cannot place " + std::to_string(n) + " unit vectors in dimension " +
                                                   std::to_string(d) + " with the requested coherence");
      }
      Vector v(d);
      for (int k = 0; k < d; ++k) v[k] = rng.normal();
      v.normalize();
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) ok = std::abs(e.row(j).dot(v)) <= max_abs_cos;
      if (ok) {
        e.row(i) = v.transpose();
        break;
      }
    }
  }
  return Vocab(std::move(e));
}

EmbeddedSeq embed(std::span<const int> tokens, const Vocab& vocab) {
  EmbeddedSeq x(static_cast<Eigen::Index>(tokens.size()), vocab.dim());
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int id = tokens[i];
    if (id < 0 || id >= vocab.size()) throw Error(ErrorKind::InvalidInput, "token id out of vocabulary");
    x.row(static_cast<Eigen::Index>(i)) = vocab.row(id);
  }
  return x;
}

EmbeddedSeq convolve(const EmbeddedSeq& x, const Filter& f) {
  const Eigen::Index L = x.rows();
  EmbeddedSeq out = EmbeddedSeq::Zero(L, x.cols());
  for (int j = f.t_min(); j <= f.t_max(); ++j) {
    const double w = f.at(j);
    if (w == 0.0) continue;
    // out[i] += w * x[i - j] for 0 <= i - j < L.
    const Eigen::Index lo = std::max<Eigen::Index>(0, j);
    const Eigen::Index hi = std::min<Eigen::Index>(L, L + j);
    if (hi <= lo) continue;
    out.middleRows(lo, hi - lo) += w * x.middleRows(lo - j, hi - lo);
  }
  return out;
}

EmbeddedSeq row_normalize(const EmbeddedSeq& x, double floor) {
  EmbeddedSeq out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (!(n >= floor)) throw ZeroRowError(i);
    out.row(i) /= n;
  }
  return out;
}

AttnMode AttnMode::soft(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidInput, "softmax scale must be positive");
  return {Kind::Soft, c};
}

std::vector<double> attention_weights(std::span<const double> scores, const AttnMode& mode) {
  std::vector<double> w(scores.size(), 0.0);
  if (scores.empty()) return w;
  const double mx = *std::max_element(scores.begin(), scores.end());
  if (mode.is_hard()) {
    // Ties are decided with a relative tolerance so that bit-identical
    // signatures computed along different paths still split the mass.
    const double tol = 1e-12 * std::max(1.0, std::abs(mx));
    size_t m = 0;
    for (double s : scores) m += (s >= mx - tol) ? 1 : 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= mx - tol) w[i] = 1.0 / static_cast<double>(m);
    }
    return w;
  }
  double total = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(mode.c * (scores[i] - mx));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

int nearest_token(const Eigen::Ref<const Vector>& v, const Vocab& vocab) {
  if (vocab.size() == 0) throw Error(ErrorKind::EmptyVocab, "nearest_token on empty vocabulary");
  if (v.size() != vocab.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in nearest_token");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id = 0; id < vocab.size(); ++id) {
    const double d = (vocab.row(id).transpose() - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

namespace {

double max_offdiag(const Matrix& gram, bool squared) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
      const double g = squared ? gram(i, j) * gram(i, j) : gram(i, j);
      mx = std::max(mx, g);
    }
  }
  return mx;
}

}  // namespace

double min_embedding_distance(const Vocab& vocab) {
  if (vocab.size() < 2) throw Error(ErrorKind::InvalidInput, "need at least two tokens");
  const Matrix gram = vocab.embeddings() * vocab.embeddings().transpose();
  const double m = std::min(1.0, max_offdiag(gram, true));
  return std::sqrt(std::max(0.0, 1.0 - m));
}

double cosine_gap(const Vocab& vocab) {
  if (vocab.size() < 2) throw Error(ErrorKind::InvalidInput, "need at least two tokens");
  const Matrix gram = vocab.embeddings() * vocab.embeddings().transpose();
  return 1.0 - max_offdiag(gram, false);
}

double gram_schmidt_delta(const std::vector<Vector>& tokens) {
  std::vector<Vector> basis;
  double delta = 1.0;
  for (const auto& b : tokens) {
    Vector r = b;
    // Modified Gram-Schmidt: project out each basis vector in turn.
    for (const auto& u : basis) r -= u.dot(r) * u;
    const double beta = r.norm();
    if (beta < kGramSchmidtFloor) return 0.0;
    delta = std::min(delta, beta);
    basis.push_back(r / beta);
  }
  return delta;
}

}  // namespace catlab
