#pragma once

#include <vector>

#include "catlab/numerics.hpp"

namespace catlab {

/// Single-head convolution-augmented attention layer.
///
/// Each projection is X -> maybe_normalize(X * f) * w. Keys may additionally be
/// delayed after normalization (`key_post_delay`), which is how a key filter of
/// the form D_1 * F is realized without producing an all-zero first row that
/// normalization would reject.
struct CatModel {
  Filter f_k = Filter::delay(0);
  Filter f_q = Filter::delay(0);
  Filter f_v = Filter::delay(0);
  Matrix w_k;
  Matrix w_q;
  Matrix w_v;
  bool normalize_k = false;
  bool normalize_q = false;
  bool normalize_v = false;
  int key_post_delay = 0;
  AttnMode attn = AttnMode::hard();
  bool causal_mask = false;

  int dim() const noexcept { return static_cast<int>(w_k.rows()); }

  // Identity weights, D_0 filters, no normalization.
  static CatModel identity(int d);
  void validate() const;
};

// Projected sequences, reusable across query positions.
struct CatProjections {
  Matrix keys;     // L x d
  Matrix queries;  // L x d
  Matrix values;   // L x d
};

CatProjections cat_project(const EmbeddedSeq& x, const CatModel& m);

std::vector<double> cat_attention_map(const CatProjections& p, const CatModel& m, int query_index);
Vector cat_forward(const CatProjections& p, const CatModel& m, int query_index);

std::vector<double> cat_attention_map(const EmbeddedSeq& x, const CatModel& m, int query_index);
Vector cat_forward(const EmbeddedSeq& x, const CatModel& m, int query_index);

/// One output row per position under the causal mask. OpenMP over positions.
EmbeddedSeq cat_forward_all(const EmbeddedSeq& x, const CatModel& m);
// Serial reference for cat_forward_all.
EmbeddedSeq cat_forward_all_serial(const EmbeddedSeq& x, const CatModel& m);

// W x H x H taps indexed (time, out-head, in-head).
class MultiHeadConv {
 public:
  MultiHeadConv(int width, int heads);

  int width() const noexcept { return width_; }
  int heads() const noexcept { return heads_; }
  double& at(int t, int out_head, int in_head);
  double at(int t, int out_head, int in_head) const;

 private:
  int width_;
  int heads_;
  std::vector<double> taps_;
};

// One L x d sequence per head.
using MultiHeadSeq = std::vector<EmbeddedSeq>;

/// out[h][i] = sum_{j<W} sum_g taps(j, h, g) x[g][i - j], zero-padded.
MultiHeadSeq multihead_convolve(const MultiHeadSeq& x, const MultiHeadConv& f);

}  // namespace catlab
