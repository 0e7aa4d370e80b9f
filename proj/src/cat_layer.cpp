#include "catlab/cat_layer.hpp"

#include <string>

namespace catlab {

CatModel CatModel::identity(int d) {
  CatModel m;
  m.w_k = Matrix::Identity(d, d);
  m.w_q = Matrix::Identity(d, d);
  m.w_v = Matrix::Identity(d, d);
  return m;
}

void CatModel::validate() const {
  const auto d = w_k.rows();
  auto square = [d](const Matrix& w) { return w.rows() == d && w.cols() == d; };
  if (d < 1 || !square(w_k) || !square(w_q) || !square(w_v)) {
    throw Error(ErrorKind::StructureViolation, "CAT weights must be square with matching dimension");
  }
  if (!attn.is_hard() && !(attn.c > 0.0)) throw Error(ErrorKind::StructureViolation, "softmax scale must be positive");
}

namespace {

Matrix project(const EmbeddedSeq& x, const Filter& f, bool normalize, const Matrix& w) {
  EmbeddedSeq y = convolve(x, f);
  if (normalize) y = row_normalize(y);
  return y * w;
}

void check_query(const CatProjections& p, int query_index) {
  if (query_index < 0 || query_index >= p.keys.rows()) {
    throw Error(ErrorKind::InvalidInput, "query index " + std::to_string(query_index) + " out of range");
  }
}

}  // namespace

CatProjections cat_project(const EmbeddedSeq& x, const CatModel& m) {
  m.validate();
  if (x.rows() < 1 || x.cols() != m.dim()) throw Error(ErrorKind::InvalidInput, "sequence shape does not match model");
  CatProjections p;
  p.keys = project(x, m.f_k, m.normalize_k, m.w_k);
  if (m.key_post_delay != 0) p.keys = convolve(p.keys, Filter::delay(m.key_post_delay));
  p.queries = project(x, m.f_q, m.normalize_q, m.w_q);
  p.values = project(x, m.f_v, m.normalize_v, m.w_v);
  return p;
}

std::vector<double> cat_attention_map(const CatProjections& p, const CatModel& m, int query_index) {
  check_query(p, query_index);
  const Eigen::Index L = p.keys.rows();
  const Eigen::Index visible = m.causal_mask ? query_index + 1 : L;
  std::vector<double> scores(static_cast<size_t>(visible));
  Eigen::Map<Vector>(scores.data(), visible) = p.keys.topRows(visible) * p.queries.row(query_index).transpose();
  std::vector<double> w = attention_weights(scores, m.attn);
  w.resize(static_cast<size_t>(L), 0.0);
  return w;
}

Vector cat_forward(const CatProjections& p, const CatModel& m, int query_index) {
  const std::vector<double> w = cat_attention_map(p, m, query_index);
  return p.values.transpose() * Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
}

std::vector<double> cat_attention_map(const EmbeddedSeq& x, const CatModel& m, int query_index) {
  return cat_attention_map(cat_project(x, m), m, query_index);
}

Vector cat_forward(const EmbeddedSeq& x, const CatModel& m, int query_index) {
  return cat_forward(cat_project(x, m), m, query_index);
}

EmbeddedSeq cat_forward_all(const EmbeddedSeq& x, const CatModel& m) {
  if (!m.causal_mask) throw Error(ErrorKind::StructureViolation, "cat_forward_all requires the causal mask");
  const CatProjections p = cat_project(x, m);
  const int L = static_cast<int>(x.rows());
  EmbeddedSeq out(L, p.values.cols());
#pragma omp parallel for schedule(dynamic, 16)
  for (int t = 0; t < L; ++t) out.row(t) = cat_forward(p, m, t).transpose();
  return out;
}

EmbeddedSeq cat_forward_all_serial(const EmbeddedSeq& x, const CatModel& m) {
  if (!m.causal_mask) throw Error(ErrorKind::StructureViolation, "cat_forward_all requires the causal mask");
  const CatProjections p = cat_project(x, m);
  EmbeddedSeq out(x.rows(), p.values.cols());
  for (int t = 0; t < x.rows(); ++t) out.row(t) = cat_forward(p, m, t).transpose();
  return out;
}

MultiHeadConv::MultiHeadConv(int width, int heads)
    : width_(width), heads_(heads), taps_(static_cast<size_t>(width) * heads * heads, 0.0) {
  if (width < 1 || heads < 1) throw Error(ErrorKind::InvalidInput, "multi-head filter needs W >= 1 and H >= 1");
}

double& MultiHeadConv::at(int t, int out_head, int in_head) {
  return taps_[(static_cast<size_t>(t) * heads_ + out_head) * heads_ + in_head];
}

double MultiHeadConv::at(int t, int out_head, int in_head) const {
  return taps_[(static_cast<size_t>(t) * heads_ + out_head) * heads_ + in_head];
}

MultiHeadSeq multihead_convolve(const MultiHeadSeq& x, const MultiHeadConv& f) {
  const int H = f.heads();
  if (static_cast<int>(x.size()) != H) throw Error(ErrorKind::InvalidInput, "head count mismatch");
  const auto L = x.front().rows();
  const auto d = x.front().cols();
  for (const auto& head : x) {
    if (head.rows() != L || head.cols() != d) throw Error(ErrorKind::InvalidInput, "head shapes differ");
  }
  MultiHeadSeq out(static_cast<size_t>(H), EmbeddedSeq::Zero(L, d));
  for (int h = 0; h < H; ++h) {
    for (int j = 0; j < f.width() && j < L; ++j) {
      for (int g = 0; g < H; ++g) {
        const double w = f.at(j, h, g);
        if (w == 0.0) continue;
        out[static_cast<size_t>(h)].bottomRows(L - j) += w * x[static_cast<size_t>(g)].topRows(L - j);
      }
    }
  }
  return out;
}

}  // namespace catlab
