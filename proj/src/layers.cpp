#include "tramp/layers.h"

#include <cmath>

#include "tramp/errors.h"

namespace tramp {

void add_dense(ParamStore& ps, const std::string& prefix, std::size_t in,
               std::size_t out, bool bias) {
  ps.add_glorot(prefix + ".w", {in, out}, in, out);
  if (bias) ps.add_constant(prefix + ".b", {out}, 0.0);
}

DiffTensor dense(const ParamStore& ps, const std::string& prefix,
                 const DiffTensor& x) {
  DiffTensor y = matmul(x, ps.get(prefix + ".w"));
  const std::string b = prefix + ".b";
  if (ps.contains(b)) y = add(y, ps.get(b));
  return y;
}

void add_layer_norm(ParamStore& ps, const std::string& prefix, std::size_t width) {
  ps.add_constant(prefix + ".gain", {width}, 1.0);
  ps.add_constant(prefix + ".bias", {width}, 0.0);
}

DiffTensor layer_norm(const ParamStore& ps, const std::string& prefix,
                      const DiffTensor& x, double eps) {
  return layer_norm(x, ps.get(prefix + ".gain"), ps.get(prefix + ".bias"), eps);
}

void add_ffn(ParamStore& ps, const std::string& prefix, std::size_t width,
             std::size_t hidden) {
  add_dense(ps, prefix + ".fc1", width, hidden);
  add_dense(ps, prefix + ".fc2", hidden, width);
}

DiffTensor ffn(const ParamStore& ps, const std::string& prefix, const DiffTensor& x) {
  return dense(ps, prefix + ".fc2", gelu(dense(ps, prefix + ".fc1", x)));
}

DiffTensor split_heads(const DiffTensor& x, std::size_t heads) {
  if (x.rank() < 2) throw ShapeError("split_heads: rank < 2");
  const Shape& s = x.shape();
  const std::size_t width = s.back();
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("split_heads: width " + std::to_string(width) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t d = width / heads;
  const std::size_t seq = s[s.size() - 2];
  const std::size_t batch = x.size() / (seq * width);
  std::vector<std::size_t> idx(batch * heads * seq);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < seq; ++t) {
        idx[(b * heads + h) * seq + t] = (b * seq + t) * heads + h;
      }
    }
  }
  return gather_rows(x, d, idx, {batch, heads, seq, d});
}

DiffTensor merge_heads(const DiffTensor& x) {
  if (x.rank() != 4) throw ShapeError("merge_heads: expected rank 4");
  const std::size_t batch = x.dim(0), heads = x.dim(1), seq = x.dim(2), d = x.dim(3);
  std::vector<std::size_t> idx(batch * seq * heads);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t h = 0; h < heads; ++h) {
        idx[(b * seq + t) * heads + h] = (b * heads + h) * seq + t;
      }
    }
  }
  return gather_rows(x, d, idx, {batch, seq, heads * d});
}

AttentionResult scaled_dot_attention(const DiffTensor& q, const DiffTensor& k,
                                     const DiffTensor& v) {
  const double d = static_cast<double>(q.shape().back());
  DiffTensor scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(d));
  DiffTensor w = softmax_lastdim(scores);
  return {matmul(w, v), w};
}

}  // namespace tramp
