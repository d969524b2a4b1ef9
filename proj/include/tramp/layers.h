#pragma once

// Parameter-backed building blocks shared by the encoders, fusion and head.

#include <string>

#include "tramp/params.h"
#include "tramp/tensor.h"

namespace tramp {

// Registers `prefix.w` [in, out] (Glorot) and, when bias is set, `prefix.b`.
void add_dense(ParamStore& ps, const std::string& prefix, std::size_t in,
               std::size_t out, bool bias = true);
DiffTensor dense(const ParamStore& ps, const std::string& prefix,
                 const DiffTensor& x);

// Registers `prefix.gain` = 1 and `prefix.bias` = 0.
void add_layer_norm(ParamStore& ps, const std::string& prefix, std::size_t width);
DiffTensor layer_norm(const ParamStore& ps, const std::string& prefix,
                      const DiffTensor& x, double eps = 1e-5);

// Two dense layers with GELU between: prefix.fc1, prefix.fc2.
void add_ffn(ParamStore& ps, const std::string& prefix, std::size_t width,
             std::size_t hidden);
DiffTensor ffn(const ParamStore& ps, const std::string& prefix, const DiffTensor& x);

// [batch..., S, heads*d] -> [batch, heads, S, d] with batch flattened.
DiffTensor split_heads(const DiffTensor& x, std::size_t heads);
// [batch, heads, S, d] -> [batch, S, heads*d]
DiffTensor merge_heads(const DiffTensor& x);

struct AttentionResult {
  DiffTensor output;   // [batch, heads, Sq, d]
  DiffTensor weights;  // [batch, heads, Sq, Sk]
};

// softmax(q k^T / sqrt(d)) v over the last two axes.
AttentionResult scaled_dot_attention(const DiffTensor& q, const DiffTensor& k,
                                     const DiffTensor& v);

}  // namespace tramp
