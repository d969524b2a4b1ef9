#include "tramp/fusion.h"

#include <sstream>

#include "json.hpp"
#include "tramp/errors.h"
#include "tramp/layers.h"

namespace tramp {

void FusionConfig::validate() const {
  if (num_blocks == 0) throw ConfigError("fusion needs at least one block");
  if (heads == 0 || dim == 0 || dim % heads != 0) {
    throw ConfigError("fusion width " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

std::string FusionTrace::dump() const {
  std::ostringstream os;
  for (std::size_t b = 0; b < attention.size(); ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t q = 0; q < query_len; ++q) {
        std::vector<double> row(key_len);
        for (std::size_t k = 0; k < key_len; ++k) row[k] = weight(b, h, q, k);
        rows.push_back(row);
      }
      os << nlohmann::json{{"block", b}, {"head", h}, {"rows", rows}}.dump() << '\n';
    }
  }
  return os.str();
}

std::string fusion_block_name(const std::string& prefix, std::size_t i) {
  return prefix + ".block" + std::to_string(i);
}

void init_tramp_block_params(ParamStore& ps, const FusionConfig& cfg,
                             const std::string& prefix) {
  const std::size_t z = cfg.heads, dk = cfg.head_dim(), d = cfg.dim;
  add_layer_norm(ps, prefix + ".ln_q", d);
  add_layer_norm(ps, prefix + ".ln_k", d);
  add_layer_norm(ps, prefix + ".ln_v", d);
  // Per-head projections W^Q, W^K, W^V: [z, d_k, d_k].
  ps.add_glorot(prefix + ".wq", {z, dk, dk}, dk, dk);
  ps.add_glorot(prefix + ".wk", {z, dk, dk}, dk, dk);
  ps.add_glorot(prefix + ".wv", {z, dk, dk}, dk, dk);
  ps.add_glorot(prefix + ".wo", {d, d}, d, d);
  add_layer_norm(ps, prefix + ".ln_ffn", d);
  add_ffn(ps, prefix + ".ffn", d, cfg.hidden());
}

void init_fusion_params(ParamStore& ps, const FusionConfig& cfg, const std::string& prefix) {
  cfg.validate();
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    init_tramp_block_params(ps, cfg, fusion_block_name(prefix, i));
  }
}

DiffTensor tramp_block(const DiffTensor& e_f, const DiffTensor& e_p, const ParamStore& ps,
                       const FusionConfig& cfg, const std::string& prefix,
                       FusionTrace* trace) {
  if (e_f.rank() != 2 || e_p.rank() != 2 || e_f.dim(1) != cfg.dim || e_p.dim(1) != cfg.dim) {
    throw ShapeError("tramp_block: features " + shape_str(e_f.shape()) + " and " +
                     shape_str(e_p.shape()) + " must both be [*, " + std::to_string(cfg.dim) +
                     "]");
  }
  const std::size_t sq = e_f.dim(0);
  const std::size_t sk = e_p.dim(0);
  const double eps = cfg.ln_eps;

  // [1, z, S, d_k] x [z, d_k, d_k] broadcasts over the head axis.
  DiffTensor q = matmul(split_heads(layer_norm(ps, prefix + ".ln_q", e_f, eps), cfg.heads),
                        ps.get(prefix + ".wq"));
  DiffTensor k = matmul(split_heads(layer_norm(ps, prefix + ".ln_k", e_p, eps), cfg.heads),
                        ps.get(prefix + ".wk"));
  DiffTensor v = matmul(split_heads(layer_norm(ps, prefix + ".ln_v", e_p, eps), cfg.heads),
                        ps.get(prefix + ".wv"));
  AttentionResult att = scaled_dot_attention(q, k, v);
  DiffTensor heads = reshape(merge_heads(att.output), {sq, cfg.dim});
  DiffTensor attended = add(e_f, matmul(heads, ps.get(prefix + ".wo")));

  if (trace) {
    trace->heads = cfg.heads;
    trace->query_len = sq;
    trace->key_len = sk;
    trace->attention.emplace_back(att.weights.values().begin(), att.weights.values().end());
    trace->query_inputs.emplace_back(e_f.values().begin(), e_f.values().end());
  }
  return add(attended, ffn(ps, prefix + ".ffn", layer_norm(ps, prefix + ".ln_ffn", attended, eps)));
}

DiffTensor fuse(const DiffTensor& e_f, const DiffTensor& e_p, const ParamStore& ps,
                const FusionConfig& cfg, FusionTrace* trace, const std::string& prefix) {
  cfg.validate();
  DiffTensor out = e_f;
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    out = tramp_block(out, e_p, ps, cfg, fusion_block_name(prefix, i), trace);
  }
  return out;
}

std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kTrampRgb: return "tramp_rgb";
    case FusionStrategy::kTrampTrajectory: return "tramp_trajectory";
    case FusionStrategy::kSummation: return "summation";
    case FusionStrategy::kConcatenation: return "concatenation";
  }
  return "?";
}

FusionStrategy parse_fusion_strategy(const std::string& s) {
  for (auto f : {FusionStrategy::kTrampRgb, FusionStrategy::kTrampTrajectory,
                 FusionStrategy::kSummation, FusionStrategy::kConcatenation}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown fusion strategy: " + s);
}

void init_fusion_strategy_params(ParamStore& ps, FusionStrategy strategy,
                                 const FusionConfig& cfg, const std::string& prefix) {
  switch (strategy) {
    case FusionStrategy::kTrampRgb:
    case FusionStrategy::kTrampTrajectory:
      init_fusion_params(ps, cfg, prefix);
      break;
    case FusionStrategy::kSummation:
      break;
    case FusionStrategy::kConcatenation:
      add_dense(ps, prefix + ".concat", 2 * cfg.dim, cfg.dim);
      break;
  }
}

DiffTensor fuse_streams(FusionStrategy strategy, const DiffTensor& e_f, const DiffTensor& e_p,
                        const ParamStore& ps, const FusionConfig& cfg, FusionTrace* trace,
                        const std::string& prefix) {
  auto pooled = [](const DiffTensor& t) {
    return t.dim(0) == 1 ? t : reshape(mean_axis(t, 0), {1, t.dim(1)});
  };
  switch (strategy) {
    case FusionStrategy::kTrampRgb:
      return pooled(fuse(e_f, e_p, ps, cfg, trace, prefix));
    case FusionStrategy::kTrampTrajectory:
      return pooled(fuse(e_p, e_f, ps, cfg, trace, prefix));
    case FusionStrategy::kSummation:
      return add(pooled(e_f), pooled(e_p));
    case FusionStrategy::kConcatenation:
      return dense(ps, prefix + ".concat", concat_lastdim({pooled(e_f), pooled(e_p)}));
  }
  throw ConfigError("unhandled fusion strategy");
}

}  // namespace tramp
