#pragma once

// Cross-modal fusion: RGB features query trajectory features through a stack
// of pre-norm cross-attention blocks. Only the query stream is updated.

#include <cstddef>
#include <string>
#include <vector>

#include "tramp/params.h"

namespace tramp {

struct FusionConfig {
  std::size_t num_blocks = 3;
  std::size_t heads = 8;  // z
  std::size_t dim = 64;   // D
  std::size_t ffn_hidden = 0;  // 0 -> 4 * dim
  double ln_eps = 1e-5;

  std::size_t head_dim() const { return dim / heads; }
  std::size_t hidden() const { return ffn_hidden ? ffn_hidden : 4 * dim; }
  void validate() const;
};

struct FusionTrace {
  std::size_t heads = 0;
  std::size_t query_len = 0;
  std::size_t key_len = 0;
  // Per block: heads x query_len x key_len attention weights.
  std::vector<std::vector<double>> attention;
  // Per block: the query stream entering the block.
  std::vector<std::vector<double>> query_inputs;

  double weight(std::size_t block, std::size_t head, std::size_t q, std::size_t k) const {
    return attention[block][(head * query_len + q) * key_len + k];
  }
  // One JSON object per (block, head) with its attention rows.
  std::string dump() const;
};

void init_tramp_block_params(ParamStore& ps, const FusionConfig& cfg,
                             const std::string& prefix);
void init_fusion_params(ParamStore& ps, const FusionConfig& cfg,
                        const std::string& prefix = "fusion");

// One block: e_f [Sq, D] attends to e_p [Sk, D]; returns the updated e_f.
DiffTensor tramp_block(const DiffTensor& e_f, const DiffTensor& e_p, const ParamStore& ps,
                       const FusionConfig& cfg, const std::string& prefix,
                       FusionTrace* trace = nullptr);

std::string fusion_block_name(const std::string& prefix, std::size_t i);

// num_blocks tramp_blocks in sequence; the result is E_O.
DiffTensor fuse(const DiffTensor& e_f, const DiffTensor& e_p, const ParamStore& ps,
                const FusionConfig& cfg, FusionTrace* trace = nullptr,
                const std::string& prefix = "fusion");

// Baselines and the query-swapped variant used by the ablation harness.
enum class FusionStrategy { kTrampRgb, kTrampTrajectory, kSummation, kConcatenation };
std::string to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(const std::string& s);

void init_fusion_strategy_params(ParamStore& ps, FusionStrategy strategy,
                                 const FusionConfig& cfg,
                                 const std::string& prefix = "fusion");
// Returns a [1, D] fused vector. Multi-token inputs are mean-pooled by the
// baselines; the TraMP variants attend over them.
DiffTensor fuse_streams(FusionStrategy strategy, const DiffTensor& e_f,
                        const DiffTensor& e_p, const ParamStore& ps,
                        const FusionConfig& cfg, FusionTrace* trace = nullptr,
                        const std::string& prefix = "fusion");

}  // namespace tramp
