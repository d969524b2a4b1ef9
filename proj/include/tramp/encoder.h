#pragma once

// Partition-attention trajectory encoder.
//
// Each block splits its channels into four equal slices, one per partition
// kind. A slice is gathered into its kind's groups, self-attention runs over
// the rows x cols cells of every group, and the result is scattered back.
// The four slices are concatenated, projected, and passed through
// post-norm residual attention and FFN sublayers.

#include <cstddef>
#include <string>
#include <vector>

#include "tramp/params.h"
#include "tramp/partition.h"
#include "tramp/trajectory.h"

namespace tramp {

struct EncoderConfig {
  std::vector<std::size_t> block_dims{32, 64};
  std::size_t frames = 16;          // T_p
  std::size_t segment_length = 8;   // L
  std::size_t regions = 7;          // M
  std::size_t per_region = 9;       // N
  std::size_t heads_per_branch = 1;
  std::size_t input_channels = 5;   // C_p
  std::size_t ffn_ratio = 4;
  double ln_eps = 1e-5;

  PartitionScheme scheme() const {
    return PartitionScheme(frames, segment_length, regions, per_region);
  }
  std::size_t output_dim() const { return block_dims.back(); }
  // Throws ConfigError on any width the branch layout cannot split.
  void validate() const;
};

void init_encoder_params(ParamStore& ps, const EncoderConfig& cfg,
                         const std::string& prefix = "encoder");

// Attention weights of each branch for one block, in partition-kind order.
struct BlockTrace {
  std::vector<DiffTensor> branch_weights;  // [groups, heads, S, S]
};

struct EncoderOutput {
  DiffTensor cells;   // [T_p, P, D]
  DiffTensor pooled;  // [1, D]  (E_p)
};

DiffTensor trajectory_to_tensor(const TrajectoryTensor& x);

// [T_p, P, C_p] -> [T_p, P, D0]: linear channel lift plus learned time and
// landmark position encodings.
DiffTensor embed_input(const DiffTensor& x, const ParamStore& ps,
                       const EncoderConfig& cfg,
                       const std::string& prefix = "encoder");

DiffTensor encoder_block(const DiffTensor& h, const ParamStore& ps,
                         const PartitionScheme& scheme, std::size_t heads,
                         const std::string& prefix, double ln_eps = 1e-5,
                         BlockTrace* trace = nullptr);

EncoderOutput encode_trajectory(const DiffTensor& x, const ParamStore& ps,
                                const EncoderConfig& cfg,
                                const std::string& prefix = "encoder");
EncoderOutput encode_trajectory(const TrajectoryTensor& x, const ParamStore& ps,
                                const EncoderConfig& cfg,
                                const std::string& prefix = "encoder");

// Per-region mean of the encoded cells: [T_p, P, D] -> [M, D].
DiffTensor region_tokens(const DiffTensor& cells, const PartitionScheme& scheme);

}  // namespace tramp
