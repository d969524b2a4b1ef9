#include "tramp/encoder.h"

#include "tramp/errors.h"
#include "tramp/layers.h"

namespace tramp {

namespace {

std::string block_name(const std::string& prefix, std::size_t i) {
  return prefix + ".block" + std::to_string(i);
}

std::string transition_name(const std::string& prefix, std::size_t i) {
  return prefix + ".transition" + std::to_string(i);
}

}  // namespace

void EncoderConfig::validate() const {
  if (block_dims.empty()) throw ConfigError("encoder needs at least one block");
  if (heads_per_branch == 0) throw ConfigError("heads_per_branch must be positive");
  if (input_channels == 0) throw ConfigError("input_channels must be positive");
  for (std::size_t d : block_dims) {
    if (d == 0 || d % (4 * heads_per_branch) != 0) {
      throw ConfigError("encoder width " + std::to_string(d) +
                        " is not divisible by 4 x " +
                        std::to_string(heads_per_branch) + " heads");
    }
  }
  (void)scheme();
}

void init_encoder_params(ParamStore& ps, const EncoderConfig& cfg,
                         const std::string& prefix) {
  cfg.validate();
  const std::size_t d0 = cfg.block_dims.front();
  const std::size_t points = cfg.regions * cfg.per_region;
  add_dense(ps, prefix + ".embed", cfg.input_channels, d0);
  ps.add_glorot(prefix + ".embed.time_pos", {cfg.frames, d0}, cfg.frames, d0);
  ps.add_glorot(prefix + ".embed.point_pos", {points, d0}, points, d0);

  std::size_t width = d0;
  for (std::size_t i = 0; i < cfg.block_dims.size(); ++i) {
    const std::size_t d = cfg.block_dims[i];
    if (d != width) {
      add_dense(ps, transition_name(prefix, i), width, d);
      width = d;
    }
    const std::string b = block_name(prefix, i);
    const std::size_t slice = d / 4;
    for (std::size_t k = 0; k < 4; ++k) {
      add_dense(ps, b + ".branch" + std::to_string(k) + ".qkv", slice, 3 * slice);
    }
    add_dense(ps, b + ".proj", d, d);
    add_layer_norm(ps, b + ".ln1", d);
    add_ffn(ps, b + ".ffn", d, cfg.ffn_ratio * d);
    add_layer_norm(ps, b + ".ln2", d);
  }
}

DiffTensor trajectory_to_tensor(const TrajectoryTensor& x) {
  return DiffTensor::constant({x.frames, x.points, x.channels()}, x.data);
}

DiffTensor embed_input(const DiffTensor& x, const ParamStore& ps,
                       const EncoderConfig& cfg, const std::string& prefix) {
  const std::size_t points = cfg.regions * cfg.per_region;
  if (x.rank() != 3 || x.dim(0) != cfg.frames || x.dim(1) != points ||
      x.dim(2) != cfg.input_channels) {
    throw ShapeError("embed_input: expected [" + std::to_string(cfg.frames) + ", " +
                     std::to_string(points) + ", " + std::to_string(cfg.input_channels) +
                     "], got " + shape_str(x.shape()));
  }
  const std::size_t d0 = cfg.block_dims.front();
  DiffTensor h = dense(ps, prefix + ".embed", x);
  std::vector<std::size_t> time_idx(cfg.frames * points);
  for (std::size_t c = 0; c < time_idx.size(); ++c) time_idx[c] = c / points;
  h = add(h, gather_rows(ps.get(prefix + ".embed.time_pos"), d0, time_idx,
                         {cfg.frames, points, d0}));
  return add(h, ps.get(prefix + ".embed.point_pos"));
}

DiffTensor encoder_block(const DiffTensor& h, const ParamStore& ps,
                         const PartitionScheme& scheme, std::size_t heads,
                         const std::string& prefix, double ln_eps,
                         BlockTrace* trace) {
  if (h.rank() != 3 || h.dim(0) != scheme.frames() || h.dim(1) != scheme.points()) {
    throw ShapeError("encoder_block: input " + shape_str(h.shape()) +
                     " does not match the partition grid");
  }
  const std::size_t d = h.dim(2);
  if (d % (4 * heads) != 0) {
    throw ShapeError("encoder_block: width " + std::to_string(d) +
                     " not divisible by 4 x heads");
  }
  const std::size_t slice = d / 4;

  std::vector<DiffTensor> branches;
  for (std::size_t k = 0; k < 4; ++k) {
    const IndexMap& map = scheme.map(kAllPartitionKinds[k]);
    const GroupedShape& gs = map.shape();
    DiffTensor x = slice_lastdim(h, k * slice, slice);
    DiffTensor g = reshape(gather_partition(x, map),
                           {gs.groups, gs.cells_per_group(), slice});
    DiffTensor qkv = dense(ps, prefix + ".branch" + std::to_string(k) + ".qkv", g);
    auto att = scaled_dot_attention(split_heads(slice_lastdim(qkv, 0, slice), heads),
                                    split_heads(slice_lastdim(qkv, slice, slice), heads),
                                    split_heads(slice_lastdim(qkv, 2 * slice, slice), heads));
    if (trace) trace->branch_weights.push_back(att.weights);
    DiffTensor merged = merge_heads(att.output);  // [groups, S, slice]
    branches.push_back(scatter_partition(merged, map, scheme.frames(), scheme.points()));
  }
  DiffTensor a = dense(ps, prefix + ".proj", concat_lastdim(branches));
  DiffTensor u = layer_norm(ps, prefix + ".ln1", add(h, a), ln_eps);
  return layer_norm(ps, prefix + ".ln2", add(u, ffn(ps, prefix + ".ffn", u)), ln_eps);
}

EncoderOutput encode_trajectory(const DiffTensor& x, const ParamStore& ps,
                                const EncoderConfig& cfg, const std::string& prefix) {
  const PartitionScheme scheme = cfg.scheme();
  DiffTensor h = embed_input(x, ps, cfg, prefix);
  for (std::size_t i = 0; i < cfg.block_dims.size(); ++i) {
    const std::string t = transition_name(prefix, i);
    if (ps.contains(t + ".w")) h = dense(ps, t, h);
    h = encoder_block(h, ps, scheme, cfg.heads_per_branch, block_name(prefix, i),
                      cfg.ln_eps);
  }
  const std::size_t d = h.dim(2);
  DiffTensor pooled = reshape(mean_axis(reshape(h, {scheme.frames() * scheme.points(), d}), 0),
                              {1, d});
  return {h, pooled};
}

EncoderOutput encode_trajectory(const TrajectoryTensor& x, const ParamStore& ps,
                                const EncoderConfig& cfg, const std::string& prefix) {
  if (x.channels() != cfg.input_channels) {
    throw ShapeError("trajectory has " + std::to_string(x.channels()) +
                     " channels, encoder expects " + std::to_string(cfg.input_channels));
  }
  return encode_trajectory(trajectory_to_tensor(x), ps, cfg, prefix);
}

DiffTensor region_tokens(const DiffTensor& cells, const PartitionScheme& scheme) {
  const std::size_t d = cells.shape().back();
  DiffTensor r = reshape(cells, {scheme.frames(), scheme.regions(), scheme.per_region(), d});
  return mean_axis(mean_axis(r, 2), 0);
}

}  // namespace tramp
