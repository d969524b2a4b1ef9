#include "grad_suite.h"

#include <random>

#include "tramp/encoder.h"
#include "tramp/experiment.h"
#include "tramp/fusion.h"
#include "tramp/layers.h"
#include "tramp/partition.h"
#include "tramp/rgb.h"
#include "tramp/scoring.h"

using namespace tramp;

namespace suite {

namespace {

std::vector<double> normal(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Several parameters (key biases) have exactly zero gradient, so the relative
// error there is pure cancellation noise; a step of 1e-4 keeps it well below
// tolerance while the O(h^2) truncation term stays near 1e-8.
constexpr double kStep = 1e-4;

}  // namespace

double check_fn(const std::vector<Shape>& shapes,
                const std::function<DiffTensor(const std::vector<DiffTensor>&)>& f,
                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore ps(seed);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    names.push_back("x" + std::to_string(i));
    ps.add_values(names.back(), shapes[i], normal(numel(shapes[i]), rng));
  }
  auto inputs = [&](ParamStore& p) {
    std::vector<DiffTensor> in;
    for (const auto& n : names) in.push_back(p.get(n));
    return in;
  };
  const Shape out_shape = f(inputs(ps)).shape();
  const DiffTensor proj = DiffTensor::constant(out_shape, normal(numel(out_shape), rng));
  return grad_check([&](ParamStore& p) { return sum(mul(f(inputs(p)), proj)); }, ps, kStep)
      .max_rel_error;
}

namespace {

double check_params(ParamStore& ps, const std::function<DiffTensor(ParamStore&)>& f,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Shape out_shape = f(ps).shape();
  const DiffTensor proj = DiffTensor::constant(out_shape, normal(numel(out_shape), rng));
  return grad_check([&](ParamStore& p) { return sum(mul(f(p), proj)); }, ps, kStep).max_rel_error;
}

}  // namespace

std::vector<OpCheck> run_op_suite(std::uint64_t seed) {
  std::vector<OpCheck> out;
  auto op = [&](const std::string& name, const std::vector<Shape>& shapes, auto f) {
    out.push_back({name, check_fn(shapes, f, seed + out.size())});
  };
  using V = const std::vector<DiffTensor>&;

  op("reshape", {{2, 6}}, [](V x) { return reshape(x[0], {3, 4}); });
  op("transpose_last2", {{2, 3, 4}}, [](V x) { return transpose_last2(x[0]); });
  op("gather_rows", {{4, 3}}, [](V x) {
    const std::vector<std::size_t> idx{2, 0, 2, 3, 1};
    return gather_rows(x[0], 3, idx, {5, 3});
  });
  op("slice_lastdim", {{3, 5}}, [](V x) { return slice_lastdim(x[0], 1, 3); });
  op("concat_lastdim", {{3, 2}, {3, 4}}, [](V x) { return concat_lastdim({x[0], x[1]}); });
  op("add", {{2, 3}, {2, 3}}, [](V x) { return add(x[0], x[1]); });
  op("add_broadcast", {{2, 3, 4}, {4}}, [](V x) { return add(x[0], x[1]); });
  op("sub_broadcast", {{3}, {2, 3}}, [](V x) { return sub(x[0], x[1]); });
  op("mul_broadcast", {{2, 3, 4}, {3, 4}}, [](V x) { return mul(x[0], x[1]); });
  op("scale", {{5}}, [](V x) { return scale(x[0], -1.7); });
  op("square", {{5}}, [](V x) { return square(x[0]); });
  op("gelu", {{7}}, [](V x) { return gelu(x[0]); });
  op("sum", {{2, 3}}, [](V x) { return sum(x[0]); });
  op("mean", {{2, 3}}, [](V x) { return mean(x[0]); });
  op("sum_squares", {{2, 3}}, [](V x) { return sum_squares(x[0]); });
  for (std::size_t axis = 0; axis < 3; ++axis) {
    op("mean_axis" + std::to_string(axis), {{2, 3, 4}},
       [axis](V x) { return mean_axis(x[0], axis); });
  }
  op("matmul", {{3, 4}, {4, 2}}, [](V x) { return matmul(x[0], x[1]); });
  op("matmul_batched", {{2, 3, 4}, {2, 4, 2}}, [](V x) { return matmul(x[0], x[1]); });
  op("matmul_broadcast", {{2, 1, 3, 4}, {5, 4, 2}}, [](V x) { return matmul(x[0], x[1]); });
  op("softmax_lastdim", {{3, 5}}, [](V x) { return softmax_lastdim(x[0]); });
  op("layer_norm", {{3, 6}, {6}, {6}}, [](V x) { return layer_norm(x[0], x[1], x[2]); });
  op("linear", {{3, 4}, {4, 5}, {5}}, [](V x) { return linear(x[0], x[1], x[2]); });
  op("split_merge_heads", {{2, 3, 8}}, [](V x) { return merge_heads(split_heads(x[0], 4)); });
  op("scaled_dot_attention", {{1, 2, 3, 4}, {1, 2, 5, 4}, {1, 2, 5, 4}}, [](V x) {
    return scaled_dot_attention(x[0], x[1], x[2]).output;
  });

  const PartitionScheme scheme(4, 2, 2, 2);
  for (auto kind : kAllPartitionKinds) {
    op("partition_" + to_string(kind), {{4, 4, 3}}, [&](V x) {
      const auto& m = scheme.map(kind);
      return scatter_partition(square(gather_partition(x[0], m)), m, 4, 4);
    });
  }

  {
    EncoderConfig ec;
    ec.block_dims = {8};
    ec.frames = 4;
    ec.segment_length = 2;
    ec.regions = 2;
    ec.per_region = 2;
    ParamStore ps(seed);
    init_encoder_params(ps, ec);
    std::mt19937_64 rng(seed + 100);
    const DiffTensor x = DiffTensor::constant({4, 4, 5}, normal(80, rng));
    out.push_back({"encoder(T_p=4,L=2,M=2,N=2,D=8)",
                   check_params(ps, [&](ParamStore& p) {
                     return encode_trajectory(x, p, ec).cells;
                   }, seed + 101)});
    out.push_back({"encoder_block_input", check_fn({{4, 4, 8}}, [&](V h) {
                     return encoder_block(h[0], ps, ec.scheme(), 1, "encoder.block0");
                   }, seed + 102)});
    out.push_back({"region_tokens", check_fn({{4, 4, 8}}, [&](V h) {
                     return region_tokens(h[0], ec.scheme());
                   }, seed + 103)});
  }

  {
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    fc.num_blocks = 3;
    ParamStore ps(seed);
    init_fusion_params(ps, fc);
    std::mt19937_64 rng(seed + 200);
    const DiffTensor ef = DiffTensor::constant({1, 16}, normal(16, rng));
    const DiffTensor ep = DiffTensor::constant({3, 16}, normal(48, rng));
    out.push_back({"fuse(3 blocks, D=16, z=4)",
                   check_params(ps, [&](ParamStore& p) { return fuse(ef, ep, p, fc); },
                                seed + 201)});
    out.push_back({"tramp_block_inputs", check_fn({{2, 16}, {3, 16}}, [&](V x) {
                     return tramp_block(x[0], x[1], ps, fc, "fusion.block0");
                   }, seed + 202)});
  }

  {
    ParamStore ps(seed);
    ToyRgbConfig rc{8};
    init_toy_rgb_params(ps, rc);
    init_projection_params(ps, 8, 16);
    std::mt19937_64 rng(seed + 300);
    RgbClip clip{32, 4, 4, {}};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < 32 * 4 * 4 * 3; ++i) clip.pixels.push_back(u(rng));
    out.push_back({"toy_rgb_encode+pool_and_project",
                   check_params(ps, [&](ParamStore& p) {
                     return pool_and_project(toy_rgb_encode(clip, p, rc), p);
                   }, seed + 301)});
  }

  {
    ParamStore ps(seed);
    init_head_params(ps, HeadConfig{16, 8, 4});
    std::mt19937_64 rng(seed + 400);
    const DiffTensor e = DiffTensor::constant({1, 16}, normal(16, rng));
    out.push_back({"mlp_head", check_params(ps, [&](ParamStore& p) {
                     return mlp_head(e, p);
                   }, seed + 401)});
  }

  {
    std::mt19937_64 rng(seed + 500);
    std::vector<double> y = normal(6, rng);
    out.push_back({"bmc_loss", check_fn({{6}}, [y](V x) {
                     return bmc_loss(x[0], y, BmcConfig{0.8});
                   }, seed + 501)});
  }
  return out;
}

OpCheck run_pipeline_check(std::uint64_t seed, std::size_t batch) {
  ExperimentConfig cfg = toy_config(seed);
  cfg.model.fusion.num_blocks = 3;
  cfg.synthetic.clips = batch;
  cfg.synthetic.subjects = batch;
  cfg.synthetic.quantize_scores = false;
  cfg.finalize();
  const Dataset ds = generate_synthetic(cfg.synthetic);
  Model model(cfg.model, seed);
  std::vector<PreparedSample> prepared;
  for (const auto& s : ds) prepared.push_back(model.prepare(s));
  std::vector<const PreparedSample*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  const auto rep = grad_check([&](ParamStore&) { return batch_loss(ptrs, model); },
                              model.params(), kStep);
  return {"bmc_loss o forward_pipeline (toy)", rep.max_rel_error};
}

}  // namespace suite
