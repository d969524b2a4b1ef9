#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "tramp/encoder.h"
#include "tramp/errors.h"
#include "tramp/layers.h"

using namespace tramp;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.block_dims = {8};
  c.frames = 4;
  c.segment_length = 2;
  c.regions = 2;
  c.per_region = 2;
  c.input_channels = 5;
  c.ffn_ratio = 2;
  return c;
}

DiffTensor random_input(const EncoderConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(c.frames * c.regions * c.per_region * c.input_channels);
  for (auto& x : v) x = g(rng);
  return DiffTensor::constant({c.frames, c.regions * c.per_region, c.input_channels}, v);
}

void zero(ParamStore& ps, const std::string& name) {
  for (auto& v : ps.get(name).mutable_values()) v = 0.0;
}

std::vector<double> vals(const DiffTensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Embed, ZeroInputGivesPositionEncodings) {
  auto c = small_config();
  ParamStore ps(1);
  init_encoder_params(ps, c);
  const auto x = DiffTensor::zeros({4, 4, 5});
  const auto h = embed_input(x, ps, c);
  const auto& tp = ps.get("encoder.embed.time_pos");
  const auto& pp = ps.get("encoder.embed.point_pos");
  const auto& b = ps.get("encoder.embed.b");
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t d = 0; d < 8; ++d)
        EXPECT_NEAR(h.at((t * 4 + p) * 8 + d), b.at(d) + tp.at(t * 8 + d) + pp.at(p * 8 + d),
                    1e-15);
}

TEST(Encoder, OutputShapes) {
  auto c = small_config();
  ParamStore ps(2);
  init_encoder_params(ps, c);
  auto out = encode_trajectory(random_input(c, 3), ps, c);
  EXPECT_EQ(out.cells.shape(), (Shape{4, 4, 8}));
  EXPECT_EQ(out.pooled.shape(), (Shape{1, 8}));

  c.block_dims = {8, 16};
  ParamStore ps2(2);
  init_encoder_params(ps2, c);
  EXPECT_EQ(encode_trajectory(random_input(c, 3), ps2, c).pooled.shape(), (Shape{1, 16}));
  EXPECT_EQ(c.output_dim(), 16u);
}

TEST(Encoder, PermutingPositionsWithinRegionsIsEquivariant) {
  auto c = small_config();
  c.per_region = 3;
  ParamStore ps(4);
  init_encoder_params(ps, c);
  zero(ps, "encoder.embed.point_pos");
  const std::size_t P = 6;
  const std::vector<std::size_t> pi = {2, 0, 1};  // same n-permutation in every region
  auto x = random_input(c, 5);
  std::vector<double> xp(x.size());
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t ch = 0; ch < 5; ++ch)
          xp[(t * P + m * 3 + pi[n]) * 5 + ch] = x.at((t * P + m * 3 + n) * 5 + ch);
  auto a = encode_trajectory(x, ps, c);
  auto b = encode_trajectory(DiffTensor::constant(x.shape(), xp), ps, c);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t d = 0; d < 8; ++d)
          EXPECT_NEAR(b.cells.at((t * P + m * 3 + pi[n]) * 8 + d),
                      a.cells.at((t * P + m * 3 + n) * 8 + d), 1e-12);
  for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(a.pooled.at(d), b.pooled.at(d), 1e-12);
}

TEST(EncoderBlock, AttentionRowsSumToOne) {
  auto c = small_config();
  ParamStore ps(6);
  init_encoder_params(ps, c);
  auto h = embed_input(random_input(c, 7), ps, c);
  BlockTrace trace;
  encoder_block(h, ps, c.scheme(), 1, "encoder.block0", 1e-5, &trace);
  ASSERT_EQ(trace.branch_weights.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& w = trace.branch_weights[k];
    const auto gs = c.scheme().grouped_shape(kAllPartitionKinds[k]);
    EXPECT_EQ(w.shape(), (Shape{gs.groups, 1, gs.cells_per_group(), gs.cells_per_group()}));
    const std::size_t s = gs.cells_per_group();
    for (std::size_t r = 0; r < w.size() / s; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < s; ++j) total += w.at(r * s + j);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(EncoderBlock, ZeroSublayersReduceToDoubleLayerNorm) {
  auto c = small_config();
  ParamStore ps(8);
  init_encoder_params(ps, c);
  for (auto n : {"encoder.block0.proj.w", "encoder.block0.proj.b", "encoder.block0.ffn.fc2.w",
                 "encoder.block0.ffn.fc2.b"})
    zero(ps, n);
  auto h = embed_input(random_input(c, 9), ps, c);
  auto out = encoder_block(h, ps, c.scheme(), 1, "encoder.block0");
  auto one = DiffTensor::full({8}, 1.0);
  auto nil = DiffTensor::zeros({8});
  auto expect = layer_norm(layer_norm(h, one, nil), one, nil);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.at(i), expect.at(i), 1e-12);
}

TEST(EncoderBlock, GradientMatchesFiniteDifferences) {
  auto c = small_config();
  ParamStore ps(10);
  init_encoder_params(ps, c);
  const auto x = random_input(c, 11);
  // Contract with a fixed random tensor; a plain sum of squares of a
  // layer-normed output is nearly constant.
  auto pc = c;
  pc.input_channels = 8;
  const auto proj = random_input(pc, 12);
  auto rep = grad_check(
      [&](ParamStore& p) {
        auto h = embed_input(x, p, c);
        return sum(mul(encoder_block(h, p, c.scheme(), 1, "encoder.block0"), proj));
      },
      ps, 1e-4);
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Encoder, Deterministic) {
  auto c = small_config();
  ParamStore a(12), b(12);
  init_encoder_params(a, c);
  init_encoder_params(b, c);
  const auto x = random_input(c, 13);
  EXPECT_EQ(vals(encode_trajectory(x, a, c).pooled), vals(encode_trajectory(x, b, c).pooled));
}

TEST(Encoder, LoopPaddedClipMatchesItsDoubledCopy) {
  auto c = small_config();
  c.frames = 8;
  c.segment_length = 4;
  ParamStore ps(14);
  init_encoder_params(ps, c);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1, 1);
  TrajectoryTensor t;
  t.frames = 4;
  t.points = 4;
  t.mode = ChannelMode::kXYRGB;
  t.data.resize(4 * 4 * 5);
  for (auto& v : t.data) v = u(rng);
  TrajectoryTensor twice = t;
  twice.frames = 8;
  twice.data.insert(twice.data.end(), t.data.begin(), t.data.end());
  auto padded = standardize_length(t, 8, PaddingPolicy::kLoop, 4);
  auto exact = standardize_length(twice, 8, PaddingPolicy::kLoop, 4);
  EXPECT_EQ(vals(encode_trajectory(padded, ps, c).pooled),
            vals(encode_trajectory(exact, ps, c).pooled));
}

TEST(Encoder, ChannelMismatchIsShapeError) {
  auto c = small_config();
  ParamStore ps(16);
  init_encoder_params(ps, c);
  TrajectoryTensor t;
  t.frames = 4;
  t.points = 4;
  t.mode = ChannelMode::kXY;
  t.data.assign(4 * 4 * 2, 0.0);
  EXPECT_THROW(encode_trajectory(t, ps, c), ShapeError);
}

TEST(EncoderConfig, Validation) {
  auto c = small_config();
  c.block_dims = {6};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.heads_per_branch = 2;
  c.block_dims = {12};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.segment_length = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.block_dims.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RegionTokens, MeanOverFramesAndMembers) {
  PartitionScheme s(2, 2, 2, 1);
  auto cells = DiffTensor::constant({2, 2, 1}, {1, 10, 3, 20});
  auto r = region_tokens(cells, s);
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(r.at(0), 2.0);
  EXPECT_DOUBLE_EQ(r.at(1), 15.0);
}
