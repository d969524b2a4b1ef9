#include <gsl/gsl_interp.h>
#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "tramp/errors.h"
#include "tramp/trajectory.h"

using namespace tramp;

namespace {

std::string clip_text(std::size_t frames, std::size_t landmarks, int ragged_frame = -1) {
  std::ostringstream os;
  os << R"({"format":"tramp-clip","version":1,"frames":)" << frames << R"(,"landmarks":)"
     << landmarks << R"(,"anchor_index":0,"fps":25})" << '\n';
  for (std::size_t t = 0; t < frames; ++t) {
    os << R"({"frame":)" << t << R"(,"landmarks":[)";
    const std::size_t k = static_cast<int>(t) == ragged_frame ? landmarks - 1 : landmarks;
    for (std::size_t p = 0; p < k; ++p) {
      os << (p ? "," : "") << '[' << 10.0 * p + t << ',' << 5.0 * p << ",255,128,0]";
    }
    os << "]}\n";
  }
  return os.str();
}

LandmarkClip random_clip(std::size_t frames, std::size_t landmarks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 256.0), col(0.0, 1.0);
  LandmarkClip c;
  c.frames = frames;
  c.landmarks = landmarks;
  c.anchor_index = 0;
  for (std::size_t i = 0; i < frames * landmarks; ++i) {
    c.positions.push_back({pos(rng), pos(rng)});
    c.colors.push_back({col(rng), col(rng), col(rng)});
  }
  return c;
}

// One point, one channel, frame values v.
TrajectoryTensor series(const std::vector<double>& v) {
  TrajectoryTensor t;
  t.frames = v.size();
  t.points = 1;
  t.mode = ChannelMode::kXY;
  t.source_length = v.size();
  for (double x : v) {
    t.data.push_back(x);
    t.data.push_back(-x);
  }
  return t;
}

std::vector<double> first_channel(const TrajectoryTensor& t) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.frames; ++i) out.push_back(t.at(i, 0, 0));
  return out;
}

}  // namespace

TEST(ParseClip, ThreeFrameFile) {
  std::istringstream in(clip_text(3, 68));
  LandmarkClip c = parse_clip(in);
  EXPECT_EQ(c.frames, 3u);
  EXPECT_EQ(c.landmarks, 68u);
  EXPECT_EQ(c.anchor_index, 0u);
  EXPECT_DOUBLE_EQ(c.position(2, 1).x, 12.0);
  EXPECT_DOUBLE_EQ(c.color(0, 0).r, 1.0);
  EXPECT_DOUBLE_EQ(c.color(0, 0).b, 0.0);
}

TEST(ParseClip, RaggedFrameIsStructuralError) {
  std::istringstream in(clip_text(4, 68, 2));
  EXPECT_THROW(parse_clip(in), StructuralError);
}

TEST(ParseClip, EmptyFileHasNoFrames) {
  std::istringstream in("");
  try {
    parse_clip(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no frames"), std::string::npos);
  }
}

TEST(ParseClip, MalformedLineReportsLineNumber) {
  std::string text = clip_text(2, 3);
  text += "{not json\n";
  std::istringstream in(text);
  try {
    parse_clip(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(ParseClip, WriteThenParseRoundTrips) {
  LandmarkClip c = random_clip(4, 5, 3);
  for (auto& col : c.colors) col = {1.0, 0.0, 128.0 / 255.0};
  std::stringstream ss;
  write_clip(c, ss);
  LandmarkClip back = parse_clip(ss);
  EXPECT_EQ(back.positions, c.positions);
  EXPECT_EQ(back.frames, c.frames);
  EXPECT_EQ(back.anchor_index, c.anchor_index);
}

TEST(Normalize, SubtractsNoseTip) {
  LandmarkClip c;
  c.frames = 1;
  c.landmarks = 2;
  c.anchor_index = 1;
  c.positions = {{120, 80}, {100, 100}};
  c.colors = {{0, 0, 0}, {0, 0, 0}};
  LandmarkClip n = normalize_relative(c);
  EXPECT_EQ(n.position(0, 0), (Point2{20, -20}));
  EXPECT_EQ(n.position(0, 1), (Point2{0, 0}));
}

TEST(Normalize, AnchorIsZeroInEveryFrame) {
  LandmarkClip c = random_clip(6, 4, 8);
  c.anchor_index = 2;
  LandmarkClip n = normalize_relative(c);
  for (std::size_t t = 0; t < c.frames; ++t) EXPECT_EQ(n.position(t, 2), (Point2{0, 0}));
}

TEST(Normalize, HeadTranslationIsRemoved) {
  LandmarkClip c = random_clip(5, 6, 9);
  LandmarkClip moved = c;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (std::size_t t = 0; t < c.frames; ++t) {
    // Translations that are exact in binary so the comparison can be strict.
    const double dx = std::round(shift(rng)), dy = std::round(shift(rng));
    for (std::size_t p = 0; p < c.landmarks; ++p) {
      moved.position(t, p).x = std::round(c.position(t, p).x) + dx;
      moved.position(t, p).y = std::round(c.position(t, p).y) + dy;
      c.position(t, p).x = std::round(c.position(t, p).x);
      c.position(t, p).y = std::round(c.position(t, p).y);
    }
  }
  EXPECT_EQ(normalize_relative(c).positions, normalize_relative(moved).positions);
}

TEST(Normalize, MissingAnchorIsStructuralError) {
  LandmarkClip c = random_clip(2, 3, 1);
  c.anchor_index.reset();
  EXPECT_THROW(normalize_relative(c), StructuralError);
}

TEST(Grouping, DefaultGivesSixtyThreeRegionMajorLandmarks) {
  RegionGrouping g = default_grouping();
  EXPECT_EQ(g.region_count(), 7u);
  EXPECT_EQ(g.per_region(), 9u);
  EXPECT_NO_THROW(g.validate());
  LandmarkClip c = random_clip(2, 68, 5);
  LandmarkClip s = select_and_group(c, g);
  EXPECT_EQ(s.landmarks, 63u);
  std::size_t k = 0;
  for (const auto& r : g.regions) {
    for (auto m : r.members) {
      EXPECT_EQ(s.position(1, k), c.position(1, m));
      ++k;
    }
  }
}

TEST(Grouping, DuplicateIndexIsGroupingError) {
  RegionGrouping g;
  g.regions = {{"a", {0, 1}}, {"b", {1, 2}}};
  EXPECT_THROW(g.validate(), GroupingError);
  EXPECT_THROW(select_and_group(random_clip(1, 4, 1), g), GroupingError);
}

TEST(Grouping, ToyGroupingKeepsDeclaredOrder) {
  RegionGrouping g;
  g.regions = {{"r0", {7, 2, 9}}, {"r1", {0, 5, 3}}};
  LandmarkClip c = random_clip(3, 10, 6);
  LandmarkClip s = select_and_group(c, g);
  const std::vector<std::size_t> order{7, 2, 9, 0, 5, 3};
  ASSERT_EQ(s.landmarks, 6u);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(s.position(t, k), c.position(t, order[k]));
  }
}

TEST(Grouping, OutOfRangeIndexIsGroupingError) {
  RegionGrouping g;
  g.regions = {{"r", {0, 12}}};
  EXPECT_THROW(select_and_group(random_clip(1, 10, 1), g), GroupingError);
}

TEST(Grouping, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "tramp_grouping_test.json";
  save_grouping(default_grouping(), path);
  RegionGrouping g = load_grouping(path);
  ASSERT_EQ(g.region_count(), 7u);
  EXPECT_EQ(g.regions[3].name, default_grouping().regions[3].name);
  EXPECT_EQ(g.regions[3].members, default_grouping().regions[3].members);
  std::filesystem::remove(path);
}

TEST(Channels, ModesAndCounts) {
  EXPECT_EQ(channel_count(ChannelMode::kXYRGB), 5u);
  EXPECT_EQ(channel_count(ChannelMode::kXY), 2u);
  EXPECT_EQ(channel_count(ChannelMode::kRGB), 3u);
  LandmarkClip c;
  c.frames = 1;
  c.landmarks = 1;
  c.positions = {{128.0, -64.0}};
  c.colors = {{0.5, 0.25, 1.0}};
  auto rgb = assemble_channels(c, ChannelMode::kRGB);
  EXPECT_EQ(rgb.data, (std::vector<double>{0.5, 0.25, 1.0}));
  auto xy = assemble_channels(c, ChannelMode::kXY);
  EXPECT_EQ(xy.data, (std::vector<double>{0.5, -0.25}));
  auto all = assemble_channels(c, ChannelMode::kXYRGB);
  EXPECT_EQ(all.data, (std::vector<double>{0.5, -0.25, 0.5, 0.25, 1.0}));
  EXPECT_EQ(parse_channel_mode("xy"), ChannelMode::kXY);
  EXPECT_THROW(parse_channel_mode("xyz"), ConfigError);
}

TEST(Standardize, LoopPadding) {
  auto out = standardize_length(series({1, 2, 3}), 8, PaddingPolicy::kLoop, 1);
  EXPECT_EQ(first_channel(out), (std::vector<double>{1, 2, 3, 1, 2, 3, 1, 2}));
  EXPECT_EQ(out.source_length, 3u);
}

TEST(Standardize, DuplicatePadding) {
  auto out = standardize_length(series({1, 2, 3}), 6, PaddingPolicy::kDuplicate, 2);
  EXPECT_EQ(first_channel(out), (std::vector<double>{1, 2, 3, 3, 3, 3}));
}

TEST(Standardize, ZeroPadding) {
  auto out = standardize_length(series({1, 2, 3}), 4, PaddingPolicy::kZero, 4);
  EXPECT_EQ(first_channel(out), (std::vector<double>{1, 2, 3, 0}));
  EXPECT_EQ(out.at(3, 0, 1), 0.0);
}

TEST(Standardize, TruncationKeepsTheTail) {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  for (auto p : {PaddingPolicy::kLoop, PaddingPolicy::kZero, PaddingPolicy::kDuplicate,
                 PaddingPolicy::kInterpolate}) {
    auto out = standardize_length(series(v), 8, p, 8);
    EXPECT_EQ(first_channel(out), (std::vector<double>{3, 4, 5, 6, 7, 8, 9, 10}))
        << to_string(p);
  }
}

TEST(Standardize, InterpolationHitsEndpoints) {
  auto out = standardize_length(series({2, -1, 5}), 8, PaddingPolicy::kInterpolate, 4);
  ASSERT_EQ(out.frames, 8u);
  EXPECT_NEAR(out.at(0, 0, 0), 2.0, 1e-9);
  EXPECT_NEAR(out.at(7, 0, 0), 5.0, 1e-9);
  EXPECT_NEAR(out.at(7, 0, 1), -5.0, 1e-9);
}

TEST(Standardize, TargetMustBeMultipleOfSegment) {
  EXPECT_THROW(standardize_length(series({1, 2}), 12, PaddingPolicy::kLoop, 8), ConfigError);
  EXPECT_THROW(standardize_length(series({1, 2}), 0, PaddingPolicy::kLoop, 8), ConfigError);
}

TEST(Spline, MatchesGslNaturalCubic) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {3u, 4u, 7u, 12u}) {
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i);
      ys[i] = g(rng);
    }
    std::vector<double> at;
    for (std::size_t i = 0; i < 25; ++i) at.push_back((n - 1) * i / 24.0);
    const auto ours = natural_cubic_spline(ys, at);

    gsl_interp* interp = gsl_interp_alloc(gsl_interp_cspline, n);
    gsl_interp_accel* acc = gsl_interp_accel_alloc();
    gsl_interp_init(interp, xs.data(), ys.data(), n);
    for (std::size_t i = 0; i < at.size(); ++i) {
      const double ref = gsl_interp_eval(interp, xs.data(), ys.data(), at[i], acc);
      EXPECT_NEAR(ours[i], ref, 1e-12) << "n=" << n << " u=" << at[i];
    }
    gsl_interp_accel_free(acc);
    gsl_interp_free(interp);
  }
}

TEST(Spline, TwoKnotsIsLinear) {
  auto v = natural_cubic_spline({1.0, 3.0}, {0.0, 0.25, 1.0});
  EXPECT_NEAR(v[0], 1.0, 1e-15);
  EXPECT_NEAR(v[1], 1.5, 1e-15);
  EXPECT_NEAR(v[2], 3.0, 1e-15);
}

TEST(Reverse, CoinControlsReversal) {
  auto t = series({1, 2, 3});
  EXPECT_EQ(first_channel(reverse_augment(t, true)), (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(reverse_augment(t, false), t);
  EXPECT_EQ(reverse_augment(reverse_augment(t, true), true), t);
}
