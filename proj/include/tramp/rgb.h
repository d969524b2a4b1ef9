#pragma once

// RGB-stream features: either loaded from disk or produced by a small
// built-in visual encoder, then pooled over subclips and projected to the
// trajectory feature width.

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tramp/params.h"

namespace tramp {

inline constexpr std::size_t kSubclipLength = 16;

// Raw or prepared frames, frame-major T x H x W x 3 in [0,1].
struct RgbClip {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  std::size_t frame_size() const { return height * width * 3; }
  std::size_t subclips() const { return frames / kSubclipLength; }
  bool operator==(const RgbClip&) const = default;
};

enum class RgbPadding { kLoop, kZero };
RgbPadding parse_rgb_padding(const std::string& s);
std::string to_string(RgbPadding p);

// Loop-pads (or zero-pads) short clips and keeps the tail of long ones.
// Throws ConfigError unless target_frames is a positive multiple of 16.
RgbClip prepare_clip(const RgbClip& raw, std::size_t target_frames,
                     RgbPadding padding = RgbPadding::kLoop);

// Uniform temporal sampling of target_frames from a clip longer than that.
// With an rng the sampling grid starts at a random offset inside one stride.
RgbClip sample_frames(const RgbClip& raw, std::size_t target_frames,
                      std::mt19937_64* rng = nullptr);

enum class FeatureProvenance { kLoaded, kToyEncoded, kSynthetic };

struct RgbFeatureSet {
  std::size_t subclips = 0;  // n
  std::size_t dim = 0;       // D_f
  std::vector<double> values;
  FeatureProvenance provenance = FeatureProvenance::kLoaded;
};

// Feature file: "TRAMPFT1", u64 n, u64 D_f, then n*D_f little-endian doubles.
std::vector<char> serialize_features(const RgbFeatureSet& fs);
RgbFeatureSet deserialize_features(const std::vector<char>& bytes,
                                   std::size_t expected_dim = 0);
void save_features(const RgbFeatureSet& fs, const std::filesystem::path& path);
// expected_dim = 0 accepts any width.
RgbFeatureSet load_features(const std::filesystem::path& path,
                            std::size_t expected_dim = 0);

// Frame file: "TRAMPFR1", u64 T, u64 H, u64 W, then pixels as doubles.
void save_frames(const RgbClip& clip, const std::filesystem::path& path);
RgbClip load_frames(const std::filesystem::path& path);

struct ToyRgbConfig {
  std::size_t feature_dim = 16;  // D_f
};

void init_toy_rgb_params(ParamStore& ps, const ToyRgbConfig& cfg,
                         const std::string& prefix = "rgb");
// Per 16-frame subclip: spatial mean per frame, linear lift plus a temporal
// position encoding, one residual self-attention layer over the 16 frame
// tokens, mean over tokens. Returns [n, D_f].
DiffTensor toy_rgb_encode(const RgbClip& clip, const ParamStore& ps,
                          const ToyRgbConfig& cfg, const std::string& prefix = "rgb");

DiffTensor features_to_tensor(const RgbFeatureSet& fs);

void init_projection_params(ParamStore& ps, std::size_t feature_dim,
                            std::size_t model_dim, const std::string& prefix = "rgb_proj");
// Mean over subclips then a learned projection: [n, D_f] -> [1, D].
DiffTensor pool_and_project(const DiffTensor& features, const ParamStore& ps,
                            const std::string& prefix = "rgb_proj");

}  // namespace tramp
