#pragma once

// Landmark clip ingestion: parsing, nose-tip normalisation, region grouping,
// channel assembly and temporal standardisation.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tramp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  bool operator==(const Rgb&) const = default;
};

// Raw per-frame landmark positions (pixels) and sampled colours in [0,1].
struct LandmarkClip {
  std::size_t frames = 0;
  std::size_t landmarks = 0;
  std::vector<Point2> positions;  // frames x landmarks, frame-major
  std::vector<Rgb> colors;        // frames x landmarks, frame-major
  std::optional<std::size_t> anchor_index;
  double fps = 25.0;

  const Point2& position(std::size_t t, std::size_t p) const {
    return positions[t * landmarks + p];
  }
  Point2& position(std::size_t t, std::size_t p) {
    return positions[t * landmarks + p];
  }
  const Rgb& color(std::size_t t, std::size_t p) const {
    return colors[t * landmarks + p];
  }
  Rgb& color(std::size_t t, std::size_t p) { return colors[t * landmarks + p]; }

  // Throws StructuralError when sizes, anchor or colour range are invalid.
  void validate() const;
  bool operator==(const LandmarkClip&) const = default;
};

struct Region {
  std::string name;
  std::vector<std::size_t> members;
};

// M regions of N landmark indices each, all distinct.
struct RegionGrouping {
  std::vector<Region> regions;

  std::size_t region_count() const { return regions.size(); }
  std::size_t per_region() const {
    return regions.empty() ? 0 : regions.front().members.size();
  }
  std::size_t total() const { return region_count() * per_region(); }
  // Throws GroupingError on ragged regions or repeated indices.
  void validate() const;
};

// Seven facial regions of nine points over the 68-point landmark convention.
RegionGrouping default_grouping();
RegionGrouping load_grouping(const std::filesystem::path& path);
void save_grouping(const RegionGrouping& grouping,
                   const std::filesystem::path& path);

enum class ChannelMode { kXY, kRGB, kXYRGB };
std::size_t channel_count(ChannelMode mode);
std::string to_string(ChannelMode mode);
ChannelMode parse_channel_mode(const std::string& s);

enum class PaddingPolicy { kLoop, kZero, kDuplicate, kInterpolate };
std::string to_string(PaddingPolicy policy);
PaddingPolicy parse_padding_policy(const std::string& s);

// T x P x C real array.
struct TrajectoryTensor {
  std::size_t frames = 0;
  std::size_t points = 0;
  ChannelMode mode = ChannelMode::kXYRGB;
  std::size_t source_length = 0;
  std::vector<double> data;

  std::size_t channels() const { return channel_count(mode); }
  double& at(std::size_t t, std::size_t p, std::size_t c) {
    return data[(t * points + p) * channels() + c];
  }
  double at(std::size_t t, std::size_t p, std::size_t c) const {
    return data[(t * points + p) * channels() + c];
  }
  bool operator==(const TrajectoryTensor&) const = default;
};

// Clip file: JSON lines. The first line is the header
//   {"format":"tramp-clip","version":1,"frames":T,"landmarks":K,
//    "anchor_index":a,"fps":f}
// and each following line is one frame
//   {"frame":i,"landmarks":[[x,y,r,g,b],...]}
// with x, y in pixels and r, g, b in 0..255. Parsing rescales colours to
// [0,1]; serialising scales them back.
LandmarkClip parse_clip(std::istream& in);
LandmarkClip parse_clip(const std::filesystem::path& path);
void write_clip(const LandmarkClip& clip, std::ostream& out);
void write_clip(const LandmarkClip& clip, const std::filesystem::path& path);

LandmarkClip normalize_relative(const LandmarkClip& clip);
// Keeps grouping.total() landmarks in region-major order.
LandmarkClip select_and_group(const LandmarkClip& clip,
                              const RegionGrouping& grouping);
// Positions are divided by position_scale (the face crop size).
TrajectoryTensor assemble_channels(const LandmarkClip& clip, ChannelMode mode,
                                   double position_scale = 256.0);
// Output has exactly target_frames frames. `segment` is the local segment
// length L; target_frames must be a positive multiple of it.
TrajectoryTensor standardize_length(const TrajectoryTensor& t,
                                    std::size_t target_frames,
                                    PaddingPolicy policy, std::size_t segment);
TrajectoryTensor reverse_augment(const TrajectoryTensor& t, bool coin);

// Natural cubic spline through (i, values[i]) evaluated at `at` positions.
std::vector<double> natural_cubic_spline(const std::vector<double>& values,
                                         const std::vector<double>& at);

}  // namespace tramp
