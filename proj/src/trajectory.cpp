#include "tramp/trajectory.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tramp/errors.h"

namespace tramp {

using nlohmann::json;

void LandmarkClip::validate() const {
  if (frames == 0) throw StructuralError("clip has no frames");
  if (positions.size() != frames * landmarks || colors.size() != frames * landmarks) {
    throw StructuralError("clip arrays do not match frames x landmarks");
  }
  if (anchor_index && *anchor_index >= landmarks) {
    throw StructuralError("anchor_index " + std::to_string(*anchor_index) +
                          " outside " + std::to_string(landmarks) + " landmarks");
  }
  for (const auto& c : colors) {
    for (double v : {c.r, c.g, c.b}) {
      if (!(v >= 0.0 && v <= 1.0)) throw StructuralError("colour outside [0,1]");
    }
  }
}

void RegionGrouping::validate() const {
  if (regions.empty()) throw GroupingError("grouping has no regions");
  const std::size_t n = regions.front().members.size();
  if (n == 0) throw GroupingError("region '" + regions.front().name + "' is empty");
  std::set<std::size_t> seen;
  for (const auto& r : regions) {
    if (r.members.size() != n) {
      throw GroupingError("region '" + r.name + "' has " +
                          std::to_string(r.members.size()) + " members, expected " +
                          std::to_string(n));
    }
    for (std::size_t m : r.members) {
      if (!seen.insert(m).second) {
        throw GroupingError("landmark " + std::to_string(m) + " appears twice");
      }
    }
  }
}

RegionGrouping default_grouping() {
  // 68-point convention: 0-16 jaw, 17-21 / 22-26 brows, 27-35 nose,
  // 36-41 / 42-47 eyes, 48-59 outer lip, 60-67 inner lip. Eyes and brows
  // borrow their nearest jaw-line points so every region holds nine.
  // Unused: 7, 8, 9 (chin) and 60, 64 (inner lip corners).
  return RegionGrouping{{
      {"left_eye", {42, 43, 44, 45, 46, 47, 14, 15, 16}},
      {"right_eye", {36, 37, 38, 39, 40, 41, 0, 1, 2}},
      {"nose", {27, 28, 29, 30, 31, 32, 33, 34, 35}},
      {"left_brow", {22, 23, 24, 25, 26, 10, 11, 12, 13}},
      {"right_brow", {17, 18, 19, 20, 21, 3, 4, 5, 6}},
      {"upper_lip", {48, 49, 50, 51, 52, 53, 61, 62, 63}},
      {"bottom_lip", {54, 55, 56, 57, 58, 59, 65, 66, 67}},
  }};
}

RegionGrouping load_grouping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GroupingError("cannot open grouping file " + path.string());
  RegionGrouping g;
  try {
    const json j = json::parse(in);
    for (const auto& r : j.at("regions")) {
      g.regions.push_back({r.at("name").get<std::string>(),
                           r.at("members").get<std::vector<std::size_t>>()});
    }
  } catch (const json::exception& e) {
    throw GroupingError("grouping file " + path.string() + ": " + e.what());
  }
  g.validate();
  return g;
}

void save_grouping(const RegionGrouping& grouping,
                   const std::filesystem::path& path) {
  json regions = json::array();
  for (const auto& r : grouping.regions) {
    regions.push_back({{"name", r.name}, {"members", r.members}});
  }
  std::ofstream out(path);
  out << json{{"regions", regions}}.dump(2) << '\n';
}

std::size_t channel_count(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::kXY: return 2;
    case ChannelMode::kRGB: return 3;
    case ChannelMode::kXYRGB: return 5;
  }
  return 0;
}

std::string to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::kXY: return "xy";
    case ChannelMode::kRGB: return "rgb";
    case ChannelMode::kXYRGB: return "xyrgb";
  }
  return "?";
}

ChannelMode parse_channel_mode(const std::string& s) {
  if (s == "xy" || s == "2") return ChannelMode::kXY;
  if (s == "rgb" || s == "3") return ChannelMode::kRGB;
  if (s == "xyrgb" || s == "5") return ChannelMode::kXYRGB;
  throw ConfigError("unknown channel mode: " + s);
}

std::string to_string(PaddingPolicy policy) {
  switch (policy) {
    case PaddingPolicy::kLoop: return "loop";
    case PaddingPolicy::kZero: return "zero";
    case PaddingPolicy::kDuplicate: return "duplicate";
    case PaddingPolicy::kInterpolate: return "interpolate";
  }
  return "?";
}

PaddingPolicy parse_padding_policy(const std::string& s) {
  if (s == "loop") return PaddingPolicy::kLoop;
  if (s == "zero") return PaddingPolicy::kZero;
  if (s == "duplicate" || s == "duplication") return PaddingPolicy::kDuplicate;
  if (s == "interpolate" || s == "interpolation") return PaddingPolicy::kInterpolate;
  throw ConfigError("unknown padding policy: " + s);
}

// -- clip file ----------------------------------------------------------------

LandmarkClip parse_clip(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("line " + std::to_string(line_no) + ": " + what);
  };

  if (!next_line()) throw ParseError("no frames");

  LandmarkClip clip;
  std::size_t declared_frames = 0;
  try {
    const json h = json::parse(line);
    if (h.value("format", "") != "tramp-clip") throw fail("not a tramp-clip header");
    declared_frames = h.at("frames").get<std::size_t>();
    clip.landmarks = h.at("landmarks").get<std::size_t>();
    clip.anchor_index = h.at("anchor_index").get<std::size_t>();
    clip.fps = h.value("fps", 25.0);
  } catch (const json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }

  while (next_line()) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("landmarks") || !rec["landmarks"].is_array()) {
      throw fail("record has no landmarks array");
    }
    const auto& lms = rec["landmarks"];
    if (lms.size() != clip.landmarks) {
      throw StructuralError("frame " + std::to_string(clip.frames) + " (line " +
                            std::to_string(line_no) + ") has " +
                            std::to_string(lms.size()) + " landmarks, expected " +
                            std::to_string(clip.landmarks));
    }
    for (const auto& lm : lms) {
      if (!lm.is_array() || lm.size() != 5) throw fail("landmark needs 5 numbers");
      double v[5];
      for (int i = 0; i < 5; ++i) {
        if (!lm[i].is_number()) throw fail("landmark entry is not a number");
        v[i] = lm[i].get<double>();
      }
      for (int i = 2; i < 5; ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 255.0)) throw fail("colour outside 0..255");
      }
      clip.positions.push_back({v[0], v[1]});
      clip.colors.push_back({v[2] / 255.0, v[3] / 255.0, v[4] / 255.0});
    }
    ++clip.frames;
  }

  if (clip.frames == 0) throw ParseError("no frames");
  if (clip.frames != declared_frames) {
    throw StructuralError("header declares " + std::to_string(declared_frames) +
                          " frames, file holds " + std::to_string(clip.frames));
  }
  clip.validate();
  return clip;
}

LandmarkClip parse_clip(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open clip file " + path.string());
  return parse_clip(in);
}

void write_clip(const LandmarkClip& clip, std::ostream& out) {
  json header = {{"format", "tramp-clip"},
                 {"version", 1},
                 {"frames", clip.frames},
                 {"landmarks", clip.landmarks},
                 {"anchor_index", clip.anchor_index.value_or(0)},
                 {"fps", clip.fps}};
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < clip.frames; ++t) {
    json lms = json::array();
    for (std::size_t p = 0; p < clip.landmarks; ++p) {
      const auto& pos = clip.position(t, p);
      const auto& c = clip.color(t, p);
      lms.push_back({pos.x, pos.y, c.r * 255.0, c.g * 255.0, c.b * 255.0});
    }
    out << json{{"frame", t}, {"landmarks", lms}}.dump() << '\n';
  }
}

void write_clip(const LandmarkClip& clip, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write clip file " + path.string());
  write_clip(clip, out);
}

// -- transforms ---------------------------------------------------------------

LandmarkClip normalize_relative(const LandmarkClip& clip) {
  if (!clip.anchor_index || *clip.anchor_index >= clip.landmarks) {
    throw StructuralError("normalize_relative: clip has no valid anchor landmark");
  }
  LandmarkClip out = clip;
  const std::size_t a = *clip.anchor_index;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const Point2 anchor = clip.position(t, a);
    for (std::size_t p = 0; p < clip.landmarks; ++p) {
      out.position(t, p).x = clip.position(t, p).x - anchor.x;
      out.position(t, p).y = clip.position(t, p).y - anchor.y;
    }
  }
  return out;
}

LandmarkClip select_and_group(const LandmarkClip& clip,
                              const RegionGrouping& grouping) {
  grouping.validate();
  std::vector<std::size_t> order;
  for (const auto& r : grouping.regions) {
    for (std::size_t m : r.members) {
      if (m >= clip.landmarks) {
        throw GroupingError("region '" + r.name + "' references landmark " +
                            std::to_string(m) + " but clip has " +
                            std::to_string(clip.landmarks));
      }
      order.push_back(m);
    }
  }
  LandmarkClip out;
  out.frames = clip.frames;
  out.landmarks = order.size();
  out.fps = clip.fps;
  out.positions.reserve(out.frames * out.landmarks);
  out.colors.reserve(out.frames * out.landmarks);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t m : order) {
      out.positions.push_back(clip.position(t, m));
      out.colors.push_back(clip.color(t, m));
    }
  }
  if (clip.anchor_index) {
    auto it = std::find(order.begin(), order.end(), *clip.anchor_index);
    if (it != order.end()) out.anchor_index = static_cast<std::size_t>(it - order.begin());
  }
  return out;
}

TrajectoryTensor assemble_channels(const LandmarkClip& clip, ChannelMode mode,
                                   double position_scale) {
  TrajectoryTensor t;
  t.frames = clip.frames;
  t.points = clip.landmarks;
  t.mode = mode;
  t.source_length = clip.frames;
  t.data.reserve(t.frames * t.points * channel_count(mode));
  for (std::size_t f = 0; f < clip.frames; ++f) {
    for (std::size_t p = 0; p < clip.landmarks; ++p) {
      const auto& pos = clip.position(f, p);
      const auto& c = clip.color(f, p);
      if (mode != ChannelMode::kRGB) {
        t.data.push_back(pos.x / position_scale);
        t.data.push_back(pos.y / position_scale);
      }
      if (mode != ChannelMode::kXY) {
        t.data.push_back(c.r);
        t.data.push_back(c.g);
        t.data.push_back(c.b);
      }
    }
  }
  return t;
}

std::vector<double> natural_cubic_spline(const std::vector<double>& values,
                                         const std::vector<double>& at) {
  const std::size_t n = values.size();
  std::vector<double> out(at.size());
  if (n == 0) throw ShapeError("natural_cubic_spline: no knots");
  if (n == 1) {
    std::fill(out.begin(), out.end(), values[0]);
    return out;
  }
  // Second derivatives at unit-spaced knots; natural ends fix m[0]=m[n-1]=0.
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> c(k), d(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double rhs = 6.0 * (values[i + 2] - 2.0 * values[i + 1] + values[i]);
      const double denom = 4.0 - (i ? c[i - 1] : 0.0);
      c[i] = 1.0 / denom;
      d[i] = (rhs - (i ? d[i - 1] : 0.0)) / denom;
    }
    m[k] = d[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = d[i] - c[i] * m[i + 2];
  }
  for (std::size_t q = 0; q < at.size(); ++q) {
    const double u = std::clamp(at[q], 0.0, static_cast<double>(n - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(u), n - 2);
    const double b = u - static_cast<double>(i);
    const double a = 1.0 - b;
    out[q] = a * values[i] + b * values[i + 1] +
             ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) / 6.0;
  }
  return out;
}

TrajectoryTensor standardize_length(const TrajectoryTensor& t,
                                    std::size_t target_frames,
                                    PaddingPolicy policy, std::size_t segment) {
  if (segment == 0 || target_frames == 0 || target_frames % segment != 0) {
    throw ConfigError("target length " + std::to_string(target_frames) +
                      " is not a positive multiple of segment length " +
                      std::to_string(segment));
  }
  if (t.frames == 0) throw StructuralError("standardize_length: empty trajectory");

  const std::size_t cell = t.points * t.channels();
  const std::size_t src = t.frames;
  TrajectoryTensor out = t;
  out.frames = target_frames;

  if (src >= target_frames) {
    // Keep the tail under every policy.
    out.data.assign(t.data.end() - static_cast<std::ptrdiff_t>(target_frames * cell),
                    t.data.end());
    return out;
  }

  out.data.assign(target_frames * cell, 0.0);
  auto frame = [&](std::size_t f) { return t.data.begin() + static_cast<std::ptrdiff_t>(f * cell); };
  switch (policy) {
    case PaddingPolicy::kLoop:
      for (std::size_t i = 0; i < target_frames; ++i) {
        std::copy_n(frame(i % src), cell, out.data.begin() + static_cast<std::ptrdiff_t>(i * cell));
      }
      break;
    case PaddingPolicy::kZero:
      std::copy(t.data.begin(), t.data.end(), out.data.begin());
      break;
    case PaddingPolicy::kDuplicate:
      for (std::size_t i = 0; i < target_frames; ++i) {
        std::copy_n(frame(std::min(i, src - 1)), cell,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * cell));
      }
      break;
    case PaddingPolicy::kInterpolate: {
      std::vector<double> at(target_frames);
      for (std::size_t i = 0; i < target_frames; ++i) {
        at[i] = static_cast<double>(i) * static_cast<double>(src - 1) /
                static_cast<double>(target_frames - 1);
      }
      std::vector<double> series(src);
      for (std::size_t c = 0; c < cell; ++c) {
        for (std::size_t f = 0; f < src; ++f) series[f] = t.data[f * cell + c];
        const auto res = natural_cubic_spline(series, at);
        for (std::size_t i = 0; i < target_frames; ++i) out.data[i * cell + c] = res[i];
      }
      break;
    }
  }
  return out;
}

TrajectoryTensor reverse_augment(const TrajectoryTensor& t, bool coin) {
  if (!coin) return t;
  TrajectoryTensor out = t;
  const std::size_t cell = t.points * t.channels();
  for (std::size_t f = 0; f < t.frames; ++f) {
    std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>((t.frames - 1 - f) * cell), cell,
                out.data.begin() + static_cast<std::ptrdiff_t>(f * cell));
  }
  return out;
}

}  // namespace tramp
