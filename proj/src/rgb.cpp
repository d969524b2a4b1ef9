#include "tramp/rgb.h"

#include <algorithm>
#include <cmath>

#include "binary_io.h"
#include "tramp/errors.h"
#include "tramp/layers.h"

namespace tramp {

namespace {
constexpr std::string_view kFeatureMagic = "TRAMPFT1";
constexpr std::string_view kFrameMagic = "TRAMPFR1";
}  // namespace

RgbPadding parse_rgb_padding(const std::string& s) {
  if (s == "loop") return RgbPadding::kLoop;
  if (s == "zero") return RgbPadding::kZero;
  throw ConfigError("unknown RGB padding: " + s);
}

std::string to_string(RgbPadding p) { return p == RgbPadding::kLoop ? "loop" : "zero"; }

RgbClip prepare_clip(const RgbClip& raw, std::size_t target_frames, RgbPadding padding) {
  if (target_frames == 0 || target_frames % kSubclipLength != 0) {
    throw ConfigError("RGB clip length " + std::to_string(target_frames) +
                      " is not a positive multiple of 16");
  }
  if (raw.frames == 0) throw StructuralError("RGB clip has no frames");
  const std::size_t fs = raw.frame_size();
  RgbClip out{target_frames, raw.height, raw.width, {}};
  if (raw.frames >= target_frames) {
    out.pixels.assign(raw.pixels.end() - static_cast<std::ptrdiff_t>(target_frames * fs),
                      raw.pixels.end());
    return out;
  }
  out.pixels.assign(target_frames * fs, 0.0);
  const std::size_t copies = padding == RgbPadding::kLoop ? target_frames : raw.frames;
  for (std::size_t i = 0; i < copies; ++i) {
    std::copy_n(raw.pixels.begin() + static_cast<std::ptrdiff_t>((i % raw.frames) * fs), fs,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(i * fs));
  }
  return out;
}

RgbClip sample_frames(const RgbClip& raw, std::size_t target_frames, std::mt19937_64* rng) {
  if (raw.frames <= target_frames || target_frames == 0) return raw;
  const double stride = static_cast<double>(raw.frames) / static_cast<double>(target_frames);
  double start = 0.0;
  if (rng) start = std::uniform_real_distribution<double>(0.0, stride)(*rng);
  const std::size_t fs = raw.frame_size();
  RgbClip out{target_frames, raw.height, raw.width, std::vector<double>(target_frames * fs)};
  for (std::size_t i = 0; i < target_frames; ++i) {
    const auto src = std::min(raw.frames - 1,
                              static_cast<std::size_t>(start + stride * static_cast<double>(i)));
    std::copy_n(raw.pixels.begin() + static_cast<std::ptrdiff_t>(src * fs), fs,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(i * fs));
  }
  return out;
}

std::vector<char> serialize_features(const RgbFeatureSet& fs) {
  detail::ByteWriter w;
  w.raw(kFeatureMagic);
  w.u64(fs.subclips);
  w.u64(fs.dim);
  for (double v : fs.values) w.f64(v);
  return w.bytes();
}

RgbFeatureSet deserialize_features(const std::vector<char>& bytes, std::size_t expected_dim) {
  detail::ByteReader r(bytes, "feature file");
  if (r.raw(kFeatureMagic.size()) != kFeatureMagic) throw LoadError("feature file: bad magic");
  RgbFeatureSet fs;
  fs.subclips = r.u64();
  fs.dim = r.u64();
  if (fs.subclips == 0 || fs.dim == 0) throw LoadError("feature file: empty feature set");
  if (expected_dim != 0 && fs.dim != expected_dim) {
    throw LoadError("feature file has width " + std::to_string(fs.dim) + ", config expects " +
                    std::to_string(expected_dim));
  }
  if (r.remaining() != fs.subclips * fs.dim * 8) {
    throw LoadError("feature file: payload holds " + std::to_string(r.remaining()) +
                    " bytes, header implies " + std::to_string(fs.subclips * fs.dim * 8));
  }
  fs.values.resize(fs.subclips * fs.dim);
  for (double& v : fs.values) {
    v = r.f64();
    if (!std::isfinite(v)) throw LoadError("feature file: non-finite value");
  }
  fs.provenance = FeatureProvenance::kLoaded;
  return fs;
}

void save_features(const RgbFeatureSet& fs, const std::filesystem::path& path) {
  detail::write_file(path, serialize_features(fs));
}

RgbFeatureSet load_features(const std::filesystem::path& path, std::size_t expected_dim) {
  return deserialize_features(detail::read_file(path), expected_dim);
}

void save_frames(const RgbClip& clip, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kFrameMagic);
  w.u64(clip.frames);
  w.u64(clip.height);
  w.u64(clip.width);
  for (double v : clip.pixels) w.f64(v);
  detail::write_file(path, w.bytes());
}

RgbClip load_frames(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "frame file");
  if (r.raw(kFrameMagic.size()) != kFrameMagic) throw LoadError("frame file: bad magic");
  RgbClip c;
  c.frames = r.u64();
  c.height = r.u64();
  c.width = r.u64();
  const std::size_t n = c.frames * c.frame_size();
  if (r.remaining() != n * 8) throw LoadError("frame file: payload size mismatch");
  c.pixels.resize(n);
  for (double& v : c.pixels) v = r.f64();
  return c;
}

void init_toy_rgb_params(ParamStore& ps, const ToyRgbConfig& cfg, const std::string& prefix) {
  const std::size_t d = cfg.feature_dim;
  add_dense(ps, prefix + ".lift", 3, d);
  ps.add_glorot(prefix + ".time_pos", {kSubclipLength, d}, kSubclipLength, d);
  add_dense(ps, prefix + ".q", d, d, false);
  add_dense(ps, prefix + ".k", d, d, false);
  add_dense(ps, prefix + ".v", d, d, false);
}

DiffTensor toy_rgb_encode(const RgbClip& clip, const ParamStore& ps,
                          const ToyRgbConfig& cfg, const std::string& prefix) {
  if (clip.frames == 0 || clip.frames % kSubclipLength != 0) {
    throw ShapeError("toy_rgb_encode: clip of " + std::to_string(clip.frames) +
                     " frames is not prepared into 16-frame subclips");
  }
  if (ps.get(prefix + ".lift.w").dim(1) != cfg.feature_dim) {
    throw ShapeError("toy_rgb_encode: parameters do not match feature_dim");
  }
  const std::size_t n = clip.subclips();
  const std::size_t pixels = clip.height * clip.width;
  std::vector<double> pooled(clip.frames * 3, 0.0);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t q = 0; q < pixels; ++q) {
      for (std::size_t c = 0; c < 3; ++c) {
        pooled[t * 3 + c] += clip.pixels[(t * pixels + q) * 3 + c];
      }
    }
  }
  for (double& v : pooled) v /= static_cast<double>(pixels);
  DiffTensor x = DiffTensor::constant({n, kSubclipLength, 3}, std::move(pooled));
  DiffTensor h = add(dense(ps, prefix + ".lift", x), ps.get(prefix + ".time_pos"));
  // Single-head attention: [n, 1, 16, D].
  auto heads = [](const DiffTensor& t) { return split_heads(t, 1); };
  auto att = scaled_dot_attention(heads(dense(ps, prefix + ".q", h)),
                                  heads(dense(ps, prefix + ".k", h)),
                                  heads(dense(ps, prefix + ".v", h)));
  h = add(h, merge_heads(att.output));
  return mean_axis(h, 1);  // [n, D_f]
}

DiffTensor features_to_tensor(const RgbFeatureSet& fs) {
  return DiffTensor::constant({fs.subclips, fs.dim}, fs.values);
}

void init_projection_params(ParamStore& ps, std::size_t feature_dim, std::size_t model_dim,
                            const std::string& prefix) {
  add_dense(ps, prefix, feature_dim, model_dim);
}

DiffTensor pool_and_project(const DiffTensor& features, const ParamStore& ps,
                            const std::string& prefix) {
  if (features.rank() != 2) {
    throw ShapeError("pool_and_project: expected [n, D_f], got " + shape_str(features.shape()));
  }
  DiffTensor mean = reshape(mean_axis(features, 0), {1, features.dim(1)});
  return dense(ps, prefix, mean);
}

}  // namespace tramp
