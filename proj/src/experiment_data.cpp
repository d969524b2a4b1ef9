#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "tramp/errors.h"
#include "tramp/experiment.h"

namespace tramp {

namespace fs = std::filesystem;
using nlohmann::json;

double score_from_amplitude(double amplitude, double amplitude_max, bool quantize) {
  const double raw = 4.0 * (1.0 - amplitude / amplitude_max);
  return std::clamp(quantize ? std::round(raw) : raw, 0.0, 4.0);
}

std::vector<Point2> face_template() {
  constexpr double pi = std::numbers::pi;
  std::vector<Point2> p(68);
  for (int i = 0; i <= 16; ++i) {  // jaw, ear to ear through the chin
    const double a = pi - pi * i / 16.0;
    p[i] = {128.0 + 95.0 * std::cos(a), 110.0 + 110.0 * std::sin(a)};
  }
  for (int k = 0; k < 5; ++k) {
    const double lift = 8.0 * std::sin(pi * k / 4.0);
    p[17 + k] = {60.0 + 12.5 * k, 80.0 - lift};
    p[22 + k] = {146.0 + 12.5 * k, 80.0 - lift};
  }
  for (int k = 0; k < 4; ++k) p[27 + k] = {128.0, 95.0 + 13.0 * k};
  for (int k = 0; k < 5; ++k) p[31 + k] = {112.0 + 8.0 * k, 145.0};
  auto ellipse = [&](int first, int count, double cx, double cy, double rx, double ry) {
    for (int k = 0; k < count; ++k) {
      const double a = pi - 2.0 * pi * k / count;
      p[first + k] = {cx + rx * std::cos(a), cy - ry * std::sin(a)};
    }
  };
  ellipse(36, 6, 85.0, 100.0, 14.0, 6.0);
  ellipse(42, 6, 171.0, 100.0, 14.0, 6.0);
  ellipse(48, 12, 128.0, 180.0, 36.0, 16.0);
  ellipse(60, 8, 128.0, 180.0, 24.0, 7.0);
  return p;
}

namespace {

struct Motion {
  std::vector<std::size_t> points;
  Point2 center;
  bool vertical_only = false;
};

// Which landmarks an expression moves. Unknown names use the mouth.
Motion motion_for(const std::string& expression) {
  Motion m;
  if (expression == "frown") {
    for (std::size_t i = 17; i <= 26; ++i) m.points.push_back(i);
    m.center = {128.0, 60.0};
    m.vertical_only = true;
  } else if (expression == "squeeze_eyes") {
    for (std::size_t i = 36; i <= 47; ++i) m.points.push_back(i);
    m.center = {128.0, 100.0};
    m.vertical_only = true;
  } else {
    for (std::size_t i = 48; i <= 67; ++i) m.points.push_back(i);
    m.center = {128.0, 180.0};
  }
  return m;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.clips == 0 || spec.subjects == 0 || spec.expressions.empty()) {
    throw ConfigError("synthetic spec needs clips, subjects and expressions");
  }
  if (spec.min_frames == 0 || spec.max_frames < spec.min_frames) {
    throw ConfigError("synthetic spec has an empty frame-length range");
  }
  if (!(spec.amplitude_max > 0.0) || spec.score_weights.size() != 5) {
    throw ConfigError("synthetic spec needs amplitude_max > 0 and five score weights");
  }
  constexpr double pi = std::numbers::pi;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Feature directions shared by the whole dataset.
  std::vector<double> dir_a(spec.feature_dim), dir_b(spec.feature_dim);
  for (auto& v : dir_a) v = gauss(rng);
  for (auto& v : dir_b) v = gauss(rng);

  std::vector<double> subject_scale(spec.subjects);
  for (auto& s : subject_scale) s = 0.9 + 0.2 * unit(rng);

  const auto base = face_template();
  std::discrete_distribution<int> level(spec.score_weights.begin(), spec.score_weights.end());
  std::uniform_int_distribution<std::size_t> length(spec.min_frames, spec.max_frames);

  Dataset ds;
  ds.reserve(spec.clips);
  for (std::size_t i = 0; i < spec.clips; ++i) {
    Sample s;
    s.subject = i % spec.subjects;
    s.expression = spec.expressions[(i / spec.subjects) % spec.expressions.size()];
    s.id = "clip" + std::to_string(i);

    double amp;
    if (!spec.amplitudes.empty()) {
      amp = std::clamp(spec.amplitudes[i % spec.amplitudes.size()], 0.0, spec.amplitude_max);
    } else if (spec.quantize_scores) {
      const int k = level(rng);
      amp = spec.amplitude_max * (1.0 - k / 4.0);
      amp += spec.amplitude_jitter * 0.25 * spec.amplitude_max * (unit(rng) - 0.5);
      amp = std::clamp(amp, 0.0, spec.amplitude_max);
    } else {
      amp = spec.amplitude_max * unit(rng);
    }
    s.amplitude = amp;
    s.score = score_from_amplitude(amp, spec.amplitude_max, spec.quantize_scores);

    const std::size_t frames = length(rng);
    const double cycles = 1.0 + 1.5 * unit(rng);
    const double phase = 2.0 * pi * unit(rng);
    const double scale = subject_scale[s.subject];
    const Motion motion = motion_for(s.expression);
    std::vector<bool> moving(68, false);
    for (auto p : motion.points) moving[p] = true;

    LandmarkClip& clip = s.clip;
    clip.frames = frames;
    clip.landmarks = 68;
    clip.anchor_index = 30;
    clip.fps = 25.0;
    clip.positions.resize(frames * 68);
    clip.colors.resize(frames * 68);
    Point2 head{20.0 * (unit(rng) - 0.5), 20.0 * (unit(rng) - 0.5)};
    std::vector<double> disp(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      head.x += unit(rng) - 0.5;
      head.y += unit(rng) - 0.5;
      // In [0, amp]: rest at the start of each cycle, peak half way.
      const double d = amp * 0.5 *
                       (1.0 - std::cos(2.0 * pi * cycles * t / static_cast<double>(frames) + phase));
      disp[t] = d;
      for (std::size_t k = 0; k < 68; ++k) {
        Point2 q = base[k];
        Rgb c{0.85, 0.65, 0.55};
        if (k >= 48) c = {0.75, 0.40, 0.40};
        if (moving[k]) {
          const double dx = q.x - motion.center.x;
          const double dy = q.y - motion.center.y;
          const double norm = std::max(1.0, std::hypot(dx, dy));
          if (!motion.vertical_only) q.x += 0.5 * d * dx / norm;
          q.y += 0.5 * d * (dy >= 0.0 ? 1.0 : -1.0);
          c.r = std::min(1.0, c.r + 0.2 * d / spec.amplitude_max);
        }
        q.x = 128.0 + scale * (q.x - 128.0) + head.x;
        q.y = 128.0 + scale * (q.y - 128.0) + head.y;
        if (spec.coord_noise > 0.0) {
          q.x += spec.coord_noise * gauss(rng);
          q.y += spec.coord_noise * gauss(rng);
        }
        clip.position(t, k) = q;
        clip.color(t, k) = c;
      }
    }

    RgbClip& fr = s.frames;
    fr.frames = frames;
    fr.height = spec.frame_size;
    fr.width = spec.frame_size;
    fr.pixels.resize(frames * fr.frame_size());
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t y = 0; y < fr.height; ++y) {
        const bool lower = 2 * y >= fr.height;
        for (std::size_t x = 0; x < fr.width; ++x) {
          double* px = &fr.pixels[((t * fr.height + y) * fr.width + x) * 3];
          const double shade = lower ? 0.3 * disp[t] / spec.amplitude_max : 0.0;
          px[0] = std::min(1.0, 0.6 + shade);
          px[1] = 0.45;
          px[2] = 0.4;
        }
      }
    }

    RgbFeatureSet& f = s.features;
    f.subclips = spec.feature_subclips;
    f.dim = spec.feature_dim;
    f.provenance = FeatureProvenance::kSynthetic;
    f.values.resize(f.subclips * f.dim);
    for (std::size_t n = 0; n < f.subclips; ++n) {
      for (std::size_t k = 0; k < f.dim; ++k) {
        double v = (amp / spec.amplitude_max) * dir_a[k] + 0.2 * dir_b[k];
        if (spec.feature_noise > 0.0) v += spec.feature_noise * gauss(rng);
        f.values[n * f.dim + k] = v;
      }
    }
    ds.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "clips");
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "frames");
  std::ofstream index(dir / "index.jsonl");
  if (!index) throw Error("cannot write " + (dir / "index.jsonl").string());
  for (const auto& s : ds) {
    const std::string clip = "clips/" + s.id + ".jsonl";
    const std::string feat = "features/" + s.id + ".feat";
    const std::string frames = "frames/" + s.id + ".frames";
    write_clip(s.clip, dir / clip);
    save_features(s.features, dir / feat);
    save_frames(s.frames, dir / frames);
    json rec = {{"id", s.id},       {"subject", s.subject}, {"expression", s.expression},
                {"score", s.score}, {"amplitude", s.amplitude}, {"clip", clip},
                {"features", feat}, {"frames", frames}};
    index << rec.dump() << '\n';
  }
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream index(dir / "index.jsonl");
  if (!index) throw ParseError("cannot open " + (dir / "index.jsonl").string());
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(index, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
      Sample s;
      s.id = rec.at("id").get<std::string>();
      s.subject = rec.at("subject").get<std::size_t>();
      s.expression = rec.at("expression").get<std::string>();
      s.score = rec.at("score").get<double>();
      s.amplitude = rec.value("amplitude", 0.0);
      s.clip = parse_clip(dir / rec.at("clip").get<std::string>());
      if (rec.contains("features")) {
        s.features = load_features(dir / rec["features"].get<std::string>());
      }
      if (rec.contains("frames")) s.frames = load_frames(dir / rec["frames"].get<std::string>());
      ds.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError("index.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (ds.empty()) throw ParseError("dataset " + dir.string() + " has no samples");
  return ds;
}

Dataset load_or_generate(const ExperimentConfig& cfg) {
  if (cfg.data_source == "path") {
    if (cfg.data_path.empty()) throw ConfigError("data.path is empty");
    return load_dataset(cfg.data_path);
  }
  return generate_synthetic(cfg.synthetic);
}

Split split_by_subject(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  std::set<std::size_t> ids;
  for (const auto& s : ds) ids.insert(s.subject);
  std::vector<std::size_t> subjects(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * subjects.size()));
  if (subjects.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, subjects.size() - 1);
  std::set<std::size_t> test(subjects.begin(), subjects.begin() + n_test);
  Split out;
  for (const auto& s : ds) (test.count(s.subject) ? out.test : out.train).push_back(s);
  return out;
}

}  // namespace tramp
