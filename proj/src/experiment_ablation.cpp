#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "tramp/errors.h"
#include "tramp/experiment.h"

namespace tramp {

using nlohmann::json;

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::kPadding: return "padding";
    case AblationAxis::kChannelMode: return "channel_mode";
    case AblationAxis::kNumBlocks: return "num_blocks";
    case AblationAxis::kFusionStrategy: return "fusion_strategy";
    case AblationAxis::kFrames: return "T_p";
  }
  return "?";
}

AblationAxis parse_ablation_axis(const std::string& s) {
  for (auto a : {AblationAxis::kPadding, AblationAxis::kChannelMode, AblationAxis::kNumBlocks,
                 AblationAxis::kFusionStrategy, AblationAxis::kFrames}) {
    if (to_string(a) == s) return a;
  }
  if (s == "frames" || s == "t_p") return AblationAxis::kFrames;
  throw ConfigError("unknown ablation axis: " + s +
                    " (expected padding, channel_mode, num_blocks, fusion_strategy or T_p)");
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base, AblationAxis axis) {
  std::vector<AblationVariant> out;
  auto add = [&](std::string label, auto edit) {
    ExperimentConfig c = base;
    edit(c);
    c.finalize();
    out.push_back({std::move(label), std::move(c)});
  };
  switch (axis) {
    case AblationAxis::kChannelMode:
      for (auto streams : {StreamSet::kTrajectoryOnly, StreamSet::kDual}) {
        for (auto mode : {ChannelMode::kXY, ChannelMode::kRGB, ChannelMode::kXYRGB}) {
          const std::string label = std::string(streams == StreamSet::kDual ? "dual" : "traj-only") +
                                    " C_p=" + std::to_string(channel_count(mode));
          add(label, [&](ExperimentConfig& c) {
            c.model.streams = streams;
            c.model.channel_mode = mode;
          });
        }
      }
      break;
    case AblationAxis::kNumBlocks:
      for (std::size_t b = 1; b <= 5; ++b) {
        add("blocks=" + std::to_string(b), [&](ExperimentConfig& c) {
          c.model.streams = StreamSet::kDual;
          c.model.strategy = FusionStrategy::kTrampRgb;
          c.model.fusion.num_blocks = b;
        });
      }
      break;
    case AblationAxis::kPadding: {
      // Labels read RGB padding / trajectory padding; "--" is no RGB stream.
      const std::pair<const char*, PaddingPolicy> traj_only[] = {
          {"--/zero", PaddingPolicy::kZero},
          {"--/loop", PaddingPolicy::kLoop},
          {"--/interpolation", PaddingPolicy::kInterpolate},
          {"--/duplication", PaddingPolicy::kDuplicate}};
      for (const auto& [label, pad] : traj_only) {
        add(label, [&](ExperimentConfig& c) {
          c.model.streams = StreamSet::kTrajectoryOnly;
          c.model.channel_mode = ChannelMode::kXY;
          c.model.padding = pad;
        });
      }
      const std::tuple<const char*, RgbPadding, PaddingPolicy> dual[] = {
          {"zero/zero", RgbPadding::kZero, PaddingPolicy::kZero},
          {"zero/loop", RgbPadding::kZero, PaddingPolicy::kLoop},
          {"loop/zero", RgbPadding::kLoop, PaddingPolicy::kZero},
          {"loop/loop", RgbPadding::kLoop, PaddingPolicy::kLoop}};
      for (const auto& [label, rgb, pad] : dual) {
        add(label, [&](ExperimentConfig& c) {
          c.model.streams = StreamSet::kDual;
          c.model.channel_mode = ChannelMode::kXYRGB;
          // RGB padding only acts on frames, so these rows use the toy encoder.
          c.model.provider = FeatureProvider::kToy;
          c.model.rgb_padding = rgb;
          c.model.padding = pad;
        });
      }
      break;
    }
    case AblationAxis::kFusionStrategy: {
      const std::pair<const char*, FusionStrategy> rows[] = {
          {"summation", FusionStrategy::kSummation},
          {"concatenation", FusionStrategy::kConcatenation},
          {"tramp (rgb query)", FusionStrategy::kTrampRgb},
          {"tramp (trajectory query)", FusionStrategy::kTrampTrajectory}};
      for (const auto& [label, strategy] : rows) {
        add(label, [&](ExperimentConfig& c) {
          c.model.streams = StreamSet::kDual;
          c.model.strategy = strategy;
        });
      }
      break;
    }
    case AblationAxis::kFrames:
      if (base.ablation_frames.empty()) throw ConfigError("ablation.frames is empty");
      for (auto t : base.ablation_frames) {
        add("T_p=" + std::to_string(t), [&](ExperimentConfig& c) {
          c.model.encoder.frames = t;
          c.frames_override.clear();
        });
      }
      break;
  }
  return out;
}

std::vector<std::string> AblationTable::row_labels() const {
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(r.label);
  return out;
}

std::string AblationTable::to_text() const {
  std::size_t w = to_string(axis).size();
  for (const auto& r : rows) w = std::max(w, r.label.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << to_string(axis);
  for (const auto& e : expressions) os << " | " << std::setw(12) << e;
  os << " | avg\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << std::setw(static_cast<int>(w)) << r.label;
    for (const auto& e : expressions) {
      auto it = r.report.rho.find(e);
      os << " | " << std::setw(12)
         << cell(it == r.report.rho.end() ? std::nullopt : std::optional<double>(it->second));
    }
    os << " | " << cell(r.report.mean_rho) << '\n';
  }
  return os.str();
}

std::string AblationTable::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : rows) os << r.report.metrics_jsonl(to_string(axis) + ":" + r.label);
  return os.str();
}

AblationTable ablate(const ExperimentConfig& base, AblationAxis axis, const Dataset& train_set,
                     const Dataset& test_set) {
  AblationTable table{axis, {}, {}};
  std::set<std::string> exprs;
  for (const auto& s : test_set) exprs.insert(s.expression);
  table.expressions.assign(exprs.begin(), exprs.end());
  for (auto& v : ablation_variants(base, axis)) {
    Model model(v.config.model, v.config.seed);
    train(v.config, model, train_set, {});
    table.rows.push_back({v.label, evaluate(model, test_set)});
  }
  return table;
}

}  // namespace tramp
