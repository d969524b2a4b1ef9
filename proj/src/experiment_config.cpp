#include <cmath>
#include <fstream>
#include <sstream>

#include "tramp/errors.h"
#include "tramp/experiment.h"

namespace tramp {

using nlohmann::json;

void ModelConfig::finalize() {
  grouping = grouping.empty() ? "default" : grouping;
  encoder.input_channels = channel_count(channel_mode);
  encoder.validate();
  fusion.dim = encoder.output_dim();
  fusion.validate();
  if (head_hidden1 == 0 || head_hidden2 == 0) throw ConfigError("head widths must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (rgb_frames == 0 || rgb_frames % kSubclipLength != 0) {
    throw ConfigError("rgb_frames " + std::to_string(rgb_frames) + " is not a multiple of " +
                      std::to_string(kSubclipLength));
  }
  if (!(position_scale > 0.0)) throw ConfigError("position_scale must be positive");
  if (!(bmc.sigma_noise > 0.0)) throw ConfigError("sigma_noise must be positive");
}

double OptimConfig::lr_at(std::size_t epoch) const {
  if (decay_interval == 0) return lr;
  return lr * std::pow(decay_factor, static_cast<double>(epoch / decay_interval));
}

std::size_t OptimConfig::steps_per_epoch(std::size_t train_size) const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const std::size_t draws = iteration_multiplier * train_size;
  return (draws + batch_size - 1) / batch_size;
}

ExperimentConfig desk_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.seed = seed;
  c.finalize();
  return c;
}

ExperimentConfig full_scale_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.seed = seed;
  c.model.encoder.block_dims = {128, 256, 256, 256};
  c.model.encoder.frames = 128;
  c.model.encoder.heads_per_branch = 2;
  c.model.fusion.num_blocks = 3;
  c.model.fusion.heads = 8;
  c.model.feature_dim = 512;
  c.synthetic.feature_dim = 512;
  c.model.rgb_frames = 80;
  // 80 frames is five 16-frame subclips.
  c.model.head_hidden1 = 128;
  c.model.head_hidden2 = 64;
  c.optim = OptimConfig{};
  c.frames_override = {{"sit_at_rest", 64}};
  c.finalize();
  return c;
}

ExperimentConfig toy_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.seed = seed;
  c.model.encoder.block_dims = {16};
  c.model.encoder.frames = 16;
  c.model.encoder.segment_length = 8;
  c.model.encoder.regions = 2;
  c.model.encoder.per_region = 3;
  c.model.encoder.heads_per_branch = 1;
  c.model.encoder.ffn_ratio = 2;
  c.model.fusion.heads = 4;
  c.model.fusion.num_blocks = 1;
  c.model.fusion.ffn_hidden = 32;
  c.model.feature_dim = 8;
  c.model.head_hidden1 = 16;
  c.model.head_hidden2 = 8;
  c.synthetic.feature_dim = 8;
  // Two regions of three mouth points, nose tip as anchor.
  c.model.grouping = "mouth6";
  c.finalize();
  return c;
}

namespace {

const char* provider_name(FeatureProvider p) { return p == FeatureProvider::kFile ? "file" : "toy"; }

FeatureProvider parse_provider(const std::string& s) {
  if (s == "file") return FeatureProvider::kFile;
  if (s == "toy") return FeatureProvider::kToy;
  throw ConfigError("unknown provider: " + s);
}

const char* streams_name(StreamSet s) {
  switch (s) {
    case StreamSet::kDual: return "dual";
    case StreamSet::kTrajectoryOnly: return "trajectory";
    case StreamSet::kRgbOnly: return "rgb";
  }
  return "?";
}

StreamSet parse_streams(const std::string& s) {
  for (auto v : {StreamSet::kDual, StreamSet::kTrajectoryOnly, StreamSet::kRgbOnly}) {
    if (s == streams_name(v)) return v;
  }
  throw ConfigError("unknown streams: " + s);
}

const char* tokens_name(TrajectoryTokens t) {
  return t == TrajectoryTokens::kSingle ? "single" : "regions";
}

TrajectoryTokens parse_tokens(const std::string& s) {
  if (s == "single") return TrajectoryTokens::kSingle;
  if (s == "regions") return TrajectoryTokens::kRegions;
  throw ConfigError("unknown trajectory_tokens: " + s);
}

const char* sampling_name(BatchSampling b) {
  return b == BatchSampling::kWithReplacement ? "with_replacement" : "shuffle";
}

BatchSampling parse_sampling(const std::string& s) {
  if (s == "with_replacement") return BatchSampling::kWithReplacement;
  if (s == "shuffle") return BatchSampling::kShuffle;
  throw ConfigError("unknown sampling: " + s);
}

// Every key in `user` must exist in `defaults`, except under free-form maps.
void merge_checked(json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config " + path + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key: " + key);
    json& slot = defaults[it.key()];
    if (slot.is_object() && key != "frames_override") {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config " + where + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& m = c.model;
  const auto& e = m.encoder;
  const auto& s = c.synthetic;
  json j;
  j["seed"] = c.seed;
  j["model"] = {
      {"encoder",
       {{"block_dims", e.block_dims},
        {"frames", e.frames},
        {"segment_length", e.segment_length},
        {"regions", e.regions},
        {"per_region", e.per_region},
        {"heads_per_branch", e.heads_per_branch},
        {"ffn_ratio", e.ffn_ratio},
        {"ln_eps", e.ln_eps}}},
      {"fusion",
       {{"num_blocks", m.fusion.num_blocks},
        {"heads", m.fusion.heads},
        {"ffn_hidden", m.fusion.ffn_hidden},
        {"ln_eps", m.fusion.ln_eps}}},
      {"head", {{"hidden1", m.head_hidden1}, {"hidden2", m.head_hidden2}}},
      {"channel_mode", to_string(m.channel_mode)},
      {"padding", to_string(m.padding)},
      {"rgb_padding", to_string(m.rgb_padding)},
      {"rgb_frames", m.rgb_frames},
      {"provider", provider_name(m.provider)},
      {"feature_dim", m.feature_dim},
      {"fusion_strategy", to_string(m.strategy)},
      {"trajectory_tokens", tokens_name(m.trajectory_tokens)},
      {"streams", streams_name(m.streams)},
      {"position_scale", m.position_scale},
      {"reverse_augment", m.reverse_augment},
      {"sigma_noise", m.bmc.sigma_noise},
      {"grouping", m.grouping}};
  j["optim"] = {{"lr", c.optim.lr},
                {"momentum", c.optim.momentum},
                {"epochs", c.optim.epochs},
                {"batch_size", c.optim.batch_size},
                {"iteration_multiplier", c.optim.iteration_multiplier},
                {"decay_factor", c.optim.decay_factor},
                {"decay_interval", c.optim.decay_interval},
                {"sampling", sampling_name(c.optim.sampling)}};
  j["data"] = {{"source", c.data_source},
               {"path", c.data_path},
               {"test_fraction", c.test_fraction},
               {"synthetic",
                {{"clips", s.clips},
                 {"subjects", s.subjects},
                 {"min_frames", s.min_frames},
                 {"max_frames", s.max_frames},
                 {"amplitude_max", s.amplitude_max},
                 {"score_weights", s.score_weights},
                 {"quantize_scores", s.quantize_scores},
                 {"amplitudes", s.amplitudes},
                 {"amplitude_jitter", s.amplitude_jitter},
                 {"coord_noise", s.coord_noise},
                 {"feature_noise", s.feature_noise},
                 {"feature_dim", s.feature_dim},
                 {"feature_subclips", s.feature_subclips},
                 {"frame_size", s.frame_size},
                 {"expressions", s.expressions},
                 {"seed", s.seed}}}};
  j["frames_override"] = json::object();
  for (const auto& [k, v] : c.frames_override) j["frames_override"][k] = v;
  j["ablation"] = {{"frames", c.ablation_frames}};
  return j;
}

ExperimentConfig config_from_json(const json& user) {
  return config_from_json(user, desk_config(0));
}

ExperimentConfig config_from_json(const json& user, const ExperimentConfig& base) {
  if (!user.is_object() || !user.contains("seed")) {
    throw ConfigError("config: \"seed\" is mandatory");
  }
  json j = to_json(base);
  merge_checked(j, user, "");
  // The synthetic generator follows the experiment seed unless set.
  const bool synth_seed_given = user.contains("data") && user["data"].contains("synthetic") &&
                                user["data"]["synthetic"].contains("seed");
  if (!synth_seed_given) j["data"]["synthetic"]["seed"] = j["seed"];

  ExperimentConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "");
  const json& m = j["model"];
  const json& e = m["encoder"];
  c.model.encoder.block_dims = get<std::vector<std::size_t>>(e, "block_dims", "model.encoder");
  c.model.encoder.frames = get<std::size_t>(e, "frames", "model.encoder");
  c.model.encoder.segment_length = get<std::size_t>(e, "segment_length", "model.encoder");
  c.model.encoder.regions = get<std::size_t>(e, "regions", "model.encoder");
  c.model.encoder.per_region = get<std::size_t>(e, "per_region", "model.encoder");
  c.model.encoder.heads_per_branch = get<std::size_t>(e, "heads_per_branch", "model.encoder");
  c.model.encoder.ffn_ratio = get<std::size_t>(e, "ffn_ratio", "model.encoder");
  c.model.encoder.ln_eps = get<double>(e, "ln_eps", "model.encoder");
  const json& f = m["fusion"];
  c.model.fusion.num_blocks = get<std::size_t>(f, "num_blocks", "model.fusion");
  c.model.fusion.heads = get<std::size_t>(f, "heads", "model.fusion");
  c.model.fusion.ffn_hidden = get<std::size_t>(f, "ffn_hidden", "model.fusion");
  c.model.fusion.ln_eps = get<double>(f, "ln_eps", "model.fusion");
  c.model.head_hidden1 = get<std::size_t>(m["head"], "hidden1", "model.head");
  c.model.head_hidden2 = get<std::size_t>(m["head"], "hidden2", "model.head");
  c.model.channel_mode = parse_channel_mode(get<std::string>(m, "channel_mode", "model"));
  c.model.padding = parse_padding_policy(get<std::string>(m, "padding", "model"));
  c.model.rgb_padding = parse_rgb_padding(get<std::string>(m, "rgb_padding", "model"));
  c.model.rgb_frames = get<std::size_t>(m, "rgb_frames", "model");
  c.model.provider = parse_provider(get<std::string>(m, "provider", "model"));
  c.model.feature_dim = get<std::size_t>(m, "feature_dim", "model");
  c.model.strategy = parse_fusion_strategy(get<std::string>(m, "fusion_strategy", "model"));
  c.model.trajectory_tokens = parse_tokens(get<std::string>(m, "trajectory_tokens", "model"));
  c.model.streams = parse_streams(get<std::string>(m, "streams", "model"));
  c.model.position_scale = get<double>(m, "position_scale", "model");
  c.model.reverse_augment = get<bool>(m, "reverse_augment", "model");
  c.model.bmc.sigma_noise = get<double>(m, "sigma_noise", "model");
  c.model.grouping = get<std::string>(m, "grouping", "model");

  const json& o = j["optim"];
  c.optim.lr = get<double>(o, "lr", "optim");
  c.optim.momentum = get<double>(o, "momentum", "optim");
  c.optim.epochs = get<std::size_t>(o, "epochs", "optim");
  c.optim.batch_size = get<std::size_t>(o, "batch_size", "optim");
  c.optim.iteration_multiplier = get<std::size_t>(o, "iteration_multiplier", "optim");
  c.optim.decay_factor = get<double>(o, "decay_factor", "optim");
  c.optim.decay_interval = get<std::size_t>(o, "decay_interval", "optim");
  c.optim.sampling = parse_sampling(get<std::string>(o, "sampling", "optim"));
  if (c.optim.batch_size == 0) throw ConfigError("optim.batch_size must be positive");
  if (c.optim.iteration_multiplier == 0) {
    throw ConfigError("optim.iteration_multiplier must be positive");
  }

  const json& d = j["data"];
  c.data_source = get<std::string>(d, "source", "data");
  if (c.data_source != "synthetic" && c.data_source != "path") {
    throw ConfigError("data.source must be \"synthetic\" or \"path\"");
  }
  c.data_path = get<std::string>(d, "path", "data");
  c.test_fraction = get<double>(d, "test_fraction", "data");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
    throw ConfigError("data.test_fraction must lie in (0, 1)");
  }
  const json& s = d["synthetic"];
  auto& sp = c.synthetic;
  sp.clips = get<std::size_t>(s, "clips", "data.synthetic");
  sp.subjects = get<std::size_t>(s, "subjects", "data.synthetic");
  sp.min_frames = get<std::size_t>(s, "min_frames", "data.synthetic");
  sp.max_frames = get<std::size_t>(s, "max_frames", "data.synthetic");
  sp.amplitude_max = get<double>(s, "amplitude_max", "data.synthetic");
  sp.score_weights = get<std::vector<double>>(s, "score_weights", "data.synthetic");
  sp.quantize_scores = get<bool>(s, "quantize_scores", "data.synthetic");
  sp.amplitudes = get<std::vector<double>>(s, "amplitudes", "data.synthetic");
  sp.amplitude_jitter = get<double>(s, "amplitude_jitter", "data.synthetic");
  sp.coord_noise = get<double>(s, "coord_noise", "data.synthetic");
  sp.feature_noise = get<double>(s, "feature_noise", "data.synthetic");
  sp.feature_dim = get<std::size_t>(s, "feature_dim", "data.synthetic");
  sp.feature_subclips = get<std::size_t>(s, "feature_subclips", "data.synthetic");
  sp.frame_size = get<std::size_t>(s, "frame_size", "data.synthetic");
  sp.expressions = get<std::vector<std::string>>(s, "expressions", "data.synthetic");
  sp.seed = get<std::uint64_t>(s, "seed", "data.synthetic");

  for (auto it = j["frames_override"].begin(); it != j["frames_override"].end(); ++it) {
    if (!it.value().is_number_unsigned()) {
      throw ConfigError("frames_override." + it.key() + " must be a positive integer");
    }
    c.frames_override[it.key()] = it.value().get<std::size_t>();
  }
  c.ablation_frames = get<std::vector<std::size_t>>(j["ablation"], "frames", "ablation");
  c.finalize();
  for (const auto& [expr, frames] : c.frames_override) {
    config_for_expression(c, expr);  // validates the override
    (void)frames;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("bad override key: " + key);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig config_for_expression(const ExperimentConfig& cfg,
                                       const std::string& expression) {
  ExperimentConfig out = cfg;
  auto it = cfg.frames_override.find(expression);
  if (it != cfg.frames_override.end()) {
    out.model.encoder.frames = it->second;
    out.finalize();
  }
  return out;
}

}  // namespace tramp
