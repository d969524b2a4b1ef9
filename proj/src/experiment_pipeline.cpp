#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tramp/errors.h"
#include "tramp/experiment.h"

namespace tramp {

using nlohmann::json;

namespace {

RegionGrouping resolve_grouping(const std::string& name) {
  if (name == "default") return default_grouping();
  if (name == "mouth6") {
    RegionGrouping g;
    g.regions = {{"upper_lip", {50, 51, 52}}, {"bottom_lip", {56, 57, 58}}};
    return g;
  }
  return load_grouping(name);
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(seed), grouping_(resolve_grouping(cfg_.grouping)) {
  cfg_.finalize();
  grouping_.validate();
  if (grouping_.region_count() != cfg_.encoder.regions ||
      grouping_.per_region() != cfg_.encoder.per_region) {
    throw ConfigError("grouping has " + std::to_string(grouping_.region_count()) + " x " +
                      std::to_string(grouping_.per_region()) + " landmarks but the encoder expects " +
                      std::to_string(cfg_.encoder.regions) + " x " +
                      std::to_string(cfg_.encoder.per_region));
  }
  const std::size_t d = cfg_.model_dim();
  // Trajectory parameters come first so the provider choice never changes them.
  if (cfg_.streams != StreamSet::kRgbOnly) init_encoder_params(params_, cfg_.encoder);
  if (cfg_.streams != StreamSet::kTrajectoryOnly) {
    if (cfg_.provider == FeatureProvider::kToy) {
      init_toy_rgb_params(params_, ToyRgbConfig{cfg_.feature_dim});
    }
    init_projection_params(params_, cfg_.feature_dim, d);
  }
  if (cfg_.streams == StreamSet::kDual) {
    init_fusion_strategy_params(params_, cfg_.strategy, cfg_.fusion);
  }
  init_head_params(params_, HeadConfig{d, cfg_.head_hidden1, cfg_.head_hidden2});
}

PreparedSample Model::prepare(const Sample& s, std::mt19937_64* rng) const {
  PreparedSample out;
  out.score = s.score;
  if (cfg_.streams != StreamSet::kRgbOnly) {
    LandmarkClip c = s.clip.anchor_index ? normalize_relative(s.clip) : s.clip;
    c = select_and_group(c, grouping_);
    TrajectoryTensor t = assemble_channels(c, cfg_.channel_mode, cfg_.position_scale);
    t = standardize_length(t, cfg_.encoder.frames, cfg_.padding, cfg_.encoder.segment_length);
    if (rng && cfg_.reverse_augment) {
      t = reverse_augment(t, std::bernoulli_distribution(0.5)(*rng));
    }
    out.trajectory = std::move(t);
  }
  if (cfg_.streams != StreamSet::kTrajectoryOnly) {
    if (cfg_.provider == FeatureProvider::kFile) {
      if (s.features.dim != cfg_.feature_dim || s.features.subclips == 0) {
        throw ShapeError("sample " + s.id + " has " + std::to_string(s.features.subclips) +
                         " x " + std::to_string(s.features.dim) +
                         " features; expected width " + std::to_string(cfg_.feature_dim));
      }
      out.rgb_features = features_to_tensor(s.features);
    } else if (s.frames.frames > cfg_.rgb_frames) {
      out.rgb_frames = sample_frames(s.frames, cfg_.rgb_frames, rng);
    } else {
      out.rgb_frames = prepare_clip(s.frames, cfg_.rgb_frames, cfg_.rgb_padding);
    }
  }
  return out;
}

DiffTensor Model::trajectory_features(const PreparedSample& s) const {
  EncoderOutput enc = encode_trajectory(s.trajectory, params_, cfg_.encoder);
  if (cfg_.trajectory_tokens == TrajectoryTokens::kRegions) {
    return region_tokens(enc.cells, cfg_.encoder.scheme());
  }
  return enc.pooled;
}

DiffTensor Model::rgb_features(const PreparedSample& s) const {
  DiffTensor feats = cfg_.provider == FeatureProvider::kFile
                         ? s.rgb_features
                         : toy_rgb_encode(s.rgb_frames, params_, ToyRgbConfig{cfg_.feature_dim});
  return pool_and_project(feats, params_);
}

DiffTensor Model::forward(const PreparedSample& s, FusionTrace* trace) const {
  DiffTensor e_o;
  switch (cfg_.streams) {
    case StreamSet::kTrajectoryOnly: {
      DiffTensor e_p = trajectory_features(s);
      e_o = e_p.dim(0) == 1 ? e_p : reshape(mean_axis(e_p, 0), {1, e_p.dim(1)});
      break;
    }
    case StreamSet::kRgbOnly:
      e_o = rgb_features(s);
      break;
    case StreamSet::kDual:
      e_o = fuse_streams(cfg_.strategy, rgb_features(s), trajectory_features(s), params_,
                         cfg_.fusion, trace);
      break;
  }
  return mlp_head(e_o, params_);
}

DiffTensor forward_pipeline(const PreparedSample& s, const Model& model) {
  return model.forward(s);
}

DiffTensor batch_loss(const std::vector<const PreparedSample*>& batch, const Model& model) {
  std::vector<DiffTensor> preds;
  std::vector<double> targets;
  preds.reserve(batch.size());
  for (const auto* s : batch) {
    preds.push_back(model.forward(*s));
    targets.push_back(s->score);
  }
  return bmc_loss(concat_lastdim(preds), targets, model.config().bmc);
}

namespace {

EvalReport evaluate_prepared(const Model& model, const Dataset& ds,
                             const std::vector<PreparedSample>& prepared) {
  EvalReport r;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_expr;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double pred = model.forward(prepared[i]).item();
    r.predictions.push_back({ds[i].id, ds[i].expression, pred, ds[i].score});
    auto& [p, y] = by_expr[ds[i].expression];
    p.push_back(pred);
    y.push_back(ds[i].score);
  }
  double total = 0.0;
  std::size_t defined = 0;
  for (const auto& [expr, py] : by_expr) {
    r.expressions.push_back(expr);
    try {
      const double rho = spearman(py.first, py.second);
      if (!std::isfinite(rho)) throw CorrelationError("spearman: non-finite predictions");
      r.rho[expr] = rho;
      total += rho;
      ++defined;
    } catch (const CorrelationError& e) {
      r.errors[expr] = e.what();
    }
  }
  if (defined) r.mean_rho = total / static_cast<double>(defined);
  return r;
}

std::vector<PreparedSample> prepare_all(const Model& model, const Dataset& ds) {
  std::vector<PreparedSample> out;
  out.reserve(ds.size());
  for (const auto& s : ds) out.push_back(model.prepare(s));
  return out;
}

// Re-applies the training-time randomness to a deterministic preparation.
PreparedSample augment(const Model& model, const PreparedSample& base, const Sample& s,
                       std::mt19937_64& rng) {
  const auto& cfg = model.config();
  PreparedSample out = base;
  if (cfg.streams != StreamSet::kRgbOnly && cfg.reverse_augment) {
    out.trajectory = reverse_augment(base.trajectory, std::bernoulli_distribution(0.5)(rng));
  }
  if (cfg.streams != StreamSet::kTrajectoryOnly && cfg.provider == FeatureProvider::kToy &&
      s.frames.frames > cfg.rgb_frames) {
    out.rgb_frames = sample_frames(s.frames, cfg.rgb_frames, &rng);
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Model& model, const Dataset& ds) {
  return evaluate_prepared(model, ds, prepare_all(model, ds));
}

TrainResult train(const ExperimentConfig& cfg, Model& model, const Dataset& train_set,
                  const Dataset& val_set) {
  if (train_set.empty()) throw ConfigError("train: empty training set");
  const OptimConfig& opt = cfg.optim;
  const std::size_t n = train_set.size();
  const std::size_t steps = opt.steps_per_epoch(n);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto prepared = prepare_all(model, train_set);
  const auto val_prepared = prepare_all(model, val_set);

  TrainResult res;
  res.final_params = model.params().clone();
  res.best_params = model.params().clone();
  // Parameters that produced the most recent finite loss.
  ParamStore last_good = model.params().clone();
  std::vector<std::size_t> queue;
  std::size_t step_index = 0;
  auto draw = [&]() -> std::size_t {
    if (opt.sampling == BatchSampling::kWithReplacement) {
      return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    if (queue.empty()) {
      queue.resize(n);
      std::iota(queue.begin(), queue.end(), 0);
      std::shuffle(queue.begin(), queue.end(), rng);
    }
    const std::size_t i = queue.back();
    queue.pop_back();
    return i;
  };

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const double lr = opt.lr_at(epoch);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s, ++step_index) {
      std::vector<PreparedSample> batch;
      batch.reserve(opt.batch_size);
      for (std::size_t b = 0; b < opt.batch_size; ++b) {
        const std::size_t i = draw();
        batch.push_back(augment(model, prepared[i], train_set[i], rng));
      }
      std::vector<const PreparedSample*> ptrs;
      for (const auto& b : batch) ptrs.push_back(&b);
      DiffTensor loss = batch_loss(ptrs, model);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        res.diverged = true;
        res.message = "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                      std::to_string(step_index) + "; kept the last good parameters";
        model.params().zero_grad();
        res.final_params = last_good.clone();
        if (!res.best_rho) res.best_params = last_good.clone();
        return res;
      }
      last_good = model.params().clone();
      loss.backward();
      sgd_step(model.params(), lr, opt.momentum);
      res.steps.push_back({epoch, step_index, lr, value});
      loss_sum += value;
    }
    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(steps), std::nullopt};
    if (!val_set.empty()) {
      rec.val_rho = evaluate_prepared(model, val_set, val_prepared).mean_rho;
      if (rec.val_rho && (!res.best_rho || *rec.val_rho > *res.best_rho)) {
        res.best_rho = rec.val_rho;
        res.best_epoch = epoch;
        res.best_params = model.params().clone();
      }
    }
    res.epochs.push_back(rec);
  }
  res.final_params = model.params().clone();
  if (!res.best_rho) {
    res.best_params = model.params().clone();
    res.best_epoch = opt.epochs ? opt.epochs - 1 : 0;
  }
  return res;
}

std::string EvalReport::metrics_jsonl(const std::string& variant) const {
  std::ostringstream os;
  for (const auto& e : expressions) {
    std::size_t count = 0;
    for (const auto& p : predictions) count += p.expression == e;
    json rec = {{"variant", variant}, {"expression", e}, {"n", count}};
    auto it = rho.find(e);
    rec["rho"] = it == rho.end() ? json(nullptr) : json(it->second);
    if (auto err = errors.find(e); err != errors.end()) rec["error"] = err->second;
    os << rec.dump() << '\n';
  }
  json overall = {{"variant", variant},
                  {"expression", "mean"},
                  {"n", predictions.size()},
                  {"rho", mean_rho ? json(*mean_rho) : json(nullptr)}};
  os << overall.dump() << '\n';
  return os.str();
}

std::string EvalReport::predictions_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "clip_id,expression,prediction,target\n";
  for (const auto& p : predictions) {
    os << p.clip_id << ',' << p.expression << ',' << p.prediction << ',' << p.target << '\n';
  }
  return os.str();
}

}  // namespace tramp
