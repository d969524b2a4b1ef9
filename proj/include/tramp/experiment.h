#pragma once

// End-to-end pipeline: configuration, synthetic data, training, evaluation
// and the ablation harness.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "tramp/encoder.h"
#include "tramp/fusion.h"
#include "tramp/params.h"
#include "tramp/rgb.h"
#include "tramp/scoring.h"
#include "tramp/trajectory.h"

namespace tramp {

// -- configuration ------------------------------------------------------------

enum class FeatureProvider { kFile, kToy };
enum class StreamSet { kDual, kTrajectoryOnly, kRgbOnly };
enum class TrajectoryTokens { kSingle, kRegions };
enum class BatchSampling { kWithReplacement, kShuffle };

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;  // dim follows the encoder output width
  std::size_t head_hidden1 = 128;
  std::size_t head_hidden2 = 64;
  ChannelMode channel_mode = ChannelMode::kXYRGB;
  PaddingPolicy padding = PaddingPolicy::kLoop;
  RgbPadding rgb_padding = RgbPadding::kLoop;
  std::size_t rgb_frames = 32;  // T_f
  FeatureProvider provider = FeatureProvider::kFile;
  std::size_t feature_dim = 16;  // D_f
  FusionStrategy strategy = FusionStrategy::kTrampRgb;
  TrajectoryTokens trajectory_tokens = TrajectoryTokens::kSingle;
  StreamSet streams = StreamSet::kDual;
  double position_scale = 256.0;
  bool reverse_augment = true;
  BmcConfig bmc;
  std::string grouping = "default";  // or a grouping file path

  std::size_t model_dim() const { return encoder.output_dim(); }
  // Fills derived fields (input channels, fusion width) and checks every
  // divisibility and alignment constraint.
  void finalize();
};

struct OptimConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  std::size_t iteration_multiplier = 5;
  double decay_factor = 0.1;
  std::size_t decay_interval = 40;
  BatchSampling sampling = BatchSampling::kWithReplacement;

  double lr_at(std::size_t epoch) const;
  std::size_t steps_per_epoch(std::size_t train_size) const;
};

struct SyntheticSpec {
  std::size_t clips = 200;
  std::size_t subjects = 40;
  std::size_t min_frames = 10;
  std::size_t max_frames = 40;
  double amplitude_max = 20.0;  // pixels
  // Relative frequency of each severity score 0..4.
  std::vector<double> score_weights{0.3, 0.25, 0.2, 0.15, 0.1};
  bool quantize_scores = true;
  // When non-empty, clip i uses amplitudes[i % size] instead of a random draw.
  std::vector<double> amplitudes;
  // Amplitude noise as a fraction of one score bin (20% of amplitude_max).
  double amplitude_jitter = 0.0;
  double coord_noise = 0.0;    // pixels, Gaussian
  double feature_noise = 0.0;  // Gaussian on precomputed RGB features
  std::size_t feature_dim = 16;
  std::size_t feature_subclips = 5;
  std::size_t frame_size = 4;  // synthetic RGB frames are frame_size^2
  std::vector<std::string> expressions{"smile"};
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  OptimConfig optim;
  std::string data_source = "synthetic";  // or "path"
  std::string data_path;
  double test_fraction = 0.25;
  SyntheticSpec synthetic;
  std::map<std::string, std::size_t> frames_override;  // expression -> T_p
  std::vector<std::size_t> ablation_frames{64, 128, 256};

  void finalize() { model.finalize(); }
};

ExperimentConfig desk_config(std::uint64_t seed);
// Full-size layer widths; far too slow for one core, kept for shape checks.
ExperimentConfig full_scale_config(std::uint64_t seed);
// T_p = 16, L = 8, M = 2, N = 3, D = 16, z = 4.
ExperimentConfig toy_config(std::uint64_t seed);

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep the values of `base`; "seed" is mandatory.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig config_from_json(const nlohmann::json& j, const ExperimentConfig& base);
ExperimentConfig load_config(const std::filesystem::path& path);
// Applies "a.b.c=value" to a config document; value is parsed as JSON when
// possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
// The config with the expression's T_p override, if any.
ExperimentConfig config_for_expression(const ExperimentConfig& cfg,
                                       const std::string& expression);

// -- data ---------------------------------------------------------------------

struct Sample {
  std::string id;
  std::size_t subject = 0;
  std::string expression;
  double score = 0.0;
  double amplitude = 0.0;
  LandmarkClip clip;
  RgbClip frames;
  RgbFeatureSet features;
};
using Dataset = std::vector<Sample>;

// y = 4 (1 - A / A_max), rounded and clamped to 0..4 when quantised.
double score_from_amplitude(double amplitude, double amplitude_max, bool quantize);
Dataset generate_synthetic(const SyntheticSpec& spec);
// 68-point synthetic face in a 256 x 256 crop; landmark 30 is the nose tip.
std::vector<Point2> face_template();

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
Dataset load_or_generate(const ExperimentConfig& cfg);

struct Split {
  Dataset train;
  Dataset test;
};
// Subject-disjoint split; test_fraction of the subjects go to test.
Split split_by_subject(const Dataset& ds, double test_fraction, std::uint64_t seed);

// -- pipeline -----------------------------------------------------------------

struct PreparedSample {
  TrajectoryTensor trajectory;
  DiffTensor rgb_features;  // provider == file: [n, D_f]
  RgbClip rgb_frames;       // provider == toy: T_f frames
  double score = 0.0;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const RegionGrouping& grouping() const { return grouping_; }

  // Deterministic when rng is null; with an rng the clip may be reversed and
  // RGB frames are sampled from a random start.
  PreparedSample prepare(const Sample& s, std::mt19937_64* rng = nullptr) const;
  // y_hat as [1, 1].
  DiffTensor forward(const PreparedSample& s, FusionTrace* trace = nullptr) const;
  // Individual stream features, for tests and diagnostics.
  DiffTensor trajectory_features(const PreparedSample& s) const;
  DiffTensor rgb_features(const PreparedSample& s) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  RegionGrouping grouping_;
};

DiffTensor forward_pipeline(const PreparedSample& s, const Model& model);
// bmc_loss over a batch of prepared samples.
DiffTensor batch_loss(const std::vector<const PreparedSample*>& batch, const Model& model);

// -- training and evaluation --------------------------------------------------

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::optional<double> val_rho;
};

struct TrainResult {
  ParamStore final_params;
  ParamStore best_params;
  std::optional<double> best_rho;
  std::size_t best_epoch = 0;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::string message;
};

TrainResult train(const ExperimentConfig& cfg, Model& model, const Dataset& train_set,
                  const Dataset& val_set);

struct EvalReport {
  std::vector<ScoredSample> predictions;
  std::vector<std::string> expressions;  // sorted
  std::map<std::string, double> rho;
  std::map<std::string, std::string> errors;  // undefined correlations
  std::optional<double> mean_rho;

  // One JSON record per expression plus an "overall" record.
  std::string metrics_jsonl(const std::string& variant = "") const;
  std::string predictions_csv() const;
};

EvalReport evaluate(const Model& model, const Dataset& ds);

// -- ablation -----------------------------------------------------------------

enum class AblationAxis { kPadding, kChannelMode, kNumBlocks, kFusionStrategy, kFrames };
AblationAxis parse_ablation_axis(const std::string& s);
std::string to_string(AblationAxis a);

struct AblationVariant {
  std::string label;
  ExperimentConfig config;
};
std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base, AblationAxis axis);

struct AblationRow {
  std::string label;
  EvalReport report;
};

struct AblationTable {
  AblationAxis axis;
  std::vector<std::string> expressions;
  std::vector<AblationRow> rows;

  std::vector<std::string> row_labels() const;
  std::string to_text() const;
  std::string to_jsonl() const;
};

AblationTable ablate(const ExperimentConfig& base, AblationAxis axis, const Dataset& train_set,
                     const Dataset& test_set);

}  // namespace tramp
