#pragma once

// Regression head, Batch-based Monte-Carlo loss and Spearman's rank
// correlation.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tramp/params.h"

namespace tramp {

struct HeadConfig {
  std::size_t input_dim = 256;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 64;
};

void init_head_params(ParamStore& ps, const HeadConfig& cfg, const std::string& prefix = "head");
// dense -> GELU -> dense -> GELU -> dense; [1, D] -> [1, 1].
DiffTensor mlp_head(const DiffTensor& e_o, const ParamStore& ps,
                    const std::string& prefix = "head");

struct BmcConfig {
  double sigma_noise = 1.0;
  double tau() const { return 2.0 * sigma_noise * sigma_noise; }
};

// Mean over the batch of -log softmax_j(-(pred_i - y_j)^2 / tau)[i], with the
// batch targets (duplicates kept) as the candidate set. preds holds B values.
DiffTensor bmc_loss(const DiffTensor& preds, std::span<const double> targets,
                    const BmcConfig& cfg = {});
double bmc_loss_value(std::span<const double> preds, std::span<const double> targets,
                      const BmcConfig& cfg = {});

// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. Throws CorrelationError for fewer
// than two samples or a constant series.
double spearman(std::span<const double> preds, std::span<const double> targets);

struct ScoredSample {
  std::string clip_id;
  std::string expression;
  double prediction = 0.0;
  double target = 0.0;
};

}  // namespace tramp
