#include "tramp/scoring.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tramp/errors.h"
#include "tramp/layers.h"

namespace tramp {

void init_head_params(ParamStore& ps, const HeadConfig& cfg, const std::string& prefix) {
  add_dense(ps, prefix + ".fc1", cfg.input_dim, cfg.hidden1);
  add_dense(ps, prefix + ".fc2", cfg.hidden1, cfg.hidden2);
  add_dense(ps, prefix + ".fc3", cfg.hidden2, 1);
}

DiffTensor mlp_head(const DiffTensor& e_o, const ParamStore& ps, const std::string& prefix) {
  const std::size_t in = ps.get(prefix + ".fc1.w").dim(0);
  if (e_o.rank() != 2 || e_o.dim(0) != 1 || e_o.dim(1) != in) {
    throw ShapeError("mlp_head: expected [1, " + std::to_string(in) + "], got " +
                     shape_str(e_o.shape()));
  }
  DiffTensor h = gelu(dense(ps, prefix + ".fc1", e_o));
  h = gelu(dense(ps, prefix + ".fc2", h));
  return dense(ps, prefix + ".fc3", h);
}

namespace {

// Per-sample loss and d(mean loss)/d(pred_i). Terms are summed in sorted
// order so the value does not depend on how the batch is ordered.
double bmc_eval(std::span<const double> p, std::span<const double> y, double tau,
                std::vector<double>* grad) {
  const std::size_t b = p.size();
  std::vector<double> logits(b), terms(b), losses(b);
  if (grad) grad->assign(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < b; ++j) {
      const double d = p[i] - y[j];
      logits[j] = -d * d / tau;
      mx = std::max(mx, logits[j]);
    }
    for (std::size_t j = 0; j < b; ++j) terms[j] = std::exp(logits[j] - mx);
    std::vector<double> sorted = terms;
    std::sort(sorted.begin(), sorted.end());
    const double z = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    losses[i] = -(logits[i] - mx - std::log(z));
    if (grad) {
      // d/dp_i [ -logit_ii + logsumexp_j logit_ij ], logit_ij' = -2(p_i - y_j)/tau
      double g = 2.0 * (p[i] - y[i]) / tau;
      for (std::size_t j = 0; j < b; ++j) g += terms[j] / z * (-2.0 * (p[i] - y[j]) / tau);
      (*grad)[i] = g / static_cast<double>(b);
    }
  }
  std::sort(losses.begin(), losses.end());
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(b);
}

}  // namespace

DiffTensor bmc_loss(const DiffTensor& preds, std::span<const double> targets,
                    const BmcConfig& cfg) {
  if (preds.size() != targets.size() || targets.empty()) {
    throw ShapeError("bmc_loss: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(targets.size()) + " targets");
  }
  const double tau = cfg.tau();
  if (!(tau > 0.0)) throw ConfigError("bmc_loss: temperature must be positive");
  std::vector<double> grad;
  const double loss = bmc_eval(preds.values(), targets, tau, &grad);
  auto pn = preds.node();
  return make_op("bmc_loss", {1}, {loss}, {preds}, [pn, grad = std::move(grad)](Node& self) {
    auto& gp = pn->grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[0] * grad[i];
  });
}

double bmc_loss_value(std::span<const double> preds, std::span<const double> targets,
                      const BmcConfig& cfg) {
  if (preds.size() != targets.size() || targets.empty()) {
    throw ShapeError("bmc_loss_value: size mismatch");
  }
  return bmc_eval(preds, targets, cfg.tau(), nullptr);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) {
    throw CorrelationError("spearman: series lengths differ");
  }
  const std::size_t n = preds.size();
  if (n < 2) throw CorrelationError("spearman: need at least two samples");
  const auto mu = average_ranks(preds);
  const auto nu = average_ranks(targets);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double cov = 0.0, vmu = 0.0, vnu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (mu[i] - mean) * (nu[i] - mean);
    vmu += (mu[i] - mean) * (mu[i] - mean);
    vnu += (nu[i] - mean) * (nu[i] - mean);
  }
  if (vmu == 0.0 || vnu == 0.0) {
    throw CorrelationError("spearman: a series has zero rank variance");
  }
  return std::clamp(cov / std::sqrt(vmu * vnu), -1.0, 1.0);
}

}  // namespace tramp
