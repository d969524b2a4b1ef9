#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tramp/tensor.h"

namespace tramp {

// Named learnable tensors plus the generator used to initialise them.
//
// Names are hierarchical ("fusion.block0.wq") and kept in sorted order, so
// iteration, checkpoints and optimizer updates are deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  // Uniform in +-sqrt(6 / (fan_in + fan_out)).
  DiffTensor& add_glorot(const std::string& name, Shape shape,
                         std::size_t fan_in, std::size_t fan_out);
  DiffTensor& add_constant(const std::string& name, Shape shape, double v);
  DiffTensor& add_values(const std::string& name, Shape shape,
                         std::vector<double> values);

  bool contains(const std::string& name) const;
  DiffTensor& get(const std::string& name);
  const DiffTensor& get(const std::string& name) const;

  const std::map<std::string, DiffTensor>& tensors() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& rng() { return rng_; }

  void zero_grad();
  // Deep copy of values; the copy owns fresh leaves and no velocity.
  ParamStore clone() const;
  bool equal_values(const ParamStore& other) const;

  // Optimizer state lives next to the parameters it updates.
  std::map<std::string, std::vector<double>>& velocity() { return velocity_; }

 private:
  DiffTensor& insert(const std::string& name, DiffTensor t);

  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::map<std::string, DiffTensor> params_;
  std::map<std::string, std::vector<double>> velocity_;
};

// v <- momentum * v + grad; theta <- theta - lr * v; gradients cleared.
// Throws OptimizerError naming the first parameter without a gradient.
void sgd_step(ParamStore& params, double lr, double momentum);

// Binary checkpoint: magic, rng seed, then per parameter its name, shape and
// little-endian doubles.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
std::vector<char> serialize_checkpoint(const ParamStore& params);
// Overwrites values in `params`; names and shapes must match exactly.
void load_checkpoint(ParamStore& params, const std::filesystem::path& path);
void deserialize_checkpoint(ParamStore& params, const std::vector<char>& bytes);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// Central-difference check of every parameter entry against the analytic
// gradient of the scalar returned by f. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckReport grad_check(const std::function<DiffTensor(ParamStore&)>& f,
                           ParamStore& params, double h = 1e-5,
                           double floor = 1e-6);

}  // namespace tramp
