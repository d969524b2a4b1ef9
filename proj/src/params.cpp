#include "tramp/params.h"

#include <cmath>

#include "binary_io.h"
#include "tramp/errors.h"

namespace tramp {

namespace {
constexpr std::string_view kCheckpointMagic = "TRAMPCK1";
}

DiffTensor& ParamStore::insert(const std::string& name, DiffTensor t) {
  auto [it, fresh] = params_.emplace(name, std::move(t));
  if (!fresh) throw ConfigError("duplicate parameter name: " + name);
  return it->second;
}

DiffTensor& ParamStore::add_glorot(const std::string& name, Shape shape,
                                   std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = dist(rng_);
  return insert(name, DiffTensor::leaf(std::move(shape), std::move(v)));
}

DiffTensor& ParamStore::add_constant(const std::string& name, Shape shape,
                                     double v) {
  std::vector<double> values(numel(shape), v);
  return insert(name, DiffTensor::leaf(std::move(shape), std::move(values)));
}

DiffTensor& ParamStore::add_values(const std::string& name, Shape shape,
                                   std::vector<double> values) {
  return insert(name, DiffTensor::leaf(std::move(shape), std::move(values)));
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

DiffTensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const DiffTensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out(seed_);
  out.rng_ = rng_;
  for (const auto& [name, t] : params_) {
    out.params_.emplace(name, DiffTensor::leaf(t.shape(), {t.values().begin(),
                                                           t.values().end()}));
  }
  return out;
}

bool ParamStore::equal_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, t] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end() || it->second.shape() != t.shape()) return false;
    const auto a = t.values();
    const auto b = it->second.values();
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

void sgd_step(ParamStore& params, double lr, double momentum) {
  for (const auto& [name, t] : params.tensors()) {
    if (!t.has_grad()) {
      throw OptimizerError("parameter has no gradient: " + name);
    }
  }
  auto& vel = params.velocity();
  for (const auto& [name, t_const] : params.tensors()) {
    DiffTensor t = t_const;
    auto& v = vel[name];
    if (v.empty()) v.assign(t.size(), 0.0);
    const auto g = t.grad();
    auto theta = t.mutable_values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      theta[i] -= lr * v[i];
    }
    t.zero_grad();
  }
}

std::vector<char> serialize_checkpoint(const ParamStore& params) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u64(params.seed());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.tensors()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.values()) w.f64(v);
  }
  return w.bytes();
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  detail::write_file(path, serialize_checkpoint(params));
}

void deserialize_checkpoint(ParamStore& params, const std::vector<char>& bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw LoadError("checkpoint: bad magic");
  }
  const std::uint64_t seed = r.u64();
  (void)seed;
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw LoadError("checkpoint holds " + std::to_string(count) +
                    " parameters, model expects " + std::to_string(params.size()));
  }
  // Decode fully before touching the store, so a bad file leaves it intact.
  std::vector<std::pair<std::string, std::vector<double>>> decoded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.raw(r.u32());
    if (!params.contains(name)) {
      throw LoadError("checkpoint parameter not in model: " + name);
    }
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const DiffTensor& target = params.get(name);
    if (shape != target.shape()) {
      throw LoadError("shape mismatch for " + name + ": checkpoint " +
                      shape_str(shape) + ", model " + shape_str(target.shape()));
    }
    std::vector<double> values(numel(shape));
    for (double& v : values) v = r.f64();
    decoded.emplace_back(name, std::move(values));
  }
  if (r.remaining() != 0) throw LoadError("checkpoint: trailing bytes");
  for (auto& [name, values] : decoded) {
    auto dst = params.get(name).mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
  }
  params.velocity().clear();
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
  deserialize_checkpoint(params, detail::read_file(path));
}

GradCheckReport grad_check(const std::function<DiffTensor(ParamStore&)>& f,
                           ParamStore& params, double h, double floor) {
  params.zero_grad();
  DiffTensor out = f(params);
  if (!std::isfinite(out.item())) {
    throw CheckFailure("grad_check: objective is not finite at the base point");
  }
  out.backward();

  GradCheckReport report;
  for (const auto& [name, t_const] : params.tensors()) {
    DiffTensor t = t_const;
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());

    GradCheckEntry entry{name};
    auto theta = t.mutable_values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double orig = theta[i];
      theta[i] = orig + h;
      const double fp = f(params).item();
      theta[i] = orig - h;
      const double fm = f(params).item();
      theta[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw CheckFailure("grad_check: objective not finite when perturbing " +
                           name + "[" + std::to_string(i) + "]");
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  params.zero_grad();
  return report;
}

}  // namespace tramp
