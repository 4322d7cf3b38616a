// Parameters, Adam with bias correction, global-norm gradient clipping,
// checkpoint IO, and the finite-difference verification harness.
#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mxlink/error.hpp"
#include "mxlink/io.hpp"
#include "mxlink/rng.hpp"
#include "mxlink/tensor.hpp"

namespace mxlink {

/// A named trainable tensor plus its Adam state.
struct Parameter {
  std::string name;
  Tensor value;              // requires_grad = true
  std::vector<double> m, v;  // first/second moment buffers
  long step = 0;

  static Parameter make(std::string name, Tensor t) {
    t.set_requires_grad(true);
    Parameter p;
    p.name = std::move(name);
    p.m.assign(t.numel(), 0.0);
    p.v.assign(t.numel(), 0.0);
    p.value = std::move(t);
    return p;
  }
};

using ParamSet = std::vector<Parameter>;

inline Parameter& find_param(ParamSet& params, const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw UsageError("unknown parameter: " + name);
}

inline void zero_grads(ParamSet& params) {
  for (auto& p : params) p.value.zero_grad();
}

/// Deep copy of parameter values (snapshot for early stopping).
inline std::vector<std::vector<double>> snapshot_values(const ParamSet& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.value.data());
  return out;
}

inline void restore_values(ParamSet& params,
                           const std::vector<std::vector<double>>& snap) {
  if (snap.size() != params.size())
    throw UsageError("snapshot/parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) params[i].value.data() = snap[i];
}

/// Scales all gradients by max_norm/g when the global L2 norm g exceeds
/// max_norm; returns the scale applied (1.0 when under the threshold).
inline double clip_global_norm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params)
    for (double g : p.value.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double scale = max_norm / norm;
  for (auto& p : params)
    for (double& g : p.value.grad()) g *= scale;
  return scale;
}

/// Standard bias-corrected Adam update; gradients are zeroed afterwards.
inline void adam_step(ParamSet& params, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  for (auto& p : params) {
    ++p.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.step));
    auto& theta = p.value.data();
    auto& grad = p.value.grad();
    for (size_t i = 0; i < theta.size(); ++i) {
      p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * grad[i];
      p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double update =
          lr * (p.m[i] / bc1) / (std::sqrt(p.v[i] / bc2) + eps);
      if (!std::isfinite(update))
        throw NumericError("non-finite Adam update for parameter '" + p.name +
                           "'");
      theta[i] -= update;
    }
    p.value.zero_grad();
  }
}

// --- initialization ----------------------------------------------------------

/// Uniform Xavier/Glorot: range +-sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier_uniform(Rng& rng, int rows, int cols) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor normal_init(Rng& rng, int rows, int cols, double stddev) {
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

// --- checkpoints -------------------------------------------------------------
// Binary: magic, tensor count, then per tensor name (length-prefixed), shape,
// row-major float32 data. A JSON manifest carries shapes + fingerprint.

namespace detail {
constexpr char kCkptMagic[8] = {'M', 'X', 'L', 'C', 'K', 'P', 'T', '1'};
}

inline void save_checkpoint(const ParamSet& params, std::ostream& out) {
  out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::write_str(out, p.name);
    detail::write_u32(out, 2);
    detail::write_u32(out, static_cast<uint32_t>(p.value.rows()));
    detail::write_u32(out, static_cast<uint32_t>(p.value.cols()));
    for (double v : p.value.data()) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
}

inline void load_checkpoint(ParamSet& params, std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, detail::kCkptMagic))
    throw DataError("not a checkpoint file (bad magic)");
  const uint32_t count = detail::read_u32(in);
  if (count != params.size())
    throw DataError("checkpoint parameter count mismatch");
  for (uint32_t k = 0; k < count; ++k) {
    const std::string name = detail::read_str(in);
    const uint32_t ndim = detail::read_u32(in);
    if (ndim != 2) throw DataError("unsupported checkpoint tensor rank");
    const uint32_t rows = detail::read_u32(in);
    const uint32_t cols = detail::read_u32(in);
    Parameter& p = find_param(params, name);
    if (p.value.rows() != static_cast<int>(rows) ||
        p.value.cols() != static_cast<int>(cols))
      throw DataError("checkpoint shape mismatch for parameter '" + name + "'");
    for (auto& v : p.value.data()) {
      float f = 0;
      in.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!in) throw DataError("unexpected end of checkpoint file");
      v = static_cast<double>(f);
    }
  }
}

inline nlohmann::json checkpoint_manifest(const ParamSet& params,
                                          const std::string& fingerprint) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params)
    tensors.push_back({{"name", p.name},
                       {"shape", {p.value.rows(), p.value.cols()}}});
  return {{"tensors", tensors}, {"fingerprint", fingerprint}};
}

// --- finite differences ------------------------------------------------------

/// Central-difference gradient verification.
///
/// `loss` must be a deterministic forward pass (dropout in eval mode):
/// loss(true) zeroes grads, runs forward+backward and returns the loss value;
/// loss(false) returns the loss value only. Up to `max_coords` coordinates are
/// sampled across all parameters; returns the max relative error with an
/// absolute floor of 1e-8 in the denominator.
inline double finite_difference_check(
    const std::function<double(bool compute_grads)>& loss, ParamSet& params,
    double eps = 1e-5, size_t max_coords = 200, uint64_t seed = 1234) {
  loss(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  size_t total = 0;
  for (auto& p : params) {
    analytic.push_back(p.value.grad());
    total += p.value.numel();
  }

  std::vector<std::pair<size_t, size_t>> coords;  // (param, flat index)
  if (total <= max_coords) {
    for (size_t pi = 0; pi < params.size(); ++pi)
      for (size_t i = 0; i < params[pi].value.numel(); ++i)
        coords.emplace_back(pi, i);
  } else {
    Rng rng(seed);
    std::unordered_set<uint64_t> seen;
    while (coords.size() < max_coords) {
      const uint64_t flat = rng.below(total);
      if (!seen.insert(flat).second) continue;
      uint64_t rest = flat;
      size_t pi = 0;
      while (rest >= params[pi].value.numel()) {
        rest -= params[pi].value.numel();
        ++pi;
      }
      coords.emplace_back(pi, static_cast<size_t>(rest));
    }
  }

  double max_rel = 0.0;
  for (const auto& [pi, i] : coords) {
    double& slot = params[pi].value.data()[i];
    const double saved = slot;
    slot = saved + eps;
    const double up = loss(false);
    slot = saved - eps;
    const double down = loss(false);
    slot = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double ad = analytic[pi][i];
    const double rel =
        std::fabs(fd - ad) / std::max(1e-8, std::max(std::fabs(fd), std::fabs(ad)));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mxlink
