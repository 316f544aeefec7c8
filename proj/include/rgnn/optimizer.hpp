#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"

namespace rgnn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter Adam moments, aligned with a fixed parameter order.
class AdamState {
 public:
  AdamState(const ParamRefs& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& [name, t] : params) {
      names_.push_back(name);
      m_.emplace_back(t->numel(), 0.0);
      v_.emplace_back(t->numel(), 0.0);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::size_t step_count() const { return t_; }

  friend void adam_step(const ParamRefs&, const GradientMap&, AdamState&,
                        double);

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> m_, v_;
};

// Bias-corrected Adam update, in place.
inline void adam_step(const ParamRefs& params, const GradientMap& grads,
                      AdamState& state, double lr) {
  ++state.t_;
  const double b1 = state.cfg_.beta1, b2 = state.cfg_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& [name, tensor] = params[p];
    if (name != state.names_[p])
      throw ContractError("adam_step: parameter order changed (" + name +
                          " vs " + state.names_[p] + ")");
    const auto it = grads.find(name);
    if (it == grads.end())
      throw ContractError("adam_step: missing gradient for " + name);
    const Tensor& g = it->second;
    if (!g.same_shape(*tensor))
      throw ShapeError("adam_step: gradient " + shape_str(g.shape()) +
                       " vs parameter " + shape_str(tensor->shape()) +
                       " for " + name);
    auto& m = state.m_[p];
    auto& v = state.v_[p];
    for (std::size_t i = 0; i < tensor->numel(); ++i) {
      const double gi = g.at(i);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      tensor->at(i) -=
          lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + state.cfg_.eps);
    }
  }
}

// Global-norm gradient clipping (off when max_norm <= 0); a config knob, not
// a default.
inline void clip_grad_norm(GradientMap& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (std::size_t i = 0; i < g.numel(); ++i) sq += g.at(i) * g.at(i);
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads)
    for (std::size_t i = 0; i < g.numel(); ++i) g.at(i) *= s;
}

}  // namespace rgnn
