#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qg/error.hpp"
#include "qg/graph.hpp"
#include "qg/tensor.hpp"

namespace qg {

// Adam with bias correction (Kingma & Ba). The paper behind this toolkit only
// fixes the optimizer name and batch size, so the remaining hyperparameters
// are the standard defaults and overridable via config.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::uint64_t step_count = 0;
  std::vector<Tensor> m;  // first moments, aligned with the param list
  std::vector<Tensor> v;  // second moments

  explicit AdamState(AdamConfig c = {}) : cfg(c) {}

  void ensure_shapes(const std::vector<Param*>& params) {
    if (m.empty()) {
      for (const Param* p : params) {
        m.emplace_back(p->value.rows, p->value.cols);
        v.emplace_back(p->value.rows, p->value.cols);
      }
      return;
    }
    if (m.size() != params.size())
      throw ShapeError("adam state tracks " + std::to_string(m.size()) + " tensors, got " +
                       std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!m[i].same_shape(params[i]->value))
        throw ShapeError("adam moment shape " + m[i].shape_str() + " does not match parameter " +
                         params[i]->name + " " + params[i]->value.shape_str());
    }
  }
};

// One update over params using the gradients accumulated in Param::grad.
inline void adam_step(const std::vector<Param*>& params, AdamState& state) {
  state.ensure_shapes(params);
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad.data[j];
      m.data[j] = state.cfg.beta1 * m.data[j] + (1.0 - state.cfg.beta1) * g;
      v.data[j] = state.cfg.beta2 * v.data[j] + (1.0 - state.cfg.beta2) * g * g;
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.value.data[j] -= state.cfg.learning_rate * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
    }
  }
}

}  // namespace qg
