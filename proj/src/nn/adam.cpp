#include "evrecon/nn/adam.hpp"

#include <cmath>

#include "evrecon/errors.hpp"

namespace evrecon::nn {

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double rate,
               const AdamConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.size(), 0.0);
      state.second.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.first[k];
    auto& v = state.second[k];
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("adam: array size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double scheduled_rate(double base, int epoch, double decay, int every) {
  return base * std::pow(decay, static_cast<double>(epoch / every));
}

}  // namespace evrecon::nn
