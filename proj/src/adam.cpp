#include "bbtraj/adam.hpp"

#include <cmath>

namespace bbtraj {

void adam_step(AdamState& state, std::span<const ParamView> params,
               std::span<const GradView> grads, double lr) {
  if (!(lr > 0.0)) {
    throw ConfigError("adam_step: learning rate must be positive, got " + std::to_string(lr));
  }
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameter tensors but " +
                         std::to_string(grads.size()) + " gradient tensors");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      const auto n = static_cast<Eigen::Index>(p.values.size());
      state.first_moment.push_back(Vector<double>::Zero(n));
      state.second_moment.push_back(Vector<double>::Zero(n));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state holds " +
                         std::to_string(state.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }

  bool any_nonzero = false;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto& g = grads[t].values;
    if (g.size() != params[t].values.size() ||
        static_cast<Eigen::Index>(g.size()) != state.first_moment[t].size()) {
      throw DimensionError("adam_step: gradient for '" + params[t].name + "' has " +
                           std::to_string(g.size()) + " entries, parameter has " +
                           std::to_string(params[t].values.size()));
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericError("adam_step: non-finite gradient in tensor '" + grads[t].name + "'");
      }
      any_nonzero = any_nonzero || v != 0.0;
    }
  }

  ++state.step;
  if (!any_nonzero) {
    return;
  }

  const auto& cfg = state.config;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].values;
    const auto g = grads[t].values;
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      m[jj] = cfg.beta1 * m[jj] + (1.0 - cfg.beta1) * g[j];
      v[jj] = cfg.beta2 * v[jj] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[jj] / bias1;
      const double v_hat = v[jj] / bias2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace bbtraj
