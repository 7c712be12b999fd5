#pragma once

#include "tanp/kernel/parameters.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace tanp {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates keyed by parameter name plus the shared step count.
template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, MatrixX<Scalar>> m;
  std::map<std::string, MatrixX<Scalar>> v;
};

/// One bias-corrected Adam update of every trainable parameter that has a
/// gradient. Missing moments start at zero; frozen parameters are skipped.
template <typename Scalar>
void adam_step(ParameterStore<Scalar>& params, const GradientSet<Scalar>& grads, AdamState<Scalar>& state,
               const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    const auto& p = params.value(name);
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw std::invalid_argument("gradient shape " + shape_string(g) + " does not match parameter " + name +
                                  " " + shape_string(p));
    }
  }
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  for (const auto& [name, g] : grads) {
    if (!params.trainable(name)) continue;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() == 0) m = MatrixX<Scalar>::Zero(g.rows(), g.cols());
    if (v.size() == 0) v = MatrixX<Scalar>::Zero(g.rows(), g.cols());
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    auto& p = params.mutable_value(name);
    p.array() -= static_cast<Scalar>(cfg.lr) * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + static_cast<Scalar>(cfg.epsilon));
  }
}

}  // namespace tanp
