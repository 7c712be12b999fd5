#pragma once

#include "tanp/model.hpp"
#include "tanp/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace tanp::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline ModelConfig small_model(FeedbackMode mode, Variant variant, int n_users = 6, int n_items = 24) {
  ModelConfig c;
  c.mode = mode;
  c.variant = variant;
  c.n_users = n_users;
  c.n_items = n_items;
  c.embedding_dim = 4;
  c.hidden_dim = 5;
  c.latent_dim = 3;
  c.layers = 2;
  c.k = 3;
  c.alpha = 1.0;
  return c;
}

/// A task for `user` over distinct items with random ratings (implicit: support
/// positives, query a mix of positives and zero-labelled negatives).
inline Task random_task(int user, int n_items, int n_support, int n_query, FeedbackMode mode, std::mt19937_64& rng) {
  std::vector<int> items(static_cast<std::size_t>(n_items));
  for (int j = 0; j < n_items; ++j) items[static_cast<std::size_t>(j)] = j;
  std::shuffle(items.begin(), items.end(), rng);
  std::uniform_int_distribution<int> stars(1, 5);
  Task t;
  t.user = user;
  t.role = SplitRole::training;
  for (int i = 0; i < n_support + n_query; ++i) {
    Interaction x;
    x.user = user;
    x.item = items[static_cast<std::size_t>(i)];
    const bool in_query = i >= n_support;
    if (mode == FeedbackMode::explicit_rating) {
      x.rating = stars(rng);
    } else {
      x.rating = (in_query && (i % 2 == 1)) ? 0.0 : 1.0;
    }
    (in_query ? t.query : t.support).push_back(x);
  }
  const auto by_item = [](const Interaction& a, const Interaction& b) { return a.item < b.item; };
  std::sort(t.support.begin(), t.support.end(), by_item);
  std::sort(t.query.begin(), t.query.end(), by_item);
  return t;
}

/// Move every parameter off zero so biases and ReLU inputs are generic.
inline void perturb(Params& params, std::mt19937_64& rng, double scale = 0.3) {
  std::vector<std::string> names;
  for (const auto& [name, entry] : params) names.push_back(name);
  for (const auto& name : names) {
    auto& v = params.mutable_value(name);
    v += random_matrix(v.rows(), v.cols(), rng, scale);
  }
}

struct GradCheckResult {
  std::string worst_parameter;
  double worst_error = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |analytic - numeric| / max(1e-8, |numeric|).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));
}

/// Central differences of `loss` against `analytic` for every entry of every trainable parameter.
inline GradCheckResult gradient_check(Params params, const Gradients& analytic,
                                      const std::function<double(const Params&)>& loss, double step = 1e-5) {
  GradCheckResult r;
  std::vector<std::string> names;
  for (const auto& [name, entry] : params) {
    if (entry.trainable) names.push_back(name);
  }
  for (const auto& name : names) {
    const auto& g = analytic.at(name);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      auto& v = params.mutable_value(name).data()[i];
      const double saved = v;
      v = saved + step;
      const double up = loss(params);
      v = saved - step;
      const double down = loss(params);
      v = saved;
      const double numeric = (up - down) / (2 * step);
      const double err = relative_error(g.data()[i], numeric);
      ++r.checked;
      if (err > r.worst_error) {
        r.worst_error = err;
        r.worst_parameter = name + "[" + std::to_string(i) + "]";
        r.analytic = g.data()[i];
        r.numeric = numeric;
      }
    }
  }
  return r;
}

}  // namespace tanp::testing
