#pragma once

#include "tanp/types.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tanp {

/// Stack of fully-connected ReLU layers. Layer i owns `<prefix>.l<i>.W`
/// (in x out) and `<prefix>.l<i>.b` (1 x out).
struct MlpSpec {
  std::string prefix;
  int in_dim = 0;
  int hidden = 32;
  int layers = 3;
};

void init_mlp(Params& params, const MlpSpec& spec, std::mt19937_64& rng);

/// Row-wise ReLU(... ReLU(X W1 + b1) ...); output is nonnegative.
Var mlp_forward(Tape& tape, const Params& params, const MlpSpec& spec, const Var& x);

/// Rows [u | v_j | y_j] for every interaction of one user.
Var interaction_inputs(const Var& user, const Var& items, const std::vector<double>& ratings);

/// Permutation-invariant mean of the per-interaction representations.
Var aggregate(const Var& rs);

struct LatentVars {
  Var mu;
  Var log_sigma;
  Var z;
};

/// Values of one diagonal Gaussian latent, sigma = exp(log_sigma).
struct LatentState {
  RowVector mu;
  RowVector log_sigma;
  RowVector z;

  RowVector sigma() const { return log_sigma.array().exp().matrix(); }
};

struct LatentSpec {
  std::string prefix;  // heads live at <prefix>.Ws, <prefix>.Wmu, <prefix>.Wsigma
  int hidden = 32;
  int latent = 32;
};

inline constexpr double kLogSigmaBound = 10.0;

void init_latent_heads(Params& params, const LatentSpec& spec, std::mt19937_64& rng);

/// r <- ReLU(r Ws); mu = r Wmu; log sigma = clamp(r Wsigma); z = mu + eps * sigma.
/// Without `eps` the latent is deterministic (z = mu).
LatentVars to_latent(Tape& tape, const Params& params, const LatentSpec& spec, const Var& r,
                     const std::optional<RowVector>& eps);

/// Closed-form KL(q || p) between diagonal Gaussians, summed over dimensions.
Var gaussian_kl(const Var& mu_q, const Var& log_sigma_q, const Var& mu_p, const Var& log_sigma_p);
double kl_divergence(const LatentState& q, const LatentState& p);

LatentState to_state(const LatentVars& vars);

}  // namespace tanp
