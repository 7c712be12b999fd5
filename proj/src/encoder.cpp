#include "tanp/encoder.hpp"

#include <stdexcept>

namespace tanp {

void init_mlp(Params& params, const MlpSpec& spec, std::mt19937_64& rng) {
  int in = spec.in_dim;
  for (int l = 0; l < spec.layers; ++l) {
    const auto base = spec.prefix + ".l" + std::to_string(l);
    params.add(base + ".W", glorot_uniform<double>(in, spec.hidden, rng));
    params.add(base + ".b", Matrix::Zero(1, spec.hidden));
    in = spec.hidden;
  }
}

Var mlp_forward(Tape& tape, const Params& params, const MlpSpec& spec, const Var& x) {
  if (x.cols() != spec.in_dim) {
    throw std::invalid_argument(spec.prefix + ": input has " + std::to_string(x.cols()) + " columns, expected " +
                                std::to_string(spec.in_dim));
  }
  Var h = x;
  for (int l = 0; l < spec.layers; ++l) {
    const auto base = spec.prefix + ".l" + std::to_string(l);
    h = ad::relu(ad::add_row(ad::matmul(h, tape.parameter(params, base + ".W")), tape.parameter(params, base + ".b")));
  }
  return h;
}

Var interaction_inputs(const Var& user, const Var& items, const std::vector<double>& ratings) {
  if (static_cast<Eigen::Index>(ratings.size()) != items.rows()) {
    throw std::invalid_argument("interaction_inputs: " + std::to_string(ratings.size()) + " ratings for " +
                                std::to_string(items.rows()) + " items");
  }
  Matrix y(items.rows(), 1);
  for (std::size_t j = 0; j < ratings.size(); ++j) y(static_cast<Eigen::Index>(j), 0) = ratings[j];
  auto* tape = items.tape();
  return ad::hcat<double>({ad::repeat_rows(user, items.rows()), items, tape->constant(std::move(y))});
}

Var aggregate(const Var& rs) {
  if (rs.rows() == 0) throw std::invalid_argument("aggregate: empty interaction set");
  return ad::mean_rows(rs);
}

void init_latent_heads(Params& params, const LatentSpec& spec, std::mt19937_64& rng) {
  params.add(spec.prefix + ".Ws", glorot_uniform<double>(spec.hidden, spec.hidden, rng));
  params.add(spec.prefix + ".Wmu", glorot_uniform<double>(spec.hidden, spec.latent, rng));
  params.add(spec.prefix + ".Wsigma", glorot_uniform<double>(spec.hidden, spec.latent, rng));
}

LatentVars to_latent(Tape& tape, const Params& params, const LatentSpec& spec, const Var& r,
                     const std::optional<RowVector>& eps) {
  auto s = ad::relu(ad::matmul(r, tape.parameter(params, spec.prefix + ".Ws")));
  LatentVars out;
  out.mu = ad::matmul(s, tape.parameter(params, spec.prefix + ".Wmu"));
  out.log_sigma =
      ad::clamp(ad::matmul(s, tape.parameter(params, spec.prefix + ".Wsigma")), -kLogSigmaBound, kLogSigmaBound);
  if (!eps) {
    out.z = out.mu;
    return out;
  }
  if (eps->cols() != out.mu.cols()) {
    throw std::invalid_argument("to_latent: noise has " + std::to_string(eps->cols()) + " dims, latent has " +
                                std::to_string(out.mu.cols()));
  }
  out.z = out.mu + tape.constant(Matrix(*eps)) * ad::exp(out.log_sigma);
  return out;
}

Var gaussian_kl(const Var& mu_q, const Var& log_sigma_q, const Var& mu_p, const Var& log_sigma_p) {
  const auto& mq = mu_q.value();
  const auto& lq = log_sigma_q.value();
  const auto& mp = mu_p.value();
  const auto& lp = log_sigma_p.value();
  if (mq.cols() != mp.cols() || lq.cols() != lp.cols() || mq.cols() != lq.cols()) {
    throw std::invalid_argument("gaussian_kl: latent dimension mismatch");
  }
  const Eigen::ArrayXXd var_ratio = (2.0 * (lq - lp).array()).exp();
  const Eigen::ArrayXXd diff2_over_varp = (mq - mp).array().square() * (-2.0 * lp.array()).exp();
  Matrix out(1, 1);
  out(0, 0) = ((lp - lq).array() + 0.5 * (var_ratio + diff2_over_varp) - 0.5).sum();
  return mu_q.tape()->record(
      std::move(out), {mu_q, log_sigma_q, mu_p, log_sigma_p},
      [mu_q, log_sigma_q, mu_p, log_sigma_p, var_ratio, diff2_over_varp](const Matrix& g, Tape& t) {
        const double s = g(0, 0);
        const Eigen::ArrayXXd inv_varp = (-2.0 * log_sigma_p.value().array()).exp();
        const Matrix dmu = (s * (mu_q.value() - mu_p.value()).array() * inv_varp).matrix();
        t.accumulate(mu_q, dmu);
        t.accumulate(mu_p, -dmu);
        t.accumulate(log_sigma_q, (s * (var_ratio - 1.0)).matrix());
        t.accumulate(log_sigma_p, (s * (1.0 - var_ratio - diff2_over_varp)).matrix());
      });
}

double kl_divergence(const LatentState& q, const LatentState& p) {
  Tape tape;
  return gaussian_kl(tape.constant(q.mu), tape.constant(q.log_sigma), tape.constant(p.mu),
                     tape.constant(p.log_sigma))
      .scalar();
}

LatentState to_state(const LatentVars& vars) {
  return LatentState{vars.mu.value().row(0), vars.log_sigma.value().row(0), vars.z.value().row(0)};
}

}  // namespace tanp
