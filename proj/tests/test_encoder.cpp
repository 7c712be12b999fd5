#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tanp/encoder.hpp"

using namespace tanp;
using tanp::testing::gradient_check;
using tanp::testing::random_matrix;

namespace {

LatentState gaussian(const RowVector& mu, const RowVector& log_sigma) { return LatentState{mu, log_sigma, mu}; }

}  // namespace

TEST_CASE("interaction rows are [u | v | y]") {
  Tape tape;
  Matrix u(1, 2);
  u << 0.1, 0.2;
  Matrix v(2, 1);
  v << 0.7, 0.8;
  const Matrix rows = interaction_inputs(tape.constant(u), tape.constant(v), {0.25, 1.0}).value();
  Matrix want(2, 4);
  want << 0.1, 0.2, 0.7, 0.25, 0.1, 0.2, 0.8, 1.0;
  CHECK(rows == want);
  CHECK_THROWS(interaction_inputs(tape.constant(u), tape.constant(v), {1.0}));
}

TEST_CASE("mlp forward examples") {
  MlpSpec spec{"enc", 2, 2, 1};
  Params params;
  std::mt19937_64 rng(1);
  init_mlp(params, spec, rng);
  Matrix w(2, 2);
  w << 1, -2, 3, 4;
  params.assign("enc.l0.W", w);
  params.assign("enc.l0.b", (Matrix(1, 2) << 0.5, 0.5).finished());
  Tape tape;
  // [1, 0] W + b = [1.5, -1.5] -> ReLU -> [1.5, 0]
  CHECK((mlp_forward(tape, params, spec, tape.constant((Matrix(1, 2) << 1, 0).finished())).value() ==
        (Matrix(1, 2) << 1.5, 0).finished()));

  params.assign("enc.l0.W", Matrix::Zero(2, 2));
  params.assign("enc.l0.b", Matrix::Zero(1, 2));
  Tape fresh;
  CHECK(mlp_forward(fresh, params, spec, fresh.constant(random_matrix(4, 2, rng))).value().isZero(0));
  CHECK_THROWS(mlp_forward(fresh, params, spec, fresh.constant(Matrix::Zero(1, 3))));
}

TEST_CASE("mlp output is nonnegative") {
  MlpSpec spec{"enc", 5, 8, 3};
  Params params;
  std::mt19937_64 rng(2);
  init_mlp(params, spec, rng);
  tanp::testing::perturb(params, rng);
  Tape tape;
  CHECK(mlp_forward(tape, params, spec, tape.constant(random_matrix(20, 5, rng))).value().minCoeff() >= 0.0);
}

TEST_CASE("aggregate examples") {
  Tape tape;
  CHECK(aggregate(tape.constant((Matrix(2, 1) << 1, 3).finished())).scalar() == 2.0);
  const Matrix same = Matrix::Constant(5, 3, 0.1);
  CHECK((aggregate(tape.constant(same)).value() == same.row(0)));
  CHECK_THROWS(aggregate(tape.constant(Matrix(0, 3))));
}

TEST_CASE("to_latent examples") {
  LatentSpec spec{"latent", 4, 3};
  Params params;
  std::mt19937_64 rng(3);
  init_latent_heads(params, spec, rng);
  Tape tape;
  auto r = tape.constant(random_matrix(1, 4, rng).cwiseAbs());
  const auto det = to_latent(tape, params, spec, r, std::nullopt);
  CHECK((det.z.value() == det.mu.value()));
  const auto zero_eps = to_latent(tape, params, spec, r, RowVector::Zero(3));
  CHECK((zero_eps.z.value() == zero_eps.mu.value()));

  for (const char* n : {"latent.Ws", "latent.Wmu", "latent.Wsigma"}) {
    params.assign(n, Matrix::Zero(params.value(n).rows(), params.value(n).cols()));
  }
  RowVector eps(3);
  eps << 0.3, -1.2, 2.0;
  Tape fresh;
  const auto zeroed = to_state(to_latent(fresh, params, spec, fresh.constant(r.value()), eps));
  CHECK(zeroed.mu == RowVector::Zero(3));
  CHECK(zeroed.sigma() == RowVector::Ones(3));
  CHECK(zeroed.z == eps);
  CHECK_THROWS(to_latent(tape, params, spec, r, RowVector::Zero(2)));
}

TEST_CASE("log sigma is clamped") {
  LatentSpec spec{"latent", 2, 2};
  Params params;
  std::mt19937_64 rng(4);
  init_latent_heads(params, spec, rng);
  params.assign("latent.Ws", Matrix::Identity(2, 2));
  params.assign("latent.Wsigma", (Matrix(2, 2) << 100, -100, 0, 0).finished());
  Tape tape;
  const auto s = to_state(to_latent(tape, params, spec, tape.constant((Matrix(1, 2) << 1, 0).finished()), RowVector::Ones(2)));
  CHECK(s.log_sigma(0) == kLogSigmaBound);
  CHECK(s.log_sigma(1) == -kLogSigmaBound);
  CHECK(std::isfinite(s.z(0)));
}

TEST_CASE("sample variance of z matches sigma squared") {
  LatentSpec spec{"latent", 3, 3};
  Params params;
  std::mt19937_64 rng(5);
  init_latent_heads(params, spec, rng);
  tanp::testing::perturb(params, rng);
  Tape tape;
  auto r = tape.constant((Matrix(1, 3) << 0.4, 0.9, 0.2).finished());
  const auto base = to_state(to_latent(tape, params, spec, r, std::nullopt));
  std::normal_distribution<double> normal;
  const int n = 100000;
  RowVector sum = RowVector::Zero(3), sq = RowVector::Zero(3);
  for (int i = 0; i < n; ++i) {
    RowVector eps(3);
    for (int d = 0; d < 3; ++d) eps(d) = normal(rng);
    const RowVector z = base.mu + eps.cwiseProduct(base.sigma());
    sum += z;
    sq += z.cwiseProduct(z);
  }
  const RowVector mean = sum / n;
  const RowVector var = sq / n - mean.cwiseProduct(mean);
  for (int d = 0; d < 3; ++d) CHECK(std::abs(var(d) / (base.sigma()(d) * base.sigma()(d)) - 1.0) < 0.05);

  // The recorded path produces the same z.
  RowVector eps(3);
  eps << 0.5, -0.25, 1.5;
  const auto recorded = to_state(to_latent(tape, params, spec, r, eps));
  CHECK((recorded.z == base.mu + eps.cwiseProduct(base.sigma())));
}

TEST_CASE("gaussian kl closed form") {
  const RowVector zero = RowVector::Zero(1);
  CHECK(kl_divergence(gaussian(zero, zero), gaussian(RowVector::Ones(1), zero)) == doctest::Approx(0.5));
  CHECK(kl_divergence(gaussian(RowVector::Zero(4), RowVector::Zero(4)), gaussian(RowVector::Ones(4), RowVector::Zero(4))) ==
        doctest::Approx(2.0));
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const RowVector mu = random_matrix(1, 5, rng), ls = random_matrix(1, 5, rng, 0.5);
    CHECK(kl_divergence(gaussian(mu, ls), gaussian(mu, ls)) == 0.0);
    CHECK(kl_divergence(gaussian(mu, ls), gaussian(random_matrix(1, 5, rng), random_matrix(1, 5, rng, 0.5))) >= 0.0);
  }
}

TEST_CASE("gaussian kl gradients match finite differences") {
  std::mt19937_64 rng(7);
  Params p;
  p.add("mq", random_matrix(1, 4, rng));
  p.add("lq", random_matrix(1, 4, rng, 0.5));
  p.add("mp", random_matrix(1, 4, rng));
  p.add("lp", random_matrix(1, 4, rng, 0.5));
  const auto loss = [](Tape& t, const Params& ps) {
    return gaussian_kl(t.parameter(ps, "mq"), t.parameter(ps, "lq"), t.parameter(ps, "mp"), t.parameter(ps, "lp"));
  };
  Tape tape;
  auto g = ad::backward(loss(tape, p), p);
  const auto r = gradient_check(p, g, [&](const Params& ps) {
    Tape t;
    return loss(t, ps).scalar();
  });
  CHECK_MESSAGE(r.worst_error < 1e-6, r.worst_parameter);
}

TEST_CASE("encoder and latent head gradients match finite differences") {
  std::mt19937_64 rng(8);
  MlpSpec mlp{"encoder", 5, 6, 3};
  LatentSpec latent{"latent", 6, 3};
  Params params;
  init_mlp(params, mlp, rng);
  init_latent_heads(params, latent, rng);
  tanp::testing::perturb(params, rng);
  const Matrix x = random_matrix(4, 5, rng);
  const RowVector eps = random_matrix(1, 3, rng);
  const auto loss = [&](Tape& t, const Params& p) {
    auto lv = to_latent(t, p, latent, aggregate(mlp_forward(t, p, mlp, t.constant(x))), eps);
    return ad::sum(lv.z * lv.z) + ad::sum(lv.log_sigma);
  };
  Tape tape;
  auto g = ad::backward(loss(tape, params), params);
  const auto r = gradient_check(params, g, [&](const Params& p) {
    Tape t;
    return loss(t, p).scalar();
  });
  CHECK_MESSAGE(r.worst_error < 1e-4, r.worst_parameter);
}
