#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tanp/kernel/autodiff.hpp"

#include <numeric>

using namespace tanp;
using tanp::testing::random_matrix;

namespace {

// exp by Taylor series in long double after halving the argument.
long double series_exp(long double x) {
  int halvings = 0;
  while (x > 0.5L || x < -0.5L) {
    x /= 2;
    ++halvings;
  }
  long double term = 1, sum = 1;
  for (int n = 1; n < 40; ++n) {
    term *= x / n;
    sum += term;
  }
  for (int i = 0; i < halvings; ++i) sum *= sum;
  return sum;
}

long double series_tanh(long double x) {
  const long double e = series_exp(2 * x);
  return (e - 1) / (e + 1);
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Check d(sum(w .* f(x)))/dx against central differences for a unary op.
template <typename Op>
double unary_grad_error(Op op, const Matrix& x0, const Matrix& weights) {
  Tape tape;
  Params store;
  store.add("x", x0);
  auto x = tape.parameter(store, "x");
  auto loss = ad::sum(op(x) * tape.constant(weights));
  auto g = ad::backward(loss, store);
  return tanp::testing::gradient_check(store, g, [&](const Params& p) {
           Tape t;
           return ad::sum(op(t.parameter(p, "x")) * t.constant(weights)).scalar();
         }).worst_error;
}

}  // namespace

TEST_CASE("matmul examples") {
  Tape tape;
  auto i2 = tape.constant(Matrix::Identity(2, 2));
  auto a = tape.constant(mat({{1, 2}, {3, 4}}));
  CHECK((ad::matmul(i2, a).value() == mat({{1, 2}, {3, 4}})));
  CHECK((ad::matmul(a, tape.constant(mat({{0}, {1}}))).value() == mat({{2}, {4}})));
}

TEST_CASE("matmul agrees with a triple loop") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 2, rng);
    Tape tape;
    const Matrix got = ad::matmul(tape.constant(a), tape.constant(b)).value();
    const Matrix want = naive_matmul(a, b);
    for (Eigen::Index i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-15));
  }
}

TEST_CASE("matmul with identity and zero is exact") {
  std::mt19937_64 rng(4);
  const Matrix a = random_matrix(3, 3, rng);
  Tape tape;
  auto x = tape.constant(a);
  CHECK((ad::matmul(x, tape.constant(Matrix::Identity(3, 3))).value() == a));
  CHECK((ad::matmul(tape.constant(Matrix::Identity(3, 3)), x).value() == a));
  CHECK((ad::matmul(x, tape.constant(Matrix::Zero(3, 2))).value() == Matrix::Zero(3, 2)));
}

TEST_CASE("matmul shape error names both shapes") {
  Tape tape;
  auto a = tape.constant(Matrix::Zero(2, 3));
  auto b = tape.constant(Matrix::Zero(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2x3", msg.find("2x3") + 1) != std::string::npos);
  }
}

TEST_CASE("activations") {
  Tape tape;
  auto x = tape.constant(mat({{-1, 2, 0}}));
  CHECK((ad::relu(x).value() == mat({{0, 2, 0}})));
  CHECK(ad::sigmoid(tape.constant(mat({{0}}))).scalar() == 0.5);
  CHECK((ad::activate(x, ad::Activation::relu).value() == mat({{0, 2, 0}})));

  auto big = ad::sigmoid(tape.constant(mat({{-800, 800}})));
  CHECK(big.value()(0, 0) >= 0.0);
  CHECK(big.value()(0, 1) <= 1.0);
  CHECK(std::isfinite(big.value()(0, 0)));
}

TEST_CASE("tanh against a series oracle") {
  Tape tape;
  for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    const double got = ad::tanh(tape.constant(Matrix::Constant(1, 1, x))).scalar();
    CHECK(got == doctest::Approx(static_cast<double>(series_tanh(x))).epsilon(1e-15));
  }
  CHECK(ad::tanh(tape.constant(Matrix::Constant(1, 1, 0.5))).scalar() == doctest::Approx(0.4621).epsilon(1e-4));
  double previous = -1.0;
  for (double x = -30; x <= 30; x += 0.5) {
    const double v = ad::tanh(tape.constant(Matrix::Constant(1, 1, x))).scalar();
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    CHECK(v >= previous);
    previous = v;
  }
}

TEST_CASE("backward of sum(w*w) at w=3 is 6") {
  Params store;
  store.add("w", Matrix::Constant(1, 1, 3.0));
  store.add("unused", Matrix::Constant(2, 2, 1.0));
  Tape tape;
  auto w = tape.parameter(store, "w");
  auto g = ad::backward(ad::sum(w * w), store);
  CHECK(g.at("w")(0, 0) == 6.0);
  CHECK(g.at("unused") == Matrix::Zero(2, 2));
}

TEST_CASE("backward rejects a non-scalar loss") {
  Params store;
  store.add("w", Matrix::Ones(2, 2));
  Tape tape;
  auto w = tape.parameter(store, "w");
  CHECK_THROWS_AS(ad::backward(w, store), std::logic_error);
}

TEST_CASE("frozen parameters get no gradient entry") {
  Params store;
  store.add("w", Matrix::Ones(1, 2));
  store.add("frozen", Matrix::Ones(1, 2), false);
  Tape tape;
  auto g = ad::backward(ad::sum(tape.parameter(store, "w") * tape.parameter(store, "frozen")), store);
  CHECK(g.count("w") == 1);
  CHECK(g.count("frozen") == 0);
}

TEST_CASE("elementwise ops pass finite-difference checks") {
  std::mt19937_64 rng(11);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(3, 4, rng);
  CHECK(unary_grad_error([](const Var& v) { return ad::sigmoid(v); }, x, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return ad::tanh(v); }, x, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return ad::exp(v); }, x, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return ad::scale(v, -2.5); }, x, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return ad::transpose(ad::transpose(v)); }, x, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return v * v; }, x, w) < 1e-6);
  // Keep relu and clamp inputs away from their kinks.
  Matrix away = x;
  for (Eigen::Index i = 0; i < away.size(); ++i) away.data()[i] += away.data()[i] > 0 ? 0.1 : -0.1;
  CHECK(unary_grad_error([](const Var& v) { return ad::relu(v); }, away, w) < 1e-6);
  CHECK(unary_grad_error([](const Var& v) { return ad::clamp(v, -0.05, 0.05); }, away, w) < 1e-6);
}

TEST_CASE("structural ops pass finite-difference checks") {
  std::mt19937_64 rng(12);
  Params store;
  store.add("a", random_matrix(3, 2, rng));
  store.add("b", random_matrix(2, 4, rng));
  store.add("r", random_matrix(1, 4, rng));
  const Matrix w = random_matrix(5, 4, rng);
  const auto f = [&](Tape& t, const Params& p) {
    auto a = t.parameter(p, "a");
    auto b = t.parameter(p, "b");
    auto r = t.parameter(p, "r");
    auto ab = ad::add_row(ad::matmul(a, b), r);
    auto rows = ad::gather_rows(ab, {2, 0, 2});
    auto stacked = ad::vcat(std::vector<Var>{rows, ad::mul_row(ad::repeat_rows(r, 2), ad::mean_rows(ab))});
    auto wide = ad::hcat(std::vector<Var>{ad::gather_rows(stacked, {0, 1, 2, 3, 4}), t.constant(Matrix::Ones(5, 1))});
    return ad::sum(ad::gather_rows(ad::transpose(ad::transpose(wide)), {0, 1, 2, 3, 4}) *
                   t.constant((Matrix(5, 5) << w, Matrix::Ones(5, 1)).finished())) +
           ad::sum(a - a * a);
  };
  Tape tape;
  auto g = ad::backward(f(tape, store), store);
  const auto r = tanp::testing::gradient_check(store, g, [&](const Params& p) {
    Tape t;
    return f(t, p).scalar();
  });
  CHECK(r.worst_error < 1e-6);
}

TEST_CASE("mean_rows is independent of row order") {
  std::mt19937_64 rng(13);
  const Matrix x = random_matrix(9, 3, rng, 1e3);
  std::vector<Eigen::Index> order(9);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Tape tape;
  const Matrix base = ad::mean_rows(tape.constant(x)).value();
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    auto shuffled = ad::gather_rows(tape.constant(x), order);
    CHECK((ad::mean_rows(shuffled).value() == base));
  }
}

TEST_CASE("forward and backward are deterministic") {
  std::mt19937_64 rng(14);
  Params store;
  store.add("w", random_matrix(4, 4, rng));
  const Matrix x = random_matrix(6, 4, rng);
  const auto run = [&] {
    Tape tape;
    auto h = ad::tanh(ad::matmul(tape.constant(x), tape.parameter(store, "w")));
    return ad::backward(ad::sum(h * h), store).at("w");
  };
  CHECK(run() == run());
}

TEST_CASE("glorot init stays inside its bound") {
  std::mt19937_64 rng(15);
  const Matrix w = glorot_uniform<double>(30, 10, rng);
  const double bound = std::sqrt(6.0 / 40.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  CHECK(w.cwiseAbs().maxCoeff() > 0.5 * bound);
}

TEST_CASE("parameter store rejects duplicates and shape changes") {
  Params store;
  store.add("w", Matrix::Zero(2, 2));
  CHECK_THROWS(store.add("w", Matrix::Zero(2, 2)));
  CHECK_THROWS(store.assign("w", Matrix::Zero(3, 2)));
  store.assign("w", Matrix::Ones(2, 2));
  CHECK(store.value("w") == Matrix::Ones(2, 2));
}
