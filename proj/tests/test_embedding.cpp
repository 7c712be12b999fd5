#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tanp/embedding.hpp"

using namespace tanp;
using tanp::testing::gradient_check;
using tanp::testing::random_matrix;

namespace {

ContentFeatures two_fields() {
  ContentFeatures f;
  f.cardinalities = {3, 5};
  f.rows = {{0, 4}, {2, 1}, {0, 4}, {1, 0}};
  f.present = {true, true, true, true};
  return f;
}

}  // namespace

TEST_CASE("per-field dims split evenly with leftovers first") {
  CHECK(split_embedding_dims(32, 2) == std::vector<int>{16, 16});
  CHECK(split_embedding_dims(32, 3) == std::vector<int>{11, 11, 10});
  CHECK(split_embedding_dims(32, 1) == std::vector<int>{32});
  CHECK_THROWS(split_embedding_dims(2, 3));
}

TEST_CASE("content embedding concatenates field rows") {
  EmbeddingSpec spec{"user_emb", 4, 32, 32, two_fields()};
  Params params;
  std::mt19937_64 rng(1);
  init_embedding(params, spec, rng);
  CHECK(params.value("user_emb.field0").rows() == 3);
  CHECK(params.value("user_emb.field0").cols() == 16);
  CHECK(params.value("user_emb.field1").cols() == 16);

  const RowVector e = embed_entity_content(params, spec, {2, 1});
  CHECK(e.size() == 32);
  CHECK(e.head(16) == params.value("user_emb.field0").row(2));
  CHECK(e.tail(16) == params.value("user_emb.field1").row(1));

  // One-hot products select the same rows exactly.
  RowVector one_hot0 = RowVector::Zero(3), one_hot1 = RowVector::Zero(5);
  one_hot0(2) = 1;
  one_hot1(1) = 1;
  CHECK(RowVector(one_hot0 * params.value("user_emb.field0")) == e.head(16));
  CHECK(RowVector(one_hot1 * params.value("user_emb.field1")) == e.tail(16));

  Tape tape;
  const Matrix rows = embed(tape, params, spec, {0, 2}).value();
  CHECK(rows.row(0) == rows.row(1));
}

TEST_CASE("content index out of range names the field") {
  EmbeddingSpec spec{"item_emb", 4, 32, 32, two_fields()};
  Params params;
  std::mt19937_64 rng(1);
  init_embedding(params, spec, rng);
  try {
    embed_entity_content(params, spec, {0, 5});
    FAIL("expected an error");
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("field 1") != std::string::npos);
  }
}

TEST_CASE("id embedding is logistic and bounded") {
  EmbeddingSpec spec{"item_emb", 7, 32, 32, std::nullopt};
  Params params;
  std::mt19937_64 rng(2);
  init_embedding(params, spec, rng);
  tanp::testing::perturb(params, rng, 3.0);
  for (int id = 0; id < 7; ++id) {
    const RowVector e = embed_entity_id(params, spec, id);
    CHECK(e.size() == 32);
    CHECK(e.minCoeff() > 0.0);
    CHECK(e.maxCoeff() < 1.0);
  }
  CHECK_THROWS_AS(embed_entity_id(params, spec, 7), std::out_of_range);
  CHECK_THROWS_AS(embed_entity_id(params, spec, -1), std::out_of_range);
}

TEST_CASE("zero id weights give 0.5 everywhere") {
  EmbeddingSpec spec{"user_emb", 3, 8, 6, std::nullopt};
  Params params;
  std::mt19937_64 rng(2);
  init_embedding(params, spec, rng);
  for (const char* n : {"user_emb.W1", "user_emb.W2"}) params.assign(n, Matrix::Zero(params.value(n).rows(), params.value(n).cols()));
  CHECK(embed_entity_id(params, spec, 1) == RowVector::Constant(8, 0.5));
}

TEST_CASE("id embedding equals the one-hot forward pass") {
  EmbeddingSpec spec{"item_emb", 5, 4, 6, std::nullopt};
  Params params;
  std::mt19937_64 rng(3);
  init_embedding(params, spec, rng);
  tanp::testing::perturb(params, rng);
  for (int id = 0; id < 5; ++id) {
    RowVector e = RowVector::Zero(5);
    e(id) = 1;
    const auto logistic = [](const RowVector& x) { return RowVector((1.0 + (-x.array()).exp()).inverse()); };
    const RowVector h = logistic(e * params.value("item_emb.W1") + params.value("item_emb.b1"));
    const RowVector want = logistic(h * params.value("item_emb.W2") + params.value("item_emb.b2"));
    const RowVector got = embed_entity_id(params, spec, id);
    for (Eigen::Index j = 0; j < got.size(); ++j) CHECK(got(j) == doctest::Approx(want(j)).epsilon(1e-15));
    CHECK(RowVector(e * params.value("item_emb.W1")) == params.value("item_emb.W1").row(id));
  }
}

TEST_CASE("gradients reach only looked-up rows") {
  EmbeddingSpec spec{"item_emb", 6, 4, 5, std::nullopt};
  Params params;
  std::mt19937_64 rng(4);
  init_embedding(params, spec, rng);
  Tape tape;
  const Matrix w = random_matrix(3, 4, rng);
  auto g = ad::backward(ad::sum(embed(tape, params, spec, {1, 4, 1}) * tape.constant(w)), params);
  const Matrix& gw1 = g.at("item_emb.W1");
  for (int row : {0, 2, 3, 5}) CHECK(gw1.row(row).isZero(0));
  CHECK(!gw1.row(1).isZero(0));
  CHECK(!gw1.row(4).isZero(0));
}

TEST_CASE("embedding gradients match finite differences") {
  std::mt19937_64 rng(5);
  for (bool content : {false, true}) {
    EmbeddingSpec spec{"user_emb", 4, 6, 5, std::nullopt};
    if (content) spec.content = two_fields();
    Params params;
    init_embedding(params, spec, rng);
    tanp::testing::perturb(params, rng);
    const Matrix w = random_matrix(3, 6, rng);
    const auto loss = [&](Tape& t, const Params& p) { return ad::sum(ad::tanh(embed(t, p, spec, {0, 3, 1})) * t.constant(w)); };
    Tape tape;
    auto g = ad::backward(loss(tape, params), params);
    const auto r = gradient_check(params, g, [&](const Params& p) {
      Tape t;
      return loss(t, p).scalar();
    });
    CHECK_MESSAGE(r.worst_error < 1e-4, r.worst_parameter);
  }
}
