#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tanp/data.hpp"
#include "tanp/synthetic.hpp"

#include <filesystem>
#include <random>
#include <set>

using namespace tanp;

TEST_CASE("shape of the planted data") {
  SyntheticSpec spec;
  spec.seed = 1;
  const auto d = generate(spec);
  CHECK(d.intent.size() == 60);
  CHECK(d.item_block.size() == 300);
  std::map<std::int64_t, int> per_user;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& r : d.records) {
    ++per_user[r.user];
    CHECK(seen.insert({r.user, r.item}).second);
    CHECK(r.item >= 1);
    CHECK(r.item <= 300);
  }
  for (const auto& [user, n] : per_user) {
    CHECK(n >= 40);
    CHECK(n <= 60);
  }
  std::array<int, 3> per_intent{};
  for (const auto& [user, intent] : d.intent) ++per_intent[static_cast<std::size_t>(intent)];
  CHECK(per_intent == std::array<int, 3>{20, 20, 20});
  for (int j = 0; j < 300; ++j) CHECK(d.item_block[static_cast<std::size_t>(j)] == j / 100);
}

TEST_CASE("noise zero keeps every user inside its block") {
  SyntheticSpec spec;
  spec.noise = 0.0;
  spec.seed = 2;
  const auto d = generate(spec);
  for (const auto& r : d.records) CHECK(d.item_block[static_cast<std::size_t>(r.item - 1)] == d.intent.at(r.user));
}

TEST_CASE("in-block rate is within three binomial sigmas") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto d = generate(spec);
    double n = 0, in_block = 0;
    for (const auto& r : d.records) {
      ++n;
      in_block += d.item_block[static_cast<std::size_t>(r.item - 1)] == d.intent.at(r.user) ? 1 : 0;
    }
    const double p = 1 - spec.noise;
    CHECK(std::abs(in_block - n * p) <= 3 * std::sqrt(n * p * (1 - p)));
  }
}

TEST_CASE("generation is deterministic per seed") {
  SyntheticSpec spec;
  spec.seed = 5;
  CHECK(interaction_text(generate(spec)) == interaction_text(generate(spec)));
  spec.seed = 6;
  const auto other = interaction_text(generate(spec));
  spec.seed = 5;
  CHECK(interaction_text(generate(spec)) != other);
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec s;
  s.n_items = 2;
  CHECK_THROWS(generate(s));
  s = SyntheticSpec{};
  s.min_interactions = 70;
  CHECK_THROWS(generate(s));
  s = SyntheticSpec{};
  s.noise = 1.5;
  CHECK_THROWS(generate(s));
  s = SyntheticSpec{};
  s.n_items = 60;  // blocks of 20 cannot hold 60 in-block items
  CHECK_THROWS(generate(s));
}

TEST_CASE("text output parses back") {
  SyntheticSpec spec;
  spec.seed = 3;
  const auto d = generate(spec);
  const auto log = parse_interactions(interaction_text(d));
  CHECK(log.interactions.size() == d.records.size());
  CHECK(log.n_users() == 60);

  const auto dir = std::filesystem::temp_directory_path();
  write_synthetic(d, dir / "tanp_syn.csv", dir / "tanp_syn.labels");
  CHECK(load_labels(dir / "tanp_syn.labels") == d.intent);
  CHECK(load_interactions(dir / "tanp_syn.csv").interactions.size() == d.records.size());
  std::filesystem::remove(dir / "tanp_syn.csv");
  std::filesystem::remove(dir / "tanp_syn.labels");
}

TEST_CASE("purity examples") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  Matrix perfect = Matrix::Zero(6, 3);
  for (int i = 0; i < 6; ++i) perfect(i, (truth[static_cast<std::size_t>(i)] + 1) % 3) = 0.9;
  CHECK(cluster_purity(perfect, truth) == 1.0);

  Matrix one_cluster = Matrix::Constant(6, 3, 0.1);
  one_cluster.col(1).setConstant(0.8);
  CHECK(cluster_purity(one_cluster, truth) == doctest::Approx(1.0 / 3.0));

  CHECK(cluster_purity(Matrix(0, 3), {}) == 0.0);
  CHECK_THROWS(cluster_purity(perfect, {0, 1}));
}

TEST_CASE("random assignments land in the chance band") {
  std::vector<int> truth;
  for (int i = 0; i < 60; ++i) truth.push_back(i / 20);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  double total = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Matrix c(60, 3);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    total += cluster_purity(c, truth);
  }
  const double mean = total / trials;
  CHECK(mean >= 0.33);
  CHECK(mean <= 0.45);
}
