#include "tanp/synthetic.hpp"

#include "tanp/data.hpp"
#include "tanp/io.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tanp {

SyntheticDataset generate(const SyntheticSpec& spec) {
  if (spec.n_intents < 1 || spec.users_per_intent < 1) throw std::invalid_argument("synthetic: need intents and users");
  if (spec.n_items < spec.n_intents) {
    throw std::invalid_argument("synthetic: " + std::to_string(spec.n_items) + " items cannot cover " +
                                std::to_string(spec.n_intents) + " intents");
  }
  if (spec.min_interactions < 1 || spec.max_interactions < spec.min_interactions) {
    throw std::invalid_argument("synthetic: bad interaction count range");
  }
  if (spec.noise < 0 || spec.noise > 1) throw std::invalid_argument("synthetic: noise must lie in [0, 1]");

  SyntheticDataset data;
  data.item_block.resize(static_cast<std::size_t>(spec.n_items));
  std::vector<std::vector<int>> block_items(static_cast<std::size_t>(spec.n_intents));
  for (int j = 0; j < spec.n_items; ++j) {
    const int b = static_cast<int>(static_cast<std::int64_t>(j) * spec.n_intents / spec.n_items);
    data.item_block[static_cast<std::size_t>(j)] = b;
    block_items[static_cast<std::size_t>(b)].push_back(j);
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> length(spec.min_interactions, spec.max_interactions);
  std::bernoulli_distribution in_block(1.0 - spec.noise);
  std::int64_t user = 0;
  for (int intent = 0; intent < spec.n_intents; ++intent) {
    const auto& own = block_items[static_cast<std::size_t>(intent)];
    std::vector<int> other;
    for (int j = 0; j < spec.n_items; ++j) {
      if (data.item_block[static_cast<std::size_t>(j)] != intent) other.push_back(j);
    }
    for (int u = 0; u < spec.users_per_intent; ++u) {
      ++user;
      data.intent[user] = intent;
      const int n = length(rng);
      int n_in = 0;
      for (int i = 0; i < n; ++i) n_in += in_block(rng) ? 1 : 0;
      const int n_out = n - n_in;
      if (n_in > static_cast<int>(own.size()) || n_out > static_cast<int>(other.size())) {
        throw std::invalid_argument("synthetic: user " + std::to_string(user) + " needs " + std::to_string(n_in) +
                                    " in-block and " + std::to_string(n_out) + " out-of-block items; blocks too small");
      }
      std::vector<int> picked;
      std::sample(own.begin(), own.end(), std::back_inserter(picked), n_in, rng);
      std::sample(other.begin(), other.end(), std::back_inserter(picked), n_out, rng);
      std::sort(picked.begin(), picked.end());
      for (int item : picked) data.records.push_back({user, item + 1});
    }
  }
  return data;
}

std::string interaction_text(const SyntheticDataset& data) {
  std::ostringstream out;
  for (const auto& r : data.records) out << r.user << ',' << r.item << ",1\n";
  return out.str();
}

std::string labels_text(const SyntheticDataset& data) {
  std::ostringstream out;
  for (const auto& [user, intent] : data.intent) out << user << ',' << intent << '\n';
  return out.str();
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& interactions,
                     const std::filesystem::path& labels) {
  write_file_atomic(interactions, interaction_text(data));
  write_file_atomic(labels, labels_text(data));
}

std::map<std::int64_t, int> load_labels(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::map<std::int64_t, int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::int64_t user = 0;
    int intent = 0;
    char comma = 0;
    std::istringstream fields(line);
    if (!(fields >> user >> comma >> intent) || comma != ',') {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected user_id,intent");
    }
    labels[user] = intent;
  }
  return labels;
}

double cluster_purity(const Matrix& assignments, const std::vector<int>& truth) {
  if (static_cast<std::size_t>(assignments.rows()) != truth.size()) {
    throw std::invalid_argument("cluster_purity: " + std::to_string(assignments.rows()) + " rows vs " +
                                std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::map<Eigen::Index, std::map<int, int>> counts;
  for (Eigen::Index i = 0; i < assignments.rows(); ++i) {
    Eigen::Index cluster = 0;
    assignments.row(i).maxCoeff(&cluster);
    ++counts[cluster][truth[static_cast<std::size_t>(i)]];
  }
  int majority = 0;
  for (const auto& [cluster, by_class] : counts) {
    int best = 0;
    for (const auto& [cls, n] : by_class) best = std::max(best, n);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(truth.size());
}

}  // namespace tanp
