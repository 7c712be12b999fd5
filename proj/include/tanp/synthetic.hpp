#pragma once

#include "tanp/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tanp {

/// Planted-intent interaction data: each intent owns a contiguous block of
/// items and its users draw positives from that block with probability 1 - noise.
struct SyntheticSpec {
  int n_intents = 3;
  int users_per_intent = 20;
  int n_items = 300;
  int min_interactions = 40;
  int max_interactions = 60;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticRecord {
  std::int64_t user = 0;  // raw ids, 1-based
  std::int64_t item = 0;
};

struct SyntheticDataset {
  std::vector<SyntheticRecord> records;
  std::map<std::int64_t, int> intent;  // raw user id -> intent
  std::vector<int> item_block;         // 0-based item -> intent block
};

SyntheticDataset generate(const SyntheticSpec& spec);

/// "user,item,1" lines in the interaction-file format.
std::string interaction_text(const SyntheticDataset& data);
/// "user_id,intent" lines.
std::string labels_text(const SyntheticDataset& data);

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& interactions,
                     const std::filesystem::path& labels);
std::map<std::int64_t, int> load_labels(const std::filesystem::path& path);

/// Fraction of tasks whose argmax cluster agrees with that cluster's majority class.
double cluster_purity(const Matrix& assignments, const std::vector<int>& truth);

}  // namespace tanp
