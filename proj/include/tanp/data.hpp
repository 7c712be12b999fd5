#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tanp {

enum class FeedbackMode { explicit_rating, implicit };

/// One (user, item, rating) observation. Ids are dense 0-based indices after
/// loading. In implicit mode a rating of 0 marks a sampled negative.
struct Interaction {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool is_sampled_negative() const { return rating == 0.0; }
};

enum class SplitRole { unassigned, training, validation, test };

/// All interactions of one user, divided into support and query sets.
struct Task {
  int user = 0;
  std::vector<Interaction> support;
  std::vector<Interaction> query;
  SplitRole role = SplitRole::unassigned;
};

struct TaskSplits {
  std::vector<Task> training;
  std::vector<Task> validation;
  std::vector<Task> test;
};

/// Loaded interaction log with the raw-id to dense-id tables.
struct InteractionLog {
  std::vector<Interaction> interactions;
  std::map<std::int64_t, int> user_index;
  std::map<std::int64_t, int> item_index;
  std::vector<std::int64_t> user_ids;  // dense -> raw
  std::vector<std::int64_t> item_ids;

  int n_users() const { return static_cast<int>(user_ids.size()); }
  int n_items() const { return static_cast<int>(item_ids.size()); }
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse "user<d>item<d>rating[<d>timestamp]" lines. Blank lines are
/// skipped. Ids are remapped to dense indices in order of first appearance.
InteractionLog load_interactions(const std::filesystem::path& path, char delimiter = ',');
InteractionLog parse_interactions(const std::string& text, char delimiter = ',');

/// Keep users whose distinct-item count lies in [min_len, max_len] and draw a
/// uniformly random support subset of size n_support for each; the rest forms
/// the query. Duplicate (user, item) pairs keep the first occurrence.
std::vector<Task> filter_and_build_tasks(const std::vector<Interaction>& interactions, int n_support,
                                         int min_len = 40, int max_len = 200, std::uint64_t seed = 0,
                                         int* dropped_degenerate = nullptr);

/// Shuffle users and partition them by ratio. Each share is floored; the
/// leftover users go to training.
TaskSplits split_users(std::vector<Task> tasks, double train_ratio = 0.7, double validation_ratio = 0.1,
                       double test_ratio = 0.2, std::uint64_t seed = 0);

/// Append ratio * |positives in query| unobserved items with label 0 to the
/// query. The support set is never augmented.
Task negative_sample(const Task& task, int n_items, int ratio, std::uint64_t seed);

/// Draw a fresh support subset of the same size from the task's observed
/// interactions. Sampled negatives stay in the query. Training tasks only.
Task resample_support(const Task& task, std::uint64_t seed);

/// Categorical side information: one row of field indices per dense entity id.
struct ContentFeatures {
  std::vector<int> cardinalities;             // per field
  std::vector<std::vector<int>> rows;         // rows[entity] = indices, one per field
  std::vector<bool> present;                  // entity has a feature row
};

/// Sidecar "raw_id<d>idx<d>idx..." lines mapped through the dense id table.
/// Entities absent from `index` are ignored.
ContentFeatures load_content_features(const std::filesystem::path& path, const std::map<std::int64_t, int>& index,
                                      int n_entities, char delimiter = ',');

/// Rating scaled into [0, 1] for network inputs and regression targets.
inline double normalize_rating(double rating, FeedbackMode mode) {
  return mode == FeedbackMode::explicit_rating ? (rating - 1.0) / 4.0 : rating;
}

/// Deterministic 64-bit mix of a base seed with stream identifiers.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tanp
