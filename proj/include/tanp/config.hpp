#pragma once

#include "tanp/model.hpp"
#include "tanp/training.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace tanp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every run setting. Read from flat "key = value" text; '#' starts a comment.
///
/// Keys: mode, variant, n_support, embedding_dim, hidden_dim, latent_dim,
/// layers, k, alpha, lambda, lr, batch_size, epochs, patience, seed,
/// data_path, delimiter, user_features_path, item_features_path, min_len,
/// max_len, neg_ratio, train_ratio, val_ratio, test_ratio,
/// relevance_threshold, graded_gains, eval_sample_latent, cluster_refresh,
/// resample_support, checkpoint, resume, export_split.
struct RunConfig {
  FeedbackMode mode = FeedbackMode::explicit_rating;
  Variant variant = Variant::gating_film;
  int n_support = 20;
  int embedding_dim = 32;
  int hidden_dim = 32;
  int latent_dim = 32;
  int layers = 3;
  int k = 10;
  double alpha = 1.0;
  double lambda = 0.1;
  double lr = 5e-5;
  int batch_size = 32;
  int epochs = 150;
  int patience = 10;
  std::uint64_t seed = 0;

  std::string data_path;
  char delimiter = ',';
  std::string user_features_path;
  std::string item_features_path;
  int min_len = 40;
  int max_len = 200;
  int neg_ratio = 1;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double test_ratio = 0.2;

  double relevance_threshold = 4.0;
  bool graded_gains = false;
  bool eval_sample_latent = false;
  ClusterRefresh cluster_refresh = ClusterRefresh::batch;
  bool resample_support = true;

  std::string checkpoint = "tanp.ckpt";
  std::string resume;
  std::string export_split = "test";

  /// Resolved configuration, one key per line, every key present.
  std::string to_text() const;
  /// to_text() without the checkpoint and resume paths; stored inside checkpoints.
  std::string settings_text() const;
};

/// Parse config text; relative paths are resolved against `base_dir` when given.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tanp
