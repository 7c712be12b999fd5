#pragma once

#include "tanp/customization.hpp"
#include "tanp/data.hpp"
#include "tanp/decoder.hpp"
#include "tanp/embedding.hpp"
#include "tanp/encoder.hpp"
#include "tanp/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tanp {

struct ModelConfig {
  FeedbackMode mode = FeedbackMode::explicit_rating;
  Variant variant = Variant::gating_film;
  int n_users = 0;
  int n_items = 0;
  int embedding_dim = 32;
  int hidden_dim = 32;
  int latent_dim = 32;
  int layers = 3;
  int k = 10;
  double alpha = 1.0;
  std::optional<ContentFeatures> user_content;
  std::optional<ContentFeatures> item_content;
};

/// Network layout derived from a ModelConfig: embeddings, encoder h_theta,
/// identity network m_phi with pool A and projection Wo, and the adaptive decoder.
class TaskAdaptiveNP {
 public:
  explicit TaskAdaptiveNP(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const EmbeddingSpec& user_embedding() const { return user_embedding_; }
  const EmbeddingSpec& item_embedding() const { return item_embedding_; }
  const MlpSpec& encoder() const { return encoder_; }
  const LatentSpec& latent() const { return latent_; }
  const MlpSpec& identity() const { return identity_; }
  const DecoderSpec& decoder() const { return decoder_; }
  bool task_adaptive() const { return config_.variant != Variant::no_tm; }

  /// Fresh parameters: Glorot-uniform weights (and pool), zero biases.
  Params init_params(std::uint64_t seed) const;

  /// [u | v_j | y_j] rows for the given interactions, in the given order.
  Var interaction_rows(Tape& tape, const Params& params, int user, const std::vector<Interaction>& xs) const;

  /// Encoder over a set of interactions; the set is put in canonical order
  /// first so the result does not depend on input ordering.
  LatentVars encode(Tape& tape, const Params& params, int user, std::vector<Interaction> xs,
                    const std::optional<RowVector>& eps) const;

  /// Temporary task embedding t_i from the support set.
  Var task_identity(Tape& tape, const Params& params, int user, std::vector<Interaction> support) const;

  /// Predictions (N x 1) for `items` given latent z (1 x latent) and task embedding o (1 x d, unused for no_tm).
  Var predict(Tape& tape, const Params& params, int user, const std::vector<int>& items, const Var& z,
              const std::optional<Var>& task_embedding) const;

 private:
  ModelConfig config_;
  EmbeddingSpec user_embedding_;
  EmbeddingSpec item_embedding_;
  MlpSpec encoder_;
  LatentSpec latent_;
  MlpSpec identity_;
  DecoderSpec decoder_;
};

const char* to_string(Variant v);
const char* to_string(FeedbackMode m);
Variant parse_variant(const std::string& s);
FeedbackMode parse_mode(const std::string& s);

/// Sort interactions by (item, rating).
void canonical_order(std::vector<Interaction>& xs);

}  // namespace tanp
