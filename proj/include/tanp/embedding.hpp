#pragma once

#include "tanp/data.hpp"
#include "tanp/types.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tanp {

/// How one entity type (users or items) is embedded. With `content` set, each
/// categorical field owns a lookup table and the rows are concatenated;
/// otherwise a two-layer logistic network maps the one-hot id to a vector.
struct EmbeddingSpec {
  std::string prefix;  // "user_emb" or "item_emb"
  int n_entities = 0;
  int dim = 32;
  int hidden = 32;
  std::optional<ContentFeatures> content;
};

/// Split `total` across `n_fields` as evenly as possible; leftovers go to the first fields.
std::vector<int> split_embedding_dims(int total, int n_fields);

void init_embedding(Params& params, const EmbeddingSpec& spec, std::mt19937_64& rng);

/// Embeddings of `ids` stacked as rows (ids.size() x spec.dim).
Var embed(Tape& tape, const Params& params, const EmbeddingSpec& spec, const std::vector<int>& ids);

/// Concatenated per-field table rows for one feature vector.
RowVector embed_entity_content(const Params& params, const EmbeddingSpec& spec, const std::vector<int>& features);

/// sigmoid(W2 sigmoid(W1 e + b1) + b2) for the one-hot vector e of `id`.
RowVector embed_entity_id(const Params& params, const EmbeddingSpec& spec, int id);

}  // namespace tanp
