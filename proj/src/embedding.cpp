#include "tanp/embedding.hpp"

#include <stdexcept>

namespace tanp {
namespace {

std::string field_table(const EmbeddingSpec& spec, std::size_t field) {
  return spec.prefix + ".field" + std::to_string(field);
}

Var embed_content_rows(Tape& tape, const Params& params, const EmbeddingSpec& spec,
                       const std::vector<std::vector<int>>& rows) {
  const auto& cards = spec.content->cardinalities;
  std::vector<Var> parts;
  parts.reserve(cards.size());
  for (std::size_t f = 0; f < cards.size(); ++f) {
    std::vector<Eigen::Index> idx;
    idx.reserve(rows.size());
    for (const auto& r : rows) {
      if (r.size() != cards.size()) {
        throw std::invalid_argument(spec.prefix + ": expected " + std::to_string(cards.size()) +
                                    " feature(s), got " + std::to_string(r.size()));
      }
      if (r[f] < 0 || r[f] >= cards[f]) {
        throw std::out_of_range(spec.prefix + ": feature index " + std::to_string(r[f]) + " out of range for field " +
                                std::to_string(f) + " (cardinality " + std::to_string(cards[f]) + ")");
      }
      idx.push_back(r[f]);
    }
    parts.push_back(ad::gather_rows(tape.parameter(params, field_table(spec, f)), std::move(idx)));
  }
  return ad::hcat(parts);
}

Var embed_id_rows(Tape& tape, const Params& params, const EmbeddingSpec& spec, const std::vector<int>& ids) {
  std::vector<Eigen::Index> idx;
  idx.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= spec.n_entities) {
      throw std::out_of_range(spec.prefix + ": id " + std::to_string(id) + " outside [0, " +
                              std::to_string(spec.n_entities) + ")");
    }
    idx.push_back(id);
  }
  // W1 * one_hot(id) is the id-th row of W1 in the (n_entities x hidden) layout.
  auto h = ad::sigmoid(ad::add_row(ad::gather_rows(tape.parameter(params, spec.prefix + ".W1"), std::move(idx)),
                                   tape.parameter(params, spec.prefix + ".b1")));
  return ad::sigmoid(ad::add_row(ad::matmul(h, tape.parameter(params, spec.prefix + ".W2")),
                                 tape.parameter(params, spec.prefix + ".b2")));
}

}  // namespace

std::vector<int> split_embedding_dims(int total, int n_fields) {
  if (n_fields <= 0 || total < n_fields) {
    throw std::invalid_argument("cannot split " + std::to_string(total) + " embedding dims over " +
                                std::to_string(n_fields) + " field(s)");
  }
  std::vector<int> dims(static_cast<std::size_t>(n_fields), total / n_fields);
  for (int i = 0; i < total % n_fields; ++i) ++dims[static_cast<std::size_t>(i)];
  return dims;
}

void init_embedding(Params& params, const EmbeddingSpec& spec, std::mt19937_64& rng) {
  if (spec.content) {
    const auto& cards = spec.content->cardinalities;
    const auto dims = split_embedding_dims(spec.dim, static_cast<int>(cards.size()));
    for (std::size_t f = 0; f < cards.size(); ++f) {
      params.add(field_table(spec, f), glorot_uniform<double>(cards[f], dims[f], rng));
    }
    return;
  }
  params.add(spec.prefix + ".W1", glorot_uniform<double>(spec.n_entities, spec.hidden, rng));
  params.add(spec.prefix + ".b1", Matrix::Zero(1, spec.hidden));
  params.add(spec.prefix + ".W2", glorot_uniform<double>(spec.hidden, spec.dim, rng));
  params.add(spec.prefix + ".b2", Matrix::Zero(1, spec.dim));
}

Var embed(Tape& tape, const Params& params, const EmbeddingSpec& spec, const std::vector<int>& ids) {
  if (!spec.content) return embed_id_rows(tape, params, spec, ids);
  std::vector<std::vector<int>> rows;
  rows.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= spec.n_entities || !spec.content->present[static_cast<std::size_t>(id)]) {
      throw std::out_of_range(spec.prefix + ": no content features for id " + std::to_string(id));
    }
    rows.push_back(spec.content->rows[static_cast<std::size_t>(id)]);
  }
  return embed_content_rows(tape, params, spec, rows);
}

RowVector embed_entity_content(const Params& params, const EmbeddingSpec& spec, const std::vector<int>& features) {
  if (!spec.content) throw std::logic_error(spec.prefix + " has no content tables");
  Tape tape;
  return embed_content_rows(tape, params, spec, {features}).value().row(0);
}

RowVector embed_entity_id(const Params& params, const EmbeddingSpec& spec, int id) {
  Tape tape;
  return embed_id_rows(tape, params, spec, {id}).value().row(0);
}

}  // namespace tanp
