#include "tanp/model.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace tanp {

TaskAdaptiveNP::TaskAdaptiveNP(ModelConfig config) : config_(std::move(config)) {
  if (config_.n_users <= 0 || config_.n_items <= 0) throw std::invalid_argument("model needs users and items");
  if (config_.layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (config_.k < 1) throw std::invalid_argument("k must be >= 1");
  if (!(config_.alpha > 0)) throw std::invalid_argument("alpha must be positive");

  user_embedding_ = EmbeddingSpec{"user_emb", config_.n_users, config_.embedding_dim, config_.embedding_dim,
                                  config_.user_content};
  item_embedding_ = EmbeddingSpec{"item_emb", config_.n_items, config_.embedding_dim, config_.embedding_dim,
                                  config_.item_content};
  const int interaction_dim = 2 * config_.embedding_dim + 1;
  encoder_ = MlpSpec{"encoder", interaction_dim, config_.hidden_dim, config_.layers};
  latent_ = LatentSpec{"encoder", config_.hidden_dim, config_.latent_dim};
  identity_ = MlpSpec{"identity", interaction_dim, config_.hidden_dim, config_.layers};
  decoder_.in_dim = 2 * config_.embedding_dim + config_.latent_dim;
  decoder_.hidden = config_.hidden_dim;
  decoder_.layers = config_.layers;
  decoder_.task_dim = config_.hidden_dim;
  decoder_.variant = config_.variant;
  decoder_.mode = config_.mode;
}

Params TaskAdaptiveNP::init_params(std::uint64_t seed) const {
  Params params;
  std::mt19937_64 rng(seed);
  init_embedding(params, user_embedding_, rng);
  init_embedding(params, item_embedding_, rng);
  init_mlp(params, encoder_, rng);
  init_latent_heads(params, latent_, rng);
  if (task_adaptive()) {
    init_mlp(params, identity_, rng);
    params.add(kPoolName, glorot_uniform<double>(config_.hidden_dim, config_.k, rng));
    params.add(kTaskProjectionName, glorot_uniform<double>(config_.hidden_dim, config_.hidden_dim, rng));
  }
  init_decoder(params, decoder_, rng);
  return params;
}

void canonical_order(std::vector<Interaction>& xs) {
  std::sort(xs.begin(), xs.end(), [](const Interaction& a, const Interaction& b) {
    if (a.item != b.item) return a.item < b.item;
    return a.rating < b.rating;
  });
}

Var TaskAdaptiveNP::interaction_rows(Tape& tape, const Params& params, int user,
                                     const std::vector<Interaction>& xs) const {
  std::vector<int> items;
  std::vector<double> ratings;
  items.reserve(xs.size());
  ratings.reserve(xs.size());
  for (const auto& x : xs) {
    items.push_back(x.item);
    ratings.push_back(normalize_rating(x.rating, config_.mode));
  }
  auto u = embed(tape, params, user_embedding_, {user});
  auto v = embed(tape, params, item_embedding_, items);
  return interaction_inputs(u, v, ratings);
}

LatentVars TaskAdaptiveNP::encode(Tape& tape, const Params& params, int user, std::vector<Interaction> xs,
                                  const std::optional<RowVector>& eps) const {
  if (xs.empty()) throw std::invalid_argument("encode: empty interaction set");
  canonical_order(xs);
  auto r = aggregate(mlp_forward(tape, params, encoder_, interaction_rows(tape, params, user, xs)));
  return to_latent(tape, params, latent_, r, eps);
}

Var TaskAdaptiveNP::task_identity(Tape& tape, const Params& params, int user,
                                  std::vector<Interaction> support) const {
  if (!task_adaptive()) throw std::logic_error("task_identity: variant no_tm has no customization module");
  if (support.empty()) throw std::invalid_argument("task_identity: empty support set");
  canonical_order(support);
  return encode_task_identity(tape, params, identity_, interaction_rows(tape, params, user, support));
}

Var TaskAdaptiveNP::predict(Tape& tape, const Params& params, int user, const std::vector<int>& items, const Var& z,
                            const std::optional<Var>& task_embedding) const {
  auto u = embed(tape, params, user_embedding_, {user});
  auto v = embed(tape, params, item_embedding_, items);
  const auto n = static_cast<Eigen::Index>(items.size());
  auto inputs = ad::hcat<double>({ad::repeat_rows(u, n), v, ad::repeat_rows(z, n)});
  if (!task_adaptive()) return decode_unmodulated(tape, params, decoder_, inputs);
  if (!task_embedding) throw std::logic_error("predict: task embedding required for modulated decoding");
  const auto mods = modulations(tape, params, decoder_, *task_embedding);
  return decode(tape, params, decoder_, inputs, mods);
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::film:
      return "film";
    case Variant::gating_film:
      return "gating_film";
    case Variant::no_tm:
      return "no_tm";
  }
  return "?";
}

const char* to_string(FeedbackMode m) { return m == FeedbackMode::implicit ? "implicit" : "explicit"; }

Variant parse_variant(const std::string& s) {
  if (s == "film") return Variant::film;
  if (s == "gating_film") return Variant::gating_film;
  if (s == "no_tm") return Variant::no_tm;
  throw std::invalid_argument("unknown variant '" + s + "' (expected film, gating_film or no_tm)");
}

FeedbackMode parse_mode(const std::string& s) {
  if (s == "explicit") return FeedbackMode::explicit_rating;
  if (s == "implicit") return FeedbackMode::implicit;
  throw std::invalid_argument("unknown mode '" + s + "' (expected explicit or implicit)");
}

}  // namespace tanp
