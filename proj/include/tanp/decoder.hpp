#pragma once

#include "tanp/data.hpp"
#include "tanp/types.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tanp {

enum class Variant { film, gating_film, no_tm };

/// Decoder body `decoder.l<i>.{W,b}` with a scalar head `decoder.head.{W,b}`;
/// modulation generators live at `modulation.l<i>.{W_gamma,W_beta,W_eta,W_delta}`.
struct DecoderSpec {
  int in_dim = 0;  // dim(u) + dim(v) + dim(z)
  int hidden = 32;
  int layers = 3;
  int task_dim = 32;  // dim(o)
  Variant variant = Variant::gating_film;
  FeedbackMode mode = FeedbackMode::explicit_rating;
};

/// Per-layer scale and shift, each 1 x hidden.
struct Modulation {
  Var gamma;
  Var beta;
};

void init_decoder(Params& params, const DecoderSpec& spec, std::mt19937_64& rng);

/// gamma = tanh(o W_gamma), beta = tanh(o W_beta).
Modulation film_params(Tape& tape, const Params& params, const Var& task_embedding, int layer);

/// Gated blend: gamma' and beta' as in FiLM, eta = tanh(o W_eta), delta = sigmoid(o W_delta);
/// gamma = gamma' delta + eta (1 - delta), beta = beta' delta + eta (1 - delta).
/// `delta_override` replaces the generated gate (for inspection and tests).
Modulation gating_film_params(Tape& tape, const Params& params, const Var& task_embedding, int layer,
                              const std::optional<Matrix>& delta_override = std::nullopt);

/// Modulations for every decoder layer according to `spec.variant`.
std::vector<Modulation> modulations(Tape& tape, const Params& params, const DecoderSpec& spec,
                                    const Var& task_embedding);

/// Rows of `inputs` are [u | v | z]. Each layer computes
/// ReLU(gamma * (g W + b) + beta); the head is linear (explicit) or logistic (implicit).
/// Returns an N x 1 column of predictions.
Var decode(Tape& tape, const Params& params, const DecoderSpec& spec, const Var& inputs,
           std::span<const Modulation> mods);

/// Same network without modulation (gamma = 1, beta = 0).
Var decode_unmodulated(Tape& tape, const Params& params, const DecoderSpec& spec, const Var& inputs);

}  // namespace tanp
