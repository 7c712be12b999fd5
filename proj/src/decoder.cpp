#include "tanp/decoder.hpp"

#include <stdexcept>

namespace tanp {
namespace {

std::string layer_name(int layer) { return "decoder.l" + std::to_string(layer); }
std::string modulation_name(int layer) { return "modulation.l" + std::to_string(layer); }

Var layer_affine(Tape& tape, const Params& params, const Var& g, int layer) {
  const auto base = layer_name(layer);
  return ad::add_row(ad::matmul(g, tape.parameter(params, base + ".W")), tape.parameter(params, base + ".b"));
}

Var head(Tape& tape, const Params& params, const DecoderSpec& spec, const Var& g) {
  auto out = ad::add_row(ad::matmul(g, tape.parameter(params, "decoder.head.W")),
                         tape.parameter(params, "decoder.head.b"));
  return spec.mode == FeedbackMode::implicit ? ad::sigmoid(out) : out;
}

void check_inputs(const DecoderSpec& spec, const Var& inputs) {
  if (inputs.cols() != spec.in_dim) {
    throw std::invalid_argument("decoder: input has " + std::to_string(inputs.cols()) + " columns, expected " +
                                std::to_string(spec.in_dim));
  }
}

}  // namespace

void init_decoder(Params& params, const DecoderSpec& spec, std::mt19937_64& rng) {
  int in = spec.in_dim;
  for (int l = 0; l < spec.layers; ++l) {
    params.add(layer_name(l) + ".W", glorot_uniform<double>(in, spec.hidden, rng));
    params.add(layer_name(l) + ".b", Matrix::Zero(1, spec.hidden));
    in = spec.hidden;
  }
  params.add("decoder.head.W", glorot_uniform<double>(spec.hidden, 1, rng));
  params.add("decoder.head.b", Matrix::Zero(1, 1));
  if (spec.variant == Variant::no_tm) return;
  for (int l = 0; l < spec.layers; ++l) {
    const auto base = modulation_name(l);
    params.add(base + ".W_gamma", glorot_uniform<double>(spec.task_dim, spec.hidden, rng));
    params.add(base + ".W_beta", glorot_uniform<double>(spec.task_dim, spec.hidden, rng));
    if (spec.variant == Variant::gating_film) {
      params.add(base + ".W_eta", glorot_uniform<double>(spec.task_dim, spec.hidden, rng));
      params.add(base + ".W_delta", glorot_uniform<double>(spec.task_dim, spec.hidden, rng));
    }
  }
}

Modulation film_params(Tape& tape, const Params& params, const Var& task_embedding, int layer) {
  const auto base = modulation_name(layer);
  return Modulation{ad::tanh(ad::matmul(task_embedding, tape.parameter(params, base + ".W_gamma"))),
                    ad::tanh(ad::matmul(task_embedding, tape.parameter(params, base + ".W_beta")))};
}

Modulation gating_film_params(Tape& tape, const Params& params, const Var& task_embedding, int layer,
                              const std::optional<Matrix>& delta_override) {
  const auto base = modulation_name(layer);
  const auto film = film_params(tape, params, task_embedding, layer);
  auto eta = ad::tanh(ad::matmul(task_embedding, tape.parameter(params, base + ".W_eta")));
  auto delta = delta_override ? tape.constant(*delta_override)
                              : ad::sigmoid(ad::matmul(task_embedding, tape.parameter(params, base + ".W_delta")));
  auto closed = eta * (tape.constant(Matrix::Ones(delta.rows(), delta.cols())) - delta);
  return Modulation{film.gamma * delta + closed, film.beta * delta + closed};
}

std::vector<Modulation> modulations(Tape& tape, const Params& params, const DecoderSpec& spec,
                                    const Var& task_embedding) {
  std::vector<Modulation> mods;
  if (spec.variant == Variant::no_tm) return mods;
  mods.reserve(static_cast<std::size_t>(spec.layers));
  for (int l = 0; l < spec.layers; ++l) {
    mods.push_back(spec.variant == Variant::film ? film_params(tape, params, task_embedding, l)
                                                 : gating_film_params(tape, params, task_embedding, l));
  }
  return mods;
}

Var decode(Tape& tape, const Params& params, const DecoderSpec& spec, const Var& inputs,
           std::span<const Modulation> mods) {
  check_inputs(spec, inputs);
  if (static_cast<int>(mods.size()) != spec.layers) {
    throw std::logic_error("decode: " + std::to_string(mods.size()) + " modulation(s) for " +
                           std::to_string(spec.layers) + " layer(s)");
  }
  Var g = inputs;
  for (int l = 0; l < spec.layers; ++l) {
    const auto& m = mods[static_cast<std::size_t>(l)];
    g = ad::relu(ad::add_row(ad::mul_row(layer_affine(tape, params, g, l), m.gamma), m.beta));
  }
  return head(tape, params, spec, g);
}

Var decode_unmodulated(Tape& tape, const Params& params, const DecoderSpec& spec, const Var& inputs) {
  check_inputs(spec, inputs);
  Var g = inputs;
  for (int l = 0; l < spec.layers; ++l) g = ad::relu(layer_affine(tape, params, g, l));
  return head(tape, params, spec, g);
}

}  // namespace tanp
