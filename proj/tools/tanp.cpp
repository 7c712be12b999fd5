#include "tanp/pipeline.hpp"
#include "tanp/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonFlags {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config) {
  auto* opt = cmd->add_option("--config", flags.config, "run configuration file")->check(CLI::ExistingFile);
  if (needs_config) opt->required();
  cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint path (overrides config)");
  cmd->add_option("--out", flags.out, "output path");
  cmd->add_option("--seed", flags.seed, "random seed (overrides config)");
}

tanp::RunConfig resolve(const CommonFlags& flags) {
  auto config = tanp::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.checkpoint.empty()) config.checkpoint = flags.checkpoint;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-adaptive neural process recommender"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model and write the best-validation checkpoint");
  add_common(train, train_flags, true);
  train->get_option("--checkpoint")->description("latest-state checkpoint (<checkpoint>.last) to resume from");
  train->get_option("--out")->description("checkpoint to write (overrides config)");

  CommonFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, eval_flags, true);

  CommonFlags export_flags;
  auto* exporter = app.add_subcommand("export-assignments", "write soft cluster assignments as CSV");
  add_common(exporter, export_flags, true);

  CommonFlags synth_flags;
  tanp::SyntheticSpec spec;
  auto* synth = app.add_subcommand("gen-synthetic", "write a planted-intent dataset and its labels");
  add_common(synth, synth_flags, false);
  synth->add_option("--intents", spec.n_intents, "number of planted intents");
  synth->add_option("--users-per-intent", spec.users_per_intent, "users per intent");
  synth->add_option("--items", spec.n_items, "catalog size");
  synth->add_option("--min-interactions", spec.min_interactions, "fewest interactions per user");
  synth->add_option("--max-interactions", spec.max_interactions, "most interactions per user");
  synth->add_option("--noise", spec.noise, "probability of an out-of-block interaction");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto config = tanp::load_config(train_flags.config);
      if (train_flags.seed) config.seed = *train_flags.seed;
      if (!train_flags.out.empty()) config.checkpoint = train_flags.out;
      if (!train_flags.checkpoint.empty()) config.resume = train_flags.checkpoint;
      return tanp::run_train(config, std::cout);
    }
    if (*eval) {
      const auto config = resolve(eval_flags);
      tanp::run_eval(config, config.checkpoint, eval_flags.out.empty() ? "metrics.csv" : eval_flags.out, std::cout);
      return 0;
    }
    if (*exporter) {
      const auto config = resolve(export_flags);
      const std::string out = export_flags.out.empty() ? "assignments.csv" : export_flags.out;
      const auto c = tanp::export_assignments(config, config.checkpoint, out);
      std::cout << "wrote " << c.rows() << " x " << c.cols() << " assignments to " << out << '\n';
      return 0;
    }
    if (*synth) {
      if (!synth_flags.config.empty()) spec.seed = tanp::load_config(synth_flags.config).seed;
      if (synth_flags.seed) spec.seed = *synth_flags.seed;
      const std::string out = synth_flags.out.empty() ? "synthetic.csv" : synth_flags.out;
      const auto data = tanp::generate(spec);
      tanp::write_synthetic(data, out, out + ".labels");
      std::cout << "wrote " << data.records.size() << " interactions for " << data.intent.size() << " users to " << out
                << " (labels in " << out << ".labels)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
