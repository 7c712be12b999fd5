#pragma once

#include "tanp/checkpoint.hpp"
#include "tanp/config.hpp"
#include "tanp/metrics.hpp"
#include "tanp/training.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

namespace tanp {

/// Tasks and id tables built from a RunConfig's data settings.
struct PreparedData {
  InteractionLog log;
  TaskSplits splits;
  int dropped_degenerate = 0;
  std::optional<ContentFeatures> user_content;
  std::optional<ContentFeatures> item_content;
};

/// Filter, build tasks, split users, and (implicit mode) sample negatives for every split.
PreparedData prepare_data(const RunConfig& config, InteractionLog log);
/// Same, loading the interaction log and feature sidecars named in the config.
PreparedData prepare_data(const RunConfig& config);

ModelConfig model_config(const RunConfig& config, const PreparedData& data);
TrainOptions train_options(const RunConfig& config);
EvaluationOptions evaluation_options(const RunConfig& config);

/// Early-stopping bookkeeping carried across epochs (and across a resume).
struct FitProgress {
  int best_epoch = -1;
  double best_metric = -std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  Params best_params;
  AdamState<double> best_adam;
};

struct EpochLog {
  EpochReport train;
  std::optional<double> validation_p5;
};

struct FitResult {
  FitProgress progress;
  std::vector<EpochLog> history;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const Trainer&, const FitProgress&)>;

/// Train until `config.epochs` total epochs or until validation P@5 has not
/// improved for `config.patience` epochs. Without validation tasks the last
/// epoch is kept.
FitResult fit(Trainer& trainer, const TaskAdaptiveNP& model, const TaskSplits& splits, const RunConfig& config,
              std::ostream& log, FitProgress progress = {}, const EpochCallback& on_epoch = {});

/// Path of the rolling latest-state checkpoint used for resume.
std::filesystem::path last_checkpoint_path(const std::filesystem::path& checkpoint);
/// Path of the training log written next to the checkpoint.
std::filesystem::path log_path(const std::filesystem::path& checkpoint);

/// Full training run; writes the best-validation checkpoint, the latest-state
/// checkpoint, and the training log. Returns the process exit status.
int run_train(const RunConfig& config, std::ostream& out);

/// Metrics on the test split with parameters from `checkpoint`.
MetricReport run_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& metrics_out, std::ostream& out);

/// Soft assignments (tasks x k) of the configured export split.
Matrix export_assignments(const RunConfig& config, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& out_path);

/// Copy checkpoint parameters into `params`; names and shapes must match.
void load_parameters(Params& params, const Checkpoint& checkpoint);

std::vector<Task> select_split(const TaskSplits& splits, const std::string& name);

}  // namespace tanp
