#pragma once

#include "tanp/kernel/adam.hpp"
#include "tanp/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace tanp {

/// Mean squared error (1/N) sum (y - y_hat)^2.
double recon_loss_explicit(std::span<const double> y, std::span<const double> y_hat);
/// Binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double recon_loss_implicit(std::span<const double> y, std::span<const double> y_hat);

inline constexpr double kProbabilityClamp = 1e-7;

/// Recorded versions; `prediction` is N x 1, `target` holds the N labels.
Var mse_loss(const Var& prediction, const Matrix& target);
Var bce_loss(const Var& prediction, const Matrix& target);

/// When the clustering target D is rebuilt: from each batch's own assignments,
/// or once per epoch from the assignments of every training task.
enum class ClusterRefresh { batch, epoch };

struct TrainOptions {
  double lambda = 0.1;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  ClusterRefresh refresh = ClusterRefresh::batch;
  bool resample_support = true;
};

/// Loss graph for one batch. `recon` and `kl` are batch means of the per-task
/// terms; `total = recon + kl + lambda * clustering`.
struct BatchObjective {
  Var total;
  Var recon;
  Var kl;
  std::optional<Var> clustering;
  std::optional<Var> assignments;  // B x k
  Matrix target;                   // D used for the clustering term (empty for no_tm)
  std::vector<Var> predictions;    // per task, rows follow task.query order
};

/// One noise row per task; nullopt means z = mu.
using LatentNoise = std::vector<std::optional<RowVector>>;

LatentNoise sample_noise(std::size_t n_tasks, int latent_dim, std::uint64_t seed);

/// Training-mode forward over a batch: posterior from
/// support + query, prior from support, task embedding from support,
/// decoding of the query with z from the posterior. `target` overrides the
/// clustering target (rows follow the batch); otherwise D is computed from
/// the batch assignments and treated as a constant.
BatchObjective batch_objective(Tape& tape, const TaskAdaptiveNP& model, const Params& params,
                               std::span<const Task> batch, double lambda, const LatentNoise& noise,
                               const std::optional<Matrix>& target = std::nullopt);

enum class ForwardMode { train, eval };

struct TaskForwardResult {
  std::vector<double> predictions;  // query order, model output units
  std::optional<double> recon_loss;
  std::optional<double> kl_loss;
  std::optional<RowVector> assignment;
};

/// Single-task forward. In eval mode the query labels are never read.
TaskForwardResult task_forward(const TaskAdaptiveNP& model, const Params& params, const Task& task, ForwardMode mode,
                               std::uint64_t seed);

struct EvalOptions {
  bool sample_latent = false;  // draw z from q(z|S) instead of using its mean
  std::uint64_t seed = 0;
};

/// Test-time prediction from the support set alone. Scores follow the order
/// of `query_items`; explicit-mode scores are mapped back to the rating scale.
std::vector<double> predict_scores(const TaskAdaptiveNP& model, const Params& params, int user,
                                   const std::vector<Interaction>& support, const std::vector<int>& query_items,
                                   const EvalOptions& options = {});

/// Soft cluster assignment of a task computed from its support set.
RowVector task_assignment(const TaskAdaptiveNP& model, const Params& params, int user,
                          const std::vector<Interaction>& support);

struct StepReport {
  double recon = 0;
  double kl = 0;
  double clustering = 0;
  double total = 0;
};

struct EpochReport {
  int epoch = 0;
  int batches = 0;
  double recon = 0;
  double kl = 0;
  double clustering = 0;
  double total = 0;
};

/// Owns parameters and optimizer state and runs the training loop.
class Trainer {
 public:
  Trainer(const TaskAdaptiveNP& model, TrainOptions options, Params params);

  /// Forward, backward and one Adam step on a batch of training tasks.
  StepReport step(std::span<const Task> batch, const std::optional<Matrix>& target = std::nullopt);

  /// Resample supports, shuffle, and step through all batches once.
  EpochReport train_epoch(const std::vector<Task>& tasks);

  const Params& params() const { return params_; }
  const AdamState<double>& optimizer() const { return adam_; }
  const TrainOptions& options() const { return options_; }
  int epoch() const { return epoch_; }

  /// Resume from saved state.
  void restore(Params params, AdamState<double> adam, int epoch);

 private:
  const TaskAdaptiveNP* model_;
  TrainOptions options_;
  Params params_;
  AdamState<double> adam_;
  int epoch_ = 0;
};

}  // namespace tanp
