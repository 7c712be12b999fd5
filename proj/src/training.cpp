#include "tanp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace tanp {
namespace {

void require_lengths(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) {
    throw std::invalid_argument("reconstruction loss: " + std::to_string(y.size()) + " labels vs " +
                                std::to_string(y_hat.size()) + " predictions");
  }
  if (y.empty()) throw std::invalid_argument("reconstruction loss: empty query set");
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

/// Support plus query, with query entries for items already in the support dropped.
std::vector<Interaction> task_union(const Task& task) {
  std::vector<Interaction> all = task.support;
  std::set<int> seen;
  for (const auto& x : task.support) seen.insert(x.item);
  for (const auto& x : task.query) {
    if (seen.insert(x.item).second) all.push_back(x);
  }
  return all;
}

Matrix query_targets(const Task& task, FeedbackMode mode) {
  Matrix y(static_cast<Eigen::Index>(task.query.size()), 1);
  for (std::size_t j = 0; j < task.query.size(); ++j) {
    y(static_cast<Eigen::Index>(j), 0) = normalize_rating(task.query[j].rating, mode);
  }
  return y;
}

std::vector<int> query_items(const Task& task) {
  std::vector<int> items;
  items.reserve(task.query.size());
  for (const auto& x : task.query) items.push_back(x.item);
  return items;
}

Var mean_of_scalars(const std::vector<Var>& xs) {
  return ad::scale(ad::sum(ad::vcat(xs)), 1.0 / static_cast<double>(xs.size()));
}

}  // namespace

double recon_loss_explicit(std::span<const double> y, std::span<const double> y_hat) {
  require_lengths(y, y_hat);
  double total = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) total += (y[j] - y_hat[j]) * (y[j] - y_hat[j]);
  return total / static_cast<double>(y.size());
}

double recon_loss_implicit(std::span<const double> y, std::span<const double> y_hat) {
  require_lengths(y, y_hat);
  double total = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double p = clamp_probability(y_hat[j]);
    total += y[j] * std::log(p) + (1.0 - y[j]) * std::log(1.0 - p);
  }
  return -total / static_cast<double>(y.size());
}

Var mse_loss(const Var& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != 1 || target.cols() != 1) {
    throw std::invalid_argument("mse_loss: shape mismatch " + shape_string(prediction.value()) + " vs " +
                                shape_string(target));
  }
  if (target.rows() == 0) throw std::invalid_argument("mse_loss: empty query set");
  const double n = static_cast<double>(target.rows());
  Matrix out(1, 1);
  out(0, 0) = (prediction.value() - target).squaredNorm() / n;
  return prediction.tape()->record(std::move(out), {prediction}, [prediction, target, n](const Matrix& g, Tape& t) {
    t.accumulate(prediction, (2.0 * g(0, 0) / n) * (prediction.value() - target));
  });
}

Var bce_loss(const Var& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != 1 || target.cols() != 1) {
    throw std::invalid_argument("bce_loss: shape mismatch " + shape_string(prediction.value()) + " vs " +
                                shape_string(target));
  }
  if (target.rows() == 0) throw std::invalid_argument("bce_loss: empty query set");
  const double n = static_cast<double>(target.rows());
  const auto& p = prediction.value();
  double total = 0.0;
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    const double q = clamp_probability(p(j, 0));
    total += target(j, 0) * std::log(q) + (1.0 - target(j, 0)) * std::log(1.0 - q);
  }
  Matrix out(1, 1);
  out(0, 0) = -total / n;
  return prediction.tape()->record(std::move(out), {prediction}, [prediction, target, n](const Matrix& g, Tape& t) {
    const auto& p = prediction.value();
    Matrix grad(p.rows(), 1);
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      const double q = p(j, 0);
      if (q < kProbabilityClamp || q > 1.0 - kProbabilityClamp) {
        grad(j, 0) = 0.0;
      } else {
        grad(j, 0) = -(target(j, 0) / q - (1.0 - target(j, 0)) / (1.0 - q)) / n;
      }
    }
    t.accumulate(prediction, g(0, 0) * grad);
  });
}

LatentNoise sample_noise(std::size_t n_tasks, int latent_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentNoise noise;
  noise.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    RowVector eps(latent_dim);
    for (int d = 0; d < latent_dim; ++d) eps(d) = normal(rng);
    noise.emplace_back(std::move(eps));
  }
  return noise;
}

BatchObjective batch_objective(Tape& tape, const TaskAdaptiveNP& model, const Params& params,
                               std::span<const Task> batch, double lambda, const LatentNoise& noise,
                               const std::optional<Matrix>& target) {
  if (batch.empty()) throw std::invalid_argument("batch_objective: empty batch");
  if (noise.size() != batch.size()) throw std::invalid_argument("batch_objective: one noise row per task required");
  if (lambda < 0) throw std::invalid_argument("batch_objective: lambda must be >= 0");

  const auto n = batch.size();
  std::vector<LatentVars> posteriors;
  std::vector<Var> kls;
  std::vector<Var> identities;
  posteriors.reserve(n);
  kls.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& task = batch[i];
    if (task.query.empty()) throw std::invalid_argument("batch_objective: empty query for user " + std::to_string(task.user));
    auto posterior = model.encode(tape, params, task.user, task_union(task), noise[i]);
    auto prior = model.encode(tape, params, task.user, task.support, std::nullopt);
    kls.push_back(gaussian_kl(posterior.mu, posterior.log_sigma, prior.mu, prior.log_sigma));
    posteriors.push_back(posterior);
    if (model.task_adaptive()) identities.push_back(model.task_identity(tape, params, task.user, task.support));
  }

  BatchObjective out;
  std::optional<Var> task_embeddings;
  if (model.task_adaptive()) {
    auto t = ad::vcat(identities);
    auto pool = tape.parameter(params, kPoolName);
    auto c = soft_assign(t, pool, model.config().alpha);
    task_embeddings = final_task_embedding(t, c, pool, tape.parameter(params, kTaskProjectionName));
    out.assignments = c;
  }

  std::vector<Var> recons;
  recons.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& task = batch[i];
    std::optional<Var> o;
    if (task_embeddings) o = ad::gather_rows(*task_embeddings, {static_cast<Eigen::Index>(i)});
    auto pred = model.predict(tape, params, task.user, query_items(task), posteriors[i].z, o);
    const auto y = query_targets(task, model.config().mode);
    recons.push_back(model.config().mode == FeedbackMode::implicit ? bce_loss(pred, y) : mse_loss(pred, y));
    out.predictions.push_back(pred);
  }

  out.recon = mean_of_scalars(recons);
  out.kl = mean_of_scalars(kls);
  out.total = out.recon + out.kl;
  if (out.assignments) {
    if (target) {
      if (target->rows() != out.assignments->rows() || target->cols() != out.assignments->cols()) {
        throw std::invalid_argument("batch_objective: target " + shape_string(*target) + " vs assignments " +
                                    shape_string(out.assignments->value()));
      }
      out.target = *target;
    } else {
      out.target = target_distribution(out.assignments->value());
    }
    out.clustering = clustering_loss(*out.assignments, out.target);
    out.total = out.total + ad::scale(*out.clustering, lambda);
  }
  return out;
}

TaskForwardResult task_forward(const TaskAdaptiveNP& model, const Params& params, const Task& task, ForwardMode mode,
                               std::uint64_t seed) {
  TaskForwardResult result;
  if (mode == ForwardMode::eval) {
    result.predictions = predict_scores(model, params, task.user, task.support, query_items(task), {false, seed});
    if (model.task_adaptive()) result.assignment = task_assignment(model, params, task.user, task.support);
    return result;
  }
  Tape tape;
  const auto noise = sample_noise(1, model.config().latent_dim, seed);
  auto obj = batch_objective(tape, model, params, std::span<const Task>(&task, 1), 0.0, noise);
  const auto& p = obj.predictions.front().value();
  result.predictions.assign(p.data(), p.data() + p.size());
  result.recon_loss = obj.recon.scalar();
  result.kl_loss = obj.kl.scalar();
  if (obj.assignments) result.assignment = obj.assignments->value().row(0);
  return result;
}

std::vector<double> predict_scores(const TaskAdaptiveNP& model, const Params& params, int user,
                                   const std::vector<Interaction>& support, const std::vector<int>& query_items,
                                   const EvalOptions& options) {
  if (query_items.empty()) return {};
  Tape tape;
  std::optional<RowVector> eps;
  if (options.sample_latent) eps = sample_noise(1, model.config().latent_dim, options.seed).front();
  auto prior = model.encode(tape, params, user, support, eps);
  std::optional<Var> o;
  if (model.task_adaptive()) {
    auto t = model.task_identity(tape, params, user, support);
    auto pool = tape.parameter(params, kPoolName);
    o = final_task_embedding(t, soft_assign(t, pool, model.config().alpha), pool,
                             tape.parameter(params, kTaskProjectionName));
  }
  // Decode in ascending item order so each score is independent of query ordering.
  std::vector<std::size_t> order(query_items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return query_items[a] < query_items[b]; });
  std::vector<int> sorted;
  sorted.reserve(order.size());
  for (auto i : order) sorted.push_back(query_items[i]);
  const auto pred = model.predict(tape, params, user, sorted, prior.z, o).value();
  std::vector<double> scores(query_items.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double y = pred(static_cast<Eigen::Index>(r), 0);
    scores[order[r]] = model.config().mode == FeedbackMode::explicit_rating ? 1.0 + 4.0 * y : y;
  }
  return scores;
}

RowVector task_assignment(const TaskAdaptiveNP& model, const Params& params, int user,
                          const std::vector<Interaction>& support) {
  Tape tape;
  auto t = model.task_identity(tape, params, user, support);
  return soft_assign(t, tape.parameter(params, kPoolName), model.config().alpha).value().row(0);
}

Trainer::Trainer(const TaskAdaptiveNP& model, TrainOptions options, Params params)
    : model_(&model), options_(options), params_(std::move(params)) {
  if (options_.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

void Trainer::restore(Params params, AdamState<double> adam, int epoch) {
  params_ = std::move(params);
  adam_ = std::move(adam);
  epoch_ = epoch;
}

StepReport Trainer::step(std::span<const Task> batch, const std::optional<Matrix>& target) {
  Tape tape;
  const auto noise = sample_noise(batch.size(), model_->config().latent_dim,
                                  derive_seed(options_.seed, 0xe95ULL, static_cast<std::uint64_t>(adam_.step)));
  auto obj = batch_objective(tape, *model_, params_, batch, options_.lambda, noise, target);
  StepReport report;
  report.recon = obj.recon.scalar();
  report.kl = obj.kl.scalar();
  report.clustering = obj.clustering ? obj.clustering->scalar() : 0.0;
  report.total = obj.total.scalar();
  if (std::isnan(report.total)) {
    throw std::runtime_error("training diverged: total loss is NaN at optimizer step " + std::to_string(adam_.step));
  }
  const auto grads = ad::backward(obj.total, params_);
  adam_step(params_, grads, adam_, options_.adam);
  return report;
}

EpochReport Trainer::train_epoch(const std::vector<Task>& tasks) {
  if (tasks.empty()) throw std::invalid_argument("train_epoch: no training tasks");
  const auto e = static_cast<std::uint64_t>(epoch_);
  std::vector<Task> epoch_tasks;
  epoch_tasks.reserve(tasks.size());
  for (const auto& t : tasks) {
    epoch_tasks.push_back(options_.resample_support ? resample_support(t, derive_seed(options_.seed, e, 0x7e5ULL)) : t);
  }
  std::vector<std::size_t> order(epoch_tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(options_.seed, e, 0x5417ULL));
  std::shuffle(order.begin(), order.end(), rng);

  std::optional<Matrix> full_target;
  if (options_.refresh == ClusterRefresh::epoch && model_->task_adaptive()) {
    Matrix c(static_cast<Eigen::Index>(epoch_tasks.size()), model_->config().k);
    for (std::size_t i = 0; i < epoch_tasks.size(); ++i) {
      c.row(static_cast<Eigen::Index>(i)) = task_assignment(*model_, params_, epoch_tasks[i].user, epoch_tasks[i].support);
    }
    full_target = target_distribution(c);
  }

  EpochReport report;
  report.epoch = epoch_;
  const auto batch_size = static_cast<std::size_t>(options_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    std::vector<Task> batch;
    batch.reserve(end - start);
    std::optional<Matrix> target;
    if (full_target) target = Matrix(static_cast<Eigen::Index>(end - start), full_target->cols());
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(epoch_tasks[order[i]]);
      if (target) target->row(static_cast<Eigen::Index>(i - start)) = full_target->row(static_cast<Eigen::Index>(order[i]));
    }
    const auto s = step(batch, target);
    report.recon += s.recon;
    report.kl += s.kl;
    report.clustering += s.clustering;
    report.total += s.total;
    ++report.batches;
  }
  const double nb = static_cast<double>(report.batches);
  report.recon /= nb;
  report.kl /= nb;
  report.clustering /= nb;
  report.total /= nb;
  ++epoch_;
  return report;
}

}  // namespace tanp
