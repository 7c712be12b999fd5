#include "tanp/pipeline.hpp"

#include "tanp/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace tanp {
namespace {

constexpr int kValidationCutoff = 5;

void check_ratings(InteractionLog& log, FeedbackMode mode) {
  for (auto& x : log.interactions) {
    if (mode == FeedbackMode::explicit_rating) {
      if (!(x.rating >= 1.0 && x.rating <= 5.0)) {
        throw DataError("explicit rating " + std::to_string(x.rating) + " for user " +
                        std::to_string(log.user_ids[static_cast<std::size_t>(x.user)]) + " outside [1, 5]");
      }
    } else {
      if (!(x.rating > 0.0)) {
        throw DataError("implicit log must hold observed interactions only (user " +
                        std::to_string(log.user_ids[static_cast<std::size_t>(x.user)]) + " has rating " +
                        std::to_string(x.rating) + ")");
      }
      x.rating = 1.0;
    }
  }
}

void add_negatives(std::vector<Task>& tasks, int n_items, int ratio, std::uint64_t seed, std::uint64_t stream) {
  for (auto& t : tasks) t = negative_sample(t, n_items, ratio, derive_seed(seed, stream, static_cast<std::uint64_t>(t.user)));
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Checkpoint last_state_checkpoint(const RunConfig& config, const Trainer& trainer, const FitProgress& progress) {
  auto c = make_checkpoint(config.settings_text(), {trainer.params(), trainer.optimizer(), trainer.epoch(), config.seed});
  for (const auto& [name, entry] : progress.best_params) c.tensors.emplace_back("best/" + name, entry.value);
  for (const auto& [name, m] : progress.best_adam.m) c.tensors.emplace_back("best_adam.m/" + name, m);
  for (const auto& [name, v] : progress.best_adam.v) c.tensors.emplace_back("best_adam.v/" + name, v);
  c.tensors.emplace_back("state/best_adam_step", scalar(static_cast<double>(progress.best_adam.step)));
  c.tensors.emplace_back("state/best_epoch", scalar(progress.best_epoch));
  c.tensors.emplace_back("state/best_metric", scalar(progress.best_metric));
  c.tensors.emplace_back("state/stale_epochs", scalar(progress.stale_epochs));
  return c;
}

FitProgress read_progress(const Checkpoint& c) {
  FitProgress p;
  if (!c.has("state/best_epoch")) {
    throw CheckpointError("checkpoint holds no early-stopping state; resume from the latest-state checkpoint");
  }
  const auto strip = [](const std::string& name, const std::string& prefix) -> std::string {
    return name.rfind(prefix, 0) == 0 ? name.substr(prefix.size()) : std::string();
  };
  for (const auto& [name, m] : c.tensors) {
    if (auto b = strip(name, "best/"); !b.empty()) {
      p.best_params.add(b, m);
    } else if (auto bm = strip(name, "best_adam.m/"); !bm.empty()) {
      p.best_adam.m[bm] = m;
    } else if (auto bv = strip(name, "best_adam.v/"); !bv.empty()) {
      p.best_adam.v[bv] = m;
    }
  }
  p.best_adam.step = static_cast<std::int64_t>(c.tensor("state/best_adam_step")(0, 0));
  p.best_epoch = static_cast<int>(c.tensor("state/best_epoch")(0, 0));
  p.best_metric = c.tensor("state/best_metric")(0, 0);
  p.stale_epochs = static_cast<int>(c.tensor("state/stale_epochs")(0, 0));
  return p;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::filesystem::path per_user_path(const std::filesystem::path& metrics_out) {
  auto p = metrics_out;
  p.replace_filename(metrics_out.stem().string() + "_per_user" + metrics_out.extension().string());
  return p;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config, InteractionLog log) {
  if (config.n_support >= config.min_len) {
    throw ConfigError("n_support (" + std::to_string(config.n_support) + ") must be below min_len (" +
                      std::to_string(config.min_len) + ")");
  }
  if (config.neg_ratio < 1 && config.mode == FeedbackMode::implicit) throw ConfigError("neg_ratio must be >= 1");
  check_ratings(log, config.mode);

  PreparedData data;
  auto tasks = filter_and_build_tasks(log.interactions, config.n_support, config.min_len, config.max_len,
                                      derive_seed(config.seed, 0x5u), &data.dropped_degenerate);
  if (tasks.empty()) {
    throw DataError("no user has between " + std::to_string(config.min_len) + " and " + std::to_string(config.max_len) +
                    " interactions");
  }
  data.splits = split_users(std::move(tasks), config.train_ratio, config.val_ratio, config.test_ratio,
                            derive_seed(config.seed, 0x511u));
  if (config.mode == FeedbackMode::implicit) {
    add_negatives(data.splits.training, log.n_items(), config.neg_ratio, config.seed, 0x7a1u);
    add_negatives(data.splits.validation, log.n_items(), config.neg_ratio, config.seed, 0x7a2u);
    add_negatives(data.splits.test, log.n_items(), config.neg_ratio, config.seed, 0x7a3u);
  }
  data.log = std::move(log);
  return data;
}

PreparedData prepare_data(const RunConfig& config) {
  if (config.data_path.empty()) throw ConfigError("data_path is not set");
  auto log = load_interactions(config.data_path, config.delimiter);
  auto data = prepare_data(config, std::move(log));
  if (!config.user_features_path.empty()) {
    data.user_content = load_content_features(config.user_features_path, data.log.user_index, data.log.n_users(),
                                              config.delimiter);
  }
  if (!config.item_features_path.empty()) {
    data.item_content = load_content_features(config.item_features_path, data.log.item_index, data.log.n_items(),
                                              config.delimiter);
  }
  return data;
}

ModelConfig model_config(const RunConfig& config, const PreparedData& data) {
  ModelConfig m;
  m.mode = config.mode;
  m.variant = config.variant;
  m.n_users = data.log.n_users();
  m.n_items = data.log.n_items();
  m.embedding_dim = config.embedding_dim;
  m.hidden_dim = config.hidden_dim;
  m.latent_dim = config.latent_dim;
  m.layers = config.layers;
  m.k = config.k;
  m.alpha = config.alpha;
  m.user_content = data.user_content;
  m.item_content = data.item_content;
  return m;
}

TrainOptions train_options(const RunConfig& config) {
  TrainOptions o;
  o.lambda = config.lambda;
  o.batch_size = config.batch_size;
  o.adam.lr = config.lr;
  o.seed = config.seed;
  o.refresh = config.cluster_refresh;
  o.resample_support = config.resample_support;
  return o;
}

EvaluationOptions evaluation_options(const RunConfig& config) {
  EvaluationOptions o;
  o.relevance.mode = config.mode;
  o.relevance.threshold = config.relevance_threshold;
  o.graded_gains = config.graded_gains;
  o.prediction.sample_latent = config.eval_sample_latent;
  o.prediction.seed = derive_seed(config.seed, 0xe7a1u);
  return o;
}

FitResult fit(Trainer& trainer, const TaskAdaptiveNP& model, const TaskSplits& splits, const RunConfig& config,
              std::ostream& log, FitProgress progress, const EpochCallback& on_epoch) {
  FitResult result;
  const auto eval_options = evaluation_options(config);
  const bool validate = !splits.validation.empty();
  while (trainer.epoch() < config.epochs) {
    EpochLog entry;
    entry.train = trainer.train_epoch(splits.training);
    log << "epoch " << entry.train.epoch << " L_r=" << fixed(entry.train.recon) << " L_c=" << fixed(entry.train.kl)
        << " L_u=" << fixed(entry.train.clustering) << " total=" << fixed(entry.train.total);
    bool improved = !validate;
    if (validate) {
      entry.validation_p5 = evaluate(model, trainer.params(), splits.validation, eval_options).precision_at(kValidationCutoff);
      log << " val_P@5=" << fixed(*entry.validation_p5);
      improved = *entry.validation_p5 > progress.best_metric;
    }
    log << '\n';
    if (improved) {
      progress.best_epoch = entry.train.epoch;
      if (entry.validation_p5) progress.best_metric = *entry.validation_p5;
      progress.best_params = trainer.params();
      progress.best_adam = trainer.optimizer();
      progress.stale_epochs = 0;
    } else {
      ++progress.stale_epochs;
    }
    result.history.push_back(entry);
    if (on_epoch) on_epoch(trainer, progress);
    if (validate && progress.stale_epochs >= config.patience) {
      log << "early stop: no validation improvement for " << config.patience << " epochs\n";
      result.stopped_early = true;
      break;
    }
  }
  result.progress = std::move(progress);
  return result;
}

std::filesystem::path last_checkpoint_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".last";
}

std::filesystem::path log_path(const std::filesystem::path& checkpoint) { return checkpoint.string() + ".log"; }

int run_train(const RunConfig& config, std::ostream& out) {
  std::ostringstream log;
  const auto emit = [&](const std::string& text) {
    out << text << std::flush;
    log << text;
  };
  emit("# resolved configuration\n" + config.to_text());

  auto data = prepare_data(config);
  std::ostringstream summary;
  summary << "users " << data.log.n_users() << " items " << data.log.n_items() << " tasks train/val/test "
          << data.splits.training.size() << '/' << data.splits.validation.size() << '/' << data.splits.test.size()
          << " dropped " << data.dropped_degenerate << '\n';
  emit(summary.str());
  if (data.splits.training.empty()) throw DataError("training split is empty");

  TaskAdaptiveNP model(model_config(config, data));
  Trainer trainer(model, train_options(config), model.init_params(config.seed));
  FitProgress progress;
  if (!config.resume.empty()) {
    const auto c = load_checkpoint(config.resume);
    auto snapshot = read_snapshot(c);
    Params params = model.init_params(config.seed);
    load_parameters(params, c);
    progress = read_progress(c);
    trainer.restore(std::move(params), std::move(snapshot.adam), snapshot.epoch);
    emit("resumed from " + config.resume + " at epoch " + std::to_string(snapshot.epoch) + "\n");
  }

  const std::filesystem::path checkpoint = config.checkpoint;
  std::ostringstream epochs;
  std::size_t printed = 0;
  const auto flush_epochs = [&] {
    const auto text = epochs.str();
    emit(text.substr(printed));
    printed = text.size();
  };
  const auto result = fit(trainer, model, data.splits, config, epochs, std::move(progress),
                          [&](const Trainer& t, const FitProgress& p) {
                            save_checkpoint(last_state_checkpoint(config, t, p), last_checkpoint_path(checkpoint));
                            flush_epochs();
                          });
  flush_epochs();

  const auto& best = result.progress;
  if (best.best_epoch < 0) throw std::runtime_error("training produced no epochs (epochs = " + std::to_string(config.epochs) + ")");
  save_checkpoint(make_checkpoint(config.settings_text(), {best.best_params, best.best_adam, best.best_epoch + 1, config.seed}),
                  checkpoint);
  std::ostringstream tail;
  tail << "best epoch " << best.best_epoch;
  if (std::isfinite(best.best_metric)) tail << " val_P@5=" << fixed(best.best_metric);
  tail << "\ncheckpoint " << checkpoint.string() << '\n';
  emit(tail.str());
  write_file_atomic(log_path(checkpoint), log.str());
  return 0;
}

void load_parameters(Params& params, const Checkpoint& checkpoint) {
  std::size_t found = 0;
  for (const auto& [name, m] : checkpoint.tensors) {
    if (name.rfind("param/", 0) != 0) continue;
    const auto p = name.substr(6);
    if (!params.contains(p)) {
      throw CheckpointError("checkpoint tensor '" + p + "' does not belong to the configured model");
    }
    params.assign(p, m);
    ++found;
  }
  if (found != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(found) + " of the model's " +
                          std::to_string(params.size()) + " parameters");
  }
}

std::vector<Task> select_split(const TaskSplits& splits, const std::string& name) {
  if (name == "train") return splits.training;
  if (name == "validation") return splits.validation;
  if (name == "test") return splits.test;
  if (name == "all") {
    std::vector<Task> all = splits.training;
    all.insert(all.end(), splits.validation.begin(), splits.validation.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    std::sort(all.begin(), all.end(), [](const Task& a, const Task& b) { return a.user < b.user; });
    return all;
  }
  throw ConfigError("unknown split '" + name + "'");
}

MetricReport run_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& metrics_out, std::ostream& out) {
  const auto c = load_checkpoint(checkpoint);
  auto data = prepare_data(config);
  if (data.splits.test.empty()) throw DataError("test split is empty");
  TaskAdaptiveNP model(model_config(config, data));
  Params params = model.init_params(config.seed);
  load_parameters(params, c);
  const auto report = evaluate(model, params, data.splits.test, evaluation_options(config));
  write_metrics_csv(report, metrics_out);
  write_per_user_csv(report, per_user_path(metrics_out), data.log.user_ids);
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    out << "P@" << kCutoffs[i] << '=' << fixed(report.precision[i]) << " NDCG@" << kCutoffs[i] << '='
        << fixed(report.ndcg[i]) << " MAP@" << kCutoffs[i] << '=' << fixed(report.map[i]) << '\n';
  }
  out << "users " << report.n_users() << '\n';
  return report;
}

Matrix export_assignments(const RunConfig& config, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& out_path) {
  const auto c = load_checkpoint(checkpoint);
  if (config.variant == Variant::no_tm || !c.has("param/" + std::string(kPoolName))) {
    throw std::runtime_error("checkpoint has no customization module (variant no_tm)");
  }
  auto data = prepare_data(config);
  TaskAdaptiveNP model(model_config(config, data));
  Params params = model.init_params(config.seed);
  load_parameters(params, c);
  const auto tasks = select_split(data.splits, config.export_split);
  Matrix assignments(static_cast<Eigen::Index>(tasks.size()), config.k);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    assignments.row(static_cast<Eigen::Index>(i)) = task_assignment(model, params, tasks[i].user, tasks[i].support);
  }
  std::ostringstream csv;
  csv << std::setprecision(17);
  for (int j = 0; j < config.k; ++j) csv << (j ? "," : "") << j;
  csv << '\n';
  for (Eigen::Index i = 0; i < assignments.rows(); ++i) {
    for (Eigen::Index j = 0; j < assignments.cols(); ++j) csv << (j ? "," : "") << assignments(i, j);
    csv << '\n';
  }
  write_file_atomic(out_path, csv.str());
  return assignments;
}

}  // namespace tanp
