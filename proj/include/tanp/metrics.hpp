#pragma once

#include "tanp/training.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace tanp {

/// Cut-offs reported for every metric.
inline constexpr std::array<int, 3> kCutoffs = {5, 7, 10};

struct ScoredItem {
  int item = 0;
  double score = 0.0;
};

/// Scores for the query items, sorted by descending score; ties go to the lower item id.
std::vector<ScoredItem> predict_query(const TaskAdaptiveNP& model, const Params& params, const Task& task,
                                      const EvalOptions& options = {});

/// Rank `scores[i]` for `items[i]` with the same tie rule as predict_query.
std::vector<ScoredItem> rank_items(const std::vector<int>& items, const std::vector<double>& scores);

struct RelevanceRule {
  FeedbackMode mode = FeedbackMode::explicit_rating;
  double threshold = 4.0;  // explicit ratings at or above count as relevant
};

/// Binary relevance per query interaction, in query order.
std::vector<int> relevance_labels(const std::vector<Interaction>& query, const RelevanceRule& rule);

/// (# relevant among the first min(n, size) positions) / n.
double precision_at_n(std::span<const int> ranked_relevance, int n);

/// DCG@n with discount 1/log2(rank+1), normalized by the ideal DCG@n.
/// Gains are the relevance values themselves; binary lists give binary gains.
double ndcg_at_n(std::span<const double> ranked_gains, int n);
double ndcg_at_n(std::span<const int> ranked_relevance, int n);

/// Sum of precision@r over relevant positions r <= n, divided by min(total relevant, n).
double map_at_n(std::span<const int> ranked_relevance, int n);

struct UserMetrics {
  int user = 0;
  std::array<double, kCutoffs.size()> precision{};
  std::array<double, kCutoffs.size()> ndcg{};
  std::array<double, kCutoffs.size()> map{};
};

struct MetricReport {
  std::vector<UserMetrics> users;
  std::array<double, kCutoffs.size()> precision{};
  std::array<double, kCutoffs.size()> ndcg{};
  std::array<double, kCutoffs.size()> map{};

  std::size_t n_users() const { return users.size(); }
  /// Mean P@n for one of the reported cut-offs.
  double precision_at(int n) const;
};

struct EvaluationOptions {
  RelevanceRule relevance;
  bool graded_gains = false;  // NDCG gain = raw rating (explicit) instead of binary relevance
  EvalOptions prediction;
};

/// Metrics for one ranked list of query interactions.
UserMetrics score_ranking(int user, const std::vector<Interaction>& ranked_query, const EvaluationOptions& options);

/// Unweighted mean over users of per-user metrics computed on query predictions.
MetricReport evaluate(const TaskAdaptiveNP& model, const Params& params, const std::vector<Task>& tasks,
                      const EvaluationOptions& options);

/// Assemble averages from per-user rows.
MetricReport summarize(std::vector<UserMetrics> users);

/// "metric,N,value,n_users" rows.
void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path);
/// One row per user with every metric column.
void write_per_user_csv(const MetricReport& report, const std::filesystem::path& path,
                        const std::vector<std::int64_t>& raw_user_ids);

}  // namespace tanp
