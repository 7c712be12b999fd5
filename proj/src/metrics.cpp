#include "tanp/metrics.hpp"

#include "tanp/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tanp {

std::vector<ScoredItem> rank_items(const std::vector<int>& items, const std::vector<double>& scores) {
  if (items.size() != scores.size()) throw std::invalid_argument("rank_items: items and scores differ in length");
  std::vector<ScoredItem> ranked;
  ranked.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) ranked.push_back({items[i], scores[i]});
  std::sort(ranked.begin(), ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
  return ranked;
}

std::vector<ScoredItem> predict_query(const TaskAdaptiveNP& model, const Params& params, const Task& task,
                                      const EvalOptions& options) {
  std::vector<int> items;
  items.reserve(task.query.size());
  for (const auto& x : task.query) items.push_back(x.item);
  return rank_items(items, predict_scores(model, params, task.user, task.support, items, options));
}

std::vector<int> relevance_labels(const std::vector<Interaction>& query, const RelevanceRule& rule) {
  std::vector<int> rel;
  rel.reserve(query.size());
  for (const auto& x : query) {
    if (rule.mode == FeedbackMode::implicit) {
      rel.push_back(x.rating > 0.5 ? 1 : 0);
    } else {
      rel.push_back(x.rating >= rule.threshold ? 1 : 0);
    }
  }
  return rel;
}

double precision_at_n(std::span<const int> ranked_relevance, int n) {
  if (n < 1) throw std::invalid_argument("precision_at_n: N must be >= 1");
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(n), ranked_relevance.size());
  int hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += ranked_relevance[i] > 0 ? 1 : 0;
  return static_cast<double>(hits) / n;
}

namespace {

double dcg(std::span<const double> gains, std::size_t top) {
  double total = 0.0;
  for (std::size_t i = 0; i < top; ++i) total += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  return total;
}

}  // namespace

double ndcg_at_n(std::span<const double> ranked_gains, int n) {
  if (n < 1) throw std::invalid_argument("ndcg_at_n: N must be >= 1");
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(n), ranked_gains.size());
  std::vector<double> ideal(ranked_gains.begin(), ranked_gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, top);
  if (idcg <= 0.0) return 0.0;
  return dcg(ranked_gains, top) / idcg;
}

double ndcg_at_n(std::span<const int> ranked_relevance, int n) {
  std::vector<double> gains(ranked_relevance.begin(), ranked_relevance.end());
  return ndcg_at_n(std::span<const double>(gains), n);
}

double map_at_n(std::span<const int> ranked_relevance, int n) {
  if (n < 1) throw std::invalid_argument("map_at_n: N must be >= 1");
  const auto total_relevant = std::count_if(ranked_relevance.begin(), ranked_relevance.end(), [](int r) { return r > 0; });
  if (total_relevant == 0) return 0.0;
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(n), ranked_relevance.size());
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < top; ++i) {
    if (ranked_relevance[i] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(std::min<std::int64_t>(total_relevant, n));
}

double MetricReport::precision_at(int n) const {
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    if (kCutoffs[c] == n) return precision[c];
  }
  throw std::invalid_argument("no precision reported at N=" + std::to_string(n));
}

UserMetrics score_ranking(int user, const std::vector<Interaction>& ranked_query, const EvaluationOptions& options) {
  const auto rel = relevance_labels(ranked_query, options.relevance);
  std::vector<double> gains(rel.begin(), rel.end());
  if (options.graded_gains) {
    for (std::size_t i = 0; i < ranked_query.size(); ++i) gains[i] = ranked_query[i].rating;
  }
  UserMetrics m;
  m.user = user;
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    m.precision[c] = precision_at_n(rel, kCutoffs[c]);
    m.ndcg[c] = ndcg_at_n(std::span<const double>(gains), kCutoffs[c]);
    m.map[c] = map_at_n(rel, kCutoffs[c]);
  }
  return m;
}

MetricReport summarize(std::vector<UserMetrics> users) {
  if (users.empty()) throw std::invalid_argument("evaluate: empty test split");
  MetricReport report;
  report.users = std::move(users);
  for (const auto& u : report.users) {
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
      report.precision[c] += u.precision[c];
      report.ndcg[c] += u.ndcg[c];
      report.map[c] += u.map[c];
    }
  }
  const double n = static_cast<double>(report.users.size());
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    report.precision[c] /= n;
    report.ndcg[c] /= n;
    report.map[c] /= n;
  }
  return report;
}

MetricReport evaluate(const TaskAdaptiveNP& model, const Params& params, const std::vector<Task>& tasks,
                      const EvaluationOptions& options) {
  if (tasks.empty()) throw std::invalid_argument("evaluate: empty test split");
  std::vector<UserMetrics> users;
  users.reserve(tasks.size());
  for (const auto& task : tasks) {
    const auto ranked = predict_query(model, params, task, options.prediction);
    // Labels are attached only after ranking.
    std::vector<Interaction> ranked_query;
    ranked_query.reserve(ranked.size());
    for (const auto& s : ranked) {
      auto it = std::find_if(task.query.begin(), task.query.end(), [&](const Interaction& x) { return x.item == s.item; });
      ranked_query.push_back(*it);
    }
    users.push_back(score_ranking(task.user, ranked_query, options));
  }
  return summarize(std::move(users));
}

void write_metrics_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "metric,N,value,n_users\n";
  const auto rows = [&](const char* name, const std::array<double, kCutoffs.size()>& values) {
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
      out << name << ',' << kCutoffs[c] << ',' << values[c] << ',' << report.n_users() << '\n';
    }
  };
  rows("precision", report.precision);
  rows("ndcg", report.ndcg);
  rows("map", report.map);
  write_file_atomic(path, out.str());
}

void write_per_user_csv(const MetricReport& report, const std::filesystem::path& path,
                        const std::vector<std::int64_t>& raw_user_ids) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "user_id";
  for (const char* name : {"precision", "ndcg", "map"}) {
    for (int n : kCutoffs) out << ',' << name << '@' << n;
  }
  out << '\n';
  for (const auto& u : report.users) {
    const auto idx = static_cast<std::size_t>(u.user);
    out << (idx < raw_user_ids.size() ? raw_user_ids[idx] : u.user);
    for (const auto* values : {&u.precision, &u.ndcg, &u.map}) {
      for (double v : *values) out << ',' << v;
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace tanp
