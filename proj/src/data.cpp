#include "tanp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace tanp {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

int dense_id(std::map<std::int64_t, int>& index, std::vector<std::int64_t>& ids, std::int64_t raw) {
  auto [it, inserted] = index.emplace(raw, static_cast<int>(ids.size()));
  if (inserted) ids.push_back(raw);
  return it->second;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

InteractionLog parse_interactions(const std::string& text, char delimiter) {
  InteractionLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_fields(line, delimiter);
    const auto where = "line " + std::to_string(line_no);
    if (fields.size() < 3 || fields.size() > 4) {
      throw DataError(where + ": expected user,item,rating[,timestamp], got " + std::to_string(fields.size()) +
                      " field(s)");
    }
    std::int64_t user = 0;
    std::int64_t item = 0;
    double rating = 0.0;
    std::int64_t timestamp = 0;
    if (!parse_number(fields[0], user)) throw DataError(where + ": bad user id '" + std::string(fields[0]) + "'");
    if (!parse_number(fields[1], item)) throw DataError(where + ": bad item id '" + std::string(fields[1]) + "'");
    if (!parse_number(fields[2], rating) || !std::isfinite(rating)) {
      throw DataError(where + ": bad rating '" + std::string(fields[2]) + "'");
    }
    if (fields.size() == 4 && !parse_number(fields[3], timestamp)) {
      throw DataError(where + ": bad timestamp '" + std::string(fields[3]) + "'");
    }
    Interaction x;
    x.user = dense_id(log.user_index, log.user_ids, user);
    x.item = dense_id(log.item_index, log.item_ids, item);
    x.rating = rating;
    x.timestamp = timestamp;
    log.interactions.push_back(x);
  }
  if (log.interactions.empty()) throw DataError("interaction file contains no records");
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open interaction file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_interactions(buf.str(), delimiter);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<Task> filter_and_build_tasks(const std::vector<Interaction>& interactions, int n_support, int min_len,
                                         int max_len, std::uint64_t seed, int* dropped_degenerate) {
  if (n_support < 1 || n_support >= min_len) {
    throw std::invalid_argument("n_support must satisfy 1 <= n_support < min_len (got n_support=" +
                                std::to_string(n_support) + ", min_len=" + std::to_string(min_len) + ")");
  }
  std::map<int, std::vector<Interaction>> by_user;
  std::set<std::pair<int, int>> seen;
  for (const auto& x : interactions) {
    if (seen.emplace(x.user, x.item).second) by_user[x.user].push_back(x);
  }
  std::vector<Task> tasks;
  int degenerate = 0;
  for (auto& [user, items] : by_user) {
    const int n = static_cast<int>(items.size());
    if (n < min_len || n > max_len) continue;
    if (n <= n_support) {
      ++degenerate;
      continue;
    }
    std::sort(items.begin(), items.end(), [](const Interaction& a, const Interaction& b) { return a.item < b.item; });
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(user), 1));
    std::vector<Interaction> shuffled = items;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    Task task;
    task.user = user;
    task.support.assign(shuffled.begin(), shuffled.begin() + n_support);
    task.query.assign(shuffled.begin() + n_support, shuffled.end());
    auto by_item = [](const Interaction& a, const Interaction& b) { return a.item < b.item; };
    std::sort(task.support.begin(), task.support.end(), by_item);
    std::sort(task.query.begin(), task.query.end(), by_item);
    tasks.push_back(std::move(task));
  }
  if (dropped_degenerate != nullptr) *dropped_degenerate = degenerate;
  return tasks;
}

TaskSplits split_users(std::vector<Task> tasks, double train_ratio, double validation_ratio, double test_ratio,
                       std::uint64_t seed) {
  if (train_ratio < 0 || validation_ratio < 0 || test_ratio < 0 ||
      std::abs(train_ratio + validation_ratio + test_ratio - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  }
  if (tasks.size() < 3) {
    throw DataError("need at least 3 users to split, got " + std::to_string(tasks.size()));
  }
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) { return a.user < b.user; });
  std::mt19937_64 rng(derive_seed(seed, 0x5b117ULL));
  std::shuffle(tasks.begin(), tasks.end(), rng);

  const double n = static_cast<double>(tasks.size());
  // The epsilon absorbs products such as 0.7 * 10 landing just below 7.
  const auto n_validation = static_cast<std::size_t>(std::floor(validation_ratio * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(test_ratio * n + 1e-9));
  const std::size_t n_train = tasks.size() - n_validation - n_test;

  TaskSplits splits;
  auto by_user = [](const Task& a, const Task& b) { return a.user < b.user; };
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto& t = tasks[i];
    if (i < n_train) {
      t.role = SplitRole::training;
      splits.training.push_back(std::move(t));
    } else if (i < n_train + n_validation) {
      t.role = SplitRole::validation;
      splits.validation.push_back(std::move(t));
    } else {
      t.role = SplitRole::test;
      splits.test.push_back(std::move(t));
    }
  }
  std::sort(splits.training.begin(), splits.training.end(), by_user);
  std::sort(splits.validation.begin(), splits.validation.end(), by_user);
  std::sort(splits.test.begin(), splits.test.end(), by_user);
  return splits;
}

Task negative_sample(const Task& task, int n_items, int ratio, std::uint64_t seed) {
  if (ratio < 0) throw std::invalid_argument("negative ratio must be >= 0");
  Task out = task;
  if (ratio == 0) return out;
  std::unordered_set<int> observed;
  std::size_t positives = 0;
  for (const auto& x : task.support) observed.insert(x.item);
  for (const auto& x : task.query) {
    observed.insert(x.item);
    if (!x.is_sampled_negative()) ++positives;
  }
  std::vector<int> candidates;
  for (int item = 0; item < n_items; ++item) {
    if (observed.count(item) == 0) candidates.push_back(item);
  }
  const std::size_t wanted = positives * static_cast<std::size_t>(ratio);
  if (candidates.size() < wanted) {
    throw DataError("user " + std::to_string(task.user) + ": need " + std::to_string(wanted) +
                    " negative items but only " + std::to_string(candidates.size()) + " are unobserved (short by " +
                    std::to_string(wanted - candidates.size()) + ")");
  }
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(task.user), 2));
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t i = 0; i < wanted; ++i) {
    out.query.push_back(Interaction{task.user, candidates[i], 0.0, 0});
  }
  std::sort(out.query.begin(), out.query.end(), [](const Interaction& a, const Interaction& b) { return a.item < b.item; });
  return out;
}

Task resample_support(const Task& task, std::uint64_t seed) {
  if (task.role == SplitRole::validation || task.role == SplitRole::test) {
    throw std::logic_error("resample_support called on a held-out task (user " + std::to_string(task.user) + ")");
  }
  std::vector<Interaction> pool = task.support;
  std::vector<Interaction> negatives;
  for (const auto& x : task.query) {
    (x.is_sampled_negative() ? negatives : pool).push_back(x);
  }
  if (pool.size() <= task.support.size()) {
    throw std::logic_error("degenerate task for user " + std::to_string(task.user) +
                           ": no observed interactions left for the query");
  }
  auto by_item = [](const Interaction& a, const Interaction& b) { return a.item < b.item; };
  // Canonical order first, so the draw depends only on the pool and the seed.
  std::sort(pool.begin(), pool.end(), by_item);
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(task.user), 3));
  std::shuffle(pool.begin(), pool.end(), rng);
  Task out;
  out.user = task.user;
  out.role = task.role;
  const auto n_support = static_cast<std::ptrdiff_t>(task.support.size());
  out.support.assign(pool.begin(), pool.begin() + n_support);
  out.query.assign(pool.begin() + n_support, pool.end());
  out.query.insert(out.query.end(), negatives.begin(), negatives.end());
  std::sort(out.support.begin(), out.support.end(), by_item);
  std::sort(out.query.begin(), out.query.end(), by_item);
  return out;
}

ContentFeatures load_content_features(const std::filesystem::path& path, const std::map<std::int64_t, int>& index,
                                      int n_entities, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file: " + path.string());
  ContentFeatures features;
  features.rows.assign(static_cast<std::size_t>(n_entities), {});
  features.present.assign(static_cast<std::size_t>(n_entities), false);
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_fields(line, delimiter);
    const auto where = path.string() + ": line " + std::to_string(line_no);
    if (fields.size() < 2) throw DataError(where + ": expected id followed by feature indices");
    if (n_fields == 0) {
      n_fields = fields.size() - 1;
      features.cardinalities.assign(n_fields, 0);
    } else if (fields.size() - 1 != n_fields) {
      throw DataError(where + ": expected " + std::to_string(n_fields) + " feature(s), got " +
                      std::to_string(fields.size() - 1));
    }
    std::int64_t raw = 0;
    if (!parse_number(fields[0], raw)) throw DataError(where + ": bad id '" + std::string(fields[0]) + "'");
    std::vector<int> row(n_fields);
    for (std::size_t f = 0; f < n_fields; ++f) {
      if (!parse_number(fields[f + 1], row[f]) || row[f] < 0) {
        throw DataError(where + ": bad feature index '" + std::string(fields[f + 1]) + "'");
      }
      features.cardinalities[f] = std::max(features.cardinalities[f], row[f] + 1);
    }
    auto it = index.find(raw);
    if (it == index.end()) continue;
    features.rows[static_cast<std::size_t>(it->second)] = std::move(row);
    features.present[static_cast<std::size_t>(it->second)] = true;
  }
  if (n_fields == 0) throw DataError(path.string() + ": feature file contains no records");
  return features;
}

}  // namespace tanp
