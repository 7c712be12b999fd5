#include "tanp/config.hpp"

#include "tanp/io.hpp"

#include <charconv>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace tanp {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': invalid value '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string resolve(const std::string& value, const std::filesystem::path& base_dir) {
  if (value.empty() || base_dir.empty()) return value;
  std::filesystem::path p(value);
  return p.is_absolute() ? value : (base_dir / p).lexically_normal().string();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"mode", [&](auto&, auto& v) { c.mode = parse_mode(v); }},
      {"variant", [&](auto&, auto& v) { c.variant = parse_variant(v); }},
      {"n_support", [&](auto& k, auto& v) { c.n_support = parse_value<int>(k, v); }},
      {"embedding_dim", [&](auto& k, auto& v) { c.embedding_dim = parse_value<int>(k, v); }},
      {"hidden_dim", [&](auto& k, auto& v) { c.hidden_dim = parse_value<int>(k, v); }},
      {"latent_dim", [&](auto& k, auto& v) { c.latent_dim = parse_value<int>(k, v); }},
      {"layers", [&](auto& k, auto& v) { c.layers = parse_value<int>(k, v); }},
      {"k", [&](auto& k, auto& v) { c.k = parse_value<int>(k, v); }},
      {"alpha", [&](auto& k, auto& v) { c.alpha = parse_value<double>(k, v); }},
      {"lambda", [&](auto& k, auto& v) { c.lambda = parse_value<double>(k, v); }},
      {"lr", [&](auto& k, auto& v) { c.lr = parse_value<double>(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { c.batch_size = parse_value<int>(k, v); }},
      {"epochs", [&](auto& k, auto& v) { c.epochs = parse_value<int>(k, v); }},
      {"patience", [&](auto& k, auto& v) { c.patience = parse_value<int>(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_value<std::uint64_t>(k, v); }},
      {"data_path", [&](auto&, auto& v) { c.data_path = resolve(v, base_dir); }},
      {"delimiter",
       [&](auto& k, auto& v) {
         if (v == "tab" || v == "\\t") {
           c.delimiter = '\t';
         } else if (v.size() == 1) {
           c.delimiter = v[0];
         } else {
           throw ConfigError("config key '" + k + "': expected a single character or 'tab'");
         }
       }},
      {"user_features_path", [&](auto&, auto& v) { c.user_features_path = resolve(v, base_dir); }},
      {"item_features_path", [&](auto&, auto& v) { c.item_features_path = resolve(v, base_dir); }},
      {"min_len", [&](auto& k, auto& v) { c.min_len = parse_value<int>(k, v); }},
      {"max_len", [&](auto& k, auto& v) { c.max_len = parse_value<int>(k, v); }},
      {"neg_ratio", [&](auto& k, auto& v) { c.neg_ratio = parse_value<int>(k, v); }},
      {"train_ratio", [&](auto& k, auto& v) { c.train_ratio = parse_value<double>(k, v); }},
      {"val_ratio", [&](auto& k, auto& v) { c.val_ratio = parse_value<double>(k, v); }},
      {"test_ratio", [&](auto& k, auto& v) { c.test_ratio = parse_value<double>(k, v); }},
      {"relevance_threshold", [&](auto& k, auto& v) { c.relevance_threshold = parse_value<double>(k, v); }},
      {"graded_gains", [&](auto& k, auto& v) { c.graded_gains = parse_bool(k, v); }},
      {"eval_sample_latent", [&](auto& k, auto& v) { c.eval_sample_latent = parse_bool(k, v); }},
      {"cluster_refresh",
       [&](auto& k, auto& v) {
         if (v == "batch") {
           c.cluster_refresh = ClusterRefresh::batch;
         } else if (v == "epoch") {
           c.cluster_refresh = ClusterRefresh::epoch;
         } else {
           throw ConfigError("config key '" + k + "': expected batch or epoch, got '" + v + "'");
         }
       }},
      {"resample_support", [&](auto& k, auto& v) { c.resample_support = parse_bool(k, v); }},
      {"checkpoint", [&](auto&, auto& v) { c.checkpoint = resolve(v, base_dir); }},
      {"resume", [&](auto&, auto& v) { c.resume = resolve(v, base_dir); }},
      {"export_split",
       [&](auto& k, auto& v) {
         if (v != "train" && v != "validation" && v != "test" && v != "all") {
           throw ConfigError("config key '" + k + "': expected train, validation, test or all");
         }
         c.export_split = v;
       }},
  };

  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    try {
      it->second(key, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  if (c.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (c.k < 1 || c.hidden_dim < 1 || c.latent_dim < 1 || c.embedding_dim < 1 || c.layers < 1) {
    throw ConfigError("dimensions, layers and k must be positive");
  }
  if (c.batch_size < 1 || c.epochs < 0 || c.patience < 1) throw ConfigError("batch_size, epochs and patience out of range");
  if (!(c.alpha > 0) || !(c.lr > 0)) throw ConfigError("alpha and lr must be positive");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file: " + path.string());
  }
  return parse_config(text, path.parent_path());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "mode = " << to_string(mode) << '\n'
      << "variant = " << to_string(variant) << '\n'
      << "n_support = " << n_support << '\n'
      << "embedding_dim = " << embedding_dim << '\n'
      << "hidden_dim = " << hidden_dim << '\n'
      << "latent_dim = " << latent_dim << '\n'
      << "layers = " << layers << '\n'
      << "k = " << k << '\n'
      << "alpha = " << format_double(alpha) << '\n'
      << "lambda = " << format_double(lambda) << '\n'
      << "lr = " << format_double(lr) << '\n'
      << "batch_size = " << batch_size << '\n'
      << "epochs = " << epochs << '\n'
      << "patience = " << patience << '\n'
      << "seed = " << seed << '\n'
      << "data_path = " << data_path << '\n'
      << "delimiter = " << (delimiter == '\t' ? std::string("tab") : std::string(1, delimiter)) << '\n'
      << "user_features_path = " << user_features_path << '\n'
      << "item_features_path = " << item_features_path << '\n'
      << "min_len = " << min_len << '\n'
      << "max_len = " << max_len << '\n'
      << "neg_ratio = " << neg_ratio << '\n'
      << "train_ratio = " << format_double(train_ratio) << '\n'
      << "val_ratio = " << format_double(val_ratio) << '\n'
      << "test_ratio = " << format_double(test_ratio) << '\n'
      << "relevance_threshold = " << format_double(relevance_threshold) << '\n'
      << "graded_gains = " << (graded_gains ? "true" : "false") << '\n'
      << "eval_sample_latent = " << (eval_sample_latent ? "true" : "false") << '\n'
      << "cluster_refresh = " << (cluster_refresh == ClusterRefresh::epoch ? "epoch" : "batch") << '\n'
      << "resample_support = " << (resample_support ? "true" : "false") << '\n'
      << "checkpoint = " << checkpoint << '\n'
      << "resume = " << resume << '\n'
      << "export_split = " << export_split << '\n';
  return out.str();
}

std::string RunConfig::settings_text() const {
  std::istringstream in(to_text());
  std::string out, line;
  while (std::getline(in, line)) {
    if (line.rfind("checkpoint = ", 0) == 0 || line.rfind("resume = ", 0) == 0) continue;
    out += line + '\n';
  }
  return out;
}

}  // namespace tanp
