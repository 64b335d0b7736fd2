#include "hdp/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace hdp {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

std::string number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string list(const std::vector<T>& items) {
  std::string s = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) s += number(items[i]);
    else s += std::to_string(items[i]);
  }
  return s + "]";
}

std::vector<std::string> split_list(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ConfigError(key + ": expected a list like [1, 2]");
  std::vector<std::string> items;
  std::stringstream ss(v.substr(1, v.size() - 2));
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "dataset", "impute_k", "folds", "seed", "output_dir",
      "mcfa.enabled", "mcfa.population", "mcfa.generations", "mcfa.delta", "mcfa.threshold", "mcfa.lambda",
      "mcfa.bounds",
      "wrapper.validation_fraction", "wrapper.inner_folds", "wrapper.aeho_divisor", "wrapper.epoch_divisor",
      "network.hidden", "network.learning_rate", "network.epochs", "network.init_range", "network.mode",
      "network.threshold",
      "aeho.enabled", "aeho.alpha", "aeho.beta", "aeho.clans", "aeho.clan_size", "aeho.generations", "aeho.bounds",
      "aeho.worst_count", "aeho.mutation_rate", "aeho.mutation_retries", "aeho.crossover", "aeho.greedy",
  };
  return keys;
}

}  // namespace

ConfigTree ConfigTree::parse(const std::string& text) {
  ConfigTree tree;
  std::istringstream in(text);
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(strip_comment(line));
    if (content.empty()) continue;
    if (content.front() == '[' && content.back() == ']' && content.find('=') == std::string::npos) {
      section = trim(content.substr(1, content.size() - 2));
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(content.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    tree.values_[section.empty() ? key : section + "." + key] = unquote(trim(content.substr(eq + 1)));
  }
  return tree;
}

ConfigTree ConfigTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigTree::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  values_[trim(assignment.substr(0, eq))] = unquote(trim(assignment.substr(eq + 1)));
}

std::optional<std::string> ConfigTree::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigTree::get_string(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

double ConfigTree::get_double(const std::string& key, double fallback) const {
  auto v = raw(key);
  return v ? to_double(key, *v) : fallback;
}

long long ConfigTree::get_int(const std::string& key, long long fallback) const {
  auto v = raw(key);
  return v ? to_int(key, *v) : fallback;
}

bool ConfigTree::get_bool(const std::string& key, bool fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + *v + "'");
}

std::vector<int> ConfigTree::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(key, *v)) out.push_back(static_cast<int>(to_int(key, item)));
  return out;
}

std::vector<double> ConfigTree::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(key, *v)) out.push_back(to_double(key, item));
  return out;
}

void ExperimentConfig::validate() const {
  if (impute_k < 1) throw ConfigError("impute_k must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (!(wrapper.validation_fraction > 0.0 && wrapper.validation_fraction < 1.0)) {
    throw ConfigError("wrapper.validation_fraction must be in (0,1)");
  }
  if (wrapper.inner_folds < 0 || wrapper.inner_folds == 1) throw ConfigError("wrapper.inner_folds must be 0 or >= 2");
  if (wrapper.aeho_divisor < 1 || wrapper.epoch_divisor < 1) throw ConfigError("wrapper divisors must be >= 1");
  if (network.epochs < 0) throw ConfigError("network.epochs must be >= 0");
  if (!(network.learning_rate >= 0.0)) throw ConfigError("network.learning_rate must be >= 0");
  if (network.hidden.empty()) throw ConfigError("network.hidden needs at least one layer");
  for (int h : network.hidden) {
    if (h < 1) throw ConfigError("network.hidden sizes must be >= 1");
  }
  try {
    mcfa.validate();
    aeho.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

ConfigTree ExperimentConfig::to_tree() const {
  ConfigTree t;
  t.set("dataset", dataset);
  t.set("impute_k", std::to_string(impute_k));
  t.set("folds", std::to_string(folds));
  t.set("seed", std::to_string(seed));
  t.set("output_dir", output_dir);
  t.set("mcfa.enabled", mcfa_enabled ? "true" : "false");
  t.set("mcfa.population", std::to_string(mcfa.population));
  t.set("mcfa.generations", std::to_string(mcfa.generations));
  t.set("mcfa.delta", number(mcfa.delta));
  t.set("mcfa.threshold", number(mcfa.threshold));
  t.set("mcfa.lambda", number(mcfa.lambda));
  t.set("mcfa.bounds", list(std::vector<double>{mcfa.bounds.lower, mcfa.bounds.upper}));
  t.set("wrapper.validation_fraction", number(wrapper.validation_fraction));
  t.set("wrapper.inner_folds", std::to_string(wrapper.inner_folds));
  t.set("wrapper.aeho_divisor", std::to_string(wrapper.aeho_divisor));
  t.set("wrapper.epoch_divisor", std::to_string(wrapper.epoch_divisor));
  t.set("network.hidden", list(network.hidden));
  t.set("network.learning_rate", number(network.learning_rate));
  t.set("network.epochs", std::to_string(network.epochs));
  t.set("network.init_range", number(network.init_range));
  t.set("network.mode", network.mode == nn::DeltaMode::Derivative ? "derivative" : "literal");
  t.set("network.threshold", number(network.threshold));
  t.set("aeho.enabled", aeho_enabled ? "true" : "false");
  t.set("aeho.alpha", number(aeho.alpha));
  t.set("aeho.beta", number(aeho.beta));
  t.set("aeho.clans", std::to_string(aeho.clans));
  t.set("aeho.clan_size", std::to_string(aeho.clan_size));
  t.set("aeho.generations", std::to_string(aeho.max_generations));
  t.set("aeho.bounds", list(std::vector<double>{aeho.bounds.lower, aeho.bounds.upper}));
  t.set("aeho.worst_count", std::to_string(aeho.worst_count));
  t.set("aeho.mutation_rate", number(aeho.mutation_rate));
  t.set("aeho.mutation_retries", std::to_string(aeho.mutation_retries));
  t.set("aeho.crossover", aeho.crossover ? "true" : "false");
  t.set("aeho.greedy", aeho.greedy ? "true" : "false");
  return t;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  const auto tree = to_tree();
  for (const auto& [k, v] : tree.values()) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::from_tree(const ConfigTree& tree) {
  for (const auto& [key, _] : tree.values()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.dataset = tree.get_string("dataset", c.dataset);
  c.impute_k = static_cast<int>(tree.get_int("impute_k", c.impute_k));
  c.folds = static_cast<int>(tree.get_int("folds", c.folds));
  const auto seed = tree.get_int("seed", static_cast<long long>(c.seed));
  if (seed < 0) throw ConfigError("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output_dir = tree.get_string("output_dir", c.output_dir);

  c.mcfa_enabled = tree.get_bool("mcfa.enabled", c.mcfa_enabled);
  c.mcfa.population = static_cast<int>(tree.get_int("mcfa.population", c.mcfa.population));
  c.mcfa.generations = static_cast<int>(tree.get_int("mcfa.generations", c.mcfa.generations));
  c.mcfa.delta = tree.get_double("mcfa.delta", c.mcfa.delta);
  c.mcfa.threshold = tree.get_double("mcfa.threshold", c.mcfa.threshold);
  c.mcfa.lambda = tree.get_double("mcfa.lambda", c.mcfa.lambda);
  const auto mb = tree.get_double_list("mcfa.bounds", {c.mcfa.bounds.lower, c.mcfa.bounds.upper});
  if (mb.size() != 2) throw ConfigError("mcfa.bounds must have two entries");
  c.mcfa.bounds = {mb[0], mb[1]};

  c.wrapper.validation_fraction = tree.get_double("wrapper.validation_fraction", c.wrapper.validation_fraction);
  c.wrapper.inner_folds = static_cast<int>(tree.get_int("wrapper.inner_folds", c.wrapper.inner_folds));
  c.wrapper.aeho_divisor = static_cast<int>(tree.get_int("wrapper.aeho_divisor", c.wrapper.aeho_divisor));
  c.wrapper.epoch_divisor = static_cast<int>(tree.get_int("wrapper.epoch_divisor", c.wrapper.epoch_divisor));

  c.network.hidden = tree.get_int_list("network.hidden", c.network.hidden);
  c.network.learning_rate = tree.get_double("network.learning_rate", c.network.learning_rate);
  c.network.epochs = static_cast<int>(tree.get_int("network.epochs", c.network.epochs));
  c.network.init_range = tree.get_double("network.init_range", c.network.init_range);
  const auto mode = tree.get_string("network.mode", "derivative");
  if (mode == "derivative") c.network.mode = nn::DeltaMode::Derivative;
  else if (mode == "literal") c.network.mode = nn::DeltaMode::Literal;
  else throw ConfigError("network.mode must be 'derivative' or 'literal'");
  c.network.threshold = tree.get_double("network.threshold", c.network.threshold);

  c.aeho_enabled = tree.get_bool("aeho.enabled", c.aeho_enabled);
  c.aeho.alpha = tree.get_double("aeho.alpha", c.aeho.alpha);
  c.aeho.beta = tree.get_double("aeho.beta", c.aeho.beta);
  c.aeho.clans = static_cast<int>(tree.get_int("aeho.clans", c.aeho.clans));
  c.aeho.clan_size = static_cast<int>(tree.get_int("aeho.clan_size", c.aeho.clan_size));
  c.aeho.max_generations = static_cast<int>(tree.get_int("aeho.generations", c.aeho.max_generations));
  const auto ab = tree.get_double_list("aeho.bounds", {c.aeho.bounds.lower, c.aeho.bounds.upper});
  if (ab.size() != 2) throw ConfigError("aeho.bounds must have two entries");
  c.aeho.bounds = {ab[0], ab[1]};
  c.aeho.worst_count = static_cast<int>(tree.get_int("aeho.worst_count", c.aeho.worst_count));
  c.aeho.mutation_rate = tree.get_double("aeho.mutation_rate", c.aeho.mutation_rate);
  c.aeho.mutation_retries = static_cast<int>(tree.get_int("aeho.mutation_retries", c.aeho.mutation_retries));
  c.aeho.crossover = tree.get_bool("aeho.crossover", c.aeho.crossover);
  c.aeho.greedy = tree.get_bool("aeho.greedy", c.aeho.greedy);

  c.mcfa.seed = c.stage_seed("mcfa");
  c.aeho.seed = c.stage_seed("aeho");
  c.validate();
  return c;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::stage_seed(const std::string& stage) const {
  return fnv1a(stage + ":" + std::to_string(seed));
}

}  // namespace hdp
