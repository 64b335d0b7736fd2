#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdp/aeho.hpp"
#include "hdp/mcfa.hpp"
#include "hdp/network.hpp"

namespace hdp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat view of a TOML-style file: "[section]" headers and "key = value"
// lines, stored under dotted keys ("mcfa.population"). Values keep their
// source text; strings are unquoted.
class ConfigTree {
 public:
  static ConfigTree parse(const std::string& text);
  static ConfigTree load(const std::filesystem::path& path);

  // "section.key=value"
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct NetworkConfig {
  std::vector<int> hidden{16, 8};
  double learning_rate = 0.05;
  int epochs = 100;
  double init_range = 0.5;
  nn::DeltaMode mode = nn::DeltaMode::Derivative;
  double threshold = 0.5;
};

// Budget of the classifier trained inside the feature-selection fitness.
struct WrapperConfig {
  int inner_folds = 3;               // pooled inner cross-validation; < 2 means one holdout
  double validation_fraction = 0.3;  // holdout size when inner_folds < 2
  int aeho_divisor = 5;
  int epoch_divisor = 4;
};

struct ExperimentConfig {
  std::string dataset = "data/cleveland.csv";
  int impute_k = 5;
  bool mcfa_enabled = true;
  mcfa::McfaConfig mcfa{};
  WrapperConfig wrapper{};
  NetworkConfig network{};
  bool aeho_enabled = true;
  // Weight search box matched to the initial weight scale.
  aeho::AehoConfig aeho{.bounds = {-1.0, 1.0}};
  int folds = 10;
  std::uint64_t seed = 7;
  std::string output_dir = "out";

  void validate() const;

  // Canonical key=value listing; identical configs give identical text.
  std::string to_text() const;

  static ExperimentConfig from_tree(const ConfigTree& tree);
  ConfigTree to_tree() const;

  // Sub-seeds derived from `seed` for each stage.
  std::uint64_t stage_seed(const std::string& stage) const;
};

std::uint64_t fnv1a(const std::string& text);

}  // namespace hdp
