#include <doctest.h>

#include "hdp/config.hpp"

using hdp::ConfigError;
using hdp::ConfigTree;
using hdp::ExperimentConfig;

TEST_CASE("sections, comments and quoting") {
  const auto tree = ConfigTree::parse(
      "# experiment\n"
      "seed = 11\n"
      "dataset = \"data/x#1.csv\"  # trailing\n"
      "\n"
      "[network]\n"
      "hidden = [4, 2]\n"
      "learning_rate = 0.1\n"
      "[aeho]\n"
      "greedy = false\n");
  CHECK(tree.get_int("seed", 0) == 11);
  CHECK(tree.get_string("dataset", "") == "data/x#1.csv");
  CHECK(tree.get_int_list("network.hidden", {}) == std::vector<int>{4, 2});
  CHECK(tree.get_double("network.learning_rate", 0) == 0.1);
  CHECK_FALSE(tree.get_bool("aeho.greedy", true));
  CHECK(tree.get_int("missing", 5) == 5);
}

TEST_CASE("malformed values are reported with their key") {
  const auto tree = ConfigTree::parse("a = x1\nb = maybe\nc = 1, 2\n");
  CHECK_THROWS_WITH_AS(tree.get_int("a", 0), doctest::Contains("a"), ConfigError);
  CHECK_THROWS_AS(tree.get_bool("b", true), ConfigError);
  CHECK_THROWS_AS(tree.get_int_list("c", {}), ConfigError);
  CHECK_THROWS_AS(ConfigTree::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(ConfigTree::parse(" = 3\n"), ConfigError);
}

TEST_CASE("overrides replace file values") {
  auto tree = ConfigTree::parse("[mcfa]\npopulation = 20\n");
  tree.apply_override("mcfa.population=8");
  tree.apply_override("network.hidden = [3]");
  CHECK(tree.get_int("mcfa.population", 0) == 8);
  CHECK(tree.get_int_list("network.hidden", {}) == std::vector<int>{3});
  CHECK_THROWS_AS(tree.apply_override("population"), ConfigError);
}

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.network.hidden == std::vector<int>{16, 8});
  CHECK(c.network.learning_rate == 0.05);
  CHECK(c.network.init_range == 0.5);
  CHECK(c.mcfa.lambda == 0.01);
  CHECK(c.mcfa.delta == 4.0);
  CHECK(c.mcfa.threshold == 0.5);
  CHECK(c.aeho.clans == 3);
  CHECK(c.aeho.clan_size == 10);
  CHECK(c.aeho.max_generations == 50);
  CHECK(c.aeho.alpha == 0.5);
  CHECK(c.aeho.beta == 0.1);
  CHECK(c.aeho.bounds.lower == -1.0);
  CHECK(c.aeho.bounds.upper == 1.0);
  CHECK(c.wrapper.inner_folds == 3);
  CHECK(c.wrapper.aeho_divisor == 5);
  CHECK(c.wrapper.epoch_divisor == 4);
  CHECK(c.folds == 10);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("tree round trip preserves the configuration") {
  auto tree = ConfigTree::parse("seed = 3\n[network]\nhidden = [5]\nmode = literal\n[aeho]\nbounds = [-2, 2.5]\n");
  const auto c = ExperimentConfig::from_tree(tree);
  CHECK(c.seed == 3);
  CHECK(c.network.mode == hdp::nn::DeltaMode::Literal);
  CHECK(c.aeho.bounds.upper == 2.5);
  const auto again = ExperimentConfig::from_tree(c.to_tree());
  CHECK(again.to_text() == c.to_text());
  CHECK(c.to_text() != ExperimentConfig{}.to_text());
}

TEST_CASE("unknown keys and invalid values are rejected") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_tree(ConfigTree::parse("[mcfa]\npopulaton = 3\n")),
                       doctest::Contains("mcfa.populaton"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(ConfigTree::parse("folds = 1\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(ConfigTree::parse("[aeho]\nalpha = 2\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(ConfigTree::parse("[network]\nmode = fast\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(ConfigTree::parse("seed = -1\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_tree(ConfigTree::parse("[wrapper]\ninner_folds = 1\n")), ConfigError);
}

TEST_CASE("stage seeds differ by stage and by seed") {
  ExperimentConfig a;
  ExperimentConfig b;
  b.seed = 8;
  CHECK(a.stage_seed("mcfa") != a.stage_seed("aeho"));
  CHECK(a.stage_seed("mcfa") != b.stage_seed("mcfa"));
  CHECK(a.stage_seed("mcfa") == ExperimentConfig{}.stage_seed("mcfa"));
  // Published FNV-1a 64-bit test vectors.
  CHECK(hdp::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(hdp::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("the shipped example config equals the built-in defaults") {
  const auto file = ExperimentConfig::from_tree(ConfigTree::load(std::string(HDP_DATA_DIR) + "/../configs/default.toml"));
  CHECK(file.to_text() == ExperimentConfig{}.to_text());
}
