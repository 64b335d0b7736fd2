#include <doctest.h>

#include <cmath>
#include <set>

#include "hdp/mcfa.hpp"

using namespace hdp::mcfa;

namespace {

Population single_cell_population(Eigen::VectorXd cell, Eigen::VectorXd best, Bounds bounds = {}) {
  Population pop;
  pop.bounds = bounds;
  for (int c = 1; c <= 4; ++c) pop.groups[static_cast<std::size_t>(c - 1)].push_back({cell, 0.0});
  pop.set_best({best, 1.0});
  return pop;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("chaos map fixed points and the 0.5 orbit") {
  auto zero = chaos_step(ChaosMap(3.7, 0.0, 0.0));
  CHECK(zero.cr == 0.0);
  CHECK(zero.br == 0.0);

  auto s = chaos_step(ChaosMap(4.0, 0.5, 0.5));
  CHECK(s.cr == 1.0);
  s = chaos_step(s.map);
  CHECK(s.cr == 0.0);

  // Interior fixed point 1 - 1/delta; delta = 2 makes it exactly 0.5.
  auto fixed = chaos_step(ChaosMap(2.0, 0.5, 0.5));
  CHECK(fixed.cr == 0.5);
  CHECK(fixed.map.degenerate());
}

TEST_CASE("chaos map rejects invalid parameters") {
  CHECK_THROWS_AS(ChaosMap(0.0, 0.3, 0.3), McfaError);
  CHECK_THROWS_AS(ChaosMap(4.1, 0.3, 0.3), McfaError);
  CHECK_THROWS_AS(ChaosMap(4.0, 1.2, 0.3), McfaError);
  CHECK_THROWS_AS(ChaosMap(4.0, 0.3, -0.1), McfaError);
}

TEST_CASE("long orbit at delta 4 stays in the unit interval") {
  ChaosMap map(4.0, 0.123, 0.987);
  for (int i = 0; i < 100000; ++i) {
    const auto [cr, br] = map.step();
    REQUIRE(cr >= 0.0);
    REQUIRE(cr <= 1.0);
    REQUIRE(br >= 0.0);
    REQUIRE(br <= 1.0);
  }
}

TEST_CASE("chaos map stays in range for random deltas and states") {
  hdp::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double delta = 4.0 * (1.0 - rng.uniform());  // (0, 4]
    ChaosMap map(delta, rng.uniform(), rng.uniform());
    for (int i = 0; i < 1000; ++i) {
      const auto [cr, br] = map.step();
      REQUIRE((cr >= 0.0 && cr <= 1.0 && br >= 0.0 && br <= 1.0));
    }
  }
}

TEST_CASE("seeded maps avoid the special starting points") {
  hdp::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto m = ChaosMap::seeded(4.0, rng);
    for (double x : {m.cr(), m.br()}) {
      CHECK(x > 0.0);
      CHECK(x < 1.0);
      for (double p : {0.25, 0.5, 0.75}) CHECK(x != p);
    }
  }
}

TEST_CASE("chaotic initialization") {
  const auto pop = init_population_chaotic(4, 1, {}, 5);
  for (const auto& g : pop.groups) CHECK(g.size() == 1);

  const auto big = init_population_chaotic(22, 7, {0.0, 1.0}, 9);
  CHECK(big.size() == 22);
  std::size_t lo = 100, hi = 0;
  for (const auto& g : big.groups) {
    lo = std::min(lo, g.size());
    hi = std::max(hi, g.size());
    for (const auto& c : g) {
      CHECK(c.points.size() == 7);
      CHECK(c.points.minCoeff() >= 0.0);
      CHECK(c.points.maxCoeff() <= 1.0);
    }
  }
  CHECK(hi - lo <= 1);

  const auto shifted = init_population_chaotic(8, 3, {-2.0, 3.0}, 9);
  for (const auto& g : shifted.groups) {
    for (const auto& c : g) {
      CHECK(c.points.minCoeff() >= -2.0);
      CHECK(c.points.maxCoeff() <= 3.0);
    }
  }

  const auto again = init_population_chaotic(22, 7, {0.0, 1.0}, 9);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < big.groups[c].size(); ++i) CHECK(again.groups[c][i].points == big.groups[c][i].points);
  }
  CHECK_THROWS_AS(init_population_chaotic(3, 2, {}, 1), McfaError);
}

TEST_CASE("category 1 candidate: reflection plus visibility") {
  auto pop = single_cell_population(vec({0.4}), vec({0.8}));
  // delta 2 holds Cr = Br = 0.5 exactly.
  ChaosMap map(2.0, 0.5, 0.5);
  hdp::Rng rng(1);
  const auto cand = generate_candidate(pop, 1, 0, map, rng);
  const double reflection = 0.5 * 0.4;
  const double visibility = 0.5 * (0.8 - 0.4);
  CHECK(reflection == doctest::Approx(0.2));
  CHECK(visibility == doctest::Approx(0.2));
  CHECK(cand.points(0) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("category 2 with Cr 1 and Br 0 reproduces the best cell") {
  const auto best = vec({0.1, 0.9, 0.33, 0.5, 0.0, 1.0});
  const auto cell = vec({0.7, 0.2, 0.6, 0.4, 0.3, 0.8});
  hdp::Rng rng(1);
  // One coordinate per call so the map takes a single step: Cr 0.5 -> 1, Br 0 -> 0.
  for (Eigen::Index j = 0; j < best.size(); ++j) {
    auto pop = single_cell_population(cell.segment(j, 1), best.segment(j, 1));
    ChaosMap map(4.0, 0.5, 0.0);
    const auto cand = generate_candidate(pop, 2, 0, map, rng);
    CHECK(cand.points(0) == best(j));
  }
}

TEST_CASE("category 3 uses the best-cell mean") {
  auto pop = single_cell_population(vec({0.4, 0.2}), vec({0.8, 0.6}));
  CHECK(pop.avb == doctest::Approx(0.7));
  ChaosMap map(2.0, 0.5, 0.5);
  hdp::Rng rng(1);
  const auto cand = generate_candidate(pop, 3, 0, map, rng);
  CHECK(cand.points(0) == doctest::Approx(0.5 * 0.4 + 0.5 * (0.8 - 0.7)));
  CHECK(cand.points(1) == doctest::Approx(0.5 * 0.2 + 0.5 * (0.6 - 0.7)));
}

TEST_CASE("category 4 draws uniformly in the box") {
  const Bounds box{-1.0, 1.0};
  auto pop = single_cell_population(vec({0.0, 0.0, 0.0}), vec({0.5, 0.5, 0.5}), box);
  ChaosMap map(4.0, 0.3, 0.6);
  hdp::Rng rng(17);
  hdp::Rng twin(17);
  const auto cand = generate_candidate(pop, 4, 0, map, rng);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(cand.points(j) == twin.uniform() * 2.0 - 1.0);
  // A zero draw lands on the lower bound.
  CHECK(0.0 * (box.upper - box.lower) + box.lower == -1.0);
  // The chaos map is not consumed.
  CHECK(map.cr() == 0.3);
}

TEST_CASE("candidates are clamped to the bounds") {
  auto pop = single_cell_population(vec({0.9, 0.95}), vec({1.0, 1.0}));
  hdp::Rng rng(2);
  ChaosMap map = ChaosMap::seeded(4.0, rng);
  for (int c = 1; c <= 4; ++c) {
    for (int t = 0; t < 200; ++t) {
      const auto cand = generate_candidate(pop, c, 0, map, rng);
      REQUIRE(cand.points.minCoeff() >= 0.0);
      REQUIRE(cand.points.maxCoeff() <= 1.0);
    }
  }
  CHECK_THROWS_AS(generate_candidate(pop, 1, 1, map, rng), McfaError);
  CHECK_THROWS_AS(generate_candidate(pop, 5, 0, map, rng), McfaError);
}

TEST_CASE("decode mask") {
  CHECK(decode_mask({vec({0.9, 0.1, 0.7}), 0.0}, 0.5).to_string() == "101");
  CHECK(decode_mask({vec({0.2, 0.2, 0.2}), 0.0}, 0.5).to_string() == "100");
  CHECK(decode_mask({vec({0.1, 0.3, 0.2}), 0.0}, 0.5).to_string() == "010");
  CHECK(decode_mask({vec({0.5}), 0.0}, 0.5).count() == 1);

  hdp::Rng rng(123);
  double total = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Eigen::VectorXd p(13);
    for (Eigen::Index j = 0; j < 13; ++j) p(j) = rng.uniform();
    total += static_cast<double>(decode_mask({p, 0.0}, 0.5).count());
  }
  CHECK(total / draws == doctest::Approx(6.5).epsilon(0.2 / 6.5));
}

TEST_CASE("feature mask text form") {
  const auto m = FeatureMask::from_string("0110");
  CHECK(m.count() == 2);
  CHECK(m.indices() == std::vector<std::size_t>{1, 2});
  CHECK(m.to_string() == "0110");
  CHECK(FeatureMask::all(3).to_string() == "111");
  CHECK_THROWS_AS(FeatureMask::from_string("0000"), McfaError);
  CHECK_THROWS_AS(FeatureMask::from_string("01x"), McfaError);
}

TEST_CASE("constant fitness gives a flat history") {
  McfaConfig cfg;
  cfg.generations = 10;
  const auto r = run_mcfa([](const FeatureMask&) { return 0.25; }, 6, cfg);
  REQUIRE(r.history.size() == 10);
  for (double h : r.history) CHECK(h == 0.25);
  CHECK(r.evaluations == static_cast<std::size_t>(cfg.population * (cfg.generations + 1)));
}

TEST_CASE("planted features are recovered") {
  const std::set<std::size_t> planted{1, 4, 8};
  const MaskFitness fitness = [&](const FeatureMask& m) {
    double hits = 0.0;
    for (auto j : m.indices()) hits += planted.count(j) ? 1.0 : 0.0;
    return hits - 0.01 * static_cast<double>(m.count());
  };
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    McfaConfig cfg;
    cfg.generations = 50;
    cfg.seed = seed;
    const auto r = run_mcfa(fitness, 10, cfg);
    bool all = true;
    for (auto j : planted) all = all && r.best_mask.selected[j];
    recovered += all ? 1 : 0;
    for (std::size_t g = 1; g < r.history.size(); ++g) CHECK(r.history[g] >= r.history[g - 1]);
  }
  CHECK(recovered >= 9);
}

TEST_CASE("runs are deterministic in the seed") {
  const MaskFitness fitness = [](const FeatureMask& m) {
    return std::sin(static_cast<double>(std::hash<std::string>{}(m.to_string()) % 1000));
  };
  McfaConfig cfg;
  cfg.seed = 99;
  const auto a = run_mcfa(fitness, 9, cfg);
  const auto b = run_mcfa(fitness, 9, cfg);
  CHECK(a.best_mask == b.best_mask);
  CHECK(a.history == b.history);
}

TEST_CASE("non-finite fitness names the mask") {
  McfaConfig cfg;
  try {
    run_mcfa([](const FeatureMask&) { return std::nan(""); }, 4, cfg);
    FAIL("expected an error");
  } catch (const McfaError& e) {
    CHECK(std::string(e.what()).find("mask") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  McfaConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.population = 3;
  CHECK_THROWS_AS(cfg.validate(), McfaError);
  cfg = {};
  cfg.generations = 0;
  CHECK_THROWS_AS(cfg.validate(), McfaError);
  cfg = {};
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), McfaError);
}
