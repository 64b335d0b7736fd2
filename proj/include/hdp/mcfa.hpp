#pragma once

// Mapping-based cuttlefish search for wrapper feature selection. Cells are
// points in a box; a cell decodes to a feature subset by thresholding.

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hdp/random.hpp"

namespace hdp::mcfa {

class McfaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pair of logistic-map orbits x' = delta * x * (1 - x) supplying the Cr and
// Br coefficients.
class ChaosMap {
 public:
  ChaosMap(double delta, double cr, double br);

  // Cr0, Br0 uniform in (0,1), avoiding 0, 0.25, 0.5, 0.75 and 1.
  static ChaosMap seeded(double delta, Rng& rng);

  double delta() const { return delta_; }
  double cr() const { return cr_; }
  double br() const { return br_; }

  // Advances both orbits and returns the new (cr, br).
  std::pair<double, double> step();

  // True when either orbit sits on a point the map cannot leave.
  bool degenerate() const;

 private:
  double delta_;
  double cr_;
  double br_;
};

struct ChaosStep {
  ChaosMap map;
  double cr;
  double br;
};

ChaosStep chaos_step(const ChaosMap& map);

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

struct Cell {
  Eigen::VectorXd points;
  double fitness = 0.0;
};

struct FeatureMask {
  std::vector<bool> selected;

  std::size_t size() const { return selected.size(); }
  std::size_t count() const;
  std::vector<std::size_t> indices() const;
  std::string to_string() const;  // e.g. "1011000"
  static FeatureMask all(std::size_t n);
  static FeatureMask from_string(const std::string& bits);

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;
};

struct Population {
  std::array<std::vector<Cell>, 4> groups;  // categories 1..4
  Cell best;
  double avb = 0.0;  // mean of the best cell's coordinates
  Bounds bounds;

  std::size_t size() const;
  void set_best(const Cell& cell);
};

// n cells with coordinates drawn from a chaotic orbit mapped onto the box,
// dealt round-robin into the four categories. Fitness values are left at 0
// and best is the first cell until the population is evaluated.
Population init_population_chaotic(int n, int dim, const Bounds& bounds, std::uint64_t seed, double delta = 4.0);

// category in 1..4, i indexes that category's group. Category 4 draws from rng.
Cell generate_candidate(const Population& pop, int category, std::size_t i, ChaosMap& map, Rng& rng);

// Feature j is selected iff points[j] > threshold; never empty.
FeatureMask decode_mask(const Cell& cell, double threshold);

struct McfaConfig {
  int population = 20;
  int generations = 30;
  double delta = 4.0;
  double threshold = 0.5;
  double lambda = 0.01;  // subset-size penalty applied by wrapper fitness functions
  std::uint64_t seed = 1;
  Bounds bounds{};

  void validate() const;
};

using MaskFitness = std::function<double(const FeatureMask&)>;

struct McfaResult {
  FeatureMask best_mask;
  double best_fitness = 0.0;
  Cell best_cell;
  std::vector<double> history;  // best fitness after each generation
  std::size_t evaluations = 0;
};

McfaResult run_mcfa(const MaskFitness& fitness, int dim, const McfaConfig& config);

}  // namespace hdp::mcfa
