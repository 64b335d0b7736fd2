#include "hdp/mcfa.hpp"

#include <algorithm>
#include <cmath>

namespace hdp::mcfa {

namespace {

double logistic_map(double delta, double x) { return std::clamp(delta * (x * (1.0 - x)), 0.0, 1.0); }

bool stuck(double delta, double x) {
  // 0 is fixed for every delta, 1 maps to 0, and 1 - 1/delta is the interior fixed point.
  return x == 0.0 || x == 1.0 || (delta > 1.0 && x == 1.0 - 1.0 / delta);
}

double draw_seed(Rng& rng) {
  static constexpr std::array<double, 5> kSpecial{0.0, 0.25, 0.5, 0.75, 1.0};
  while (true) {
    const double x = rng.uniform();
    const bool near_special =
        std::any_of(kSpecial.begin(), kSpecial.end(), [x](double p) { return std::abs(x - p) < 1e-9; });
    if (!near_special) return x;
  }
}

// Chaos source for a run: reseeds an orbit that has collapsed onto a fixed point.
class ChaosSource {
 public:
  ChaosSource(double delta, Rng& rng) : map_(ChaosMap::seeded(delta, rng)), rng_(rng) {}

  ChaosMap& map() {
    if (map_.degenerate()) map_ = ChaosMap::seeded(map_.delta(), rng_);
    return map_;
  }

 private:
  ChaosMap map_;
  Rng& rng_;
};

}  // namespace

ChaosMap::ChaosMap(double delta, double cr, double br) : delta_(delta), cr_(cr), br_(br) {
  if (!(delta > 0.0 && delta <= 4.0)) throw McfaError("chaos map: delta must be in (0, 4]");
  if (!(cr >= 0.0 && cr <= 1.0) || !(br >= 0.0 && br <= 1.0)) throw McfaError("chaos map: state must be in [0, 1]");
}

ChaosMap ChaosMap::seeded(double delta, Rng& rng) {
  const double cr = draw_seed(rng);
  const double br = draw_seed(rng);
  return ChaosMap(delta, cr, br);
}

std::pair<double, double> ChaosMap::step() {
  cr_ = logistic_map(delta_, cr_);
  br_ = logistic_map(delta_, br_);
  return {cr_, br_};
}

bool ChaosMap::degenerate() const { return stuck(delta_, cr_) || stuck(delta_, br_); }

ChaosStep chaos_step(const ChaosMap& map) {
  ChaosMap next = map;
  const auto [cr, br] = next.step();
  return {next, cr, br};
}

std::size_t FeatureMask::count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true)); }

std::vector<std::size_t> FeatureMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j]) out.push_back(j);
  }
  return out;
}

std::string FeatureMask::to_string() const {
  std::string s;
  for (bool b : selected) s += b ? '1' : '0';
  return s;
}

FeatureMask FeatureMask::all(std::size_t n) { return FeatureMask{std::vector<bool>(n, true)}; }

FeatureMask FeatureMask::from_string(const std::string& bits) {
  FeatureMask m;
  for (char c : bits) {
    if (c != '0' && c != '1') throw McfaError("feature mask: invalid character in '" + bits + "'");
    m.selected.push_back(c == '1');
  }
  if (m.count() == 0) throw McfaError("feature mask: at least one feature must be selected");
  return m;
}

std::size_t Population::size() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

void Population::set_best(const Cell& cell) {
  best = cell;
  avb = cell.points.size() > 0 ? cell.points.mean() : 0.0;
}

Population init_population_chaotic(int n, int dim, const Bounds& bounds, std::uint64_t seed, double delta) {
  if (n < 4) throw McfaError("population size must be >= 4 (one cell per category)");
  if (dim < 1) throw McfaError("dimension must be >= 1");
  if (!(bounds.lower < bounds.upper)) throw McfaError("bounds must satisfy lower < upper");
  Rng rng(seed);
  ChaosSource chaos(delta, rng);
  Population pop;
  pop.bounds = bounds;
  const double span = bounds.upper - bounds.lower;
  for (int k = 0; k < n; ++k) {
    Cell cell{Eigen::VectorXd(dim), 0.0};
    for (int j = 0; j < dim; ++j) {
      const auto [cr, br] = chaos.map().step();
      (void)br;
      cell.points(j) = std::clamp(bounds.lower + span * cr, bounds.lower, bounds.upper);
    }
    pop.groups[static_cast<std::size_t>(k % 4)].push_back(std::move(cell));
  }
  pop.set_best(pop.groups[0].front());
  return pop;
}

Cell generate_candidate(const Population& pop, int category, std::size_t i, ChaosMap& map, Rng& rng) {
  if (category < 1 || category > 4) throw McfaError("category must be in 1..4");
  const auto& group = pop.groups[static_cast<std::size_t>(category - 1)];
  if (i >= group.size()) {
    throw McfaError("cell index " + std::to_string(i) + " out of range for category " + std::to_string(category));
  }
  const auto& self = group[i].points;
  const auto& best = pop.best.points;
  const double lo = pop.bounds.lower;
  const double hi = pop.bounds.upper;
  Cell out{Eigen::VectorXd(self.size()), 0.0};
  for (Eigen::Index j = 0; j < self.size(); ++j) {
    double value = 0.0;
    if (category == 4) {
      value = rng.uniform() * (hi - lo) + lo;
    } else {
      const auto [cr, br] = map.step();
      double reflection = 0.0;
      double visibility = 0.0;
      switch (category) {
        case 1:
          reflection = cr * self(j);
          visibility = br * (best(j) - self(j));
          break;
        case 2:
          reflection = cr * best(j);
          visibility = br * (best(j) - self(j));
          break;
        default:
          reflection = cr * self(j);
          visibility = br * (best(j) - pop.avb);
          break;
      }
      value = reflection + visibility;
    }
    out.points(j) = std::clamp(value, lo, hi);
  }
  return out;
}

FeatureMask decode_mask(const Cell& cell, double threshold) {
  FeatureMask mask;
  mask.selected.resize(static_cast<std::size_t>(cell.points.size()));
  for (Eigen::Index j = 0; j < cell.points.size(); ++j) mask.selected[static_cast<std::size_t>(j)] = cell.points(j) > threshold;
  if (mask.count() == 0 && cell.points.size() > 0) {
    Eigen::Index arg = 0;
    cell.points.maxCoeff(&arg);
    mask.selected[static_cast<std::size_t>(arg)] = true;
  }
  return mask;
}

void McfaConfig::validate() const {
  if (population < 4) throw McfaError("population must be >= 4");
  if (generations < 1) throw McfaError("generations must be >= 1");
  if (!(delta > 0.0 && delta <= 4.0)) throw McfaError("delta must be in (0, 4]");
  if (!(bounds.lower < bounds.upper)) throw McfaError("bounds must satisfy lower < upper");
  if (!(threshold > bounds.lower && threshold < bounds.upper)) throw McfaError("threshold must lie inside the bounds");
  if (!(lambda >= 0.0)) throw McfaError("lambda must be >= 0");
}

McfaResult run_mcfa(const MaskFitness& fitness, int dim, const McfaConfig& config) {
  config.validate();
  McfaResult result;
  const auto evaluate = [&](const Cell& cell) {
    const auto mask = decode_mask(cell, config.threshold);
    const double f = fitness(mask);
    ++result.evaluations;
    if (!std::isfinite(f)) throw McfaError("fitness is not finite for mask " + mask.to_string());
    return f;
  };

  auto pop = init_population_chaotic(config.population, dim, config.bounds, config.seed, config.delta);
  Rng rng(config.seed ^ 0x5deece66dULL);
  ChaosSource chaos(config.delta, rng);

  bool have_best = false;
  for (auto& group : pop.groups) {
    for (auto& cell : group) {
      cell.fitness = evaluate(cell);
      if (!have_best || cell.fitness > pop.best.fitness) {
        pop.set_best(cell);
        have_best = true;
      }
    }
  }

  for (int gen = 0; gen < config.generations; ++gen) {
    std::array<std::vector<Cell>, 4> candidates;
    for (int c = 0; c < 4; ++c) {
      const auto& group = pop.groups[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < group.size(); ++i) {
        candidates[static_cast<std::size_t>(c)].push_back(generate_candidate(pop, c + 1, i, chaos.map(), rng));
      }
    }
    for (auto& group : candidates) {
      for (auto& cand : group) cand.fitness = evaluate(cand);
    }
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < pop.groups[c].size(); ++i) {
        const auto& cand = candidates[c][i];
        if (cand.fitness > pop.groups[c][i].fitness) pop.groups[c][i] = cand;
        if (cand.fitness > pop.best.fitness) pop.set_best(cand);
      }
    }
    result.history.push_back(pop.best.fitness);
  }

  result.best_cell = pop.best;
  result.best_fitness = pop.best.fitness;
  result.best_mask = decode_mask(pop.best, config.threshold);
  return result;
}

}  // namespace hdp::mcfa
