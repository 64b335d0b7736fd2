#pragma once

// Adaptive elephant-herd optimization over a box-bounded real vector.
// Fitness is maximized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hdp/random.hpp"

namespace hdp::aeho {

class AehoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Bounds {
  double lower = -5.0;
  double upper = 5.0;
};

struct AehoConfig {
  double alpha = 0.5;  // matriarch influence
  double beta = 0.1;   // clan-centre influence
  int clans = 3;
  int clan_size = 10;
  int max_generations = 50;
  Bounds bounds{};
  int worst_count = 1;
  double mutation_rate = 0.1;
  int mutation_retries = 5;
  bool crossover = true;
  // Keep a candidate only when it is fitter than the elephant it replaces.
  bool greedy = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw AehoError("alpha must be in [0,1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw AehoError("beta must be in [0,1]");
    if (clans < 1) throw AehoError("clans must be >= 1");
    if (clan_size < 2) throw AehoError("clan_size must be >= 2");
    if (max_generations < 1) throw AehoError("max_generations must be >= 1");
    if (!(bounds.lower < bounds.upper)) throw AehoError("bounds must satisfy lower < upper");
    if (worst_count < 0 || worst_count >= clan_size) throw AehoError("worst_count must be in [0, clan_size)");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw AehoError("mutation_rate must be in [0,1]");
    if (mutation_retries < 1) throw AehoError("mutation_retries must be >= 1");
  }
};

template <typename Scalar>
struct Elephant {
  Vector<Scalar> position;
  // -infinity marks a position that has not been evaluated yet.
  Scalar fitness = -std::numeric_limits<Scalar>::infinity();
};

template <typename Scalar>
struct Clan {
  std::vector<Elephant<Scalar>> members;

  std::size_t matriarch() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (members[i].fitness > members[best].fitness) best = i;
    }
    return best;
  }
};

template <typename Scalar>
Vector<Scalar> clamp(Vector<Scalar> p, const Bounds& b) {
  return p.cwiseMax(Scalar(b.lower)).cwiseMin(Scalar(b.upper));
}

// old + alpha * (best - old) * rd, clamped.
template <typename Scalar>
Vector<Scalar> clan_update(const Vector<Scalar>& position, const Vector<Scalar>& matriarch, double alpha, double rd,
                           const Bounds& bounds) {
  if (position.size() != matriarch.size()) throw AehoError("clan_update: dimension mismatch");
  return clamp<Scalar>(position + Scalar(alpha * rd) * (matriarch - position), bounds);
}

template <typename Scalar>
Vector<Scalar> clan_center(const Clan<Scalar>& clan) {
  if (clan.members.empty()) throw AehoError("clan_center: empty clan");
  Vector<Scalar> sum = Vector<Scalar>::Zero(clan.members.front().position.size());
  for (const auto& e : clan.members) sum += e.position;
  return sum / Scalar(clan.members.size());
}

// Candidate replacement for the matriarch: beta * clan centre, clamped.
template <typename Scalar>
Vector<Scalar> matriarch_update(const Clan<Scalar>& clan, double beta, const Bounds& bounds) {
  return clamp<Scalar>(Scalar(beta) * clan_center(clan), bounds);
}

template <typename Scalar>
Vector<Scalar> uniform_position(Eigen::Index dim, const Bounds& b, Rng& rng) {
  Vector<Scalar> p(dim);
  for (Eigen::Index d = 0; d < dim; ++d) p(d) = Scalar(rng.uniform(b.lower, b.upper));
  return p;
}

// The worst_count least-fit members move to fresh uniform positions in the
// box; their fitness is reset to the unevaluated marker.
template <typename Scalar>
Clan<Scalar> separation_reinit(Clan<Scalar> clan, int worst_count, const Bounds& bounds, Rng& rng) {
  if (worst_count < 0 || static_cast<std::size_t>(worst_count) >= clan.members.size()) {
    throw AehoError("separation_reinit: worst_count must be smaller than the clan");
  }
  std::vector<std::size_t> order(clan.members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return clan.members[a].fitness < clan.members[b].fitness;
  });
  for (int w = 0; w < worst_count; ++w) {
    auto& e = clan.members[order[static_cast<std::size_t>(w)]];
    e.position = uniform_position<Scalar>(e.position.size(), bounds, rng);
    e.fitness = -std::numeric_limits<Scalar>::infinity();
  }
  return clan;
}

// Cut points x1 = floor(n/3), x2 = x1 + floor(n/2); genes in [x1, x2) are exchanged.
inline std::pair<Eigen::Index, Eigen::Index> crossover_points(Eigen::Index n) {
  const Eigen::Index x1 = n / 3;
  return {x1, x1 + n / 2};
}

template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> two_point_crossover(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  if (a.size() != b.size()) throw AehoError("two_point_crossover: parents differ in length");
  if (a.size() < 3) throw AehoError("two_point_crossover: parents need at least 3 genes");
  const auto [x1, x2] = crossover_points(a.size());
  Vector<Scalar> c1 = a;
  Vector<Scalar> c2 = b;
  c1.segment(x1, x2 - x1) = b.segment(x1, x2 - x1);
  c2.segment(x1, x2 - x1) = a.segment(x1, x2 - x1);
  return {std::move(c1), std::move(c2)};
}

// Redraws ceil(rate * n) distinct coordinates uniformly in the box.
template <typename Scalar>
Vector<Scalar> mutate(Vector<Scalar> p, double rate, const Bounds& bounds, Rng& rng,
                      std::vector<Eigen::Index>* mutated = nullptr) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw AehoError("mutate: rate must be in [0,1]");
  const auto n = static_cast<std::size_t>(p.size());
  const auto count = std::min(n, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-12)));
  std::vector<Eigen::Index> slots(n);
  std::iota(slots.begin(), slots.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first `count` slots are a sample without repetition.
  for (std::size_t i = 0; i < count; ++i) std::swap(slots[i], slots[i + rng.index(n - i)]);
  slots.resize(count);
  for (auto s : slots) p(s) = Scalar(rng.uniform(bounds.lower, bounds.upper));
  if (mutated) *mutated = std::move(slots);
  return p;
}

template <typename Scalar>
struct AehoResult {
  Vector<Scalar> best_position;
  Scalar best_fitness = -std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> history;  // best-ever fitness after each generation
  std::vector<Clan<Scalar>> clans;
  std::size_t evaluations = 0;
};

template <typename Scalar>
using Fitness = std::function<Scalar(const Vector<Scalar>&)>;

namespace detail {

template <typename Scalar>
class Evaluator {
 public:
  explicit Evaluator(const Fitness<Scalar>& f, AehoResult<Scalar>& result) : f_(f), result_(result) {}

  Scalar operator()(const Vector<Scalar>& p) {
    const Scalar v = f_(p);
    ++result_.evaluations;
    if (!std::isfinite(static_cast<double>(v))) throw AehoError("fitness returned a non-finite value");
    if (v > result_.best_fitness || result_.best_position.size() == 0) {
      result_.best_fitness = v;
      result_.best_position = p;
    }
    return v;
  }

 private:
  const Fitness<Scalar>& f_;
  AehoResult<Scalar>& result_;
};

template <typename Scalar>
void offer(Elephant<Scalar>& e, Vector<Scalar> candidate, Scalar fitness, bool greedy) {
  if (!greedy || fitness > e.fitness) {
    e.position = std::move(candidate);
    e.fitness = fitness;
  }
}

}  // namespace detail

// `initial`, when given, seeds the first elephant of the first clan.
template <typename Scalar>
AehoResult<Scalar> run_aeho(const Fitness<Scalar>& fitness, Eigen::Index dim, const AehoConfig& config,
                            const std::optional<Vector<Scalar>>& initial = std::nullopt) {
  config.validate();
  if (dim < 1) throw AehoError("run_aeho: dimension must be >= 1");
  if (initial && initial->size() != dim) throw AehoError("run_aeho: initial position has the wrong dimension");

  AehoResult<Scalar> result;
  detail::Evaluator<Scalar> evaluate(fitness, result);
  Rng rng(config.seed);
  const auto& bounds = config.bounds;

  result.clans.resize(static_cast<std::size_t>(config.clans));
  for (auto& clan : result.clans) {
    for (int i = 0; i < config.clan_size; ++i) {
      clan.members.push_back({uniform_position<Scalar>(dim, bounds, rng), Scalar(0)});
    }
  }
  if (initial) result.clans.front().members.front().position = clamp<Scalar>(*initial, bounds);
  for (auto& clan : result.clans) {
    for (auto& e : clan.members) e.fitness = evaluate(e.position);
  }

  const bool can_cross = config.crossover && dim >= 3;
  for (int gen = 0; gen < config.max_generations; ++gen) {
    for (auto& clan : result.clans) {
      std::stable_sort(clan.members.begin(), clan.members.end(),
                       [](const auto& a, const auto& b) { return a.fitness > b.fitness; });
    }

    for (auto& clan : result.clans) {
      const Vector<Scalar> matriarch = clan.members.front().position;
      for (std::size_t j = 1; j < clan.members.size(); ++j) {
        auto& e = clan.members[j];
        auto candidate = clan_update<Scalar>(e.position, matriarch, config.alpha, rng.uniform(), bounds);
        const Scalar f = evaluate(candidate);
        detail::offer(e, std::move(candidate), f, config.greedy);
      }
      auto candidate = matriarch_update(clan, config.beta, bounds);
      const Scalar f = evaluate(candidate);
      detail::offer(clan.members.front(), std::move(candidate), f, config.greedy);
    }

    for (auto& clan : result.clans) {
      if (can_cross) {
        for (std::size_t j = 0; j + 1 < clan.members.size(); j += 2) {
          auto& a = clan.members[j];
          auto& b = clan.members[j + 1];
          auto [c1, c2] = two_point_crossover(a.position, b.position);
          const Scalar f1 = evaluate(c1);
          const Scalar f2 = evaluate(c2);
          detail::offer(a, std::move(c1), f1, config.greedy);
          detail::offer(b, std::move(c2), f2, config.greedy);
        }
      }
      if (config.mutation_rate > 0.0) {
        for (auto& e : clan.members) {
          for (int attempt = 0; attempt < config.mutation_retries; ++attempt) {
            auto candidate = mutate(e.position, config.mutation_rate, bounds, rng);
            const Scalar f = evaluate(candidate);
            const bool improved = f > e.fitness;
            detail::offer(e, std::move(candidate), f, config.greedy);
            if (improved || !config.greedy) break;
          }
        }
      }
      if (config.worst_count > 0) {
        clan = separation_reinit(std::move(clan), config.worst_count, bounds, rng);
        for (auto& e : clan.members) {
          if (e.fitness == -std::numeric_limits<Scalar>::infinity()) e.fitness = evaluate(e.position);
        }
      }
    }
    result.history.push_back(result.best_fitness);
  }
  return result;
}

}  // namespace hdp::aeho
