#pragma once

// Numerical checks of the recording-oracle lemmas over a parameter grid.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqpow/recording_sim.hpp"
#include "pqpow/strategies.hpp"

namespace pqpow::recording_sim {

struct VerifyGrid {
  std::vector<unsigned> ms = {1, 2, 3};
  std::vector<double> ps = {0.1, 0.25, 0.5};
  std::uint64_t n_max = 6;
  unsigned k_max = 3;
  unsigned mixture_max_m = 2;  // exhaustive truth-table enumeration up to this m
  std::vector<StrategySpec> strategies = {
      {StrategyKind::ClassicalDistinct, 0},
      {StrategyKind::GroverK1, 0},
      {StrategyKind::RandomCircuit, 0},
  };
  std::uint64_t pi_lemma_samples = 4;  // random fixed-pattern states per case
  std::uint64_t seed = 0;
  std::uint64_t budget = kDefaultAmplitudeBudget;
  UpFault fault = UpFault::None;
};

struct FamilyStats {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  double worst = 0.0;  // largest excess over the allowed value (negative when all pass)
  double tolerance = 0.0;
};

struct Violation {
  std::string family;
  nlohmann::json where;   // case parameters, including the strategy report
  double excess = 0.0;
};

struct VerifyReport {
  std::map<std::string, FamilyStats> families;
  std::vector<Violation> violations;  // first kMaxListed only
  std::uint64_t total_violations = 0;
  std::uint64_t cases = 0;

  bool ok() const { return total_violations == 0; }
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kMaxListed = 64;

// Family names:
//   unitarity, norm, domain_equivalence, classical_mixture, recurrence,
//   beta_cases, progress_bound, final_bound, pi_lemma, xi_resolution
VerifyReport verify_lemmas(const VerifyGrid& grid, Exec exec = Exec::Parallel);

struct ReductionGrid {
  std::vector<unsigned> ms = {1, 2, 3};
  std::vector<double> ps = {0.1, 0.25, 0.5};
  unsigned k_max = 3;
  std::uint64_t budget = kDefaultAmplitudeBudget;
};

// Level-by-level classical search for a chain of k solutions, checked
// against the Bernoulli-search bound at budget N + k for every N <= M.
// Family name: reduction.
VerifyReport verify_reduction(const ReductionGrid& grid, Exec exec = Exec::Parallel);

}  // namespace pqpow::recording_sim
