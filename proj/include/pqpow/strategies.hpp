#pragma once

// Test adversaries for the recording-oracle simulator and the driver that
// records the progress measure along a run.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqpow/recording_sim.hpp"

namespace pqpow::recording_sim {

enum class StrategyKind {
  ClassicalDistinct,  // query 0, 1, 2, ... until out_k ones are recorded
  ClassicalChained,   // out_k levels of M/out_k nonces, searched level by level
  GroverK1,           // Grover iterations on x, then copy x to the claimed slot
  RandomCircuit,      // Haar two-qubit brickwork between queries
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::ClassicalDistinct;
  std::uint64_t seed = 0;  // RandomCircuit only

  // "classical_distinct_queries", "classical_chained", "grover_k1", "random_circuit(7)"
  std::string id() const;
  // Throws ValidationError for an unknown id.
  static StrategySpec parse(std::string_view id);

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

// Minimal workspace for the strategy with k claimed outputs of m bits.
unsigned required_workspace(const StrategySpec& spec, unsigned m, unsigned k);
SystemConfig strategy_config(const StrategySpec& spec, unsigned m, double p, unsigned k);

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual void prepare(QuantumSystem& s, Exec exec) const = 0;
  virtual void before_query(QuantumSystem& s, std::uint64_t t, Exec exec) const = 0;
  virtual void after_query(QuantumSystem& s, std::uint64_t t, Exec exec) const = 0;
  virtual void finalize(QuantumSystem& s, Exec exec) const = 0;
};

// Builds the strategy for exactly N queries. Classical strategies are
// compiled to basis permutations here.
std::unique_ptr<Strategy> make_strategy(const StrategySpec& spec, const SystemConfig& config, std::uint64_t N);

// prepare, N x (before, query, after), finalize. The query matching the
// current domain is used.
void evolve(QuantumSystem& s, const Strategy& strategy, std::uint64_t N, Exec exec = Exec::Parallel);

struct StrategyReport {
  SystemConfig config;
  StrategySpec strategy;
  std::uint64_t N = 0;
  std::vector<double> trajectory;  // a_{t,k}, t = 0..N, k = out_k
  std::vector<double> p0_norms;    // ||P0_{k-1} phi_t|| just before query t+1
  std::vector<double> slacks;      // a_{t+1} - a_t - 2 sqrt(p(1-p)) ||P0_{k-1} phi_t||
  double max_norm_drift = 0.0;     // max | ||phi_t|| - 1 |
  double success = 0.0;
  bool degenerate = false;
  double bound = 0.0;  // clamped Bernoulli-search bound at N, or at N + k when chained
  double slack_max = 0.0;

  nlohmann::json to_json() const;
};

StrategyReport run_strategy(const SystemConfig& config, const StrategySpec& spec, std::uint64_t N,
                            Exec exec = Exec::Parallel);

}  // namespace pqpow::recording_sim
