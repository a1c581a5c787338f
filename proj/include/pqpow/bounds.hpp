#pragma once

// Closed-form query and security bounds for Bernoulli search, chained
// proofs of work and the post-quantum backbone conditions. All products of
// tiny and huge factors are formed in natural-log space; linear values are
// materialised only in BoundValue.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqpow::bounds {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BoundParams {
  double p = 0.0;          // success probability of one classical query
  std::uint64_t N = 0;     // total quantum queries
  std::uint64_t k = 1;     // solutions / chain length
  double eps = 0.1;        // concentration quality
  double f = 0.0;          // P(>= 1 honest PoW in a round)
  std::uint64_t n = 0;     // honest parties
  std::uint64_t t = 0;     // classical adversarial parties
  std::uint64_t q = 0;     // classical queries per party per round
  std::uint64_t Q = 0;     // adversarial quantum queries per round
  std::uint64_t s = 0;     // consecutive rounds

  // Throws PreconditionError naming the first violated invariant.
  // f = 0 means "not supplied" and is accepted.
  void validate() const;
};

// An upper bound that may exceed one. clamped = min(raw, 1).
struct BoundValue {
  double raw = 0.0;
  double clamped = 0.0;
  double log_raw = 0.0;

  static BoundValue from_log(double log_raw);
};

BoundValue kbersearch_bound_exact(const BoundParams& params);

// Requires 4 <= k <= N.
BoundValue kbersearch_bound_stirling(const BoundParams& params);

struct ChainOfPowsBound {
  BoundValue closed_form;       // (2(1-p)/(pi k)) ((N+k) e sqrt(p) / k)^{2k}
  BoundValue exponential_form;  // exp(-2k ln(k / (e (N+k) sqrt(p))))
};

ChainOfPowsBound chain_of_pows_bound(const BoundParams& params);

// Chain-of-PoWs cap through the Bernoulli-search bound at budget N + k.
BoundValue reduction_bound(std::uint64_t N, std::uint64_t k, double p);

// Largest Q satisfying the post-quantum honest majority condition.
double honest_majority_threshold(double f, double p, double eps);

double k0_target(double s, double Q, double p, double eps);

// Smallest eps for which the typical-execution tail decays: e sqrt(p) / (1 - e sqrt(p)).
double typical_tail_eps_min(double p);

BoundValue typical_execution_tail(double s, double Q, double p, double eps);

// c_settle * eps^2 / ((1 - eps)(1 - f)); +inf once 1 - f rounds to zero.
double settlement_ratio(double eps, double f, double c_settle = 1.0);

enum class FConvention { Paper, Exact };

// Paper: f = n p q. Exact: f = 1 - (1 - p)^{n q}.
double honest_success_rate(std::uint64_t n, std::uint64_t q, double p, FConvention convention);

struct Gen1Gen2Row {
  std::uint64_t k = 0;
  BoundValue gen2;  // exact Bernoulli-search bound
  BoundValue gen1;  // 2 (8 e N sqrt(p) / k)^k + 2^{-k}
};

struct ComparisonTable {
  BoundParams params;

  // Honest majority
  double classical_hm_lhs = 0.0;  // t / (n - t)
  double classical_hm_rhs = 0.0;  // 1 - 3 (f + eps)
  bool classical_hm_holds = false;
  double quantum_hm_threshold = 0.0;
  bool quantum_hm_holds = false;

  // Maximum expected adversarial PoWs over s rounds
  double classical_expected_adv = 0.0;  // p q t s
  double quantum_expected_adv = 0.0;    // (1 + eps) e sqrt(p) Q s

  // Concentration exponents
  double classical_concentration = 0.0;  // eps^2 f s
  double quantum_concentration = 0.0;    // (1 - eps) f (1 - f) s

  // Expected-optimal solution counts
  double expected_optimal_gen2 = 0.0;  // e sqrt(p) N
  double expected_optimal_nons = 0.0;  // sqrt(c p) N, c = 8
  double expected_optimal_gen1 = 0.0;  // 8 e sqrt(p) N
  double expected_optimal_ratio = 0.0; // gen1 / gen2

  std::string convergence_gen2 = "exp(-N*O(p^(1/2)))";
  std::string convergence_gen1 = "exp(-N*O(p^(1/2)))";
  std::string convergence_nons = "exp(-N*O(p^(2/3)))";

  std::vector<Gen1Gen2Row> per_k;
};

inline constexpr double kNonsSearchConstant = 8.0;

// Builds both comparison tables. ks lists the solution sizes for the per-k
// Gen1/Gen2 columns; an empty list selects ceil((1 + eps) * optimum) for the
// Gen2 and Gen1 optima.
ComparisonTable comparison_table(const BoundParams& params, std::vector<std::uint64_t> ks = {});

}  // namespace pqpow::bounds
