#pragma once

// Dense state-vector simulation of a Bernoulli recording oracle.
//
// Register layout of a basis index (least significant bits first):
//   D  : M = 2^m oracle qubits, bit j holds the oracle entry at input j
//   z  : w workspace qubits; claimed output i occupies z bits [i*m, (i+1)*m)
//   y  : one query-bit qubit
//   x  : m query-input qubits
// so idx = D | adv << M with adv = z | y << w | x << (w + 1).
//
// The dual domain starts at |0^M> on D; the primal domain is reached by
// applying U_p to every oracle qubit.

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace pqpow::recording_sim {

using Amplitude = std::complex<double>;

class DomainError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Domain { Primal, Dual };
enum class Exec { Serial, Parallel };

// Deliberate corruption of U_p, used only to exercise the verifier.
enum class UpFault { None, SignError };

inline constexpr std::uint64_t kDefaultAmplitudeBudget = std::uint64_t{1} << 23;
inline constexpr unsigned kMaxInputBits = 4;

struct SystemConfig {
  unsigned m = 1;       // input bits
  unsigned w = 0;       // workspace qubits
  double p = 0.25;      // Bernoulli parameter
  unsigned out_k = 0;   // claimed solutions, each m bits at the bottom of z
  std::uint64_t budget = kDefaultAmplitudeBudget;
  UpFault fault = UpFault::None;

  unsigned M() const { return 1U << m; }
  unsigned adversary_qubits() const { return w + 1 + m; }
  unsigned total_qubits() const { return M() + adversary_qubits(); }
  std::uint64_t dimension() const { return std::uint64_t{1} << total_qubits(); }

  // ValidationError for malformed fields, ResourceError when over budget.
  void validate() const;
};

// Real 2x2 matrix, row-major.
struct Gate2 {
  double u00, u01, u10, u11;

  Gate2 transpose() const { return {u00, u10, u01, u11}; }
};

// Columns (sqrt(1-p), sqrt(p)) and (-sqrt(p), sqrt(1-p)).
Gate2 up_gate(double p, UpFault fault = UpFault::None);

// max |(G^T G - I)_ij|
double unitarity_defect(const Gate2& g);

class QuantumSystem {
 public:
  QuantumSystem(SystemConfig config, Domain domain, std::vector<Amplitude> amplitudes);

  const SystemConfig& config() const { return config_; }
  Domain domain() const { return domain_; }
  std::uint64_t query_count() const { return query_count_; }

  std::span<Amplitude> amplitudes() { return amps_; }
  std::span<const Amplitude> amplitudes() const { return amps_; }

  double norm(Exec exec = Exec::Parallel) const;

  // Index helpers for the documented layout.
  std::uint64_t oracle_mask() const { return (std::uint64_t{1} << config_.M()) - 1; }
  std::uint64_t adversary_of(std::uint64_t idx) const { return idx >> config_.M(); }
  unsigned query_x(std::uint64_t adv) const { return static_cast<unsigned>(adv >> (config_.w + 1)); }
  unsigned query_y(std::uint64_t adv) const { return static_cast<unsigned>((adv >> config_.w) & 1U); }
  std::uint64_t workspace(std::uint64_t adv) const { return adv & ((std::uint64_t{1} << config_.w) - 1); }
  unsigned claimed(std::uint64_t adv, unsigned i) const {
    return static_cast<unsigned>((adv >> (i * config_.m)) & (config_.M() - 1));
  }

 private:
  friend void apply_std_query(QuantumSystem&, Exec);
  friend void apply_dual_query(QuantumSystem&, Exec);
  friend void to_standard(QuantumSystem&, Exec);
  friend void to_dual(QuantumSystem&, Exec);

  SystemConfig config_;
  Domain domain_;
  std::uint64_t query_count_ = 0;
  std::vector<Amplitude> amps_;
};

// Dual-domain |0...0>|0^M>.
QuantumSystem new_system(const SystemConfig& config);

// Primal-domain state with adversary registers in |0...0> and the oracle
// register fixed to the truth table f (bit j = f(j)).
QuantumSystem new_fixed_oracle(const SystemConfig& config, std::uint64_t f);

// Phase (-1)^{y D(x)}; primal only.
void apply_std_query(QuantumSystem& s, Exec exec = Exec::Parallel);
// U_p^dagger StdBO U_p; dual only.
void apply_dual_query(QuantumSystem& s, Exec exec = Exec::Parallel);

void to_standard(QuantumSystem& s, Exec exec = Exec::Parallel);
void to_dual(QuantumSystem& s, Exec exec = Exec::Parallel);

// Unitary on a subset of adversary qubits (indices into adv, qubits[0] is
// the least significant bit of the matrix index).
void apply_adversary_gate(QuantumSystem& s, std::span<const unsigned> qubits,
                          const Eigen::MatrixXcd& u, Exec exec = Exec::Parallel);

// 2x2 gate on adversary qubit `qubit`, applied only where control[adv] is
// nonzero; control is indexed by adv with the target bit cleared.
void apply_conditional_gate(QuantumSystem& s, unsigned qubit, const Eigen::Matrix2cd& u,
                            std::span<const std::uint8_t> control, Exec exec = Exec::Parallel);

// Basis permutation of the adversary registers: |adv> -> |perm[adv]>.
void apply_adversary_permutation(QuantumSystem& s, std::span<const std::uint64_t> perm,
                                 Exec exec = Exec::Parallel);

// Dense unitary on the full adversary space.
void apply_adversary_unitary(QuantumSystem& s, const Eigen::MatrixXcd& u, Exec exec = Exec::Parallel);

// Throws ValidationError unless u is square and unitary to tol.
void require_unitary(const Eigen::MatrixXcd& u, double tol = 1e-10);

enum class ProjKind {
  Eq,  // |D| = k
  Ge,  // |D| >= k
  Le,  // |D| <= k
  P0,  // |D| = k, y = 1, D(x) = 0
  P1,  // |D| = k, y = 1, D(x) = 1
  Pi,  // every claimed position holds 1 (primal)
  Xi,  // exactly k ones among the claimed positions, counted per slot
};

struct Projector {
  ProjKind kind;
  unsigned k = 0;
};

// Projected (unnormalised) copy of s.
QuantumSystem project(const QuantumSystem& s, Projector proj, Exec exec = Exec::Parallel);
double projector_norm(const QuantumSystem& s, Projector proj, Exec exec = Exec::Parallel);

// a_{t,k} = ||P_{>=k} phi_t||; dual only.
double progress_measure(const QuantumSystem& s, unsigned k, Exec exec = Exec::Parallel);

struct SuccessProbability {
  double probability = 0.0;
  bool degenerate = false;  // out_k == 0
};

// Probability that the claimed outputs are pairwise distinct and all map to
// one under a primal-domain measurement of the oracle.
SuccessProbability success_probability(const QuantumSystem& s, Exec exec = Exec::Parallel);

}  // namespace pqpow::recording_sim
