#include <bit>
#include <cmath>
#include <sstream>

#include "pqpow/recording_sim.hpp"
#include "reduce.hpp"

namespace pqpow::recording_sim {

namespace {

// Index with a zero bit inserted at position `pos`.
inline std::uint64_t spread(std::uint64_t i, unsigned pos) {
  const std::uint64_t low = i & ((std::uint64_t{1} << pos) - 1);
  return ((i >> pos) << (pos + 1)) | low;
}

void require_domain(const QuantumSystem& s, Domain want, const char* op) {
  if (s.domain() != want) {
    std::ostringstream os;
    os << op << " needs the " << (want == Domain::Primal ? "primal" : "dual") << " domain";
    throw DomainError(os.str());
  }
}

void apply_oracle_layer(std::span<Amplitude> amps, unsigned M, const Gate2& g, Exec exec) {
  const auto half = static_cast<std::int64_t>(amps.size() / 2);
  for (unsigned j = 0; j < M; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
    for (std::int64_t i = 0; i < half; ++i) {
      const std::uint64_t i0 = spread(static_cast<std::uint64_t>(i), j);
      const Amplitude a0 = amps[i0];
      const Amplitude a1 = amps[i0 | bit];
      amps[i0] = g.u00 * a0 + g.u01 * a1;
      amps[i0 | bit] = g.u10 * a0 + g.u11 * a1;
    }
  }
}

}  // namespace

void SystemConfig::validate() const {
  if (m < 1 || m > kMaxInputBits) {
    std::ostringstream os;
    os << "m must lie in [1, " << kMaxInputBits << "], got " << m;
    throw ValidationError(os.str());
  }
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("p must lie in (0,1)");
  if (w < out_k * m) {
    std::ostringstream os;
    os << "workspace w=" << w << " cannot hold " << out_k << " claimed outputs of " << m << " bits";
    throw ValidationError(os.str());
  }
  if (total_qubits() > 40 || dimension() > budget) {
    std::ostringstream os;
    os << "state dimension 2^" << total_qubits() << " exceeds the amplitude budget " << budget;
    throw ResourceError(os.str());
  }
}

Gate2 up_gate(double p, UpFault fault) {
  const double a = std::sqrt(1.0 - p);
  const double b = std::sqrt(p);
  if (fault == UpFault::SignError) return {a, b, b, a};
  return {a, -b, b, a};
}

double unitarity_defect(const Gate2& g) {
  const double d00 = g.u00 * g.u00 + g.u10 * g.u10 - 1.0;
  const double d11 = g.u01 * g.u01 + g.u11 * g.u11 - 1.0;
  const double d01 = g.u00 * g.u01 + g.u10 * g.u11;
  return std::max({std::abs(d00), std::abs(d11), std::abs(d01)});
}

QuantumSystem::QuantumSystem(SystemConfig config, Domain domain, std::vector<Amplitude> amplitudes)
    : config_(config), domain_(domain), amps_(std::move(amplitudes)) {
  config_.validate();
  if (amps_.size() != config_.dimension()) {
    throw ValidationError("amplitude vector does not match the configured dimension");
  }
}

double QuantumSystem::norm(Exec exec) const {
  const Amplitude* a = amps_.data();
  return std::sqrt(detail::block_sum(amps_.size(), exec, [a](std::uint64_t i) { return std::norm(a[i]); }));
}

QuantumSystem new_system(const SystemConfig& config) {
  config.validate();
  std::vector<Amplitude> amps(config.dimension());
  amps[0] = 1.0;
  return QuantumSystem(config, Domain::Dual, std::move(amps));
}

QuantumSystem new_fixed_oracle(const SystemConfig& config, std::uint64_t f) {
  config.validate();
  if (config.M() < 64 && f >> config.M()) throw ValidationError("truth table wider than 2^m");
  std::vector<Amplitude> amps(config.dimension());
  amps[f] = 1.0;
  return QuantumSystem(config, Domain::Primal, std::move(amps));
}

void apply_std_query(QuantumSystem& s, Exec exec) {
  require_domain(s, Domain::Primal, "standard query");
  const unsigned M = s.config().M();
  const auto n_adv = static_cast<std::int64_t>(s.amps_.size() >> M);
  const std::uint64_t block = std::uint64_t{1} << M;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t adv = 0; adv < n_adv; ++adv) {
    const auto a = static_cast<std::uint64_t>(adv);
    if (s.query_y(a) == 0) continue;
    const std::uint64_t bit = std::uint64_t{1} << s.query_x(a);
    Amplitude* base = s.amps_.data() + a * block;
    for (std::uint64_t d = 0; d < block; ++d) {
      if (d & bit) base[d] = -base[d];
    }
  }
  ++s.query_count_;
}

void apply_dual_query(QuantumSystem& s, Exec exec) {
  require_domain(s, Domain::Dual, "dual query");
  const unsigned M = s.config().M();
  // V = U^T Z U acts on D(x) when y = 1.
  const Gate2 u = up_gate(s.config().p, s.config().fault);
  const Gate2 zu{u.u00, u.u01, -u.u10, -u.u11};
  const Gate2 ut = u.transpose();
  const Gate2 v{ut.u00 * zu.u00 + ut.u01 * zu.u10, ut.u00 * zu.u01 + ut.u01 * zu.u11,
                ut.u10 * zu.u00 + ut.u11 * zu.u10, ut.u10 * zu.u01 + ut.u11 * zu.u11};
  const auto n_adv = static_cast<std::int64_t>(s.amps_.size() >> M);
  const std::uint64_t block = std::uint64_t{1} << M;
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t adv = 0; adv < n_adv; ++adv) {
    const auto a = static_cast<std::uint64_t>(adv);
    if (s.query_y(a) == 0) continue;
    const unsigned x = s.query_x(a);
    const std::uint64_t bit = std::uint64_t{1} << x;
    Amplitude* base = s.amps_.data() + a * block;
    for (std::uint64_t i = 0; i < block / 2; ++i) {
      const std::uint64_t d0 = spread(i, x);
      const Amplitude a0 = base[d0];
      const Amplitude a1 = base[d0 | bit];
      base[d0] = v.u00 * a0 + v.u01 * a1;
      base[d0 | bit] = v.u10 * a0 + v.u11 * a1;
    }
  }
  ++s.query_count_;
}

void to_standard(QuantumSystem& s, Exec exec) {
  require_domain(s, Domain::Dual, "to_standard");
  apply_oracle_layer(s.amps_, s.config().M(), up_gate(s.config().p, s.config().fault), exec);
  s.domain_ = Domain::Primal;
}

void to_dual(QuantumSystem& s, Exec exec) {
  require_domain(s, Domain::Primal, "to_dual");
  apply_oracle_layer(s.amps_, s.config().M(), up_gate(s.config().p, s.config().fault).transpose(), exec);
  s.domain_ = Domain::Dual;
}

}  // namespace pqpow::recording_sim
