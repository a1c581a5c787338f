#include <algorithm>
#include <sstream>

#include "pqpow/recording_sim.hpp"

namespace pqpow::recording_sim {

namespace {

constexpr unsigned kMaxGateQubits = 12;

}  // namespace

void require_unitary(const Eigen::MatrixXcd& u, double tol) {
  if (u.rows() != u.cols()) throw ValidationError("adversary unitary must be square");
  const Eigen::MatrixXcd defect = u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols());
  const double worst = defect.cwiseAbs().maxCoeff();
  if (!(worst <= tol)) {
    std::ostringstream os;
    os << "matrix is not unitary: max |U^dagger U - I| = " << worst;
    throw ValidationError(os.str());
  }
}

void apply_adversary_gate(QuantumSystem& s, std::span<const unsigned> qubits, const Eigen::MatrixXcd& u,
                          Exec exec) {
  const unsigned A = s.config().adversary_qubits();
  const unsigned M = s.config().M();
  const auto r = static_cast<unsigned>(qubits.size());
  if (r == 0 || r > kMaxGateQubits) throw ValidationError("gate must act on 1..12 qubits");
  const std::uint64_t local = std::uint64_t{1} << r;
  if (static_cast<std::uint64_t>(u.rows()) != local) throw ValidationError("gate size does not match qubit count");
  for (unsigned q : qubits) {
    if (q >= A) throw ValidationError("gate qubit outside the adversary registers");
  }
  std::vector<unsigned> sorted(qubits.begin(), qubits.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("gate qubits must be distinct");
  }
  require_unitary(u);

  std::vector<std::uint64_t> offset(local, 0);
  for (std::uint64_t l = 0; l < local; ++l) {
    for (unsigned b = 0; b < r; ++b) {
      if ((l >> b) & 1U) offset[l] |= std::uint64_t{1} << (M + qubits[b]);
    }
  }

  auto amps = s.amplitudes();
  const auto bases = static_cast<std::int64_t>(amps.size() >> r);
#pragma omp parallel if (exec == Exec::Parallel)
  {
    Eigen::VectorXcd in(static_cast<Eigen::Index>(local));
    Eigen::VectorXcd out(static_cast<Eigen::Index>(local));
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < bases; ++i) {
      std::uint64_t base = static_cast<std::uint64_t>(i);
      for (unsigned q : sorted) {
        const unsigned pos = M + q;
        const std::uint64_t low = base & ((std::uint64_t{1} << pos) - 1);
        base = ((base >> pos) << (pos + 1)) | low;
      }
      for (std::uint64_t l = 0; l < local; ++l) in[static_cast<Eigen::Index>(l)] = amps[base | offset[l]];
      out.noalias() = u * in;
      for (std::uint64_t l = 0; l < local; ++l) amps[base | offset[l]] = out[static_cast<Eigen::Index>(l)];
    }
  }
}

void apply_conditional_gate(QuantumSystem& s, unsigned qubit, const Eigen::Matrix2cd& u,
                            std::span<const std::uint8_t> control, Exec exec) {
  const unsigned A = s.config().adversary_qubits();
  const unsigned M = s.config().M();
  if (qubit >= A) throw ValidationError("gate qubit outside the adversary registers");
  if (control.size() != (std::size_t{1} << A)) throw ValidationError("control table has the wrong size");
  require_unitary(u);
  const std::uint64_t tbit = std::uint64_t{1} << qubit;
  const std::uint64_t block = std::uint64_t{1} << M;
  auto amps = s.amplitudes();
  const auto n_adv = static_cast<std::int64_t>(std::uint64_t{1} << A);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t adv = 0; adv < n_adv; ++adv) {
    const auto a0 = static_cast<std::uint64_t>(adv);
    if ((a0 & tbit) || !control[a0]) continue;
    Amplitude* lo = amps.data() + a0 * block;
    Amplitude* hi = amps.data() + (a0 | tbit) * block;
    for (std::uint64_t d = 0; d < block; ++d) {
      const Amplitude v0 = lo[d];
      const Amplitude v1 = hi[d];
      lo[d] = u(0, 0) * v0 + u(0, 1) * v1;
      hi[d] = u(1, 0) * v0 + u(1, 1) * v1;
    }
  }
}

void apply_adversary_permutation(QuantumSystem& s, std::span<const std::uint64_t> perm, Exec exec) {
  const unsigned A = s.config().adversary_qubits();
  const unsigned M = s.config().M();
  const std::uint64_t n_adv = std::uint64_t{1} << A;
  if (perm.size() != n_adv) throw ValidationError("permutation has the wrong size");
  std::vector<std::uint8_t> seen(n_adv, 0);
  for (std::uint64_t v : perm) {
    if (v >= n_adv || seen[v]) throw ValidationError("adversary map is not a permutation");
    seen[v] = 1;
  }
  const std::uint64_t block = std::uint64_t{1} << M;
  auto amps = s.amplitudes();
  std::vector<Amplitude> out(amps.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t adv = 0; adv < static_cast<std::int64_t>(n_adv); ++adv) {
    const auto a = static_cast<std::uint64_t>(adv);
    std::copy_n(amps.data() + a * block, block, out.data() + perm[a] * block);
  }
  std::copy(out.begin(), out.end(), amps.begin());
}

void apply_adversary_unitary(QuantumSystem& s, const Eigen::MatrixXcd& u, Exec exec) {
  const unsigned A = s.config().adversary_qubits();
  const unsigned M = s.config().M();
  const std::uint64_t n_adv = std::uint64_t{1} << A;
  if (static_cast<std::uint64_t>(u.rows()) != n_adv) {
    throw ValidationError("adversary unitary must act on the full adversary space");
  }
  require_unitary(u);
  const std::uint64_t block = std::uint64_t{1} << M;
  auto amps = s.amplitudes();
#pragma omp parallel if (exec == Exec::Parallel)
  {
    Eigen::VectorXcd in(static_cast<Eigen::Index>(n_adv));
    Eigen::VectorXcd out(static_cast<Eigen::Index>(n_adv));
#pragma omp for schedule(static)
    for (std::int64_t d = 0; d < static_cast<std::int64_t>(block); ++d) {
      const auto dd = static_cast<std::uint64_t>(d);
      for (std::uint64_t a = 0; a < n_adv; ++a) in[static_cast<Eigen::Index>(a)] = amps[a * block + dd];
      out.noalias() = u * in;
      for (std::uint64_t a = 0; a < n_adv; ++a) amps[a * block + dd] = out[static_cast<Eigen::Index>(a)];
    }
  }
}

}  // namespace pqpow::recording_sim
