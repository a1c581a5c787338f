#include <bit>
#include <sstream>

#include "pqpow/recording_sim.hpp"
#include "reduce.hpp"

namespace pqpow::recording_sim {

namespace {

// Predicate on a basis index for one projector.
struct Selector {
  const QuantumSystem& s;
  Projector proj;
  std::uint64_t oracle_mask;
  unsigned M;

  bool operator()(std::uint64_t idx) const {
    const std::uint64_t d = idx & oracle_mask;
    const std::uint64_t adv = idx >> M;
    const auto weight = static_cast<unsigned>(std::popcount(d));
    switch (proj.kind) {
      case ProjKind::Eq:
        return weight == proj.k;
      case ProjKind::Ge:
        return weight >= proj.k;
      case ProjKind::Le:
        return weight <= proj.k;
      case ProjKind::P0:
      case ProjKind::P1: {
        if (weight != proj.k || s.query_y(adv) == 0) return false;
        const bool one = (d >> s.query_x(adv)) & 1U;
        return proj.kind == ProjKind::P1 ? one : !one;
      }
      case ProjKind::Pi: {
        std::uint64_t mask = 0;
        for (unsigned i = 0; i < s.config().out_k; ++i) mask |= std::uint64_t{1} << s.claimed(adv, i);
        return (d & mask) == mask;
      }
      case ProjKind::Xi: {
        unsigned ones = 0;
        for (unsigned i = 0; i < s.config().out_k; ++i) ones += (d >> s.claimed(adv, i)) & 1U;
        return ones == proj.k;
      }
    }
    return false;
  }
};

void check_projector(const QuantumSystem& s, Projector proj) {
  const bool primal = proj.kind == ProjKind::Pi;
  const Domain want = primal ? Domain::Primal : Domain::Dual;
  if (s.domain() != want) {
    throw DomainError(primal ? "Pi is evaluated in the primal domain" : "this projector is evaluated in the dual domain");
  }
  if (proj.kind == ProjKind::Xi && proj.k > s.config().out_k) {
    std::ostringstream os;
    os << "Xi index " << proj.k << " exceeds out_k=" << s.config().out_k;
    throw ValidationError(os.str());
  }
  if (proj.kind != ProjKind::Xi && proj.kind != ProjKind::Pi && proj.k > s.config().M()) {
    std::ostringstream os;
    os << "weight index " << proj.k << " exceeds M=" << s.config().M();
    throw ValidationError(os.str());
  }
}

}  // namespace

QuantumSystem project(const QuantumSystem& s, Projector proj, Exec exec) {
  check_projector(s, proj);
  const Selector sel{s, proj, s.oracle_mask(), s.config().M()};
  auto in = s.amplitudes();
  std::vector<Amplitude> out(in.size());
  const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    if (sel(idx)) out[idx] = in[idx];
  }
  return QuantumSystem(s.config(), s.domain(), std::move(out));
}

double projector_norm(const QuantumSystem& s, Projector proj, Exec exec) {
  check_projector(s, proj);
  const Selector sel{s, proj, s.oracle_mask(), s.config().M()};
  const Amplitude* a = s.amplitudes().data();
  return std::sqrt(detail::block_sum(s.amplitudes().size(), exec,
                                     [&](std::uint64_t i) { return sel(i) ? std::norm(a[i]) : 0.0; }));
}

double progress_measure(const QuantumSystem& s, unsigned k, Exec exec) {
  if (s.domain() != Domain::Dual) throw DomainError("progress measure is defined in the dual domain");
  if (k > s.config().M()) return 0.0;
  return projector_norm(s, {ProjKind::Ge, k}, exec);
}

SuccessProbability success_probability(const QuantumSystem& s, Exec exec) {
  const unsigned k = s.config().out_k;
  if (k == 0) return {1.0, true};
  if (s.domain() == Domain::Dual) {
    QuantumSystem primal = s;
    to_standard(primal, exec);
    return success_probability(primal, exec);
  }
  const unsigned M = s.config().M();
  const std::uint64_t oracle_mask = s.oracle_mask();
  const Amplitude* a = s.amplitudes().data();
  const double prob = detail::block_sum(s.amplitudes().size(), exec, [&](std::uint64_t idx) {
    const std::uint64_t adv = idx >> M;
    std::uint64_t mask = 0;
    for (unsigned i = 0; i < k; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << s.claimed(adv, i);
      if (mask & bit) return 0.0;
      mask |= bit;
    }
    return ((idx & oracle_mask) & mask) == mask ? std::norm(a[idx]) : 0.0;
  });
  return {prob, false};
}

}  // namespace pqpow::recording_sim
