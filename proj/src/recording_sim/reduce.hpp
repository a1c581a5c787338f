#pragma once

#include <cstdint>
#include <vector>

#include "pqpow/recording_sim.hpp"

namespace pqpow::recording_sim::detail {

// Sum of f(i) over [0, n) with a fixed blocking, so serial and threaded runs
// add the same partial sums in the same order.
template <class F>
double block_sum(std::uint64_t n, Exec exec, F f) {
  constexpr std::uint64_t kBlock = 1U << 12;
  const std::uint64_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlock;
    const std::uint64_t hi = lo + kBlock < n ? lo + kBlock : n;
    double acc = 0.0;
    for (std::uint64_t i = lo; i < hi; ++i) acc += f(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace pqpow::recording_sim::detail
