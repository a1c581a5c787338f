#include "pqpow/log_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pqpow {

namespace {

// Below this many factors the product form is summed term by term; above it
// lgamma is accurate to well under 1e-12 relative because the result itself
// is large.
constexpr std::uint64_t kDirectSumLimit = 4096;

}  // namespace

double log_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) {
    throw std::domain_error("log_binomial: k=" + std::to_string(k) +
                            " exceeds n=" + std::to_string(n));
  }
  const std::uint64_t r = std::min(k, n - k);
  if (r == 0) return 0.0;
  if (r <= kDirectSumLimit) {
    // C(n, r) = prod_{i=1}^{r} (n - r + i) / i
    // ln((n-r+i)/i) = log1p((n-r)/i) keeps precision when n-r is small.
    const double base = static_cast<double>(n - r);
    double acc = 0.0;
    for (std::uint64_t i = 1; i <= r; ++i) {
      acc += std::log1p(base / static_cast<double>(i));
    }
    return acc;
  }
  const double nn = static_cast<double>(n);
  const double rr = static_cast<double>(r);
  return std::lgamma(nn + 1.0) - std::lgamma(rr + 1.0) - std::lgamma(nn - rr + 1.0);
}

double log_sum_exp(std::span<const double> terms) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (terms.empty()) return neg_inf;
  const double max_term = *std::max_element(terms.begin(), terms.end());
  if (max_term == neg_inf) return neg_inf;
  if (std::isinf(max_term)) return max_term;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return max_term + std::log(sum);
}

double log_add(double a, double b) {
  const double pair[2] = {a, b};
  return log_sum_exp(pair);
}

}  // namespace pqpow
