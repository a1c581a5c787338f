#pragma once

#include <cstdint>
#include <span>

namespace pqpow {

// ln C(n, k). Throws std::domain_error when k > n.
double log_binomial(std::uint64_t n, std::uint64_t k);

// log(sum_i exp(terms[i])); -inf for an empty span or all -inf terms.
double log_sum_exp(std::span<const double> terms);

// log(exp(a) + exp(b))
double log_add(double a, double b);

}  // namespace pqpow
