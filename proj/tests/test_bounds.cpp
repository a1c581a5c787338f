#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "pqpow/bounds.hpp"
#include "pqpow/log_math.hpp"

using namespace pqpow;
using namespace pqpow::bounds;

namespace {

BoundParams at(std::uint64_t N, std::uint64_t k, double p) {
  BoundParams params;
  params.N = N;
  params.k = k;
  params.p = p;
  return params;
}

}  // namespace

TEST_CASE("log_binomial") {
  CHECK(log_binomial(5, 0) == 0.0);
  CHECK(log_binomial(5, 5) == 0.0);
  CHECK(log_binomial(100, 5) == doctest::Approx(std::log(75287520.0)).epsilon(1e-12));
  CHECK(log_binomial(100, 5) == doctest::Approx(18.136824941982426).epsilon(1e-12));
  CHECK_THROWS_AS(log_binomial(3, 4), std::domain_error);
  // Large-n path through lgamma.
  const double direct = log_binomial(100000, 4000);
  const double gamma = std::lgamma(100001.0) - std::lgamma(4001.0) - std::lgamma(96001.0);
  CHECK(direct == doctest::Approx(gamma).epsilon(1e-11));
}

TEST_CASE("log_sum_exp") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp({}) == -inf);
  const double both[] = {-inf, -inf};
  CHECK(log_sum_exp(both) == -inf);
  const double terms[] = {1000.0, 1000.0};
  CHECK(log_sum_exp(terms) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_add(std::log(3.0), std::log(5.0)) == doctest::Approx(std::log(8.0)));
}

TEST_CASE("exact Bernoulli-search bound") {
  auto b0 = kbersearch_bound_exact(at(0, 1, 0.25));
  CHECK(b0.raw == doctest::Approx(0.75).epsilon(1e-14));
  auto b1 = kbersearch_bound_exact(at(1, 1, 0.25));
  CHECK(b1.raw == doctest::Approx(0.75 * std::pow(1.0 + std::sqrt(0.75), 2.0)).epsilon(1e-14));
  CHECK(b1.raw == doctest::Approx(2.6115).epsilon(1e-4));
  CHECK(b1.clamped == 1.0);
  // Independent 50-digit evaluation of the 11-term sum.
  CHECK(kbersearch_bound_exact(at(100, 10, 1e-4)).raw ==
        doctest::Approx(1.5062701435819492e-13).epsilon(1e-11));
  auto huge = kbersearch_bound_exact(at(1000000, 50, 1e-6));
  CHECK(std::isfinite(huge.log_raw));
}

TEST_CASE("Stirling relaxation") {
  auto v = kbersearch_bound_stirling(at(4, 4, 0.25));
  const double expected = (2.0 * 0.75 / (4.0 * std::numbers::pi)) * std::pow(0.25, 4) * std::exp(8.0);
  CHECK(v.raw == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kbersearch_bound_stirling(at(100, 10, 1e-4)).log_raw >=
        kbersearch_bound_exact(at(100, 10, 1e-4)).log_raw);
  CHECK_THROWS_AS(kbersearch_bound_stirling(at(10, 3, 0.1)), PreconditionError);
  CHECK_THROWS_AS(kbersearch_bound_stirling(at(5, 6, 0.1)), PreconditionError);
}

TEST_CASE("chain of PoWs bound") {
  auto c = chain_of_pows_bound(at(10, 5, 0.01));
  const double expected = (2.0 * 0.99 / (5.0 * std::numbers::pi)) * std::pow(15.0 * std::numbers::e * 0.1 / 5.0, 10);
  CHECK(c.closed_form.raw == doctest::Approx(expected).epsilon(1e-12));
  CHECK(c.closed_form.raw == doctest::Approx(1.64e-2).epsilon(1e-2));
  CHECK(c.closed_form.log_raw - c.exponential_form.log_raw ==
        doctest::Approx(std::log(2.0 * 0.99 / (5.0 * std::numbers::pi))).epsilon(1e-12));

  const double p = 0.3;
  auto c0 = chain_of_pows_bound(at(0, 1, p));
  CHECK(c0.closed_form.raw ==
        doctest::Approx((2.0 * (1 - p) / std::numbers::pi) * std::numbers::e * std::numbers::e * p));

  // Strictly decreasing in k once k > e sqrt(p) (N + k).
  double prev = chain_of_pows_bound(at(100, 2, 1e-4)).closed_form.log_raw;
  for (std::uint64_t k = 3; k < 60; ++k) {
    const double cur = chain_of_pows_bound(at(100, k, 1e-4)).closed_form.log_raw;
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("reduction bound") {
  CHECK(reduction_bound(0, 1, 0.25).raw == kbersearch_bound_exact(at(1, 1, 0.25)).raw);
  CHECK(reduction_bound(10, 5, 0.01).raw <= chain_of_pows_bound(at(10, 5, 0.01)).closed_form.raw);
  CHECK(reduction_bound(50, 10, 1e-3).raw == doctest::Approx(3.4356338822069722e-08).epsilon(1e-11));
  for (std::uint64_t N : {0, 3, 17, 90}) {
    for (std::uint64_t k : {1, 2, 7}) {
      CHECK(reduction_bound(N, k, 0.05).log_raw == kbersearch_bound_exact(at(N + k, k, 0.05)).log_raw);
    }
  }
}

TEST_CASE("monotonicity of the exact bound") {
  for (double p : {0.25, 1e-2, 1e-4}) {
    for (std::uint64_t k = 1; k <= 12; ++k) {
      double prev = -std::numeric_limits<double>::infinity();
      for (std::uint64_t N = 0; N <= 150; ++N) {
        const double cur = kbersearch_bound_exact(at(N, k, p)).log_raw;
        CHECK(cur >= prev - 1e-12);
        prev = cur;
      }
    }
    for (std::uint64_t N : {10, 50, 150}) {
      const auto k_start = static_cast<std::uint64_t>(std::ceil(std::numbers::e * std::sqrt(p) * N));
      double prev = std::numeric_limits<double>::infinity();
      for (std::uint64_t k = std::max<std::uint64_t>(1, k_start); k <= N; ++k) {
        const double cur = kbersearch_bound_exact(at(N, k, p)).log_raw;
        CHECK(cur <= prev + 1e-12);
        prev = cur;
      }
    }
  }
}

TEST_CASE("BoundValue consistency") {
  for (std::uint64_t N : {0, 5, 40}) {
    for (std::uint64_t k : {1, 3, 8}) {
      auto v = kbersearch_bound_exact(at(N, k, 0.1));
      CHECK(v.raw >= 0.0);
      CHECK(v.clamped >= 0.0);
      CHECK(v.clamped <= 1.0);
      CHECK(v.clamped == std::min(v.raw, 1.0));
      CHECK(std::exp(v.log_raw) == doctest::Approx(v.raw).epsilon(1e-9));
    }
  }
}

TEST_CASE("honest majority threshold") {
  CHECK(honest_majority_threshold(0.03, 1e-6, 0.1) ==
        doctest::Approx(0.9 * 0.03 * 0.97 / (1.1 * std::numbers::e * 1e-3)).epsilon(1e-14));
  CHECK(honest_majority_threshold(0.03, 1e-6, 0.1) == doctest::Approx(8.760).epsilon(2e-4));
  CHECK(honest_majority_threshold(0.5, 0.25, 0.5) == doctest::Approx(0.0613).epsilon(1e-3));
  for (double p : {1e-6, 1e-3, 0.01}) {
    const double a = honest_majority_threshold(0.1, p, 0.2);
    const double b = honest_majority_threshold(0.1, 4 * p, 0.2);
    CHECK(std::abs(2 * b - a) <= 1e-12 * a);
  }
  CHECK_THROWS_AS(honest_majority_threshold(1.5, 0.1, 0.1), PreconditionError);
}

TEST_CASE("k0 and typical-execution tail") {
  CHECK(k0_target(100, 10, 1e-6, 0.1) == doctest::Approx(2.990).epsilon(1e-3));
  CHECK(k0_target(0, 10, 1e-6, 0.1) == 0.0);
  CHECK(k0_target(200, 10, 1e-6, 0.1) == doctest::Approx(2 * k0_target(100, 10, 1e-6, 0.1)));
  CHECK(typical_tail_eps_min(0.01) == doctest::Approx(0.3733).epsilon(1e-3));
  CHECK_THROWS_AS(typical_execution_tail(10, 1, 0.01, 0.3), PreconditionError);
  // 50-digit evaluation.
  CHECK(typical_execution_tail(1e4, 1, 1e-6, 0.5).raw ==
        doctest::Approx(6.0833455904330126e-15).epsilon(1e-10));
}

TEST_CASE("settlement ratio") {
  CHECK(settlement_ratio(0.1, 0.03) == doctest::Approx(0.01 / (0.9 * 0.97)).epsilon(1e-14));
  CHECK(settlement_ratio(0.1, 0.03) == doctest::Approx(0.011455).epsilon(1e-4));
  CHECK(settlement_ratio(1e-9, 0.03) < 1e-17);
  CHECK(std::isinf(settlement_ratio(0.1, 1.0)));
  CHECK(settlement_ratio(0.1, 0.03, 3.0) == doctest::Approx(3 * settlement_ratio(0.1, 0.03)));
}

TEST_CASE("honest success conventions") {
  CHECK(honest_success_rate(16, 4, 1e-3, FConvention::Paper) == doctest::Approx(0.064));
  CHECK(honest_success_rate(16, 4, 1e-3, FConvention::Exact) ==
        doctest::Approx(1 - std::pow(1 - 1e-3, 64)).epsilon(1e-14));
}

TEST_CASE("comparison table") {
  BoundParams params;
  params.p = 1e-4;
  params.N = 1000;
  params.eps = 0.1;
  params.f = 0.03;
  params.n = 100;
  params.t = 30;
  params.q = 4;
  params.Q = 5;
  params.s = 200;
  auto tab = comparison_table(params);
  CHECK(tab.expected_optimal_gen2 == doctest::Approx(27.18).epsilon(1e-3));
  CHECK(tab.expected_optimal_ratio == 8.0);
  CHECK(tab.expected_optimal_gen1 / tab.expected_optimal_gen2 == 8.0);
  CHECK(tab.expected_optimal_nons == doctest::Approx(std::sqrt(8e-4) * 1000));
  CHECK(tab.classical_hm_lhs == doctest::Approx(30.0 / 70.0));
  CHECK(tab.classical_hm_rhs == doctest::Approx(1 - 3 * 0.13));
  CHECK(tab.classical_hm_holds == (30.0 / 70.0 < 1 - 3 * 0.13));
  CHECK(tab.quantum_expected_adv == doctest::Approx(1.1 * std::numbers::e * 0.01 * 5 * 200));
  CHECK(tab.classical_expected_adv == doctest::Approx(1e-4 * 4 * 30 * 200));
  REQUIRE(tab.per_k.size() == 2);
  CHECK(tab.per_k[0].k == 30);
  CHECK(tab.per_k[1].k == 240);
  for (const auto& row : tab.per_k) {
    const double kd = static_cast<double>(row.k);
    const double gen1 = 2 * std::pow(8 * std::numbers::e * 1000 * 0.01 / kd, kd) + std::pow(0.5, kd);
    CHECK(row.gen1.raw == doctest::Approx(gen1).epsilon(1e-10));
  }
  params.f = 0.0;
  CHECK_THROWS_AS(comparison_table(params), PreconditionError);
}
