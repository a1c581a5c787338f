#include "pqpow/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pqpow/log_math.hpp"

namespace pqpow::bounds {

namespace {

constexpr double kE = std::numbers::e;
constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(const std::string& what) { throw PreconditionError(what); }

void require_probability(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    std::ostringstream os;
    os << name << " must lie in (0,1), got " << v;
    fail(os.str());
  }
}

// ln(2(1-p)/(pi k))
double log_stirling_prefactor(double p, std::uint64_t k) {
  return std::log(2.0) + std::log1p(-p) - std::log(kPi * static_cast<double>(k));
}

}  // namespace

void BoundParams::validate() const {
  require_probability(p, "p");
  if (k < 1) fail("k must be >= 1");
  require_probability(eps, "eps");
  if (!(f >= 0.0 && f < 1.0)) {
    std::ostringstream os;
    os << "f must lie in (0,1), got " << f;
    fail(os.str());
  }
}

BoundValue BoundValue::from_log(double log_raw) {
  BoundValue v;
  v.log_raw = log_raw;
  v.raw = std::exp(log_raw);
  v.clamped = std::min(v.raw, 1.0);
  return v;
}

BoundValue kbersearch_bound_exact(const BoundParams& params) {
  params.validate();
  const double p = params.p;
  const std::uint64_t N = params.N;
  const std::uint64_t k = params.k;
  const double half_log_q = 0.5 * std::log1p(-p);

  // sum_{i=0}^{k} (sqrt(1-p))^i C(N,i); terms with i > N vanish.
  const std::uint64_t top = std::min(k, N);
  std::vector<double> terms;
  terms.reserve(top + 1);
  // ln C(N,i) accumulated from ln C(N,i-1) + ln((N-i+1)/i).
  double log_binom = 0.0;
  for (std::uint64_t i = 0; i <= top; ++i) {
    if (i > 0) log_binom += std::log(static_cast<double>(N - i + 1) / static_cast<double>(i));
    terms.push_back(static_cast<double>(i) * half_log_q + log_binom);
  }
  const double log_sum = log_sum_exp(terms);
  const double log_raw =
      std::log(4.0) + std::log1p(-p) + static_cast<double>(k) * std::log(p) + 2.0 * log_sum;
  return BoundValue::from_log(log_raw);
}

BoundValue kbersearch_bound_stirling(const BoundParams& params) {
  params.validate();
  if (params.k < 4 || params.k > params.N) {
    std::ostringstream os;
    os << "Stirling relaxation is only derived for 4 <= k <= N (got k=" << params.k
       << ", N=" << params.N << ")";
    fail(os.str());
  }
  const double k = static_cast<double>(params.k);
  const double N = static_cast<double>(params.N);
  const double log_raw = log_stirling_prefactor(params.p, params.k) + k * std::log(params.p) +
                         2.0 * k * (std::log(N) + 1.0 - std::log(k));
  return BoundValue::from_log(log_raw);
}

ChainOfPowsBound chain_of_pows_bound(const BoundParams& params) {
  params.validate();
  const double k = static_cast<double>(params.k);
  const double Nk = static_cast<double>(params.N) + k;
  // 2k ln((N+k) e sqrt(p) / k)
  const double log_exp_form = 2.0 * k * (std::log(Nk) + 1.0 + 0.5 * std::log(params.p) - std::log(k));
  ChainOfPowsBound out;
  out.exponential_form = BoundValue::from_log(log_exp_form);
  out.closed_form = BoundValue::from_log(log_stirling_prefactor(params.p, params.k) + log_exp_form);
  return out;
}

BoundValue reduction_bound(std::uint64_t N, std::uint64_t k, double p) {
  BoundParams params;
  params.p = p;
  params.N = N + k;
  params.k = k;
  return kbersearch_bound_exact(params);
}

double honest_majority_threshold(double f, double p, double eps) {
  require_probability(f, "f");
  require_probability(p, "p");
  require_probability(eps, "eps");
  return (1.0 - eps) * f * (1.0 - f) / ((1.0 + eps) * kE * std::sqrt(p));
}

double k0_target(double s, double Q, double p, double eps) {
  require_probability(p, "p");
  if (s < 0.0 || Q < 0.0) fail("s and Q must be non-negative");
  return s * (1.0 + eps) * kE * Q * std::sqrt(p);
}

double typical_tail_eps_min(double p) {
  require_probability(p, "p");
  const double esp = kE * std::sqrt(p);
  if (esp >= 1.0) return std::numeric_limits<double>::infinity();
  return esp / (1.0 - esp);
}

BoundValue typical_execution_tail(double s, double Q, double p, double eps) {
  require_probability(p, "p");
  require_probability(eps, "eps");
  const double esp = kE * std::sqrt(p);
  if (esp >= 1.0) fail("typical-execution tail needs e*sqrt(p) < 1");
  const double eps_min = esp / (1.0 - esp);
  if (!(eps > eps_min)) {
    std::ostringstream os;
    os << "typical-execution tail decays only for eps > e*sqrt(p)/(1-e*sqrt(p)) = " << eps_min
       << " (got eps=" << eps << ")";
    fail(os.str());
  }
  const double log_ratio = std::log1p(eps) - std::log1p((1.0 + eps) * esp);
  const double log_raw = -2.0 * kE * (1.0 + eps) * s * Q * std::sqrt(p) * log_ratio;
  return BoundValue::from_log(log_raw);
}

double settlement_ratio(double eps, double f, double c_settle) {
  require_probability(eps, "eps");
  if (!(f > 0.0 && f <= 1.0)) fail("f must lie in (0,1)");
  if (!(c_settle > 0.0)) fail("c_settle must be positive");
  const double denom = (1.0 - eps) * (1.0 - f);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return c_settle * eps * eps / denom;
}

double honest_success_rate(std::uint64_t n, std::uint64_t q, double p, FConvention convention) {
  require_probability(p, "p");
  const double nq = static_cast<double>(n) * static_cast<double>(q);
  if (convention == FConvention::Paper) return nq * p;
  return -std::expm1(nq * std::log1p(-p));
}

ComparisonTable comparison_table(const BoundParams& params, std::vector<std::uint64_t> ks) {
  params.validate();
  if (params.f <= 0.0) fail("comparison table needs f in (0,1)");
  if (params.t >= params.n) fail("comparison table needs t < n");

  ComparisonTable tab;
  tab.params = params;
  const double p = params.p;
  const double eps = params.eps;
  const double f = params.f;
  const double s = static_cast<double>(params.s);
  const double N = static_cast<double>(params.N);
  const double sqrt_p = std::sqrt(p);

  tab.classical_hm_lhs = static_cast<double>(params.t) / static_cast<double>(params.n - params.t);
  tab.classical_hm_rhs = 1.0 - 3.0 * (f + eps);
  tab.classical_hm_holds = tab.classical_hm_lhs < tab.classical_hm_rhs;
  tab.quantum_hm_threshold = honest_majority_threshold(f, p, eps);
  tab.quantum_hm_holds = static_cast<double>(params.Q) <= tab.quantum_hm_threshold;

  tab.classical_expected_adv =
      p * static_cast<double>(params.q) * static_cast<double>(params.t) * s;
  tab.quantum_expected_adv = (1.0 + eps) * kE * sqrt_p * static_cast<double>(params.Q) * s;

  tab.classical_concentration = eps * eps * f * s;
  tab.quantum_concentration = (1.0 - eps) * f * (1.0 - f) * s;

  tab.expected_optimal_gen2 = kE * sqrt_p * N;
  tab.expected_optimal_nons = std::sqrt(kNonsSearchConstant * p) * N;
  tab.expected_optimal_gen1 = 8.0 * tab.expected_optimal_gen2;
  // Per unit N so that N = 0 still reports the ratio.
  tab.expected_optimal_ratio = (8.0 * kE * sqrt_p) / (kE * sqrt_p);

  if (ks.empty()) {
    for (double opt : {tab.expected_optimal_gen2, tab.expected_optimal_gen1}) {
      ks.push_back(std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil((1.0 + eps) * opt))));
    }
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  for (std::uint64_t k : ks) {
    if (k == 0) fail("per-k columns need k >= 1");
    BoundParams row_params = params;
    row_params.k = k;
    Gen1Gen2Row row;
    row.k = k;
    row.gen2 = kbersearch_bound_exact(row_params);
    const double kd = static_cast<double>(k);
    // ln(2 (8 e N sqrt(p) / k)^k + 2^{-k})
    const double log_first = std::log(2.0) + kd * std::log(8.0 * kE * N * sqrt_p / kd);
    const double log_second = -kd * std::log(2.0);
    row.gen1 = BoundValue::from_log(N > 0.0 ? log_add(log_first, log_second) : log_second);
    tab.per_k.push_back(row);
  }
  return tab;
}

}  // namespace pqpow::bounds
