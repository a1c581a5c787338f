#include "pqpow/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "pqpow/bounds.hpp"
#include "pqpow/log_math.hpp"

namespace pqpow::recording_sim {

namespace {

constexpr double kEqualityTol = 1e-10;
constexpr double kLemmaTol = 1e-9;
constexpr double kUnitaryTol = 1e-12;
constexpr std::uint64_t kSerializeStateMax = 256;

class Recorder {
 public:
  explicit Recorder(VerifyReport& rep) : rep_(rep) {}

  void tolerance(const std::string& family, double tol) { rep_.families[family].tolerance = tol; }

  // Records value <= allowed + tol.
  void check(const std::string& family, double value, double allowed, double tol, const nlohmann::json& where) {
    FamilyStats& st = rep_.families[family];
    st.tolerance = tol;
    const double excess = value - allowed;
    if (st.checks == 0 || excess > st.worst) st.worst = excess;
    ++st.checks;
    if (!(excess <= tol)) {
      ++st.violations;
      ++rep_.total_violations;
      if (rep_.violations.size() < kMaxListed) {
        nlohmann::json w = where;
        w["value"] = value;
        w["allowed"] = allowed;
        rep_.violations.push_back({family, std::move(w), excess});
      }
    }
  }

  void equal(const std::string& family, double a, double b, double tol, const nlohmann::json& where) {
    check(family, std::abs(a - b), 0.0, tol, where);
  }

 private:
  VerifyReport& rep_;
};

nlohmann::json state_json(const QuantumSystem& s) {
  if (s.amplitudes().size() > kSerializeStateMax) return nullptr;
  nlohmann::json amps = nlohmann::json::array();
  for (const Amplitude& a : s.amplitudes()) amps.push_back({a.real(), a.imag()});
  return {{"domain", s.domain() == Domain::Dual ? "dual" : "primal"}, {"amplitudes", std::move(amps)}};
}

double bernoulli_weight(std::uint64_t f, unsigned M, double p) {
  const int ones = std::popcount(f);
  return std::pow(p, ones) * std::pow(1.0 - p, static_cast<int>(M) - ones);
}

// C(n, r) p^a (1-p)^b via logs; zero when r > n.
double binom_term(std::uint64_t n, std::uint64_t r, double log_factor) {
  if (r > n) return 0.0;
  return std::exp(log_binomial(n, r) + log_factor);
}

std::vector<unsigned> ks_for(const StrategySpec& spec, std::uint64_t N, unsigned k_max, unsigned M) {
  if (spec.kind == StrategyKind::GroverK1) return {1};
  const auto top = static_cast<unsigned>(std::min<std::uint64_t>({std::max<std::uint64_t>(N, 1), k_max, M}));
  std::vector<unsigned> ks;
  for (unsigned k = 1; k <= top; ++k) ks.push_back(k);
  return ks;
}

void check_strategy_case(Recorder& rec, const VerifyGrid& grid, const SystemConfig& config,
                         const StrategySpec& spec, std::uint64_t N, Exec exec) {
  const unsigned k = config.out_k;
  const double p = config.p;
  const StrategyReport rep = run_strategy(config, spec, N, exec);
  nlohmann::json where = {{"m", config.m}, {"p", p}, {"k", k}, {"N", N}, {"strategy", spec.id()}};

  rec.check("norm", rep.max_norm_drift, 0.0, kEqualityTol, where);

  const double coupling = 2.0 * std::sqrt(p * (1.0 - p));
  const double log_sqrt_p = 0.5 * std::log(p);
  const double log_sqrt_q = 0.5 * std::log1p(-p);
  for (std::uint64_t t = 0; t < N; ++t) {
    nlohmann::json w = where;
    w["t"] = t;
    w["report"] = rep.to_json();
    rec.check("recurrence", rep.trajectory[t + 1], rep.trajectory[t] + coupling * rep.p0_norms[t], kLemmaTol, w);

    // beta cases for the state before query t + 1, i = t queries made.
    const std::uint64_t i = t;
    double allowed = 0.0;
    if (i + 1 < k) {
      allowed = 0.0;
    } else if (i + 1 == k) {
      allowed = std::exp((k - 1) * log_sqrt_p);
    } else {
      allowed = binom_term(i, k - 1, (k - 1) * log_sqrt_p + static_cast<double>(i - k + 1) * log_sqrt_q);
    }
    w["i"] = i;
    rec.check("beta_cases", rep.p0_norms[t], allowed, kLemmaTol, w);
  }
  for (std::uint64_t t = 0; t <= N; ++t) {
    nlohmann::json w = where;
    w["t"] = t;
    const double allowed = 2.0 * binom_term(t, k, log_sqrt_q + k * log_sqrt_p);
    if (rep.trajectory[t] > allowed + kLemmaTol) w["report"] = rep.to_json();
    rec.check("progress_bound", rep.trajectory[t], allowed, kLemmaTol, w);
  }
  {
    nlohmann::json w = where;
    if (rep.success > rep.bound + kLemmaTol) w["report"] = rep.to_json();
    rec.check("final_bound", rep.success, rep.bound, kLemmaTol, w);
  }

  auto strategy = make_strategy(spec, config, N);
  QuantumSystem primal = new_system(config);
  to_standard(primal, exec);
  evolve(primal, *strategy, N, exec);
  {
    nlohmann::json w = where;
    w["state"] = state_json(primal);
    rec.equal("domain_equivalence", success_probability(primal, exec).probability, rep.success, kEqualityTol, w);
  }

  if (config.m <= grid.mixture_max_m) {
    const unsigned M = config.M();
    double avg = 0.0;
    for (std::uint64_t f = 0; f < (std::uint64_t{1} << M); ++f) {
      QuantumSystem fixed = new_fixed_oracle(config, f);
      evolve(fixed, *strategy, N, exec);
      avg += bernoulli_weight(f, M, p) * success_probability(fixed, exec).probability;
    }
    rec.equal("classical_mixture", avg, rep.success, kEqualityTol, where);
  }
}

// Dual state whose support has, for every adversary word with distinct
// claimed inputs and every assignment to the other oracle positions, a
// single pattern with i ones on the claimed positions.
QuantumSystem fixed_pattern_state(const SystemConfig& config, unsigned i, std::mt19937_64& rng) {
  std::vector<Amplitude> amps(config.dimension());
  const unsigned M = config.M();
  const unsigned k = config.out_k;
  const std::uint64_t n_adv = std::uint64_t{1} << config.adversary_qubits();
  std::normal_distribution<double> normal(0.0, 1.0);
  QuantumSystem probe(config, Domain::Dual, std::vector<Amplitude>(config.dimension()));
  std::vector<unsigned> order(k);
  for (std::uint64_t adv = 0; adv < n_adv; ++adv) {
    std::uint64_t mask = 0;
    bool distinct = true;
    std::vector<unsigned> slots(k);
    for (unsigned s = 0; s < k; ++s) {
      slots[s] = probe.claimed(adv, s);
      const std::uint64_t bit = std::uint64_t{1} << slots[s];
      distinct = distinct && !(mask & bit);
      mask |= bit;
    }
    if (!distinct) continue;
    for (std::uint64_t rest = 0; rest < (std::uint64_t{1} << M); ++rest) {
      if (rest & mask) continue;
      for (unsigned s = 0; s < k; ++s) order[s] = s;
      std::shuffle(order.begin(), order.end(), rng);
      std::uint64_t d = rest;
      for (unsigned s = 0; s < i; ++s) d |= std::uint64_t{1} << slots[order[s]];
      amps[(adv << M) | d] = {normal(rng), normal(rng)};
    }
  }
  double norm = 0.0;
  for (const Amplitude& a : amps) norm += std::norm(a);
  norm = std::sqrt(norm);
  for (Amplitude& a : amps) a /= norm;
  return QuantumSystem(config, Domain::Dual, std::move(amps));
}

QuantumSystem random_state(const SystemConfig& config, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Amplitude> amps(config.dimension());
  double norm = 0.0;
  for (Amplitude& a : amps) {
    a = {normal(rng), normal(rng)};
    norm += std::norm(a);
  }
  norm = std::sqrt(norm);
  for (Amplitude& a : amps) a /= norm;
  return QuantumSystem(config, Domain::Dual, std::move(amps));
}

void check_projection_lemmas(Recorder& rec, const VerifyGrid& grid, Exec exec) {
  std::mt19937_64 rng(grid.seed ^ 0x9e3779b97f4a7c15ULL);
  for (unsigned m : grid.ms) {
    for (double p : grid.ps) {
      const unsigned M = 1U << m;
      for (unsigned k = 1; k <= std::min(grid.k_max, M); ++k) {
        SystemConfig config;
        config.m = m;
        config.p = p;
        config.out_k = k;
        config.w = k * m;
        config.budget = std::min<std::uint64_t>(grid.budget, std::uint64_t{1} << 18);
        config.fault = grid.fault;
        if (config.dimension() > config.budget) continue;
        const double a = std::sqrt(1.0 - p);
        const double b = std::sqrt(p);
        for (std::uint64_t sample = 0; sample < grid.pi_lemma_samples; ++sample) {
          nlohmann::json where = {{"m", m}, {"p", p}, {"k", k}, {"sample", sample}};
          QuantumSystem general = random_state(config, rng);
          double total = 0.0;
          for (unsigned i = 0; i <= k; ++i) total += std::pow(projector_norm(general, {ProjKind::Xi, i}, exec), 2);
          rec.equal("xi_resolution", total, 1.0, kEqualityTol, where);

          for (unsigned i = 0; i <= k; ++i) {
            QuantumSystem phi = fixed_pattern_state(config, i, rng);
            const double xi_norm = projector_norm(phi, {ProjKind::Xi, i}, exec);
            QuantumSystem rotated = project(phi, {ProjKind::Xi, i}, exec);
            to_standard(rotated, exec);
            const double lhs = projector_norm(rotated, {ProjKind::Pi, k}, exec);
            const double rhs = std::pow(a, i) * std::pow(b, k - i) * xi_norm;
            nlohmann::json w = where;
            w["i"] = i;
            rec.equal("pi_lemma", lhs, rhs, kLemmaTol, w);
          }
        }
      }
    }
  }
}

}  // namespace

VerifyReport verify_lemmas(const VerifyGrid& grid, Exec exec) {
  VerifyReport report;
  Recorder rec(report);
  for (const char* fam : {"unitarity", "norm", "domain_equivalence", "classical_mixture"}) {
    rec.tolerance(fam, std::string(fam) == "unitarity" ? kUnitaryTol : kEqualityTol);
  }
  for (const char* fam : {"recurrence", "beta_cases", "progress_bound", "final_bound", "pi_lemma"}) {
    rec.tolerance(fam, kLemmaTol);
  }
  rec.tolerance("xi_resolution", kEqualityTol);

  std::vector<double> ps = grid.ps;
  for (int i = 1; i <= 9; ++i) ps.push_back(i / 10.0);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  for (double p : ps) {
    rec.check("unitarity", unitarity_defect(up_gate(p, grid.fault)), 0.0, kUnitaryTol,
              {{"p", p}, {"gate", "U_p"}});
  }

  for (unsigned m : grid.ms) {
    for (double p : grid.ps) {
      for (const StrategySpec& spec : grid.strategies) {
        for (std::uint64_t N = 0; N <= grid.n_max; ++N) {
          for (unsigned k : ks_for(spec, N, grid.k_max, 1U << m)) {
            SystemConfig config = strategy_config(spec, m, p, k);
            config.budget = grid.budget;
            config.fault = grid.fault;
            if (config.dimension() > config.budget) continue;
            ++report.cases;
            check_strategy_case(rec, grid, config, spec, N, exec);
          }
        }
      }
    }
  }
  check_projection_lemmas(rec, grid, exec);
  return report;
}

VerifyReport verify_reduction(const ReductionGrid& grid, Exec exec) {
  VerifyReport report;
  Recorder rec(report);
  rec.tolerance("reduction", kLemmaTol);
  const StrategySpec spec{StrategyKind::ClassicalChained, 0};
  for (unsigned m : grid.ms) {
    const unsigned M = 1U << m;
    for (double p : grid.ps) {
      for (unsigned k = 1; k <= std::min(grid.k_max, M); ++k) {
        SystemConfig config = strategy_config(spec, m, p, k);
        config.budget = grid.budget;
        if (config.dimension() > config.budget) continue;
        for (std::uint64_t N = 0; N <= M; ++N) {
          ++report.cases;
          auto strategy = make_strategy(spec, config, N);
          QuantumSystem s = new_system(config);
          evolve(s, *strategy, N, exec);
          const double success = success_probability(s, exec).probability;
          const double bound = bounds::reduction_bound(N, k, p).clamped;
          rec.check("reduction", success, bound, kLemmaTol,
                    {{"m", m}, {"p", p}, {"k", k}, {"N", N}, {"success", success}});
        }
      }
    }
  }
  return report;
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json fams = nlohmann::json::object();
  for (const auto& [name, st] : families) {
    fams[name] = {{"checks", st.checks},
                  {"violations", st.violations},
                  {"worst_excess", st.checks ? nlohmann::json(st.worst) : nlohmann::json(nullptr)},
                  {"tolerance", st.tolerance}};
  }
  nlohmann::json list = nlohmann::json::array();
  for (const Violation& v : violations) {
    list.push_back({{"family", v.family}, {"excess", v.excess}, {"where", v.where}});
  }
  return {{"ok", ok()},
          {"cases", cases},
          {"total_violations", total_violations},
          {"families", std::move(fams)},
          {"violations", std::move(list)}};
}

}  // namespace pqpow::recording_sim
