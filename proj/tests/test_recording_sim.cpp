#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>

#include "pqpow/bounds.hpp"
#include "pqpow/recording_sim.hpp"
#include "pqpow/strategies.hpp"

using namespace pqpow::recording_sim;

namespace {

SystemConfig cfg(unsigned m, unsigned w, double p, unsigned out_k = 0) {
  SystemConfig c;
  c.m = m;
  c.w = w;
  c.p = p;
  c.out_k = out_k;
  return c;
}

double max_diff(const QuantumSystem& a, const QuantumSystem& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.amplitudes().size(); ++i) {
    worst = std::max(worst, std::abs(a.amplitudes()[i] - b.amplitudes()[i]));
  }
  return worst;
}

double bernoulli_weight(std::uint64_t f, unsigned M, double p) {
  const int ones = std::popcount(f);
  return std::pow(p, ones) * std::pow(1 - p, static_cast<int>(M) - ones);
}

}  // namespace

TEST_CASE("U_p gate") {
  for (double p = 0.1; p < 0.95; p += 0.1) CHECK(unitarity_defect(up_gate(p)) <= 1e-12);
  auto h = up_gate(0.5);
  CHECK(h.u00 == doctest::Approx(std::sqrt(0.5)));
  CHECK(h.u10 == doctest::Approx(std::sqrt(0.5)));
  CHECK(h.u01 == doctest::Approx(-std::sqrt(0.5)));
  CHECK(h.u11 == doctest::Approx(std::sqrt(0.5)));
  CHECK(unitarity_defect(up_gate(0.25, UpFault::SignError)) > 0.1);
}

TEST_CASE("new system and domain conversion") {
  auto s = new_system(cfg(1, 0, 0.25));
  CHECK(s.amplitudes().size() == 16);
  CHECK(s.amplitudes()[0] == Amplitude(1.0));
  CHECK(s.norm() == doctest::Approx(1.0));
  CHECK(s.domain() == Domain::Dual);
  CHECK(s.query_count() == 0);
  auto primal = s;
  to_standard(primal);
  CHECK(primal.amplitudes()[0].real() == doctest::Approx(0.75));
  CHECK(primal.amplitudes()[1].real() == doctest::Approx(std::sqrt(0.1875)));
  CHECK(primal.amplitudes()[2].real() == doctest::Approx(std::sqrt(0.1875)));
  CHECK(primal.amplitudes()[3].real() == doctest::Approx(0.25));
  to_dual(primal);
  CHECK(max_diff(primal, s) <= 1e-12);
  CHECK_THROWS_AS(to_dual(s), DomainError);
  CHECK_THROWS_AS(apply_std_query(s), DomainError);

  auto big = cfg(2, 2, 0.3);
  auto b = new_system(big);
  to_standard(b);
  for (std::uint64_t f = 0; f < 16; ++f) {
    CHECK(std::norm(b.amplitudes()[f]) == doctest::Approx(bernoulli_weight(f, 4, 0.3)).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(cfg(5, 0, 0.2).validate(), ValidationError);
  CHECK_THROWS_AS(cfg(2, 1, 0.2, 1).validate(), ValidationError);
  auto c = cfg(4, 6, 0.2);
  CHECK_THROWS_AS(c.validate(), ResourceError);
  c.budget = std::uint64_t{1} << 30;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("dual query local action") {
  auto c = cfg(1, 0, 0.25);
  auto s = new_system(c);
  // y is adversary qubit w = 0; set y = 1.
  const unsigned y = 0;
  Eigen::MatrixXcd flip(2, 2);
  flip << 0, 1, 1, 0;
  apply_adversary_gate(s, std::span<const unsigned>(&y, 1), flip);
  auto y0 = new_system(c);
  apply_dual_query(y0);
  CHECK(y0.amplitudes()[0] == Amplitude(1.0));
  apply_dual_query(s);
  CHECK(s.query_count() == 1);
  const std::uint64_t base = std::uint64_t{1} << 2;  // adv = 1 (y = 1, x = 0)
  CHECK(s.amplitudes()[base].real() == doctest::Approx(0.5));
  CHECK(s.amplitudes()[base | 1].real() == doctest::Approx(-std::sqrt(3.0) / 2));
  CHECK_THROWS_AS(apply_std_query(s), DomainError);
}

TEST_CASE("standard query") {
  auto c = cfg(1, 0, 0.25);
  auto s = new_system(c);
  to_standard(s);
  const unsigned y = 0;
  Eigen::MatrixXcd h(2, 2);
  h << std::sqrt(0.5), std::sqrt(0.5), std::sqrt(0.5), -std::sqrt(0.5);
  apply_adversary_gate(s, std::span<const unsigned>(&y, 1), h);
  auto before = s;
  apply_std_query(s);
  // y = 0 branch untouched; y = 1, x = 0, f(0) = 1 negated.
  CHECK(s.amplitudes()[0] == before.amplitudes()[0]);
  CHECK(s.amplitudes()[(1 << 2) | 1] == -before.amplitudes()[(1 << 2) | 1]);
  CHECK(s.amplitudes()[(1 << 2) | 2] == before.amplitudes()[(1 << 2) | 2]);
  apply_std_query(s);
  CHECK(max_diff(s, before) == 0.0);
}

TEST_CASE("dual queries touch at most t positions") {
  auto c = cfg(2, 2, 0.3, 1);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto strategy = make_strategy(StrategySpec{StrategyKind::RandomCircuit, seed}, c, 3);
    auto s = new_system(c);
    strategy->prepare(s, Exec::Parallel);
    for (std::uint64_t t = 0; t < 3; ++t) {
      strategy->before_query(s, t, Exec::Parallel);
      apply_dual_query(s);
      CHECK(projector_norm(s, {ProjKind::Ge, static_cast<unsigned>(t + 2)}) <= 1e-12);
      CHECK(projector_norm(s, {ProjKind::Le, static_cast<unsigned>(t + 1)}) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("adversary unitaries") {
  auto c = cfg(1, 2, 0.25, 1);
  auto s = new_system(c);
  auto start = s;
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(16, 16);
  apply_adversary_unitary(s, id);
  CHECK(max_diff(s, start) == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd g(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int col = 0; col < 16; ++col) g(r, col) = {nd(rng), nd(rng)};
  Eigen::MatrixXcd u = Eigen::HouseholderQR<Eigen::MatrixXcd>(g).householderQ();
  apply_adversary_unitary(s, u);
  CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
  apply_adversary_unitary(s, u.adjoint());
  CHECK(max_diff(s, start) <= 1e-10);

  Eigen::MatrixXcd bad = 2.0 * id;
  CHECK_THROWS_AS(apply_adversary_unitary(s, bad), ValidationError);

  // Uniform superposition over x (qubit w + 1 = 3 for m = 1).
  const unsigned xq = 3;
  Eigen::MatrixXcd h(2, 2);
  h << std::sqrt(0.5), std::sqrt(0.5), std::sqrt(0.5), -std::sqrt(0.5);
  apply_adversary_gate(s, std::span<const unsigned>(&xq, 1), h);
  CHECK(std::abs(s.amplitudes()[0]) == doctest::Approx(std::abs(s.amplitudes()[std::uint64_t{8} << 2])));

  std::vector<std::uint64_t> not_perm(16, 0);
  CHECK_THROWS_AS(apply_adversary_permutation(s, not_perm), ValidationError);
}

TEST_CASE("projectors") {
  auto c = cfg(2, 4, 0.25, 2);
  auto s = new_system(c);
  CHECK(projector_norm(s, {ProjKind::Ge, 0}) == doctest::Approx(1.0));
  CHECK(projector_norm(s, {ProjKind::Ge, 1}) == 0.0);
  CHECK(progress_measure(s, 1) == 0.0);
  CHECK_THROWS_AS(projector_norm(s, {ProjKind::Pi, 2}), DomainError);
  CHECK_THROWS_AS(projector_norm(s, {ProjKind::Xi, 3}), ValidationError);

  auto strategy = make_strategy(StrategySpec{StrategyKind::RandomCircuit, 4}, c, 3);
  evolve(s, *strategy, 3);
  double total = 0.0;
  for (unsigned i = 0; i <= 2; ++i) total += std::pow(projector_norm(s, {ProjKind::Xi, i}), 2);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  auto primal = s;
  to_standard(primal);
  CHECK(success_probability(s).probability <= std::pow(projector_norm(primal, {ProjKind::Pi, 2}), 2) + 1e-12);
}

TEST_CASE("success probability") {
  auto s = new_system(cfg(2, 2, 0.3, 1));
  CHECK(success_probability(s).probability == doctest::Approx(0.3).epsilon(1e-12));
  auto none = new_system(cfg(2, 2, 0.3, 0));
  auto deg = success_probability(none);
  CHECK(deg.degenerate);
  CHECK(deg.probability == 1.0);
  // Both slots claim input 0: duplicates score zero.
  auto dup = new_system(cfg(2, 4, 0.3, 2));
  CHECK(success_probability(dup).probability == 0.0);
}

TEST_CASE("classical distinct queries, pinned") {
  auto spec = StrategySpec::parse("classical_distinct_queries");
  auto rep = run_strategy(strategy_config(spec, 2, 0.25, 1), spec, 2);
  // 1 - (1-p)^2 from the two queries plus a blind guess on a fresh input.
  CHECK(rep.success == doctest::Approx(1 - 0.5625 + 0.5625 * 0.25).epsilon(1e-12));
  CHECK(rep.success == doctest::Approx(0.578125).epsilon(1e-12));
  CHECK(rep.success <= rep.bound);
  CHECK(rep.max_norm_drift <= 1e-10);

  // Exhaustive average over all 16 truth tables.
  auto config = strategy_config(spec, 2, 0.25, 1);
  auto strategy = make_strategy(spec, config, 2);
  double avg = 0.0;
  for (std::uint64_t f = 0; f < 16; ++f) {
    auto s = new_fixed_oracle(config, f);
    evolve(s, *strategy, 2);
    avg += bernoulli_weight(f, 4, 0.25) * success_probability(s).probability;
  }
  CHECK(avg == doctest::Approx(0.578125).epsilon(1e-12));
}

TEST_CASE("classical strategies match the closed forms") {
  // k = 2 from distinct queries on m = 2: success needs two ones among the
  // queried inputs, or a correct guess on each missing one.
  auto spec = StrategySpec::parse("classical_distinct_queries");
  const double p = 0.3;
  auto rep = run_strategy(strategy_config(spec, 2, p, 2), spec, 2);
  const double q = 1 - p;
  // Both queried ones; one queried one and guess at input 2; none and guesses at 2, 3.
  const double expected = p * p + 2 * p * q * p + q * q * p * p;
  CHECK(rep.success == doctest::Approx(expected).epsilon(1e-12));

  auto chained = StrategySpec::parse("classical_chained");
  // Two levels of two nonces each, three queries.
  auto crep = run_strategy(strategy_config(chained, 2, p, 2), chained, 3);
  // Level 0 solved at nonce 0: two tries on level 1.
  // Level 0 solved at nonce 1: one try on level 1 plus a guess.
  // Level 0 unsolved: every level-0 nonce is known to be zero.
  const double solved0 = p * (1 - q * q) + q * p * (p + q * p);
  CHECK(crep.success == doctest::Approx(solved0).epsilon(1e-12));
  CHECK(crep.bound == doctest::Approx(std::min(1.0, pqpow::bounds::reduction_bound(3, 2, p).raw)));
}

TEST_CASE("grover k = 1") {
  auto spec = StrategySpec::parse("grover_k1");
  auto config = strategy_config(spec, 3, 0.125, 1);
  auto rep = run_strategy(config, spec, 2);
  pqpow::bounds::BoundParams bp;
  bp.N = 2;
  bp.k = 1;
  bp.p = 0.125;
  CHECK(rep.success <= pqpow::bounds::kbersearch_bound_exact(bp).clamped);
  CHECK(rep.success > 0.125);
  // Fixed-oracle average reproduces the coherent run.
  auto strategy = make_strategy(spec, config, 2);
  double avg = 0.0;
  for (std::uint64_t f = 0; f < 256; ++f) {
    auto s = new_fixed_oracle(config, f);
    evolve(s, *strategy, 2);
    avg += bernoulli_weight(f, 8, 0.125) * success_probability(s).probability;
  }
  CHECK(avg == doctest::Approx(rep.success).epsilon(1e-10));
  // Independent numpy evaluation of two Grover iterations averaged over all
  // 256 truth tables.
  CHECK(rep.success == doctest::Approx(0.42781066894531244).epsilon(1e-12));
}

TEST_CASE("random circuit recurrence") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    StrategySpec spec{StrategyKind::RandomCircuit, seed};
    auto rep = run_strategy(strategy_config(spec, 2, 0.25, 1), spec, 6);
    CHECK(rep.slack_max <= 1e-9);
    CHECK(rep.trajectory.front() == 0.0);
    CHECK(rep.max_norm_drift <= 1e-10);
  }
}

TEST_CASE("primal and dual paths agree") {
  for (const char* id : {"classical_distinct_queries", "grover_k1", "random_circuit(2)"}) {
    auto spec = StrategySpec::parse(id);
    auto config = strategy_config(spec, 2, 0.1, 1);
    auto strategy = make_strategy(spec, config, 4);
    auto dual = new_system(config);
    evolve(dual, *strategy, 4);
    auto primal = new_system(config);
    to_standard(primal);
    evolve(primal, *strategy, 4);
    auto converted = dual;
    to_standard(converted);
    CHECK(max_diff(converted, primal) <= 1e-10);
    CHECK(success_probability(dual).probability == doctest::Approx(success_probability(primal).probability).epsilon(1e-10));
  }
}

TEST_CASE("serial and threaded kernels agree bit for bit") {
  auto spec = StrategySpec::parse("random_circuit(9)");
  auto config = strategy_config(spec, 3, 0.25, 2);
  auto a = run_strategy(config, spec, 4, Exec::Serial);
  auto b = run_strategy(config, spec, 4, Exec::Parallel);
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("strategy ids") {
  CHECK(StrategySpec::parse("random_circuit(12)").seed == 12);
  CHECK(StrategySpec::parse("random_circuit(12)").id() == "random_circuit(12)");
  CHECK_THROWS_AS(StrategySpec::parse("quantum_magic"), ValidationError);
  CHECK_THROWS_AS(StrategySpec::parse("random_circuit(x)"), ValidationError);
  auto report = run_strategy(strategy_config(StrategySpec{}, 1, 0.5, 1), StrategySpec{}, 0);
  CHECK(report.to_json()["slack_max"].is_null());
}
