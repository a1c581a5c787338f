#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pqpow/bounds.hpp"
#include "pqpow/execution.hpp"

using namespace pqpow;
using namespace pqpow::execution;

namespace {

ExecutionConfig honest_config(std::uint64_t rounds, std::uint64_t n = 16, std::uint64_t q = 4) {
  ExecutionConfig c;
  c.n = n;
  c.oracle = backbone::OracleParams::nearest(1e-3, 32, q, 11);
  c.rounds = rounds;
  c.seed = 5;
  return c;
}

// The criterion-7 parameter point: f ~ 0.302, honest-majority threshold ~ 2.03.
ExecutionConfig property_config(std::uint64_t Q, std::uint64_t rounds) {
  ExecutionConfig c;
  c.n = 16;
  c.oracle = backbone::OracleParams::from_probability(1.0 / 1024, 48, 23, 3);
  c.rounds = rounds;
  c.eps = 0.1;
  c.seed = 9;
  c.checks.s = 64;
  c.adversary.kind = AdversaryKind::PrivateChain;
  c.adversary.Q = Q;
  c.adversary.mode = RateMode::WorstCase;
  c.adversary.window = 64;
  c.adversary.rate_eps = 0.1;
  return c;
}

// Crafted trace: one block per entry of `creators`, each extending the last.
ExecutionTrace linear_trace(const std::vector<std::int64_t>& creators, std::uint64_t n = 1) {
  ExecutionConfig c = honest_config(0, n);
  c.rounds = creators.size();
  ExecutionTrace tr(c, 0);
  BlockId tip = kGenesis;
  for (std::size_t i = 0; i < creators.size(); ++i) {
    tip = tr.add_block({tr.tip_hash(tip), {static_cast<std::uint8_t>(i)}, 0}, tip, creators[i], i + 1);
    RoundRecord rec;
    rec.delivered.resize(n);
    if (creators[i] == backbone::kAdversaryCreator) {
      rec.adversary_new.push_back(tip);
      rec.adversary_pows = 1;
    } else {
      rec.honest_new.push_back(tip);
      rec.honest_successes = 1;
    }
    rec.adopted.assign(n, tip);
    tr.rounds().push_back(rec);
  }
  return tr;
}

}  // namespace

TEST_CASE("zero rounds leave every party on the empty chain") {
  const ExecutionTrace tr = run_execution(honest_config(0));
  CHECK(tr.round_count() == 0);
  CHECK(tr.blocks().empty());
  CHECK(tr.chain(kGenesis).empty());
  const TrialSummary s = summarize(tr);
  CHECK(s.final_height == 0);
  CHECK(s.delivery_ok);
}

TEST_CASE("config validation") {
  ExecutionConfig c = honest_config(100);
  CHECK_NOTHROW(c.validate());
  c.n = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = honest_config(100);
  c.eps = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = honest_config(100);
  c.checks.s = 10;  // s f = 0.62 < 2
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.checks.s = 40;
  c.rounds = 20;  // below ceil(2/f) = 33
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = honest_config(100);
  c.adversary.kind = AdversaryKind::QuantumRate;
  c.adversary.Q = 3;
  c.adversary.mode = RateMode::WorstCase;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // window missing
  CHECK(parse_adversary_kind("private_chain") == AdversaryKind::PrivateChain);
  CHECK(parse_rate_mode("tail_coupled") == RateMode::TailCoupled);
  CHECK_THROWS_AS(parse_rate_mode("burst"), ConfigError);
}

TEST_CASE("replay is bit-identical; trials differ") {
  ExecutionConfig c = property_config(2, 200);
  const ExecutionTrace a = run_execution(c, 3);
  const ExecutionTrace b = run_execution(c, 3);
  CHECK(a.digest() == b.digest());
  CHECK(a.to_ndjson() == b.to_ndjson());
  CHECK(run_execution(c, 4).digest() != a.digest());
}

TEST_CASE("ndjson export parses line by line") {
  const ExecutionTrace tr = run_execution(property_config(2, 100), 0);
  std::istringstream in(tr.to_ndjson());
  std::string line;
  std::size_t headers = 0, blocks = 0, rounds = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string type = j.at("type");
    headers += type == "header";
    blocks += type == "block";
    rounds += type == "round";
  }
  CHECK(headers == 1);
  CHECK(blocks == tr.blocks().size());
  CHECK(rounds == 100);
}

TEST_CASE("honest success rate matches 1-(1-p)^{nq}") {
  ExecutionConfig c = honest_config(20000);
  const double f = c.f();
  CHECK(f == doctest::Approx(0.0620).epsilon(0.01));
  double sum = 0.0;
  const int trials = 4;
  for (int t = 0; t < trials; ++t) sum += summarize(run_execution(c, static_cast<std::uint64_t>(t))).x_rate;
  const double mean = sum / trials;
  const double sigma = std::sqrt(f * (1 - f) / (20000.0 * trials));
  CHECK(std::abs(mean - f) < 3 * sigma);
}

TEST_CASE("adopted chains follow the longest-chain rule") {
  ExecutionConfig c = property_config(2, 150);
  c.adversary.target_depth = 0;
  const ExecutionTrace tr = run_execution(c, 1);
  std::vector<backbone::Chain> current(c.n);
  for (std::uint64_t r = 1; r <= tr.round_count(); ++r) {
    const RoundRecord& rec = tr.round(r);
    for (std::size_t i = 0; i < c.n; ++i) {
      std::vector<backbone::Chain> received;
      for (BlockId tip : rec.delivered[i]) received.push_back(tr.chain(tip));
      backbone::Chain expect = backbone::select_chain(tr.oracle(), current[i], received);
      // A successful miner then extends its selection by one own block.
      const BlockId adopted = rec.adopted[i];
      if (adopted != kGenesis && tr.block(adopted).round == r && tr.block(adopted).creator == static_cast<std::int64_t>(i)) {
        CHECK(backbone::prune(tr.chain(adopted), 1) == expect);
      } else {
        CHECK(tr.chain(adopted) == expect);
      }
      current[i] = tr.chain(adopted);
    }
  }
  CHECK(honest_delivery_ok(tr));
  CHECK(counters_consistent(tr));
  CHECK(backbone::validate_chain(tr.oracle(), tr.chain(tr.round(150).adopted[0])));
}

TEST_CASE("rate source") {
  std::mt19937_64 rng(1);
  AdversarySpec spec;
  spec.kind = AdversaryKind::QuantumRate;
  SUBCASE("Q = 0 never grants blocks") {
    RateSource src(spec, 1e-6);
    for (std::uint64_t r = 1; r <= 100; ++r) CHECK(src.step(r, rng) == 0);
  }
  SUBCASE("poisson mean e sqrt(p) Q (1+eps)") {
    spec.Q = 10;
    spec.rate_eps = 0.1;
    RateSource src(spec, 1e-6);
    const double mean = std::exp(1.0) * 1e-3 * 10 * 1.1;
    CHECK(src.poisson_mean() == doctest::Approx(mean));
    const std::uint64_t rounds = 100000;
    double sum = 0;
    for (std::uint64_t r = 1; r <= rounds; ++r) sum += static_cast<double>(src.step(r, rng));
    CHECK(std::abs(sum / rounds - mean) < 3 * std::sqrt(mean / rounds));
  }
  SUBCASE("worst case grants ceil(k0) per window") {
    spec.Q = 10;
    spec.mode = RateMode::WorstCase;
    spec.window = 100;
    RateSource src(spec, 1e-6);
    CHECK(bounds::k0_target(100, 10, 1e-6, 0.1) == doctest::Approx(2.990).epsilon(1e-3));
    CHECK(src.worst_case_budget() == 3);
    std::vector<std::uint64_t> counts(1001, 0);
    for (std::uint64_t r = 1; r <= 1000; ++r) counts[r] = src.step(r, rng);
    for (std::uint64_t a = 1; a + 99 <= 1000; ++a) {
      std::uint64_t z = 0;
      for (std::uint64_t r = a; r < a + 100; ++r) z += counts[r];
      CHECK(z == 3);
    }
  }
  SUBCASE("tail coupled draws respect the clamped chain bound") {
    spec.Q = 4;
    spec.mode = RateMode::TailCoupled;
    spec.window = 32;
    const double p = 1.0 / 1024;
    RateSource src(spec, p);
    CHECK(src.tail(0) == 1.0);
    for (std::uint64_t k = 1; k < 40; ++k) CHECK(src.tail(k) <= src.tail(k - 1));
    std::vector<std::uint64_t> totals;
    for (std::uint64_t w = 0; w < 4000; ++w) {
      std::uint64_t z = 0;
      for (std::uint64_t o = 1; o <= 32; ++o) z += src.step(w * 32 + o, rng);
      totals.push_back(z);
    }
    for (std::uint64_t k : {8, 10, 12, 14}) {
      double hits = 0;
      for (auto z : totals) hits += z >= k;
      const double tail = src.tail(k);
      CHECK(hits / 4000 <= tail + 4 * std::sqrt(tail * (1 - tail) / 4000) + 1e-12);
    }
  }
  CHECK(spread_count(3, 100, 0) == 1);
  CHECK(spread_count(0, 100, 5) == 0);
  CHECK(spread_count(250, 100, 7) + spread_count(250, 100, 8) >= 4);
}

TEST_CASE("counters") {
  SUBCASE("empty window") {
    const ExecutionTrace tr = linear_trace({0, 0});
    const WindowCounters c = counters(tr, 1, 0);
    CHECK(c.X == 0);
    CHECK(c.Y == 0);
    CHECK(c.Z == 0);
  }
  SUBCASE("two honest successes in one round count in X only") {
    ExecutionTrace tr = linear_trace({0}, 2);
    tr.add_block({0, {9}, 0}, kGenesis, 1, 1);
    const WindowCounters c = counters(tr, 1, 1);
    CHECK(c.X == 1);
    CHECK(c.Y == 0);
    CHECK_FALSE(counters_consistent(tr));  // the round record still lists one
  }
  SUBCASE("out of range") {
    const ExecutionTrace tr = linear_trace({0, -1, 0});
    CHECK_THROWS_AS(counters(tr, 3, 2), WindowError);
    CHECK_THROWS_AS(counters(tr, 0, 1), WindowError);
    const WindowCounters c = counters(tr, 1, 3);
    CHECK(c.X == 2);
    CHECK(c.Y == 2);
    CHECK(c.Z == 1);
    CHECK(counters_consistent(tr));
  }
}

TEST_CASE("typical execution check") {
  SUBCASE("precondition s f >= 2") {
    const ExecutionTrace tr = run_execution(honest_config(100), 0);
    CHECK_THROWS_AS(typical_check(tr, 0.5, 20), PreconditionError);
  }
  SUBCASE("honest-only pass frequency grows with s") {
    ExecutionConfig c = honest_config(4000);
    std::vector<double> frac;
    for (std::uint64_t s : {33, 129}) {
      double fails = 0, windows = 0;
      for (std::uint64_t t = 0; t < 4; ++t) {
        const TypicalResult r = typical_check(run_execution(c, t), 0.5, s);
        fails += static_cast<double>(r.x_band_failures);
        windows += static_cast<double>(r.windows);
        CHECK(r.z_failures == 0);
        CHECK(r.copies.clean());
      }
      frac.push_back(fails / windows);
    }
    CHECK(frac[1] < frac[0]);
  }
  SUBCASE("forced adversarial burst fails (b)") {
    ExecutionConfig c = property_config(0, 64);
    c.adversary.kind = AdversaryKind::None;
    ExecutionTrace tr = run_execution(c, 0);
    const double threshold = (1 - c.eps) * c.f() * (1 - c.f()) * 64;
    const auto burst = static_cast<std::uint64_t>(std::ceil(threshold));
    BlockId tip = kGenesis;
    for (std::uint64_t i = 0; i < burst; ++i) {
      tip = tr.add_block({tr.tip_hash(tip), {0xAD, static_cast<std::uint8_t>(i)}, 0}, tip, backbone::kAdversaryCreator, 10);
    }
    const TypicalResult r = typical_check(tr, c.eps, 64);
    CHECK(r.z_failures == r.windows);
    CHECK(r.z_threshold == doctest::Approx(threshold));
  }
  SUBCASE("injected duplicate block is a copy") {
    ExecutionTrace tr = run_execution(honest_config(600), 0);
    CHECK(copy_check(tr).clean());
    const BlockRecord& first = tr.blocks().front();
    tr.add_block(first.block, first.parent, 0, 500);
    const TypicalResult r = typical_check(tr, 0.99, 600);
    CHECK(r.copies.copies == 1);
    CHECK_FALSE(r.pass);
  }
  SUBCASE("insertion and prediction") {
    ExecutionTrace tr = linear_trace({0, 0, 0, 0});
    // A block created in round 9 whose hash the round-3 block already links to.
    const BlockId late = tr.add_block({tr.block(0).hash, {42}, 0}, 0, 0, 9);
    tr.set_hash(late, tr.block(2).block.s);
    CopyCheck cc = copy_check(tr);
    CHECK(cc.insertions == 1);
    CHECK(cc.predictions == 0);
    const BlockId orphan = tr.add_block({12345, {43}, 0}, kGenesis, 0, 10);
    tr.set_hash(orphan, tr.block(3).block.s);
    cc = copy_check(tr);
    CHECK(cc.predictions == 1);
  }
}

TEST_CASE("common prefix") {
  SUBCASE("single honest party") {
    ExecutionConfig c = honest_config(2000, 1, 64);
    const ExecutionTrace tr = run_execution(c, 0);
    CHECK(common_prefix_check(tr, 0).pass);
  }
  SUBCASE("adversary none at k = ceil(2sf)") {
    ExecutionConfig c = property_config(0, 600);
    c.adversary.kind = AdversaryKind::None;
    for (std::uint64_t t = 0; t < 5; ++t) {
      const ExecutionTrace tr = run_execution(c, t);
      CHECK(common_prefix_check(tr, c.resolved_cp_k()).pass);
      CHECK(common_prefix_check(tr, 4).pass);
    }
  }
  SUBCASE("natural fork at k = 0") {
    ExecutionTrace tr = linear_trace({0}, 2);
    const BlockId other = tr.add_block({0, {77}, 0}, kGenesis, 1, 1);
    tr.rounds()[0].honest_new.push_back(other);
    tr.rounds()[0].adopted = {0, other};
    const CommonPrefixResult r = common_prefix_check(tr, 0);
    REQUIRE_FALSE(r.pass);
    REQUIRE(r.witness);
    CHECK(r.witness->tip1 == 0);
    CHECK(r.witness->tip2 == other);
    CHECK(r.witness->common_height == 0);
    CHECK(common_prefix_check(tr, 1).pass);
  }
  SUBCASE("far stronger private chain breaks it") {
    ExecutionConfig c = property_config(41, 300);
    c.adversary.target_depth = c.resolved_cp_k() + 1;
    int failures = 0;
    for (std::uint64_t t = 0; t < 4; ++t) failures += !common_prefix_check(run_execution(c, t), c.resolved_cp_k()).pass;
    CHECK(failures >= 2);
  }
}

TEST_CASE("chain quality") {
  SUBCASE("adversary none") {
    const ExecutionTrace tr = run_execution(honest_config(2000), 0);
    const ChainQualityResult r = chain_quality_check(tr, 5, 1.0);
    CHECK(r.pass);
    CHECK(r.worst == 1.0);
    CHECK(r.windows > 0);
  }
  SUBCASE("all-adversarial window") {
    const ExecutionTrace tr = linear_trace({0, 0, -1, -1, -1, 0});
    const ChainQualityResult r = chain_quality_check(tr, 3, 0.5);
    CHECK_FALSE(r.pass);
    CHECK(r.worst == 0.0);
    CHECK(chain_quality_check(tr, 6, 0.5).pass);
    CHECK_THROWS_AS(chain_quality_check(tr, 0, 0.5), PreconditionError);
  }
}

TEST_CASE("private chain adversary") {
  SUBCASE("never released blocks stay off honest chains") {
    ExecutionConfig c = property_config(10, 300);
    c.adversary.release_threshold = kNever;
    const ExecutionTrace tr = run_execution(c, 0);
    CHECK(summarize(tr).adversary_blocks > 0);
    const ChainQualityResult r = chain_quality_check(tr, 1, 1.0);
    CHECK(r.pass);
  }
  SUBCASE("Q = 0 behaves as adversary none") {
    ExecutionConfig c = property_config(0, 300);
    ExecutionConfig none = c;
    none.adversary.kind = AdversaryKind::None;
    CHECK(run_execution(c, 2).digest() == run_execution(none, 2).digest());
  }
  SUBCASE("releases respect the honest-delivery invariant") {
    ExecutionConfig c = property_config(6, 300);
    c.adversary.target_depth = 2;
    const ExecutionTrace tr = run_execution(c, 0);
    std::uint64_t releases = 0;
    for (const auto& rec : tr.rounds()) releases += rec.released.size();
    CHECK(releases > 0);
    CHECK(honest_delivery_ok(tr));
  }
}

TEST_CASE("boundary worst-case adversary keeps condition (b) in every window") {
  ExecutionConfig c = property_config(2, 640);
  CHECK(static_cast<double>(c.adversary.Q) <= bounds::honest_majority_threshold(c.f(), c.oracle.p(), c.eps));
  for (std::uint64_t t = 0; t < 3; ++t) {
    const TypicalResult r = typical_check(run_execution(c, t), c.eps, 64);
    CHECK(r.z_failures == 0);
  }
}

TEST_CASE("classical adversary spends t q queries per round") {
  ExecutionConfig c = honest_config(3000);
  c.adversary.kind = AdversaryKind::Classical;
  c.adversary.t = 8;
  const TrialSummary s = summarize(run_execution(c, 0));
  const double expect = 1.0 - std::pow(1.0 - c.oracle.p(), 4.0 * 8.0);
  CHECK(std::abs(s.z_rate - expect) < 5 * std::sqrt(expect / 3000.0));
}

TEST_CASE("resource limit") {
  ExecutionConfig c = property_config(10, 64);
  c.max_block_attempts = 4;
  CHECK_THROWS_AS(run_execution(c, 0), ResourceError);
}

TEST_CASE("trial results do not depend on the thread count") {
  ExecutionConfig c = property_config(2, 300);
  c.trials = 6;
  const auto serial = run_trials(c, 1).to_json().dump();
  const auto parallel = run_trials(c, 4).to_json().dump();
  CHECK(serial == parallel);
}

TEST_CASE("span of consecutive blocks in a typical honest run") {
  ExecutionConfig c = property_config(0, 1000);
  c.adversary.kind = AdversaryKind::None;
  const TrialSummary s = summarize(run_execution(c, 0));
  REQUIRE(s.span);
  CHECK(s.span->checks > 0);
  CHECK(s.span->violations == 0);
}
