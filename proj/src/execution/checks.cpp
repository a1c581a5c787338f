#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "pqpow/execution.hpp"

namespace pqpow::execution {

namespace {

struct PerRound {
  std::vector<std::uint64_t> honest;  // index r, 1-based; slot 0 unused
  std::vector<std::uint64_t> adversary;
};

PerRound per_round(const ExecutionTrace& trace) {
  const std::uint64_t R = trace.round_count();
  PerRound pr{std::vector<std::uint64_t>(R + 1, 0), std::vector<std::uint64_t>(R + 1, 0)};
  for (const BlockRecord& b : trace.blocks()) {
    if (b.round < 1 || b.round > R) continue;
    if (b.creator == backbone::kAdversaryCreator) ++pr.adversary[b.round];
    else ++pr.honest[b.round];
  }
  return pr;
}

// Blocks lying on some adopted chain.
std::vector<char> adopted_blocks(const ExecutionTrace& trace) {
  std::vector<char> on(trace.blocks().size(), 0);
  for (const RoundRecord& rec : trace.rounds()) {
    for (BlockId tip : rec.adopted) {
      for (BlockId id = tip; id != kGenesis && !on[static_cast<std::size_t>(id)]; id = trace.block(id).parent) {
        on[static_cast<std::size_t>(id)] = 1;
      }
    }
  }
  return on;
}

std::string content_key(const backbone::Block& b) {
  std::string key(16 + b.x.size(), '\0');
  for (int i = 0; i < 8; ++i) {
    key[static_cast<std::size_t>(i)] = static_cast<char>(b.s >> (8 * i));
    key[static_cast<std::size_t>(8 + i)] = static_cast<char>(b.ctr >> (8 * i));
  }
  std::copy(b.x.begin(), b.x.end(), key.begin() + 16);
  return key;
}

}  // namespace

WindowCounters counters(const ExecutionTrace& trace, std::uint64_t start, std::uint64_t s) {
  WindowCounters c;
  c.start = start;
  c.s = s;
  if (s == 0) return c;
  const std::uint64_t R = trace.round_count();
  if (start < 1 || start > R || s > R - start + 1) {
    std::ostringstream os;
    os << "window [" << start << ", " << start + s << ") outside rounds 1.." << R;
    throw WindowError(os.str());
  }
  const PerRound pr = per_round(trace);
  for (std::uint64_t r = start; r < start + s; ++r) {
    c.X += pr.honest[r] >= 1;
    c.Y += pr.honest[r] == 1;
    c.Z += pr.adversary[r];
  }
  return c;
}

bool counters_consistent(const ExecutionTrace& trace) {
  const PerRound pr = per_round(trace);
  for (std::uint64_t r = 1; r <= trace.round_count(); ++r) {
    const RoundRecord& rec = trace.round(r);
    if (rec.honest_successes != pr.honest[r] || rec.honest_new.size() != pr.honest[r]) return false;
    if (rec.adversary_pows != pr.adversary[r] || rec.adversary_new.size() != pr.adversary[r]) return false;
  }
  return true;
}

CopyCheck copy_check(const ExecutionTrace& trace) {
  CopyCheck out;
  const auto& blocks = trace.blocks();
  std::unordered_map<std::string, std::uint64_t> seen;
  std::unordered_multimap<backbone::HashValue, BlockId> by_link;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (seen[content_key(blocks[i].block)]++ > 0) ++out.copies;
    by_link.emplace(blocks[i].block.s, static_cast<BlockId>(i));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockRecord& b = blocks[i];
    auto [lo, hi] = by_link.equal_range(b.hash);
    for (auto it = lo; it != hi; ++it) {
      const BlockRecord& child = trace.block(it->second);
      if (child.round >= b.round) continue;
      // child points at b although b came later: b was spliced in when its
      // own predecessor also predates the child, otherwise it was predicted.
      if (b.parent != kGenesis && trace.block(b.parent).round <= child.round) ++out.insertions;
      else ++out.predictions;
    }
  }
  return out;
}

TypicalResult typical_check(const ExecutionTrace& trace, double eps, std::uint64_t s) {
  const ExecutionConfig& cfg = trace.config();
  const double f = cfg.f();
  if (static_cast<double>(s) * f < 2.0) {
    std::ostringstream os;
    os << "typical_check needs s*f >= 2, got s=" << s << " f=" << f;
    throw PreconditionError(os.str());
  }
  const std::uint64_t R = trace.round_count();
  if (s > R) throw WindowError("window longer than the trace");

  TypicalResult out;
  out.f = f;
  const double sd = static_cast<double>(s);
  const double g = cfg.party_rate();
  const double n = static_cast<double>(cfg.n);
  const double ey = sd * n * g * std::pow(1.0 - g, n - 1.0);
  if (cfg.adversary.kind == AdversaryKind::Classical) {
    out.z_threshold = cfg.oracle.p() * static_cast<double>(cfg.oracle.q * cfg.adversary.t) * sd + eps * f * sd;
  } else {
    out.z_threshold = (1.0 - eps) * f * (1.0 - f) * sd;
  }

  const PerRound pr = per_round(trace);
  std::vector<std::uint64_t> X(R + 1, 0), Y(R + 1, 0), Z(R + 1, 0);
  for (std::uint64_t r = 1; r <= R; ++r) {
    X[r] = X[r - 1] + (pr.honest[r] >= 1);
    Y[r] = Y[r - 1] + (pr.honest[r] == 1);
    Z[r] = Z[r - 1] + pr.adversary[r];
  }
  bool any_a = false, any_b = false;
  for (std::uint64_t a = 1; a + s - 1 <= R; ++a) {
    const auto x = static_cast<double>(X[a + s - 1] - X[a - 1]);
    const auto y = static_cast<double>(Y[a + s - 1] - Y[a - 1]);
    const auto z = static_cast<double>(Z[a + s - 1] - Z[a - 1]);
    ++out.windows;
    const bool x_bad = !((1.0 - eps) * f * sd < x && x < (1.0 + eps) * f * sd);
    const bool y_bad = !((1.0 - eps) * ey < y);
    const bool z_bad = !(z < out.z_threshold);
    out.x_band_failures += x_bad;
    out.y_failures += y_bad;
    out.z_failures += z_bad;
    if ((x_bad || y_bad || z_bad) && !out.first_failing_window) out.first_failing_window = a;
    any_a |= x_bad || y_bad;
    any_b |= z_bad;
  }
  out.copies = copy_check(trace);
  if (any_a) out.failed = "a";
  else if (any_b) out.failed = "b";
  else if (!out.copies.clean()) out.failed = "c";
  out.pass = out.failed.empty();
  return out;
}

CommonPrefixResult common_prefix_check(const ExecutionTrace& trace, std::uint64_t k) {
  CommonPrefixResult out;
  const std::uint64_t R = trace.round_count();
  if (R == 0) return out;
  // suffix[r] = common ancestor of every tip adopted in rounds >= r.
  std::vector<BlockId> suffix(R + 2, kGenesis);
  for (std::uint64_t r = R; r >= 1; --r) {
    const auto& adopted = trace.round(r).adopted;
    BlockId acc = r == R ? adopted.front() : suffix[r + 1];
    for (BlockId t : adopted) acc = trace.lca(acc, t);
    suffix[r] = acc;
  }
  for (std::uint64_t r1 = 1; r1 <= R; ++r1) {
    const auto& adopted = trace.round(r1).adopted;
    const std::uint32_t common = trace.height(suffix[r1]);
    for (std::size_t p1 = 0; p1 < adopted.size(); ++p1) {
      const BlockId a = adopted[p1];
      const std::uint32_t h = trace.height(a);
      if (h <= k || h - k <= common) continue;
      const auto pruned = static_cast<std::uint32_t>(h - k);
      for (std::uint64_t r2 = r1; r2 <= R; ++r2) {
        const auto& later = trace.round(r2).adopted;
        for (std::size_t p2 = 0; p2 < later.size(); ++p2) {
          const BlockId c = trace.lca(a, later[p2]);
          if (trace.height(c) < pruned) {
            out.pass = false;
            out.witness = PrefixWitness{r1, r2, p1, p2, a, later[p2], pruned, trace.height(c)};
            return out;
          }
        }
      }
    }
  }
  return out;
}

ChainQualityResult chain_quality_check(const ExecutionTrace& trace, std::uint64_t l, double mu) {
  if (l < 1) throw PreconditionError("chain quality needs l >= 1");
  ChainQualityResult out;
  const auto& blocks = trace.blocks();
  const std::vector<char> on = adopted_blocks(trace);
  std::vector<std::uint32_t> honest_prefix(blocks.size(), 0);
  auto prefix_at = [&](BlockId id) { return id == kGenesis ? 0U : honest_prefix[static_cast<std::size_t>(id)]; };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    honest_prefix[i] = prefix_at(blocks[i].parent) + (blocks[i].creator != backbone::kAdversaryCreator ? 1U : 0U);
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!on[i] || blocks[i].height < l) continue;
    const auto id = static_cast<BlockId>(i);
    const BlockId below = trace.ancestor(id, static_cast<std::uint32_t>(blocks[i].height - l));
    const double ratio = static_cast<double>(honest_prefix[i] - prefix_at(below)) / static_cast<double>(l);
    ++out.windows;
    out.worst = std::min(out.worst, ratio);
    if (ratio < mu) out.pass = false;
  }
  return out;
}

bool honest_delivery_ok(const ExecutionTrace& trace) {
  const std::uint64_t n = trace.config().n;
  for (std::uint64_t r = 1; r <= trace.round_count(); ++r) {
    const RoundRecord& rec = trace.round(r);
    if (rec.delivered.size() != n || rec.adopted.size() != n) return false;
    if (r == 1) continue;
    for (BlockId sent : trace.round(r - 1).honest_new) {
      for (const auto& d : rec.delivered) {
        if (std::find(d.begin(), d.end(), sent) == d.end()) return false;
      }
    }
  }
  return true;
}

SpanResult span_check(const ExecutionTrace& trace, const std::vector<std::uint64_t>& ks) {
  SpanResult out;
  const double f = trace.config().f();
  const auto& blocks = trace.blocks();
  const std::vector<char> on = adopted_blocks(trace);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!on[i]) continue;
    for (std::uint64_t k : ks) {
      if (k == 0 || blocks[i].height < k) continue;
      const BlockId first = trace.ancestor(static_cast<BlockId>(i), static_cast<std::uint32_t>(blocks[i].height - k + 1));
      const double span = static_cast<double>(blocks[i].round - trace.block(first).round + 1);
      ++out.checks;
      if (!(span > static_cast<double>(k) / (2.0 * f))) ++out.violations;
    }
  }
  return out;
}

nlohmann::json TypicalResult::to_json() const {
  return {{"pass", pass},
          {"failed", failed},
          {"windows", windows},
          {"x_band_failures", x_band_failures},
          {"y_failures", y_failures},
          {"z_failures", z_failures},
          {"first_failing_window", first_failing_window ? nlohmann::json(*first_failing_window) : nlohmann::json()},
          {"insertions", copies.insertions},
          {"copies", copies.copies},
          {"predictions", copies.predictions},
          {"z_threshold", z_threshold}};
}

nlohmann::json CommonPrefixResult::to_json() const {
  nlohmann::json j{{"pass", pass}};
  if (witness) {
    const PrefixWitness& w = *witness;
    j["witness"] = {{"r1", w.r1},       {"party1", w.party1}, {"tip1", w.tip1},
                    {"r2", w.r2},       {"party2", w.party2}, {"tip2", w.tip2},
                    {"pruned_height", w.pruned_height},       {"common_height", w.common_height}};
  }
  return j;
}

nlohmann::json ChainQualityResult::to_json() const {
  return {{"pass", pass}, {"worst", worst}, {"windows", windows}};
}

TrialSummary summarize(const ExecutionTrace& trace) {
  const ExecutionConfig& cfg = trace.config();
  TrialSummary out;
  out.trial = trace.trial();
  out.digest = trace.digest();
  out.blocks = trace.blocks().size();
  for (const BlockRecord& b : trace.blocks()) {
    if (b.creator == backbone::kAdversaryCreator) ++out.adversary_blocks;
    else ++out.honest_blocks;
  }
  const std::uint64_t R = trace.round_count();
  if (R > 0) {
    const WindowCounters all = counters(trace, 1, R);
    out.x_rate = static_cast<double>(all.X) / static_cast<double>(R);
    out.z_rate = static_cast<double>(all.Z) / static_cast<double>(R);
    for (BlockId t : trace.round(R).adopted) out.final_height = std::max<std::uint64_t>(out.final_height, trace.height(t));
  }
  out.delivery_ok = honest_delivery_ok(trace);
  out.counters_ok = counters_consistent(trace);
  if (cfg.checks.s > 0) {
    out.typical = typical_check(trace, cfg.eps, cfg.checks.s);
    out.common_prefix = common_prefix_check(trace, cfg.resolved_cp_k());
    out.chain_quality = chain_quality_check(trace, cfg.resolved_cq_l(), cfg.resolved_cq_mu());
    const auto k0 = static_cast<std::uint64_t>(std::ceil(2.0 * cfg.f() * static_cast<double>(cfg.checks.s)));
    out.span = span_check(trace, {k0, 2 * k0, 4 * k0});
  }
  return out;
}

nlohmann::json TrialSummary::to_json() const {
  nlohmann::json j{{"trial", trial},
                   {"digest", digest},
                   {"blocks", blocks},
                   {"honest_blocks", honest_blocks},
                   {"adversary_blocks", adversary_blocks},
                   {"final_height", final_height},
                   {"x_rate", x_rate},
                   {"z_rate", z_rate},
                   {"delivery_ok", delivery_ok},
                   {"counters_ok", counters_ok}};
  if (typical) j["typical"] = typical->to_json();
  if (common_prefix) j["common_prefix"] = common_prefix->to_json();
  if (chain_quality) j["chain_quality"] = chain_quality->to_json();
  if (span) j["span"] = {{"checks", span->checks}, {"violations", span->violations}};
  return j;
}

namespace {

template <class Pred>
double rate(const std::vector<TrialSummary>& trials, Pred pred) {
  if (trials.empty()) return 0.0;
  std::uint64_t hits = 0;
  for (const TrialSummary& t : trials) hits += pred(t) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

}  // namespace

double ExperimentReport::mean_x_rate() const {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const TrialSummary& t : trials) sum += t.x_rate;
  return sum / static_cast<double>(trials.size());
}

double ExperimentReport::typical_pass_rate() const {
  return rate(trials, [](const TrialSummary& t) { return t.typical && t.typical->pass; });
}

double ExperimentReport::common_prefix_pass_rate() const {
  return rate(trials, [](const TrialSummary& t) { return t.common_prefix && t.common_prefix->pass; });
}

double ExperimentReport::chain_quality_pass_rate() const {
  return rate(trials, [](const TrialSummary& t) { return t.chain_quality && t.chain_quality->pass; });
}

double ExperimentReport::condition_pass_rate(const std::string& condition) const {
  return rate(trials, [&](const TrialSummary& t) {
    if (!t.typical) return false;
    if (condition == "a") return t.typical->x_band_failures + t.typical->y_failures == 0;
    if (condition == "b") return t.typical->z_failures == 0;
    if (condition == "c") return t.typical->copies.clean();
    throw std::invalid_argument("condition must be a, b or c");
  });
}

nlohmann::json ExperimentReport::to_json() const {
  const double f = config.f();
  const double rounds = static_cast<double>(config.rounds);
  const double trial_count = static_cast<double>(trials.size());
  const double se = rounds > 0 && trial_count > 0 ? std::sqrt(f * (1.0 - f) / (rounds * trial_count)) : 0.0;
  nlohmann::json per_trial = nlohmann::json::array();
  for (const TrialSummary& t : trials) per_trial.push_back(t.to_json());
  nlohmann::json aggregate{{"mean_x_rate", mean_x_rate()},
                           {"expected_x_rate", f},
                           {"x_rate_standard_error", se},
                           {"delivery_ok", rate(trials, [](const TrialSummary& t) { return t.delivery_ok; }) == 1.0},
                           {"counters_ok", rate(trials, [](const TrialSummary& t) { return t.counters_ok; }) == 1.0}};
  if (config.checks.s > 0) {
    aggregate["typical_pass_rate"] = typical_pass_rate();
    aggregate["condition_a_pass_rate"] = condition_pass_rate("a");
    aggregate["condition_b_pass_rate"] = condition_pass_rate("b");
    aggregate["condition_c_pass_rate"] = condition_pass_rate("c");
    aggregate["common_prefix_pass_rate"] = common_prefix_pass_rate();
    aggregate["chain_quality_pass_rate"] = chain_quality_pass_rate();
  }
  return {{"config", config.to_json()}, {"aggregate", aggregate}, {"trials", per_trial}};
}

}  // namespace pqpow::execution
