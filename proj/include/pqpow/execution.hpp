#pragma once

// Round-synchronous executions of the backbone protocol: n honest parties,
// a rushing adversary that schedules delivery, and checkers for typical
// executions, common prefix and chain quality.
//
// Round r (1-based):
//   1. every honest party receives the messages sent in round r-1
//      (adversary releases first, then honest blocks) and adopts the longest
//      valid chain; ties keep the current chain, then the first delivered;
//   2. every honest party spends q queries extending its chain and, on
//      success, adopts and broadcasts the new block;
//   3. the adversary acts after seeing the round's honest blocks;
//   4. the adopted tip of every party is recorded.

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pqpow/backbone.hpp"

namespace pqpow::execution {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class AdversaryKind { None, Classical, QuantumRate, PrivateChain };
enum class RateMode { Poisson, WorstCase, TailCoupled };

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct AdversarySpec {
  AdversaryKind kind = AdversaryKind::None;
  std::uint64_t t = 0;  // classical: corrupted parties, t*q queries per round
  std::uint64_t Q = 0;  // quantum queries per round
  RateMode mode = RateMode::Poisson;
  double rate_eps = 0.1;
  std::uint64_t window = 0;  // s for worst_case and tail_coupled
  // private_chain: publish once the private chain leads the public one by
  // release_threshold blocks and at least target_depth public blocks would
  // be orphaned. kNever withholds forever.
  std::uint64_t release_threshold = 1;
  std::uint64_t target_depth = 0;

  bool quantum() const { return kind == AdversaryKind::QuantumRate || kind == AdversaryKind::PrivateChain; }
  void validate() const;
  nlohmann::json to_json() const;
};

std::string to_string(AdversaryKind kind);
std::string to_string(RateMode mode);
AdversaryKind parse_adversary_kind(const std::string& s);
RateMode parse_rate_mode(const std::string& s);

// Property-check parameters. s = 0 disables the checks; k, l = 0 select
// ceil(2sf) and mu < 0 selects f.
struct CheckParams {
  std::uint64_t s = 0;
  std::uint64_t cp_k = 0;
  std::uint64_t cq_l = 0;
  double cq_mu = -1.0;
};

struct ExecutionConfig {
  std::uint64_t n = 1;
  backbone::OracleParams oracle;
  std::uint64_t rounds = 0;
  double eps = 0.1;
  AdversarySpec adversary;
  std::uint64_t seed = 0;
  std::uint64_t trials = 1;
  CheckParams checks;
  // H evaluations the adversary may spend on one block before the run aborts.
  std::uint64_t max_block_attempts = std::uint64_t{1} << 28;

  // 1 - (1 - p)^{nq}
  double f() const;
  // 1 - (1 - p)^q
  double party_rate() const;
  void validate() const;
  nlohmann::json to_json() const;

  std::uint64_t resolved_cp_k() const;
  std::uint64_t resolved_cq_l() const;
  double resolved_cq_mu() const;
};

// Seeds for one trial: the RNG seed and the oracle seed both derive from the
// configured seeds and the trial index.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);
std::uint64_t trial_oracle_seed(std::uint64_t oracle_seed, std::uint64_t trial);

// Block id -1 is the empty chain.
using BlockId = std::int32_t;
inline constexpr BlockId kGenesis = -1;

struct BlockRecord {
  backbone::Block block;
  BlockId parent = kGenesis;
  std::uint32_t height = 0;  // chain length ending at this block
  std::int64_t creator = 0;  // party id or backbone::kAdversaryCreator
  std::uint64_t round = 0;
  backbone::HashValue hash = 0;
  bool valid = false;        // block predicate against its parent
  bool chain_valid = false;  // every block up to genesis valid
};

struct RoundRecord {
  std::vector<BlockId> honest_new;     // in party order
  std::vector<BlockId> adversary_new;  // PoWs found this round, released or not
  std::vector<BlockId> released;       // tips the adversary sends out this round
  std::vector<std::vector<BlockId>> delivered;  // per party, in delivery order
  std::vector<BlockId> adopted;        // per party, after the round
  // Incrementally maintained counts; checked against the block index.
  std::uint32_t honest_successes = 0;
  std::uint32_t adversary_pows = 0;
};

class ExecutionTrace {
 public:
  ExecutionTrace() = default;
  ExecutionTrace(ExecutionConfig config, std::uint64_t trial);

  const ExecutionConfig& config() const { return config_; }
  const backbone::OracleParams& oracle() const { return oracle_; }
  std::uint64_t trial() const { return trial_; }

  const std::vector<BlockRecord>& blocks() const { return blocks_; }
  const BlockRecord& block(BlockId id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  std::vector<RoundRecord>& rounds() { return rounds_; }
  const std::vector<RoundRecord>& rounds() const { return rounds_; }
  std::uint64_t round_count() const { return rounds_.size(); }
  // Round r, 1-based.
  const RoundRecord& round(std::uint64_t r) const { return rounds_.at(r - 1); }

  // Records a block with the given parent and computes its hash, height and
  // validity. Also the hook for crafting traces in tests.
  BlockId add_block(backbone::Block block, BlockId parent, std::int64_t creator, std::uint64_t round);
  // Overwrites the stored hash (tests of the copy/insertion detectors).
  void set_hash(BlockId id, backbone::HashValue h) { blocks_.at(static_cast<std::size_t>(id)).hash = h; }

  std::uint32_t height(BlockId id) const { return id == kGenesis ? 0 : block(id).height; }
  backbone::HashValue tip_hash(BlockId id) const { return id == kGenesis ? 0 : block(id).hash; }
  bool chain_valid(BlockId id) const { return id == kGenesis || block(id).chain_valid; }
  // Ancestor of id at height h <= height(id); kGenesis at height 0.
  BlockId ancestor(BlockId id, std::uint32_t h) const;
  BlockId lca(BlockId a, BlockId b) const;
  bool is_ancestor(BlockId a, BlockId b) const { return height(a) <= height(b) && ancestor(b, height(a)) == a; }
  backbone::Chain chain(BlockId tip) const;

  // BLAKE2b-256 over a canonical binary encoding of blocks and rounds.
  std::string digest() const;
  // One JSON object per line: a header, every block, every round.
  std::string to_ndjson() const;

 private:
  static constexpr unsigned kLift = 20;
  ExecutionConfig config_;
  backbone::OracleParams oracle_;
  std::uint64_t trial_ = 0;
  std::vector<BlockRecord> blocks_;
  std::vector<RoundRecord> rounds_;
  std::vector<BlockId> up_;  // up_[id * kLift + j] = 2^j-th ancestor
};

// Block counts of the quantum adversary, per round.
class RateSource {
 public:
  RateSource(const AdversarySpec& spec, double p);
  // Blocks granted in round r (1-based). Rounds must be visited in order.
  std::uint64_t step(std::uint64_t r, std::mt19937_64& rng);
  double poisson_mean() const { return mean_; }
  std::uint64_t worst_case_budget() const { return k0_; }

  // P(K >= k) for the tail-coupled window draw: the running minimum of
  // min(1, chain-of-PoWs bound at N = sQ).
  double tail(std::uint64_t k) const;

 private:
  std::uint64_t draw_tail_coupled(std::mt19937_64& rng);

  AdversarySpec spec_;
  double p_ = 0.0;
  double mean_ = 0.0;
  std::uint64_t k0_ = 0;
  std::uint64_t window_blocks_ = 0;
  std::vector<double> tail_;
};

// Spread of `blocks` over a window of s rounds: the count at offset o is
// ceil((o+1)b/s) - ceil(ob/s).
std::uint64_t spread_count(std::uint64_t blocks, std::uint64_t s, std::uint64_t offset);

ExecutionTrace run_execution(const ExecutionConfig& config, std::uint64_t trial = 0);

struct WindowCounters {
  std::uint64_t X = 0;  // rounds with at least one honest PoW
  std::uint64_t Y = 0;  // rounds with exactly one honest PoW
  std::uint64_t Z = 0;  // adversarial PoWs
  std::uint64_t start = 1;
  std::uint64_t s = 0;
};

// Recomputed from the block index. Throws WindowError if [start, start+s)
// is not inside 1..rounds.
WindowCounters counters(const ExecutionTrace& trace, std::uint64_t start, std::uint64_t s);

// Incremental counts in RoundRecord agree with the block index.
bool counters_consistent(const ExecutionTrace& trace);

struct CopyCheck {
  std::uint64_t insertions = 0;
  std::uint64_t copies = 0;
  std::uint64_t predictions = 0;
  bool clean() const { return insertions + copies + predictions == 0; }
};

// insertion: B links two blocks created before it; copy: identical content
// twice; prediction: a block links to a block created in a later round.
CopyCheck copy_check(const ExecutionTrace& trace);

struct TypicalResult {
  bool pass = true;
  std::string failed;  // "", "a", "b" or "c"; first failing condition
  std::uint64_t windows = 0;
  std::uint64_t x_band_failures = 0;
  std::uint64_t y_failures = 0;
  std::uint64_t z_failures = 0;
  std::optional<std::uint64_t> first_failing_window;
  CopyCheck copies;
  double f = 0.0;
  double z_threshold = 0.0;

  nlohmann::json to_json() const;
};

// All windows of exactly s rounds, sliding by one. Requires s*f >= 2 and
// s <= rounds.
TypicalResult typical_check(const ExecutionTrace& trace, double eps, std::uint64_t s);

struct PrefixWitness {
  std::uint64_t r1 = 0, r2 = 0;
  std::uint64_t party1 = 0, party2 = 0;
  BlockId tip1 = kGenesis, tip2 = kGenesis;
  std::uint32_t pruned_height = 0;  // height(tip1) - k
  std::uint32_t common_height = 0;  // height of the common ancestor
};

struct CommonPrefixResult {
  bool pass = true;
  std::optional<PrefixWitness> witness;
  nlohmann::json to_json() const;
};

// prune(C1, k) is a prefix of C2 for all parties P1, P2 and rounds r1 <= r2.
CommonPrefixResult common_prefix_check(const ExecutionTrace& trace, std::uint64_t k);

struct ChainQualityResult {
  bool pass = true;
  double worst = 1.0;  // lowest honest fraction seen; 1 when no window fits
  std::uint64_t windows = 0;
  nlohmann::json to_json() const;
};

// Honest fraction of every l consecutive blocks of every adopted chain.
ChainQualityResult chain_quality_check(const ExecutionTrace& trace, std::uint64_t l, double mu);

// Every message an honest party sent in round r reached every honest party
// in round r + 1.
bool honest_delivery_ok(const ExecutionTrace& trace);

struct SpanResult {
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
};

// For each k in ks: every k consecutive blocks of an adopted chain span more
// than k / (2f) rounds.
SpanResult span_check(const ExecutionTrace& trace, const std::vector<std::uint64_t>& ks);

struct TrialSummary {
  std::uint64_t trial = 0;
  std::string digest;
  std::uint64_t blocks = 0;
  std::uint64_t honest_blocks = 0;
  std::uint64_t adversary_blocks = 0;
  std::uint64_t final_height = 0;
  double x_rate = 0.0;  // X over the whole run / rounds
  double z_rate = 0.0;
  bool delivery_ok = true;
  bool counters_ok = true;
  std::optional<TypicalResult> typical;
  std::optional<CommonPrefixResult> common_prefix;
  std::optional<ChainQualityResult> chain_quality;
  std::optional<SpanResult> span;

  nlohmann::json to_json() const;
};

TrialSummary summarize(const ExecutionTrace& trace);

struct ExperimentReport {
  ExecutionConfig config;
  std::vector<TrialSummary> trials;

  double mean_x_rate() const;
  double typical_pass_rate() const;
  double common_prefix_pass_rate() const;
  double chain_quality_pass_rate() const;
  double condition_pass_rate(const std::string& condition) const;  // "a", "b", "c"
  nlohmann::json to_json() const;
};

// Trials run in parallel with `jobs` threads (0 = OpenMP default); results
// are stored by trial index, so output does not depend on jobs.
ExperimentReport run_trials(const ExecutionConfig& config, unsigned jobs = 0);

}  // namespace pqpow::execution
