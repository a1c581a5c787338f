#pragma once

// Backbone data structures: random oracles H and G, blocks <s, x, ctr>,
// chains, the q-bounded validity predicate and the longest-chain rule.
//
// Oracle construction (pinned, byte-exact):
//   key    = seed as 8 bytes big-endian || 8-byte role tag ("pqpow-H\0" or "pqpow-G\0")
//   digest = SipHash-2-4(key, preimage), read as a little-endian uint64
//   output = digest >> (64 - kappa)
// Preimages:
//   G(s, x)   : s as 8 bytes big-endian || x
//   H(ctr, g) : ctr as 8 bytes big-endian || g as 8 bytes big-endian

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace pqpow::backbone {

using HashValue = std::uint64_t;

enum class OracleRole : std::uint8_t { H, G };

struct OracleParams {
  unsigned kappa = 32;    // hash output bits, 1..64
  std::uint64_t T = 0;    // difficulty target, 1 <= T < 2^kappa
  std::uint64_t q = 0;    // honest queries per round; valid blocks have ctr <= q
  std::uint64_t seed = 0;

  double p() const;
  void validate() const;

  // T = p * 2^kappa; throws unless that product is an integer in [1, 2^kappa).
  static OracleParams from_probability(double p, unsigned kappa, std::uint64_t q,
                                       std::uint64_t seed);
  // T = round(p * 2^kappa), at least 1; p() then differs from the request
  // by at most 2^-(kappa+1).
  static OracleParams nearest(double p, unsigned kappa, std::uint64_t q, std::uint64_t seed);
};

HashValue oracle_eval(const OracleParams& params, OracleRole role,
                      std::span<const std::uint8_t> input);

HashValue g_eval(const OracleParams& params, HashValue s, std::span<const std::uint8_t> x);
HashValue h_eval(const OracleParams& params, std::uint64_t ctr, HashValue g);

struct Block {
  HashValue s = 0;
  std::vector<std::uint8_t> x;
  std::uint64_t ctr = 0;

  friend bool operator==(const Block&, const Block&) = default;
};

// H(ctr, G(s, x)); the link value a successor block carries in s.
HashValue block_hash(const OracleParams& params, const Block& block);

inline constexpr std::int64_t kAdversaryCreator = -1;

// Simulation metadata, never hashed.
struct Provenance {
  std::int64_t creator = 0;  // honest party id, or kAdversaryCreator
  std::uint64_t round = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Chain {
  std::vector<Block> blocks;
  std::vector<Provenance> provenance;  // parallel to blocks

  std::size_t length() const { return blocks.size(); }
  bool empty() const { return blocks.empty(); }
  // nullptr for the empty chain.
  const Block* head() const { return blocks.empty() ? nullptr : &blocks.back(); }
  void append(Block block, Provenance prov);

  friend bool operator==(const Chain&, const Chain&) = default;
};

// Eq. validity: H(ctr, G(s, x)) < T and ctr <= q, plus s == prev_hash when a
// predecessor is given.
bool valid_block(const OracleParams& params, const Block& block,
                 std::optional<HashValue> prev_hash);

bool validate_chain(const OracleParams& params, const Chain& chain);

// First len - k blocks; the empty chain once k >= len.
Chain prune(const Chain& chain, std::size_t k);

// Exact sequence prefix on blocks (provenance ignored).
bool is_prefix(const Chain& prefix, const Chain& chain);

// Longest valid chain among current and received. Ties keep current; among
// equally long received chains the first in delivery order wins. Invalid
// candidates are skipped.
Chain select_chain(const OracleParams& params, const Chain& current,
                   std::span<const Chain> received);

// Payload for honest parties: round || party id, 8 bytes big-endian each.
std::vector<std::uint8_t> honest_payload(std::uint64_t round, std::uint64_t party);

// Tries ctr = 0, 1, ..., attempts-1 against G(s, x); returns the first
// succeeding ctr. queries_used counts H evaluations spent.
struct MiningResult {
  std::optional<std::uint64_t> ctr;
  std::uint64_t queries_used = 0;
};
MiningResult mine(const OracleParams& params, HashValue s, std::span<const std::uint8_t> x,
                  std::uint64_t attempts);

struct PartyState {
  std::uint64_t id = 0;
  Chain chain;
};

struct HonestRoundResult {
  std::optional<Block> new_block;
  std::uint64_t queries_used = 0;
};

// One round of honest mining on the head of state.chain; a success is
// appended to state.chain.
HonestRoundResult honest_round(const OracleParams& params, PartyState& state,
                               std::uint64_t round, std::span<const std::uint8_t> payload);

// Length-prefixed binary form (all integers big-endian):
//   u32 block count, then per block: u64 s, u32 |x|, x bytes, u64 ctr,
//   i64 creator, u64 round.
std::vector<std::uint8_t> encode_chain(const Chain& chain);
Chain decode_chain(std::span<const std::uint8_t> bytes);

nlohmann::json chain_to_json(const Chain& chain);
Chain chain_from_json(const nlohmann::json& j);

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pqpow::backbone
