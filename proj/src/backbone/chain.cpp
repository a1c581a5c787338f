#include <algorithm>

#include "pqpow/backbone.hpp"

namespace pqpow::backbone {

void Chain::append(Block block, Provenance prov) {
  blocks.push_back(std::move(block));
  provenance.push_back(prov);
}

bool valid_block(const OracleParams& params, const Block& block,
                 std::optional<HashValue> prev_hash) {
  if (block.ctr > params.q) return false;
  if (prev_hash && block.s != *prev_hash) return false;
  return block_hash(params, block) < params.T;
}

bool validate_chain(const OracleParams& params, const Chain& chain) {
  std::optional<HashValue> prev;
  for (const Block& b : chain.blocks) {
    if (b.ctr > params.q) return false;
    if (prev && b.s != *prev) return false;
    const HashValue h = block_hash(params, b);
    if (h >= params.T) return false;
    prev = h;
  }
  return true;
}

Chain prune(const Chain& chain, std::size_t k) {
  Chain out;
  if (k >= chain.length()) return out;
  const auto keep = static_cast<std::ptrdiff_t>(chain.length() - k);
  out.blocks.assign(chain.blocks.begin(), chain.blocks.begin() + keep);
  out.provenance.assign(chain.provenance.begin(), chain.provenance.begin() + keep);
  return out;
}

bool is_prefix(const Chain& prefix, const Chain& chain) {
  if (prefix.length() > chain.length()) return false;
  return std::equal(prefix.blocks.begin(), prefix.blocks.end(), chain.blocks.begin());
}

Chain select_chain(const OracleParams& params, const Chain& current,
                   std::span<const Chain> received) {
  const Chain* best = &current;
  for (const Chain& candidate : received) {
    if (candidate.length() <= best->length()) continue;
    if (!validate_chain(params, candidate)) continue;
    best = &candidate;
  }
  return *best;
}

std::vector<std::uint8_t> honest_payload(std::uint64_t round, std::uint64_t party) {
  std::vector<std::uint8_t> x(16);
  for (int i = 0; i < 8; ++i) {
    x[static_cast<std::size_t>(7 - i)] = static_cast<std::uint8_t>(round >> (8 * i));
    x[static_cast<std::size_t>(15 - i)] = static_cast<std::uint8_t>(party >> (8 * i));
  }
  return x;
}

MiningResult mine(const OracleParams& params, HashValue s, std::span<const std::uint8_t> x,
                  std::uint64_t attempts) {
  MiningResult result;
  if (attempts == 0) return result;
  const HashValue g = g_eval(params, s, x);
  for (std::uint64_t ctr = 0; ctr < attempts; ++ctr) {
    ++result.queries_used;
    if (h_eval(params, ctr, g) < params.T) {
      result.ctr = ctr;
      break;
    }
  }
  return result;
}

HonestRoundResult honest_round(const OracleParams& params, PartyState& state,
                               std::uint64_t round, std::span<const std::uint8_t> payload) {
  HonestRoundResult result;
  const HashValue s = state.chain.empty() ? 0 : block_hash(params, *state.chain.head());
  const MiningResult mined = mine(params, s, payload, params.q);
  result.queries_used = mined.queries_used;
  if (mined.ctr) {
    Block b{s, {payload.begin(), payload.end()}, *mined.ctr};
    state.chain.append(b, Provenance{static_cast<std::int64_t>(state.id), round});
    result.new_block = std::move(b);
  }
  return result;
}

}  // namespace pqpow::backbone
