#include <sodium.h>

#include <cmath>
#include <sstream>

#include "pqpow/execution.hpp"

namespace pqpow::execution {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex(const std::uint8_t* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * (7 - i)));
  return hex(b, 8);
}

std::uint64_t ceil_u(double v) { return static_cast<std::uint64_t>(std::ceil(v)); }

class Hasher {
 public:
  Hasher() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    crypto_generichash_init(&state_, nullptr, 0, crypto_generichash_BYTES);
  }
  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    crypto_generichash_update(&state_, b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void bytes(const std::vector<std::uint8_t>& v) {
    u64(v.size());
    crypto_generichash_update(&state_, v.data(), v.size());
  }
  void ids(const std::vector<BlockId>& v) {
    u64(v.size());
    for (BlockId id : v) i64(id);
  }
  std::string finish() {
    std::uint8_t out[crypto_generichash_BYTES];
    crypto_generichash_final(&state_, out, sizeof out);
    return hex(out, sizeof out);
  }

 private:
  crypto_generichash_state state_;
};

}  // namespace

std::string to_string(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::None: return "none";
    case AdversaryKind::Classical: return "classical";
    case AdversaryKind::QuantumRate: return "quantum_rate";
    case AdversaryKind::PrivateChain: return "private_chain";
  }
  return "?";
}

std::string to_string(RateMode mode) {
  switch (mode) {
    case RateMode::Poisson: return "poisson";
    case RateMode::WorstCase: return "worst_case";
    case RateMode::TailCoupled: return "tail_coupled";
  }
  return "?";
}

AdversaryKind parse_adversary_kind(const std::string& s) {
  for (auto k : {AdversaryKind::None, AdversaryKind::Classical, AdversaryKind::QuantumRate,
                 AdversaryKind::PrivateChain}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown adversary kind '" + s + "'");
}

RateMode parse_rate_mode(const std::string& s) {
  for (auto m : {RateMode::Poisson, RateMode::WorstCase, RateMode::TailCoupled}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown rate mode '" + s + "'");
}

void AdversarySpec::validate() const {
  if (!(rate_eps >= 0.0) || !std::isfinite(rate_eps)) throw ConfigError("rate_eps must be finite and >= 0");
  if (quantum() && Q > 0 && mode != RateMode::Poisson && window == 0) {
    throw ConfigError("worst_case and tail_coupled modes need window >= 1");
  }
  if (kind == AdversaryKind::PrivateChain && release_threshold == 0) {
    throw ConfigError("release_threshold must be >= 1");
  }
}

nlohmann::json AdversarySpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}};
  switch (kind) {
    case AdversaryKind::None: break;
    case AdversaryKind::Classical: j["t"] = t; break;
    case AdversaryKind::PrivateChain:
      j["release_threshold"] = release_threshold == kNever ? nlohmann::json("never") : nlohmann::json(release_threshold);
      j["target_depth"] = target_depth;
      [[fallthrough]];
    case AdversaryKind::QuantumRate:
      j["Q"] = Q;
      j["mode"] = to_string(mode);
      j["rate_eps"] = rate_eps;
      j["window"] = window;
      break;
  }
  return j;
}

double ExecutionConfig::f() const {
  return -std::expm1(static_cast<double>(n * oracle.q) * std::log1p(-oracle.p()));
}

double ExecutionConfig::party_rate() const {
  return -std::expm1(static_cast<double>(oracle.q) * std::log1p(-oracle.p()));
}

void ExecutionConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (n > (1U << 20)) throw ConfigError("n must be <= 2^20");
  try {
    oracle.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (oracle.q < 1) throw ConfigError("q must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0,1)");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (rounds > (std::uint64_t{1} << 31)) throw ConfigError("rounds too large");
  adversary.validate();
  if (checks.s > 0) {
    const double fv = f();
    if (static_cast<double>(checks.s) * fv < 2.0) {
      std::ostringstream os;
      os << "check window s=" << checks.s << " gives s*f=" << checks.s * fv << " < 2";
      throw ConfigError(os.str());
    }
    if (rounds < ceil_u(2.0 / fv)) throw ConfigError("rounds must be >= ceil(2/f) when checks are requested");
    if (checks.s > rounds) throw ConfigError("check window s exceeds rounds");
    if (checks.cq_mu > 1.0) throw ConfigError("chain-quality mu must be <= 1");
  }
}

std::uint64_t ExecutionConfig::resolved_cp_k() const {
  return checks.cp_k > 0 ? checks.cp_k : ceil_u(2.0 * static_cast<double>(checks.s) * f());
}
std::uint64_t ExecutionConfig::resolved_cq_l() const {
  return checks.cq_l > 0 ? checks.cq_l : ceil_u(2.0 * static_cast<double>(checks.s) * f());
}
double ExecutionConfig::resolved_cq_mu() const { return checks.cq_mu >= 0.0 ? checks.cq_mu : f(); }

nlohmann::json ExecutionConfig::to_json() const {
  return {{"n", n},
          {"kappa", oracle.kappa},
          {"T", oracle.T},
          {"p", oracle.p()},
          {"q", oracle.q},
          {"oracle_seed", oracle.seed},
          {"rounds", rounds},
          {"eps", eps},
          {"f", f()},
          {"adversary", adversary.to_json()},
          {"seed", seed},
          {"trials", trials},
          {"checks",
           {{"s", checks.s},
            {"cp_k", checks.s ? resolved_cp_k() : 0},
            {"cq_l", checks.s ? resolved_cq_l() : 0},
            {"cq_mu", checks.s ? resolved_cq_mu() : 0.0}}},
          {"max_block_attempts", max_block_attempts}};
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return splitmix64(seed ^ splitmix64(trial + 1));
}

std::uint64_t trial_oracle_seed(std::uint64_t oracle_seed, std::uint64_t trial) {
  return splitmix64(oracle_seed ^ splitmix64(~trial));
}

ExecutionTrace::ExecutionTrace(ExecutionConfig config, std::uint64_t trial)
    : config_(std::move(config)), oracle_(config_.oracle), trial_(trial) {
  oracle_.seed = trial_oracle_seed(config_.oracle.seed, trial);
}

BlockId ExecutionTrace::add_block(backbone::Block block, BlockId parent, std::int64_t creator,
                                  std::uint64_t round) {
  if (parent != kGenesis && (parent < 0 || static_cast<std::size_t>(parent) >= blocks_.size())) {
    throw std::out_of_range("unknown parent block");
  }
  if (blocks_.size() >= static_cast<std::size_t>(std::numeric_limits<BlockId>::max())) {
    throw ResourceError("block index full");
  }
  BlockRecord rec;
  rec.parent = parent;
  rec.height = height(parent) + 1;
  rec.creator = creator;
  rec.round = round;
  rec.hash = backbone::block_hash(oracle_, block);
  rec.valid = block.ctr <= oracle_.q && block.s == tip_hash(parent) && rec.hash < oracle_.T;
  rec.chain_valid = rec.valid && chain_valid(parent);
  rec.block = std::move(block);
  const auto id = static_cast<BlockId>(blocks_.size());
  blocks_.push_back(std::move(rec));
  up_.resize(up_.size() + kLift, kGenesis);
  const std::size_t base = static_cast<std::size_t>(id) * kLift;
  up_[base] = parent;
  for (unsigned j = 1; j < kLift; ++j) {
    const BlockId mid = up_[base + j - 1];
    up_[base + j] = mid == kGenesis ? kGenesis : up_[static_cast<std::size_t>(mid) * kLift + j - 1];
  }
  return id;
}

BlockId ExecutionTrace::ancestor(BlockId id, std::uint32_t h) const {
  const std::uint32_t cur = height(id);
  if (h > cur) throw std::out_of_range("ancestor height above block");
  if (h == 0) return kGenesis;
  std::uint32_t diff = cur - h;
  for (unsigned j = 0; diff != 0; ++j, diff >>= 1) {
    if (diff & 1U) id = up_[static_cast<std::size_t>(id) * kLift + j];
  }
  return id;
}

BlockId ExecutionTrace::lca(BlockId a, BlockId b) const {
  if (a == kGenesis || b == kGenesis) return kGenesis;
  if (height(a) > height(b)) a = ancestor(a, height(b));
  if (height(b) > height(a)) b = ancestor(b, height(a));
  if (a == b) return a;
  for (int j = kLift - 1; j >= 0; --j) {
    const BlockId ua = up_[static_cast<std::size_t>(a) * kLift + static_cast<unsigned>(j)];
    const BlockId ub = up_[static_cast<std::size_t>(b) * kLift + static_cast<unsigned>(j)];
    if (ua != ub) {
      a = ua;
      b = ub;
    }
  }
  return block(a).parent;
}

backbone::Chain ExecutionTrace::chain(BlockId tip) const {
  backbone::Chain out;
  std::vector<BlockId> path;
  for (BlockId id = tip; id != kGenesis; id = block(id).parent) path.push_back(id);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const BlockRecord& r = block(*it);
    out.append(r.block, {r.creator, r.round});
  }
  return out;
}

std::string ExecutionTrace::digest() const {
  Hasher h;
  h.u64(trial_);
  h.u64(oracle_.seed);
  h.u64(blocks_.size());
  for (const BlockRecord& b : blocks_) {
    h.i64(b.parent);
    h.i64(b.creator);
    h.u64(b.round);
    h.u64(b.hash);
    h.u64(b.block.s);
    h.u64(b.block.ctr);
    h.bytes(b.block.x);
    h.u64(b.valid ? 1 : 0);
  }
  h.u64(rounds_.size());
  for (const RoundRecord& r : rounds_) {
    h.ids(r.honest_new);
    h.ids(r.adversary_new);
    h.ids(r.released);
    h.u64(r.delivered.size());
    for (const auto& d : r.delivered) h.ids(d);
    h.ids(r.adopted);
  }
  return h.finish();
}

std::string ExecutionTrace::to_ndjson() const {
  std::ostringstream os;
  os << nlohmann::json{{"type", "header"},
                       {"trial", trial_},
                       {"trial_oracle_seed", oracle_.seed},
                       {"config", config_.to_json()}}
            .dump()
     << '\n';
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockRecord& b = blocks_[i];
    os << nlohmann::json{{"type", "block"},
                         {"id", i},
                         {"parent", b.parent},
                         {"height", b.height},
                         {"creator", b.creator},
                         {"round", b.round},
                         {"hash", hex64(b.hash)},
                         {"s", hex64(b.block.s)},
                         {"x", hex(b.block.x.data(), b.block.x.size())},
                         {"ctr", b.block.ctr},
                         {"valid", b.valid}}
              .dump()
       << '\n';
  }
  for (std::size_t i = 0; i < rounds_.size(); ++i) {
    const RoundRecord& r = rounds_[i];
    os << nlohmann::json{{"type", "round"},
                         {"r", i + 1},
                         {"honest_new", r.honest_new},
                         {"adversary_new", r.adversary_new},
                         {"released", r.released},
                         {"delivered", r.delivered},
                         {"adopted", r.adopted}}
              .dump()
       << '\n';
  }
  return os.str();
}

}  // namespace pqpow::execution
