#include <sodium.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

#include "pqpow/backbone.hpp"

namespace pqpow::backbone {

namespace {

using Key = std::array<unsigned char, crypto_shorthash_KEYBYTES>;

void init_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

void put_be64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(v & 0xffU);
    v >>= 8;
  }
}

Key make_key(std::uint64_t seed, OracleRole role) {
  static_assert(crypto_shorthash_KEYBYTES == 16);
  Key key{};
  put_be64(key.data(), seed);
  const char* tag = role == OracleRole::H ? "pqpow-H" : "pqpow-G";
  std::memcpy(key.data() + 8, tag, 7);
  key[15] = 0;
  return key;
}

}  // namespace

double OracleParams::p() const { return std::ldexp(static_cast<double>(T), -static_cast<int>(kappa)); }

void OracleParams::validate() const {
  if (kappa < 1 || kappa > 64) throw std::invalid_argument("kappa must lie in [1, 64]");
  if (T == 0) throw std::invalid_argument("difficulty target T must be positive");
  if (kappa < 64 && T >= (std::uint64_t{1} << kappa)) {
    throw std::invalid_argument("difficulty target T must be below 2^kappa");
  }
}

OracleParams OracleParams::from_probability(double p, unsigned kappa, std::uint64_t q,
                                            std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  if (kappa < 1 || kappa > 63) throw std::invalid_argument("kappa must lie in [1, 63]");
  const double scaled = std::ldexp(p, static_cast<int>(kappa));
  if (scaled != std::floor(scaled) || scaled < 1.0) {
    std::ostringstream os;
    os << "p=" << p << " is not a multiple of 2^-" << kappa << "; choose a dyadic p";
    throw std::invalid_argument(os.str());
  }
  OracleParams params;
  params.kappa = kappa;
  params.T = static_cast<std::uint64_t>(scaled);
  params.q = q;
  params.seed = seed;
  params.validate();
  return params;
}

OracleParams OracleParams::nearest(double p, unsigned kappa, std::uint64_t q, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  if (kappa < 1 || kappa > 63) throw std::invalid_argument("kappa must lie in [1, 63]");
  OracleParams params;
  params.kappa = kappa;
  params.T = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(std::ldexp(p, static_cast<int>(kappa)))));
  params.q = q;
  params.seed = seed;
  params.validate();
  return params;
}

HashValue oracle_eval(const OracleParams& params, OracleRole role,
                      std::span<const std::uint8_t> input) {
  init_sodium();
  const Key key = make_key(params.seed, role);
  std::array<unsigned char, crypto_shorthash_BYTES> out{};
  crypto_shorthash(out.data(), input.data(), input.size(), key.data());
  std::uint64_t digest = 0;
  for (int i = 7; i >= 0; --i) digest = (digest << 8) | out[static_cast<std::size_t>(i)];
  return params.kappa >= 64 ? digest : digest >> (64 - params.kappa);
}

HashValue g_eval(const OracleParams& params, HashValue s, std::span<const std::uint8_t> x) {
  std::uint8_t stack_buf[64];
  std::vector<std::uint8_t> heap_buf;
  std::uint8_t* buf = stack_buf;
  const std::size_t len = 8 + x.size();
  if (len > sizeof(stack_buf)) {
    heap_buf.resize(len);
    buf = heap_buf.data();
  }
  put_be64(buf, s);
  if (!x.empty()) std::memcpy(buf + 8, x.data(), x.size());
  return oracle_eval(params, OracleRole::G, {buf, len});
}

HashValue h_eval(const OracleParams& params, std::uint64_t ctr, HashValue g) {
  std::uint8_t buf[16];
  put_be64(buf, ctr);
  put_be64(buf + 8, g);
  return oracle_eval(params, OracleRole::H, buf);
}

HashValue block_hash(const OracleParams& params, const Block& block) {
  return h_eval(params, block.ctr, g_eval(params, block.s, block.x));
}

}  // namespace pqpow::backbone
