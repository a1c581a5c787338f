#include <cstdio>
#include <string>

#include "pqpow/backbone.hpp"

namespace pqpow::backbone {

namespace {

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  std::vector<std::uint8_t> take(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DecodeError("chain encoding truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw DecodeError("odd-length hex string");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw DecodeError("invalid hex digit");
  };
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
  }
  return out;
}

std::string hash_hex(HashValue h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_chain(const Chain& chain) {
  std::vector<std::uint8_t> out;
  put(out, chain.length(), 4);
  for (std::size_t i = 0; i < chain.length(); ++i) {
    const Block& b = chain.blocks[i];
    put(out, b.s, 8);
    put(out, b.x.size(), 4);
    out.insert(out.end(), b.x.begin(), b.x.end());
    put(out, b.ctr, 8);
    const Provenance prov = i < chain.provenance.size() ? chain.provenance[i] : Provenance{};
    put(out, static_cast<std::uint64_t>(prov.creator), 8);
    put(out, prov.round, 8);
  }
  return out;
}

Chain decode_chain(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint64_t count = r.get(4);
  Chain chain;
  for (std::uint64_t i = 0; i < count; ++i) {
    Block b;
    b.s = r.get(8);
    const std::uint64_t len = r.get(4);
    b.x = r.take(len);
    b.ctr = r.get(8);
    Provenance prov;
    prov.creator = static_cast<std::int64_t>(r.get(8));
    prov.round = r.get(8);
    chain.append(std::move(b), prov);
  }
  if (!r.done()) throw DecodeError("trailing bytes after chain encoding");
  return chain;
}

nlohmann::json chain_to_json(const Chain& chain) {
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t i = 0; i < chain.length(); ++i) {
    const Block& b = chain.blocks[i];
    const Provenance prov = i < chain.provenance.size() ? chain.provenance[i] : Provenance{};
    blocks.push_back({{"s", hash_hex(b.s)},
                      {"x", to_hex(b.x)},
                      {"ctr", b.ctr},
                      {"creator", prov.creator},
                      {"round", prov.round}});
  }
  return {{"blocks", std::move(blocks)}};
}

Chain chain_from_json(const nlohmann::json& j) {
  Chain chain;
  for (const auto& jb : j.at("blocks")) {
    Block b;
    b.s = std::stoull(jb.at("s").get<std::string>(), nullptr, 16);
    b.x = from_hex(jb.at("x").get<std::string>());
    b.ctr = jb.at("ctr").get<std::uint64_t>();
    chain.append(std::move(b), Provenance{jb.at("creator").get<std::int64_t>(),
                                          jb.at("round").get<std::uint64_t>()});
  }
  return chain;
}

}  // namespace pqpow::backbone
