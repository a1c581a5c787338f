#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pqpow/cli.hpp"

namespace pqpow::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

// Inclusive integer range a:b or a:b:step; descending when a > b.
std::vector<std::uint64_t> expand_range(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError("bad range '" + s + "'");
  const std::uint64_t a = parse_count(parts[0]);
  const std::uint64_t b = parse_count(parts[1]);
  const std::uint64_t step = parts.size() == 3 ? parse_count(parts[2]) : 1;
  if (step == 0) throw ConfigError("range step must be positive in '" + s + "'");
  const std::uint64_t span = a <= b ? b - a : a - b;
  if (span / step > 10'000'000) throw ConfigError("range '" + s + "' is too long");
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = 0; i <= span / step; ++i) out.push_back(a <= b ? a + i * step : a - i * step);
  return out;
}

}  // namespace

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.rfind("2^", 0) == 0) {
    const std::string e = s.substr(2);
    return std::ldexp(1.0, static_cast<int>(std::llround(parse_real(e))));
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_count(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("not a non-negative integer: '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("integer out of range: '" + s + "'");
  }
}

std::vector<double> parse_real_grid(const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const std::string& item : split(s, ',')) {
    if (item.rfind("2^-", 0) == 0 && item.find(':') != std::string::npos) {
      for (std::uint64_t e : expand_range(item.substr(3))) out.push_back(std::ldexp(1.0, -static_cast<int>(e)));
    } else if (item.find(':') != std::string::npos) {
      for (std::uint64_t v : expand_range(item)) out.push_back(static_cast<double>(v));
    } else {
      out.push_back(parse_real(item));
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_count_grid(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (trim(s).empty()) return out;
  for (const std::string& item : split(s, ',')) {
    if (item.find(':') != std::string::npos) {
      for (std::uint64_t v : expand_range(item)) out.push_back(v);
    } else {
      out.push_back(parse_count(item));
    }
  }
  return out;
}

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> ConfigFile::raw(const std::string& key) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::text(const std::string& key, const std::string& fallback) {
  return raw(key).value_or(fallback);
}

std::optional<std::uint64_t> ConfigFile::count(const std::string& key) {
  const auto v = raw(key);
  if (!v) return std::nullopt;
  try {
    return parse_count(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::uint64_t ConfigFile::count(const std::string& key, std::uint64_t fallback) {
  return count(key).value_or(fallback);
}

std::optional<double> ConfigFile::real(const std::string& key) {
  const auto v = raw(key);
  if (!v) return std::nullopt;
  try {
    return parse_real(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

double ConfigFile::real(const std::string& key, double fallback) { return real(key).value_or(fallback); }

bool ConfigFile::flag(const std::string& key, bool fallback) {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + *v + "'");
}

std::vector<double> ConfigFile::real_grid(const std::string& key, const std::string& fallback) {
  try {
    return parse_real_grid(text(key, fallback));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::uint64_t> ConfigFile::count_grid(const std::string& key, const std::string& fallback) {
  try {
    return parse_count_grid(text(key, fallback));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::string> ConfigFile::list(const std::string& key, const std::string& fallback) {
  const std::string v = text(key, fallback);
  if (trim(v).empty()) return {};
  return split(v, ',');
}

void ConfigFile::reject_unknown() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace pqpow::cli
