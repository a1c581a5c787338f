#include "pqpow/strategies.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "pqpow/bounds.hpp"

namespace pqpow::recording_sim {

namespace {

unsigned bits_for(unsigned max_value) { return static_cast<unsigned>(std::bit_width(max_value)); }

Eigen::Matrix2cd hadamard() {
  Eigen::Matrix2cd h;
  const double r = 1.0 / std::sqrt(2.0);
  h << r, r, r, -r;
  return h;
}

// A classical strategy over memory words held in z: claimed slots first,
// then a counter of recorded ones.
class ClassicalProgram {
 public:
  ClassicalProgram(const SystemConfig& config, std::uint64_t N) : config_(config), N_(N) {}
  virtual ~ClassicalProgram() = default;

  virtual std::optional<unsigned> query(std::uint64_t t, std::uint64_t mem) const = 0;
  virtual std::uint64_t finalize(std::uint64_t mem) const = 0;

  std::uint64_t record(std::uint64_t mem, unsigned x, unsigned y) const {
    if (!y) return mem;
    const unsigned c = counter(mem);
    return with_counter(with_slot(mem, c, x), c + 1);
  }

 protected:
  unsigned k() const { return config_.out_k; }
  unsigned M() const { return config_.M(); }
  unsigned slot(std::uint64_t mem, unsigned i) const {
    return static_cast<unsigned>((mem >> (i * config_.m)) & (M() - 1));
  }
  std::uint64_t with_slot(std::uint64_t mem, unsigned i, unsigned v) const {
    const unsigned shift = i * config_.m;
    return (mem & ~(std::uint64_t{M() - 1} << shift)) | (std::uint64_t{v} << shift);
  }
  unsigned counter(std::uint64_t mem) const {
    return static_cast<unsigned>((mem >> (k() * config_.m)) & ((1U << bits_for(k())) - 1));
  }
  std::uint64_t with_counter(std::uint64_t mem, unsigned c) const {
    const unsigned shift = k() * config_.m;
    const std::uint64_t mask = ((std::uint64_t{1} << bits_for(k())) - 1) << shift;
    return (mem & ~mask) | (std::uint64_t{c} << shift);
  }

  SystemConfig config_;
  std::uint64_t N_;
};

// x_t = t while fewer than k ones are recorded.
class DistinctProgram : public ClassicalProgram {
 public:
  using ClassicalProgram::ClassicalProgram;

  std::optional<unsigned> query(std::uint64_t t, std::uint64_t mem) const override {
    if (counter(mem) >= k() || t >= M()) return std::nullopt;
    return static_cast<unsigned>(t);
  }

  std::uint64_t finalize(std::uint64_t mem) const override {
    // Unfilled slots guess the first unqueried inputs.
    std::uint64_t next = std::min<std::uint64_t>(N_, M());
    for (unsigned i = counter(mem); i < k(); ++i, ++next) {
      mem = with_slot(mem, i, next < M() ? static_cast<unsigned>(next) : 0U);
    }
    return mem;
  }
};

// Level c owns inputs c*L .. c*L + L - 1 with L = M / k. Nonces of the
// current level are tried in order; a hit moves to the next level.
class ChainedProgram : public ClassicalProgram {
 public:
  ChainedProgram(const SystemConfig& config, std::uint64_t N)
      : ClassicalProgram(config, N), L_(config.M() / std::max(1U, config.out_k)) {}

  std::optional<unsigned> query(std::uint64_t t, std::uint64_t mem) const override {
    const unsigned c = counter(mem);
    if (c >= k()) return std::nullopt;
    const std::uint64_t j = t - used(mem);
    if (j >= L_) return std::nullopt;
    return static_cast<unsigned>(c * L_ + j);
  }

  std::uint64_t finalize(std::uint64_t mem) const override {
    const unsigned c = counter(mem);
    if (c >= k()) return mem;
    const std::uint64_t tried = N_ - used(mem);
    mem = with_slot(mem, c, static_cast<unsigned>(c * L_ + (tried < L_ ? tried : 0)));
    for (unsigned i = c + 1; i < k(); ++i) mem = with_slot(mem, i, i * L_);
    return mem;
  }

 private:
  // Queries spent on the levels already solved.
  std::uint64_t used(std::uint64_t mem) const {
    std::uint64_t total = 0;
    for (unsigned i = 0; i < counter(mem); ++i) total += slot(mem, i) - i * L_ + 1;
    return total;
  }

  unsigned L_;
};

// Extends an injective partial map on [0, n) to a permutation; unmapped
// sources take the unused targets in increasing order.
std::vector<std::uint64_t> complete_permutation(const std::map<std::uint64_t, std::uint64_t>& partial,
                                                std::uint64_t n) {
  std::vector<std::uint64_t> perm(n, std::numeric_limits<std::uint64_t>::max());
  std::vector<std::uint8_t> used(n, 0);
  for (const auto& [src, dst] : partial) {
    if (used[dst]) throw std::logic_error("classical step is not reversible on reachable memories");
    perm[src] = dst;
    used[dst] = 1;
  }
  std::uint64_t next = 0;
  for (std::uint64_t src = 0; src < n; ++src) {
    if (perm[src] != std::numeric_limits<std::uint64_t>::max()) continue;
    while (used[next]) ++next;
    perm[src] = next;
    used[next] = 1;
  }
  return perm;
}

class CompiledClassical : public Strategy {
 public:
  CompiledClassical(const SystemConfig& config, const ClassicalProgram& program, std::uint64_t N)
      : config_(config) {
    const unsigned w = config.w;
    const std::uint64_t n_adv = std::uint64_t{1} << config.adversary_qubits();
    std::set<std::uint64_t> reachable = {0};
    for (std::uint64_t t = 0; t < N; ++t) {
      std::map<std::uint64_t, std::uint64_t> prep;
      std::map<std::uint64_t, std::uint64_t> record;
      std::vector<std::uint8_t> active(n_adv, 0);
      std::set<std::uint64_t> next;
      for (std::uint64_t mem : reachable) {
        const auto q = program.query(t, mem);
        if (!q) {
          prep[mem] = mem;
          record[mem] = mem;
          next.insert(mem);
          continue;
        }
        const std::uint64_t xbits = std::uint64_t{*q} << (w + 1);
        prep[mem] = mem | xbits;
        active[mem | xbits] = 1;
        for (unsigned y = 0; y < 2; ++y) {
          const std::uint64_t out = program.record(mem, *q, y);
          record[mem | xbits | (std::uint64_t{y} << w)] = out;
          next.insert(out);
        }
      }
      steps_.push_back({complete_permutation(prep, n_adv), std::move(active), complete_permutation(record, n_adv)});
      reachable = std::move(next);
    }
    std::map<std::uint64_t, std::uint64_t> fin;
    for (std::uint64_t mem : reachable) fin[mem] = program.finalize(mem);
    finalize_ = complete_permutation(fin, n_adv);
  }

  void prepare(QuantumSystem&, Exec) const override {}

  void before_query(QuantumSystem& s, std::uint64_t t, Exec exec) const override {
    const Step& step = steps_.at(t);
    apply_adversary_permutation(s, step.prep, exec);
    apply_conditional_gate(s, config_.w, hadamard(), step.active, exec);
  }

  void after_query(QuantumSystem& s, std::uint64_t t, Exec exec) const override {
    const Step& step = steps_.at(t);
    apply_conditional_gate(s, config_.w, hadamard(), step.active, exec);
    apply_adversary_permutation(s, step.record, exec);
  }

  void finalize(QuantumSystem& s, Exec exec) const override { apply_adversary_permutation(s, finalize_, exec); }

 private:
  struct Step {
    std::vector<std::uint64_t> prep;
    std::vector<std::uint8_t> active;  // y-bit cleared adversary words that query
    std::vector<std::uint64_t> record;
  };

  SystemConfig config_;
  std::vector<Step> steps_;
  std::vector<std::uint64_t> finalize_;
};

class Grover : public Strategy {
 public:
  explicit Grover(const SystemConfig& config) : config_(config) {
    const unsigned m = config.m;
    const auto dim = static_cast<Eigen::Index>(config.M());
    diffusion_ = Eigen::MatrixXcd::Constant(dim, dim, 2.0 / static_cast<double>(dim)) -
                 Eigen::MatrixXcd::Identity(dim, dim);
    for (unsigned i = 0; i < m; ++i) x_qubits_.push_back(config.w + 1 + i);
  }

  void prepare(QuantumSystem& s, Exec exec) const override {
    const auto dim = static_cast<Eigen::Index>(config_.M());
    // Hadamard transform on x.
    Eigen::MatrixXcd h(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        h(r, c) = (std::popcount(static_cast<unsigned>(r & c)) % 2 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(dim));
      }
    }
    apply_adversary_gate(s, x_qubits_, h, exec);
    const unsigned y = config_.w;
    Eigen::MatrixXcd flip(2, 2);
    flip << 0, 1, 1, 0;
    apply_adversary_gate(s, std::span<const unsigned>(&y, 1), flip, exec);
  }

  void before_query(QuantumSystem&, std::uint64_t, Exec) const override {}

  void after_query(QuantumSystem& s, std::uint64_t, Exec exec) const override {
    apply_adversary_gate(s, x_qubits_, diffusion_, exec);
  }

  void finalize(QuantumSystem& s, Exec exec) const override {
    const std::uint64_t n_adv = std::uint64_t{1} << config_.adversary_qubits();
    std::vector<std::uint64_t> perm(n_adv);
    for (std::uint64_t a = 0; a < n_adv; ++a) perm[a] = a ^ (a >> (config_.w + 1));
    apply_adversary_permutation(s, perm, exec);
  }

 private:
  SystemConfig config_;
  Eigen::MatrixXcd diffusion_;
  std::vector<unsigned> x_qubits_;
};

Eigen::MatrixXcd haar_unitary(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd g(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) g(r, c) = {normal(rng), normal(rng)};
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < dim; ++c) {
    const std::complex<double> d = rmat(c, c);
    q.col(c) *= std::abs(d) > 0 ? d / std::abs(d) : 1.0;
  }
  return q;
}

class RandomCircuit : public Strategy {
 public:
  RandomCircuit(const SystemConfig& config, std::uint64_t seed, std::uint64_t N) {
    std::mt19937_64 rng(seed);
    const unsigned A = config.adversary_qubits();
    for (std::uint64_t layer = 0; layer <= N + 1; ++layer) {
      Layer gates;
      for (unsigned q = layer % 2; q + 1 < A; q += 2) gates.push_back({{q, q + 1}, haar_unitary(rng, 4)});
      if (A == 1) gates.push_back({{0}, haar_unitary(rng, 2)});
      layers_.push_back(std::move(gates));
    }
  }

  void prepare(QuantumSystem& s, Exec exec) const override { apply_layer(s, 0, exec); }
  void before_query(QuantumSystem& s, std::uint64_t t, Exec exec) const override { apply_layer(s, t + 1, exec); }
  void after_query(QuantumSystem&, std::uint64_t, Exec) const override {}
  void finalize(QuantumSystem& s, Exec exec) const override { apply_layer(s, layers_.size() - 1, exec); }

 private:
  struct Gate {
    std::vector<unsigned> qubits;
    Eigen::MatrixXcd u;
  };
  using Layer = std::vector<Gate>;

  void apply_layer(QuantumSystem& s, std::size_t i, Exec exec) const {
    for (const Gate& g : layers_.at(i)) apply_adversary_gate(s, g.qubits, g.u, exec);
  }

  std::vector<Layer> layers_;
};

}  // namespace

std::string StrategySpec::id() const {
  switch (kind) {
    case StrategyKind::ClassicalDistinct:
      return "classical_distinct_queries";
    case StrategyKind::ClassicalChained:
      return "classical_chained";
    case StrategyKind::GroverK1:
      return "grover_k1";
    case StrategyKind::RandomCircuit:
      return "random_circuit(" + std::to_string(seed) + ")";
  }
  return {};
}

StrategySpec StrategySpec::parse(std::string_view id) {
  StrategySpec spec;
  if (id == "classical_distinct_queries") return spec;
  if (id == "classical_chained") {
    spec.kind = StrategyKind::ClassicalChained;
    return spec;
  }
  if (id == "grover_k1") {
    spec.kind = StrategyKind::GroverK1;
    return spec;
  }
  constexpr std::string_view prefix = "random_circuit";
  if (id.substr(0, prefix.size()) == prefix) {
    spec.kind = StrategyKind::RandomCircuit;
    std::string_view rest = id.substr(prefix.size());
    if (rest.empty()) return spec;
    if (rest.size() >= 3 && rest.front() == '(' && rest.back() == ')') {
      const std::string digits(rest.substr(1, rest.size() - 2));
      if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
        spec.seed = std::stoull(digits);
        return spec;
      }
    }
  }
  throw ValidationError("unknown strategy id '" + std::string(id) + "'");
}

unsigned required_workspace(const StrategySpec& spec, unsigned m, unsigned k) {
  switch (spec.kind) {
    case StrategyKind::ClassicalDistinct:
    case StrategyKind::ClassicalChained:
      return k * m + bits_for(k);
    case StrategyKind::GroverK1:
      return m;
    case StrategyKind::RandomCircuit:
      return k * m;
  }
  return 0;
}

SystemConfig strategy_config(const StrategySpec& spec, unsigned m, double p, unsigned k) {
  SystemConfig config;
  config.m = m;
  config.p = p;
  config.out_k = k;
  config.w = required_workspace(spec, m, k);
  return config;
}

std::unique_ptr<Strategy> make_strategy(const StrategySpec& spec, const SystemConfig& config, std::uint64_t N) {
  config.validate();
  if (config.w < required_workspace(spec, config.m, config.out_k)) {
    std::ostringstream os;
    os << spec.id() << " needs w >= " << required_workspace(spec, config.m, config.out_k);
    throw ValidationError(os.str());
  }
  switch (spec.kind) {
    case StrategyKind::ClassicalDistinct:
      return std::make_unique<CompiledClassical>(config, DistinctProgram(config, N), N);
    case StrategyKind::ClassicalChained:
      if (config.out_k == 0) throw ValidationError("classical_chained needs out_k >= 1");
      return std::make_unique<CompiledClassical>(config, ChainedProgram(config, N), N);
    case StrategyKind::GroverK1:
      if (config.out_k != 1) throw ValidationError("grover_k1 needs out_k = 1");
      return std::make_unique<Grover>(config);
    case StrategyKind::RandomCircuit:
      return std::make_unique<RandomCircuit>(config, spec.seed, N);
  }
  throw ValidationError("unknown strategy");
}

void evolve(QuantumSystem& s, const Strategy& strategy, std::uint64_t N, Exec exec) {
  strategy.prepare(s, exec);
  for (std::uint64_t t = 0; t < N; ++t) {
    strategy.before_query(s, t, exec);
    if (s.domain() == Domain::Dual) {
      apply_dual_query(s, exec);
    } else {
      apply_std_query(s, exec);
    }
    strategy.after_query(s, t, exec);
  }
  strategy.finalize(s, exec);
}

StrategyReport run_strategy(const SystemConfig& config, const StrategySpec& spec, std::uint64_t N, Exec exec) {
  auto strategy = make_strategy(spec, config, N);
  StrategyReport rep;
  rep.config = config;
  rep.strategy = spec;
  rep.N = N;
  const unsigned k = config.out_k;
  const double coupling = 2.0 * std::sqrt(config.p * (1.0 - config.p));

  QuantumSystem s = new_system(config);
  auto drift = [&] { rep.max_norm_drift = std::max(rep.max_norm_drift, std::abs(s.norm(exec) - 1.0)); };
  strategy->prepare(s, exec);
  rep.trajectory.push_back(progress_measure(s, k, exec));
  for (std::uint64_t t = 0; t < N; ++t) {
    strategy->before_query(s, t, exec);
    drift();
    const double p0 = k >= 1 ? projector_norm(s, {ProjKind::P0, k - 1}, exec) : 0.0;
    const double before = progress_measure(s, k, exec);
    apply_dual_query(s, exec);
    const double after = progress_measure(s, k, exec);
    rep.p0_norms.push_back(p0);
    rep.slacks.push_back(after - before - coupling * p0);
    rep.trajectory.push_back(after);
    strategy->after_query(s, t, exec);
  }
  strategy->finalize(s, exec);
  drift();

  const auto sp = success_probability(s, exec);
  rep.success = sp.probability;
  rep.degenerate = sp.degenerate;
  rep.slack_max = rep.slacks.empty() ? -std::numeric_limits<double>::infinity()
                                     : *std::max_element(rep.slacks.begin(), rep.slacks.end());
  if (k == 0) {
    rep.bound = 1.0;
  } else if (spec.kind == StrategyKind::ClassicalChained) {
    rep.bound = bounds::reduction_bound(N, k, config.p).clamped;
  } else {
    bounds::BoundParams bp;
    bp.p = config.p;
    bp.N = N;
    bp.k = k;
    rep.bound = bounds::kbersearch_bound_exact(bp).clamped;
  }
  return rep;
}

nlohmann::json StrategyReport::to_json() const {
  nlohmann::json j;
  j["config"] = {{"m", config.m}, {"w", config.w}, {"p", config.p}, {"out_k", config.out_k}};
  j["strategy"] = strategy.id();
  j["N"] = N;
  j["trajectory"] = trajectory;
  j["p0_norms"] = p0_norms;
  j["success"] = success;
  j["degenerate"] = degenerate;
  j["bound"] = bound;
  j["slack_max"] = slacks.empty() ? nlohmann::json(nullptr) : nlohmann::json(slack_max);
  j["max_norm_drift"] = max_norm_drift;
  return j;
}

}  // namespace pqpow::recording_sim
