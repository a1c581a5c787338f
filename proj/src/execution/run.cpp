#include <omp.h>

#include <cmath>
#include <exception>
#include <numbers>

#include "pqpow/bounds.hpp"
#include "pqpow/execution.hpp"

namespace pqpow::execution {

namespace {

constexpr double kTailFloor = 1e-18;
constexpr std::uint64_t kTailMaxLength = std::uint64_t{1} << 24;

std::vector<std::uint8_t> adversary_payload(std::uint64_t round, std::uint64_t nonce) {
  return backbone::honest_payload(round, nonce | (std::uint64_t{1} << 63));
}

class TrialRunner {
 public:
  TrialRunner(const ExecutionConfig& config, ExecutionTrace& trace, std::uint64_t trial)
      : cfg_(config),
        tr_(trace),
        rng_(trial_seed(config.seed, trial)),
        source_(config.adversary, config.oracle.p()),
        tips_(config.n, kGenesis),
        rotate_(config.adversary.kind == AdversaryKind::PrivateChain && config.adversary.Q > 0) {}

  void run() {
    for (std::uint64_t r = 1; r <= cfg_.rounds; ++r) round(r);
  }

 private:
  void round(std::uint64_t r) {
    const auto n = static_cast<std::size_t>(cfg_.n);
    RoundRecord rec;
    rec.delivered.resize(n);
    const std::size_t m = pending_honest_.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto& d = rec.delivered[i];
      d = pending_release_;
      for (std::size_t j = 0; j < m; ++j) d.push_back(pending_honest_[rotate_ ? (j + i) % m : j]);
      for (BlockId tip : d) {
        if (tr_.chain_valid(tip) && tr_.height(tip) > tr_.height(tips_[i])) tips_[i] = tip;
      }
    }

    const auto& oracle = tr_.oracle();
    for (std::size_t i = 0; i < n; ++i) {
      const backbone::HashValue s = tr_.tip_hash(tips_[i]);
      auto payload = backbone::honest_payload(r, i);
      const backbone::MiningResult mined = backbone::mine(oracle, s, payload, oracle.q);
      if (!mined.ctr) continue;
      const BlockId id = tr_.add_block({s, std::move(payload), *mined.ctr}, tips_[i], static_cast<std::int64_t>(i), r);
      tips_[i] = id;
      rec.honest_new.push_back(id);
    }
    rec.honest_successes = static_cast<std::uint32_t>(rec.honest_new.size());

    adversary(r, rec);
    rec.adversary_pows = static_cast<std::uint32_t>(rec.adversary_new.size());
    rec.adopted = tips_;
    pending_honest_ = rec.honest_new;
    pending_release_ = rec.released;
    tr_.rounds().push_back(std::move(rec));
  }

  // Longest adopted honest chain, lowest party index on ties.
  BlockId public_tip() const {
    BlockId best = tips_[0];
    for (BlockId t : tips_) {
      if (tr_.height(t) > tr_.height(best)) best = t;
    }
    return best;
  }

  BlockId mine_block(BlockId parent, std::uint64_t r) {
    const auto& oracle = tr_.oracle();
    const backbone::HashValue s = tr_.tip_hash(parent);
    std::uint64_t attempts = 0;
    for (;;) {
      auto x = adversary_payload(r, nonce_++);
      const backbone::HashValue g = backbone::g_eval(oracle, s, x);
      for (std::uint64_t ctr = 0; ctr <= oracle.q; ++ctr) {
        if (++attempts > cfg_.max_block_attempts) {
          throw ResourceError("adversary exceeded max_block_attempts while mining one block");
        }
        if (backbone::h_eval(oracle, ctr, g) < oracle.T) {
          return tr_.add_block({s, std::move(x), ctr}, parent, backbone::kAdversaryCreator, r);
        }
      }
    }
  }

  void adversary(std::uint64_t r, RoundRecord& rec) {
    const AdversarySpec& spec = cfg_.adversary;
    const auto& oracle = tr_.oracle();
    switch (spec.kind) {
      case AdversaryKind::None:
        return;
      case AdversaryKind::Classical: {
        BlockId base = extend_base();
        for (std::uint64_t j = 0; j < spec.t; ++j) {
          const backbone::HashValue s = tr_.tip_hash(base);
          auto x = adversary_payload(r, nonce_++);
          const backbone::MiningResult mined = backbone::mine(oracle, s, x, oracle.q);
          if (!mined.ctr) continue;
          base = tr_.add_block({s, std::move(x), *mined.ctr}, base, backbone::kAdversaryCreator, r);
          rec.adversary_new.push_back(base);
        }
        publish(base, rec);
        return;
      }
      case AdversaryKind::QuantumRate: {
        BlockId base = extend_base();
        const std::uint64_t count = source_.step(r, rng_);
        for (std::uint64_t j = 0; j < count; ++j) {
          base = mine_block(base, r);
          rec.adversary_new.push_back(base);
        }
        publish(base, rec);
        return;
      }
      case AdversaryKind::PrivateChain:
        private_chain(r, rec);
        return;
    }
  }

  // Public strategies extend the longer of their own last block and the
  // best honest chain, preferring their own on ties.
  BlockId extend_base() const {
    const BlockId pub = public_tip();
    return tr_.height(pub) > tr_.height(adv_tip_) ? pub : adv_tip_;
  }

  void publish(BlockId tip, RoundRecord& rec) {
    if (!rec.adversary_new.empty()) rec.released.push_back(tip);
    adv_tip_ = tip;
  }

  void private_chain(std::uint64_t r, RoundRecord& rec) {
    const AdversarySpec& spec = cfg_.adversary;
    const BlockId pub = public_tip();
    if (withheld_ == 0) {
      if (tr_.height(pub) > tr_.height(adv_tip_)) adv_tip_ = pub;
    } else if (tr_.height(pub) > tr_.height(adv_tip_) + spec.target_depth) {
      adv_tip_ = pub;  // too far behind; restart from the public head
      withheld_ = 0;
    }
    const std::uint64_t count = source_.step(r, rng_);
    for (std::uint64_t j = 0; j < count; ++j) {
      adv_tip_ = mine_block(adv_tip_, r);
      rec.adversary_new.push_back(adv_tip_);
      ++withheld_;
    }
    if (withheld_ == 0 || spec.release_threshold == kNever) return;
    const std::uint64_t lead_needed = tr_.height(pub) + spec.release_threshold;
    const std::uint64_t orphaned = tr_.height(pub) - tr_.height(tr_.lca(adv_tip_, pub));
    if (tr_.height(adv_tip_) >= lead_needed && orphaned >= spec.target_depth) {
      rec.released.push_back(adv_tip_);
      withheld_ = 0;
    }
  }

  const ExecutionConfig& cfg_;
  ExecutionTrace& tr_;
  std::mt19937_64 rng_;
  RateSource source_;
  std::vector<BlockId> tips_;
  std::vector<BlockId> pending_honest_;
  std::vector<BlockId> pending_release_;
  BlockId adv_tip_ = kGenesis;
  std::uint64_t withheld_ = 0;
  std::uint64_t nonce_ = 0;
  bool rotate_ = false;
};

}  // namespace

std::uint64_t spread_count(std::uint64_t blocks, std::uint64_t s, std::uint64_t offset) {
  if (s == 0) return 0;
  auto ceil_div = [](std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; };
  return ceil_div((offset + 1) * blocks, s) - ceil_div(offset * blocks, s);
}

RateSource::RateSource(const AdversarySpec& spec, double p) : spec_(spec), p_(p) {
  if (!spec.quantum() || spec.Q == 0) return;
  const double Q = static_cast<double>(spec.Q);
  mean_ = std::numbers::e * std::sqrt(p) * Q * (1.0 + spec.rate_eps);
  if (spec.window == 0) return;
  const double s = static_cast<double>(spec.window);
  k0_ = static_cast<std::uint64_t>(std::ceil(bounds::k0_target(s, Q, p, spec.rate_eps)));
  if (spec.mode == RateMode::TailCoupled) {
    bounds::BoundParams bp;
    bp.p = p;
    bp.N = spec.window * spec.Q;
    tail_.push_back(1.0);
    double running = 1.0;
    for (std::uint64_t k = 1; running >= kTailFloor; ++k) {
      if (k > kTailMaxLength) throw ResourceError("tail-coupled distribution does not decay");
      bp.k = k;
      running = std::min(running, bounds::chain_of_pows_bound(bp).closed_form.clamped);
      tail_.push_back(running);
    }
  }
}

double RateSource::tail(std::uint64_t k) const { return k < tail_.size() ? tail_[k] : 0.0; }

std::uint64_t RateSource::draw_tail_coupled(std::mt19937_64& rng) {
  const double u = 1.0 - std::generate_canonical<double, 53>(rng);  // (0, 1]
  // Largest k with tail(k) >= u.
  std::uint64_t lo = 0, hi = tail_.size();
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (tail_[mid] >= u) lo = mid;
    else hi = mid;
  }
  return lo;
}

std::uint64_t RateSource::step(std::uint64_t r, std::mt19937_64& rng) {
  if (!spec_.quantum() || spec_.Q == 0) return 0;
  switch (spec_.mode) {
    case RateMode::Poisson:
      return std::poisson_distribution<std::uint64_t>(mean_)(rng);
    case RateMode::WorstCase:
      return spread_count(k0_, spec_.window, (r - 1) % spec_.window);
    case RateMode::TailCoupled: {
      const std::uint64_t offset = (r - 1) % spec_.window;
      if (offset == 0) window_blocks_ = draw_tail_coupled(rng);
      return spread_count(window_blocks_, spec_.window, offset);
    }
  }
  return 0;
}

ExecutionTrace run_execution(const ExecutionConfig& config, std::uint64_t trial) {
  config.validate();
  ExecutionTrace trace(config, trial);
  trace.rounds().reserve(config.rounds);
  TrialRunner(config, trace, trial).run();
  return trace;
}

ExperimentReport run_trials(const ExecutionConfig& config, unsigned jobs) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  report.trials.resize(config.trials);
  std::vector<std::exception_ptr> errors(config.trials);
  const auto count = static_cast<std::int64_t>(config.trials);
  const int threads = jobs > 0 ? static_cast<int>(jobs) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t t = 0; t < count; ++t) {
    const auto trial = static_cast<std::uint64_t>(t);
    try {
      report.trials[trial] = summarize(run_execution(config, trial));
    } catch (...) {
      errors[trial] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

}  // namespace pqpow::execution
