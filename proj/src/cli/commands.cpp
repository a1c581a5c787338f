#include <omp.h>
#include <sodium.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pqpow/bounds.hpp"
#include "pqpow/cli.hpp"
#include "pqpow/execution.hpp"
#include "pqpow/recording_sim.hpp"
#include "pqpow/verify.hpp"

namespace pqpow::cli {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string blake2b_hex(const std::string& data) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  unsigned char out[crypto_generichash_BYTES];
  crypto_generichash(out, sizeof out, reinterpret_cast<const unsigned char*>(data.data()), data.size(), nullptr, 0);
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string hex;
  for (unsigned char c : out) {
    hex.push_back(kDigits[c >> 4]);
    hex.push_back(kDigits[c & 0xF]);
  }
  return hex;
}

std::string resolve_format(const GlobalOptions& opts, const std::string& fallback,
                           std::initializer_list<const char*> allowed) {
  const std::string f = opts.format.empty() ? fallback : opts.format;
  for (const char* a : allowed) {
    if (f == a) return f;
  }
  throw ConfigError("format '" + f + "' not supported by this command");
}

template <class T>
T require(std::optional<T> v, const std::string& key) {
  if (!v) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

json bound_json(const bounds::BoundValue& v) { return {{"raw", v.raw}, {"clamped", v.clamped}, {"log_raw", v.log_raw}}; }

// ---------------------------------------------------------------- bounds

struct BoundRow {
  double p, eps;
  std::uint64_t N, k;
  bounds::BoundValue exact, chain, exp_form, reduction;
  std::optional<bounds::BoundValue> stirling;
  std::optional<bool> ordering_ok;
};

constexpr double kOrderingTol = 1e-9;

}  // namespace

CommandResult cmd_bounds(ConfigFile& config, const GlobalOptions& opts) {
  const auto ps = config.real_grid("p", "");
  const auto Ns = config.count_grid("N", "");
  const auto ks = config.count_grid("k", "");
  const auto epss = config.real_grid("eps", "0.1");
  const bool triangular = config.flag("triangular", false);
  config.reject_unknown();
  const std::string format = resolve_format(opts, "csv", {"csv", "json"});
  if (ps.empty() || Ns.empty() || ks.empty() || epss.empty()) throw ConfigError("empty parameter grid");

  std::vector<BoundRow> rows;
  for (double p : ps) {
    for (std::uint64_t N : Ns) {
      for (std::uint64_t k : ks) {
        if (triangular && k > N) continue;
        for (double eps : epss) {
          bounds::BoundParams bp;
          bp.p = p;
          bp.N = N;
          bp.k = k;
          bp.eps = eps;
          BoundRow row{p, eps, N, k, bounds::kbersearch_bound_exact(bp), {}, {}, bounds::reduction_bound(N, k, p), {}, {}};
          const auto chain = bounds::chain_of_pows_bound(bp);
          row.chain = chain.closed_form;
          row.exp_form = chain.exponential_form;
          if (k >= 4 && k <= N) {
            row.stirling = bounds::kbersearch_bound_stirling(bp);
            row.ordering_ok = row.exact.log_raw <= row.stirling->log_raw + kOrderingTol;
          }
          rows.push_back(row);
        }
      }
    }
  }
  if (rows.empty()) throw ConfigError("empty parameter grid");

  std::uint64_t violations = 0;
  for (const BoundRow& r : rows) violations += r.ordering_ok && !*r.ordering_ok;

  CommandResult res;
  std::ostringstream os;
  if (format == "csv") {
    os << "schema_version,p,N,k,eps,exact,exact_clamped,stirling,stirling_clamped,chain,chain_clamped,exp_form,reduction,ordering_ok\n";
    for (const BoundRow& r : rows) {
      os << kSchemaVersion << ',' << num(r.p) << ',' << r.N << ',' << r.k << ',' << num(r.eps) << ','
         << num(r.exact.raw) << ',' << num(r.exact.clamped) << ',' << (r.stirling ? num(r.stirling->raw) : "") << ','
         << (r.stirling ? num(r.stirling->clamped) : "") << ',' << num(r.chain.raw) << ',' << num(r.chain.clamped)
         << ',' << num(r.exp_form.raw) << ',' << num(r.reduction.raw) << ','
         << (r.ordering_ok ? (*r.ordering_ok ? "true" : "false") : "") << '\n';
    }
  } else {
    json list = json::array();
    for (const BoundRow& r : rows) {
      list.push_back({{"p", r.p},
                      {"N", r.N},
                      {"k", r.k},
                      {"eps", r.eps},
                      {"exact", bound_json(r.exact)},
                      {"stirling", r.stirling ? bound_json(*r.stirling) : json()},
                      {"chain", bound_json(r.chain)},
                      {"exp_form", bound_json(r.exp_form)},
                      {"reduction", bound_json(r.reduction)},
                      {"ordering_ok", r.ordering_ok ? json(*r.ordering_ok) : json()}});
    }
    os << json{{"schema_version", kSchemaVersion},
               {"command", "bounds"},
               {"rows", std::move(list)},
               {"ordering_violations", violations}}
              .dump(1)
       << '\n';
  }
  res.output = os.str();
  res.exit_code = violations ? kViolation : kOk;
  res.message = std::to_string(rows.size()) + " rows, " + std::to_string(violations) + " ordering violations";
  return res;
}

// ---------------------------------------------------------------- compare

namespace {

json compare_json(const bounds::ComparisonTable& t, bool f_derived) {
  const auto& bp = t.params;
  json per_k = json::array();
  for (const auto& row : t.per_k) {
    json r{{"k", row.k}, {"gen2_exact", bound_json(row.gen2)}, {"gen1", bound_json(row.gen1)}};
    if (row.k >= 4 && row.k <= bp.N) {
      bounds::BoundParams sp = bp;
      sp.k = row.k;
      r["gen2_stirling"] = bound_json(bounds::kbersearch_bound_stirling(sp));
    } else {
      r["gen2_stirling"] = nullptr;
    }
    per_k.push_back(std::move(r));
  }
  const double settle = bounds::settlement_ratio(bp.eps, bp.f);
  return {
      {"schema_version", kSchemaVersion},
      {"command", "compare"},
      {"params",
       {{"p", bp.p}, {"eps", bp.eps}, {"f", bp.f}, {"f_derived", f_derived}, {"n", bp.n}, {"t", bp.t},
        {"q", bp.q}, {"Q", bp.Q}, {"s", bp.s}, {"N", bp.N}}},
      {"table2",
       {{"honest_majority",
         {{"classical", {{"lhs", t.classical_hm_lhs}, {"rhs", t.classical_hm_rhs}, {"holds", t.classical_hm_holds}}},
          {"quantum", {{"threshold", t.quantum_hm_threshold}, {"Q", bp.Q}, {"holds", t.quantum_hm_holds}}}}},
        {"max_expected_adversarial_pows",
         {{"classical", t.classical_expected_adv}, {"quantum", t.quantum_expected_adv}}},
        {"concentration_exponent",
         {{"classical", t.classical_concentration}, {"quantum", t.quantum_concentration}}},
        {"rounds", {{"quantum_over_classical", std::isfinite(settle) ? json(settle) : json("inf")}}}}},
      {"table3",
       {{"expected_optimal",
         {{"nons", t.expected_optimal_nons},
          {"gen1", t.expected_optimal_gen1},
          {"gen2", t.expected_optimal_gen2},
          {"gen1_over_gen2", t.expected_optimal_ratio}}},
        {"convergence", {{"nons", t.convergence_nons}, {"gen1", t.convergence_gen1}, {"gen2", t.convergence_gen2}}},
        {"per_k", std::move(per_k)}}}};
}

std::string compare_text(const json& j) {
  std::ostringstream os;
  char line[256];
  const auto& t2 = j["table2"];
  const auto& hm = t2["honest_majority"];
  os << "Classical vs quantum adversary (s = " << j["params"]["s"] << ", Q = " << j["params"]["Q"] << ")\n";
  std::snprintf(line, sizeof line, "  %-34s %-32s %s\n", "", "classical", "quantum");
  os << line;
  std::snprintf(line, sizeof line, "  %-34s t/(n-t)=%.6g < %.6g: %-5s Q <= %.12g: %s\n", "honest majority",
                hm["classical"]["lhs"].get<double>(), hm["classical"]["rhs"].get<double>(),
                hm["classical"]["holds"].get<bool>() ? "yes" : "no", hm["quantum"]["threshold"].get<double>(),
                hm["quantum"]["holds"].get<bool>() ? "yes" : "no");
  os << line;
  std::snprintf(line, sizeof line, "  %-34s %-32.12g %.12g\n", "max expected adversarial PoWs",
                t2["max_expected_adversarial_pows"]["classical"].get<double>(),
                t2["max_expected_adversarial_pows"]["quantum"].get<double>());
  os << line;
  std::snprintf(line, sizeof line, "  %-34s %-32.12g %.12g\n", "concentration exponent",
                t2["concentration_exponent"]["classical"].get<double>(),
                t2["concentration_exponent"]["quantum"].get<double>());
  os << line;
  const auto& rounds = t2["rounds"]["quantum_over_classical"];
  std::snprintf(line, sizeof line, "  %-34s %s\n", "rounds (s_q / s_cl)",
                (rounds.is_number() ? num(rounds.get<double>()) : rounds.get<std::string>()).c_str());
  os << line;

  const auto& t3 = j["table3"];
  os << "\nk-BerSearch (N = " << j["params"]["N"] << ")\n";
  std::snprintf(line, sizeof line, "  %-20s %-22s %-22s %s\n", "", "NonS", "Gen1", "Gen2");
  os << line;
  std::snprintf(line, sizeof line, "  %-20s %-22.12g %-22.12g %.12g\n", "expected optimal",
                t3["expected_optimal"]["nons"].get<double>(), t3["expected_optimal"]["gen1"].get<double>(),
                t3["expected_optimal"]["gen2"].get<double>());
  os << line;
  std::snprintf(line, sizeof line, "  %-20s %-22s %-22s %s\n", "convergence",
                t3["convergence"]["nons"].get<std::string>().c_str(), t3["convergence"]["gen1"].get<std::string>().c_str(),
                t3["convergence"]["gen2"].get<std::string>().c_str());
  os << line;
  std::snprintf(line, sizeof line, "  %-20s %.12g\n", "Gen1/Gen2 optimum", t3["expected_optimal"]["gen1_over_gen2"].get<double>());
  os << line;
  for (const auto& row : t3["per_k"]) {
    std::snprintf(line, sizeof line, "  k = %-16llu Gen1 bound %-14.6g Gen2 bound %.6g\n",
                  static_cast<unsigned long long>(row["k"].get<std::uint64_t>()), row["gen1"]["raw"].get<double>(),
                  row["gen2_exact"]["raw"].get<double>());
    os << line;
  }
  return os.str();
}

}  // namespace

CommandResult cmd_compare(ConfigFile& config, const GlobalOptions& opts) {
  bounds::BoundParams bp;
  bp.p = require(config.real("p"), "p");
  bp.eps = require(config.real("eps"), "eps");
  bp.n = require(config.count("n"), "n");
  bp.t = require(config.count("t"), "t");
  bp.q = require(config.count("q"), "q");
  bp.Q = require(config.count("Q"), "Q");
  bp.s = require(config.count("s"), "s");
  bp.N = require(config.count("N"), "N");
  const auto f = config.real("f");
  const std::string convention = config.text("f_convention", "exact");
  const auto ks = config.count_grid("ks", "");
  config.reject_unknown();
  const std::string format = resolve_format(opts, "json", {"json", "text"});

  bounds::FConvention conv;
  if (convention == "exact") conv = bounds::FConvention::Exact;
  else if (convention == "paper") conv = bounds::FConvention::Paper;
  else throw ConfigError("f_convention must be exact or paper");
  bp.f = f ? *f : bounds::honest_success_rate(bp.n, bp.q, bp.p, conv);
  if (!(bp.f > 0.0 && bp.f < 1.0)) throw ConfigError("f must lie in (0,1)");
  if (bp.t > bp.n) throw ConfigError("t must not exceed n");

  const bounds::ComparisonTable table = bounds::comparison_table(bp, ks);
  const json j = compare_json(table, !f.has_value());
  CommandResult res;
  res.output = format == "json" ? j.dump(1) + "\n" : compare_text(j);
  res.message = "quantum honest-majority threshold " + num(table.quantum_hm_threshold);
  return res;
}

// ---------------------------------------------------------------- simulate

namespace {

execution::ExecutionConfig execution_config(ConfigFile& config, const GlobalOptions& opts) {
  using namespace execution;
  ExecutionConfig c;
  c.n = config.count("n", 16);
  const unsigned kappa = static_cast<unsigned>(config.count("kappa", 32));
  const auto q = require(config.count("q"), "q");
  const std::uint64_t oracle_seed = config.count("oracle_seed", opts.seed);
  const auto T = config.count("T");
  const auto p = config.real("p");
  if (T && p) throw ConfigError("give either p or T, not both");
  if (T) {
    c.oracle.kappa = kappa;
    c.oracle.T = *T;
    c.oracle.q = q;
    c.oracle.seed = oracle_seed;
  } else {
    try {
      c.oracle = backbone::OracleParams::nearest(require(p, "p"), kappa, q, oracle_seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  c.rounds = require(config.count("rounds"), "rounds");
  c.eps = config.real("eps", 0.1);
  c.seed = opts.seed;
  c.trials = opts.trials;

  AdversarySpec& a = c.adversary;
  a.kind = parse_adversary_kind(config.text("adversary", "none"));
  a.t = config.count("t", 0);
  a.Q = config.count("Q", 0);
  a.mode = parse_rate_mode(config.text("mode", "poisson"));
  a.rate_eps = config.real("rate_eps", 0.1);
  c.checks.s = config.count("check_s", 0);
  a.window = config.count("window", c.checks.s);
  const std::string release = config.text("release_threshold", "1");
  a.release_threshold = release == "never" ? kNever : parse_count(release);
  a.target_depth = config.count("target_depth", 0);
  c.checks.cp_k = config.count("cp_k", 0);
  c.checks.cq_l = config.count("cq_l", 0);
  c.checks.cq_mu = config.real("cq_mu", -1.0);
  c.max_block_attempts = config.count("max_block_attempts", c.max_block_attempts);
  return c;
}

}  // namespace

CommandResult cmd_simulate(ConfigFile& config, const GlobalOptions& opts) {
  execution::ExecutionConfig c = execution_config(config, opts);
  struct Threshold {
    const char* key;
    double value;
  };
  std::vector<Threshold> mins = {{"min_typical_rate", 0}, {"min_condition_a_rate", 0}, {"min_condition_b_rate", 0},
                                 {"min_condition_c_rate", 0}, {"min_common_prefix_rate", 0},
                                 {"min_chain_quality_rate", 0}};
  for (Threshold& t : mins) t.value = config.real(t.key, 0.0);
  const double max_cp = config.real("max_common_prefix_rate", 1.0);
  const std::string trace_out = config.text("trace_out", "");
  const std::uint64_t trace_trial = config.count("trace_trial", 0);
  config.reject_unknown();
  const std::string format = resolve_format(opts, "json", {"json", "csv"});
  c.validate();
  const bool checks = c.checks.s > 0;
  for (const Threshold& t : mins) {
    if (t.value > 0 && !checks) throw ConfigError(std::string(t.key) + " needs check_s > 0");
  }
  if (trace_trial >= c.trials) throw ConfigError("trace_trial must be below trials");

  const execution::ExperimentReport report = execution::run_trials(c, opts.jobs);
  if (!trace_out.empty()) {
    std::ofstream out(trace_out, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace_out '" + trace_out + "'");
    out << execution::run_execution(c, trace_trial).to_ndjson();
  }

  json j = report.to_json();
  bool ok = j["aggregate"]["delivery_ok"].get<bool>() && j["aggregate"]["counters_ok"].get<bool>();
  json thresholds = json::object();
  if (checks) {
    const double rates[] = {report.typical_pass_rate(),      report.condition_pass_rate("a"),
                            report.condition_pass_rate("b"), report.condition_pass_rate("c"),
                            report.common_prefix_pass_rate(), report.chain_quality_pass_rate()};
    for (std::size_t i = 0; i < mins.size(); ++i) {
      thresholds[mins[i].key] = mins[i].value;
      ok = ok && rates[i] >= mins[i].value;
    }
    thresholds["max_common_prefix_rate"] = max_cp;
    ok = ok && report.common_prefix_pass_rate() <= max_cp;
  }
  j["schema_version"] = kSchemaVersion;
  j["command"] = "simulate";
  j["thresholds"] = thresholds;
  j["pass"] = ok;
  j["report_hash"] = blake2b_hex(j.dump());

  CommandResult res;
  if (format == "json") {
    res.output = j.dump(1) + "\n";
  } else {
    std::ostringstream os;
    os << "schema_version,trial,digest,blocks,honest_blocks,adversary_blocks,final_height,x_rate,z_rate,"
          "typical_pass,typical_failed,x_band_failures,y_failures,z_failures,common_prefix_pass,"
          "chain_quality_pass,chain_quality_worst\n";
    for (const auto& t : report.trials) {
      os << kSchemaVersion << ',' << t.trial << ',' << t.digest << ',' << t.blocks << ',' << t.honest_blocks << ','
         << t.adversary_blocks << ',' << t.final_height << ',' << num(t.x_rate) << ',' << num(t.z_rate) << ',';
      if (t.typical) {
        os << (t.typical->pass ? "true" : "false") << ',' << t.typical->failed << ',' << t.typical->x_band_failures
           << ',' << t.typical->y_failures << ',' << t.typical->z_failures << ',';
      } else {
        os << ",,,,,";
      }
      os << (t.common_prefix ? (t.common_prefix->pass ? "true" : "false") : "") << ','
         << (t.chain_quality ? (t.chain_quality->pass ? "true" : "false") : "") << ','
         << (t.chain_quality ? num(t.chain_quality->worst) : "") << '\n';
    }
    res.output = os.str();
  }
  res.exit_code = ok ? kOk : kViolation;
  std::ostringstream msg;
  msg << c.trials << " trials, mean X rate " << num(report.mean_x_rate()) << " (f = " << num(c.f()) << ")";
  if (checks) {
    msg << ", typical " << num(report.typical_pass_rate()) << ", common prefix " << num(report.common_prefix_pass_rate())
        << ", chain quality " << num(report.chain_quality_pass_rate());
  }
  res.message = msg.str();
  return res;
}

// ---------------------------------------------------------------- verify-oracle

CommandResult cmd_verify_oracle(ConfigFile& config, const GlobalOptions& opts) {
  using namespace recording_sim;
  VerifyGrid grid;
  const auto ms = config.count_grid("ms", "1,2,3");
  grid.ps = config.real_grid("ps", "0.1,0.25,0.5");
  grid.n_max = config.count("n_max", grid.n_max);
  grid.k_max = static_cast<unsigned>(config.count("k_max", grid.k_max));
  grid.mixture_max_m = static_cast<unsigned>(config.count("mixture_max_m", grid.mixture_max_m));
  const auto strategies = config.list("strategies", "classical_distinct_queries,grover_k1,random_circuit(0)");
  grid.pi_lemma_samples = config.count("pi_lemma_samples", grid.pi_lemma_samples);
  grid.budget = config.count("budget", grid.budget);
  const bool reduction = config.flag("reduction", true);
  const std::string fault = config.text("fault_injection", "none");
  config.reject_unknown();
  resolve_format(opts, "json", {"json"});

  if (ms.empty() || grid.ps.empty()) throw ConfigError("empty verification grid");
  grid.ms.clear();
  for (std::uint64_t m : ms) {
    if (m < 1 || m > kMaxInputBits) throw ConfigError("m must lie in [1, " + std::to_string(kMaxInputBits) + "]");
    grid.ms.push_back(static_cast<unsigned>(m));
  }
  grid.strategies.clear();
  for (const std::string& id : strategies) grid.strategies.push_back(StrategySpec::parse(id));
  if (fault == "none") grid.fault = UpFault::None;
  else if (fault == "up_sign") grid.fault = UpFault::SignError;
  else throw ConfigError("fault_injection must be none or up_sign");
  grid.seed = opts.seed;

  const Exec exec = opts.jobs == 1 ? Exec::Serial : Exec::Parallel;
  const VerifyReport lemmas = verify_lemmas(grid, exec);
  json j{{"schema_version", kSchemaVersion}, {"command", "verify-oracle"}, {"lemmas", lemmas.to_json()}};
  bool ok = lemmas.ok();
  const auto rec = lemmas.families.find("recurrence");
  j["max_recurrence_slack"] = rec != lemmas.families.end() ? json(rec->second.worst) : json();
  if (reduction) {
    ReductionGrid rg;
    rg.ms = grid.ms;
    rg.ps = grid.ps;
    rg.k_max = grid.k_max;
    rg.budget = grid.budget;
    const VerifyReport red = verify_reduction(rg, exec);
    j["reduction"] = red.to_json();
    ok = ok && red.ok();
  }
  j["ok"] = ok;

  CommandResult res;
  res.output = j.dump(1) + "\n";
  res.exit_code = ok ? kOk : kViolation;
  std::ostringstream msg;
  msg << lemmas.cases << " cases, " << lemmas.total_violations << " lemma violations";
  for (const auto& [name, st] : lemmas.families) {
    if (st.violations) msg << " [" << name << ": " << st.violations << "/" << st.checks << "]";
  }
  if (reduction) msg << ", reduction " << (j["reduction"]["ok"].get<bool>() ? "ok" : "violated");
  res.message = msg.str();
  return res;
}

// ---------------------------------------------------------------- dispatch

CommandResult run_command(const std::string& name, ConfigFile& config, const GlobalOptions& opts) {
  CommandResult res;
  try {
    if (opts.jobs > 0) omp_set_num_threads(static_cast<int>(opts.jobs));
    if (name == "bounds") return cmd_bounds(config, opts);
    if (name == "compare") return cmd_compare(config, opts);
    if (name == "simulate") return cmd_simulate(config, opts);
    if (name == "verify-oracle") return cmd_verify_oracle(config, opts);
    res.exit_code = kConfigInvalid;
    res.message = "unknown command '" + name + "'";
  } catch (const recording_sim::ResourceError& e) {
    res = {kResource, "", std::string("resource limit: ") + e.what()};
  } catch (const execution::ResourceError& e) {
    res = {kResource, "", std::string("resource limit: ") + e.what()};
  } catch (const std::invalid_argument& e) {
    res = {kConfigInvalid, "", std::string("invalid configuration: ") + e.what()};
  } catch (const std::logic_error& e) {
    res = {kConfigInvalid, "", std::string("invalid configuration: ") + e.what()};
  }
  return res;
}

int emit(const CommandResult& result, const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  if (!result.output.empty()) {
    if (opts.out.empty()) {
      out << result.output;
    } else {
      std::ofstream file(opts.out, std::ios::binary);
      if (!file) {
        err << "cannot write " << opts.out << '\n';
        return kConfigInvalid;
      }
      file << result.output;
    }
  }
  if (!result.message.empty()) err << result.message << '\n';
  return result.exit_code;
}

}  // namespace pqpow::cli
