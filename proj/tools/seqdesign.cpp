// Command-line front end: simulate panels, run estimators over saved panels,
// run the diagnostics, and execute parameter sweeps (ad hoc or preset).
//
// Exit codes: 0 success, 2 bad configuration/flags/input files, 3 degenerate
// analysis outcome (only with --strict for per-estimator failures), 1 bug.
//
// SEQDESIGN_LOG=quiet|info|debug controls stderr chatter (default info); the
// resolved seed line is always printed so every run is reproducible.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <seqdesign/seqdesign.hpp>

namespace sd = seqdesign;
using sd::io::ConfigError;

namespace {

struct Log {
  int level = 1;  // 0 quiet, 1 info, 2 debug

  Log() {
    const char* env = std::getenv("SEQDESIGN_LOG");
    if (!env) return;
    const std::string v = env;
    if (v == "quiet") level = 0;
    else if (v == "info") level = 1;
    else if (v == "debug") level = 2;
    else throw ConfigError("SEQDESIGN_LOG must be one of quiet|info|debug");
  }

  void info(const std::string& msg) const {
    if (level >= 1) std::cerr << msg << "\n";
  }
  void debug(const std::string& msg) const {
    if (level >= 2) std::cerr << msg << "\n";
  }
};

// Always printed, independent of the log level: the one line needed to rerun.
void print_seed(std::uint64_t seed) { std::cerr << "seed: " << seed << "\n"; }

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

sd::DesignKind parse_design(const std::string& token) {
  const auto d = sd::design_from_token(token);
  if (!d) throw ConfigError("unknown design '" + token + "'");
  return *d;
}

sd::SplitRule parse_split(const std::string& s) {
  sd::SplitRule rule;
  if (s == "median") return rule;
  if (s.rfind("cut:", 0) == 0) {
    rule.kind = sd::SplitRule::Kind::FixedCut;
    rule.cut = sd::io::parse_double_strict(s.substr(4), "--split cut value");
    return rule;
  }
  throw ConfigError("--split must be 'median' or 'cut:<value>'");
}

std::string sanitize_csv_field(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n') ch = ';';
  return s;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string design;
  std::string out;
  int n = 100;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string carryover = "none";
  double carryover_c = 0.0;
  std::string drift = "independent_increment";
  double alpha0 = 2.0, alpha1 = 5.0, alpha2 = 5.0;
  double beta0 = 2.0, beta1 = 5.0, beta2 = 5.0;
  double gamma = 0.0;
  double noise_sd = 1.0;
  double time_shift = 0.0;
};

int run_simulate(const SimulateArgs& a, const Log& log) {
  sd::DgpConfig cfg;
  cfg.alpha0 = a.alpha0; cfg.alpha1 = a.alpha1; cfg.alpha2 = a.alpha2;
  cfg.beta0 = a.beta0; cfg.beta1 = a.beta1; cfg.beta2 = a.beta2;
  cfg.gamma = a.gamma;
  cfg.noise_sd = a.noise_sd;
  cfg.time_shift_c = a.time_shift;
  cfg.n = a.n;

  const auto model = sd::carryover_from_token(a.carryover);
  if (!model) throw ConfigError("unknown carryover kind '" + a.carryover + "'");
  cfg.carryover = {*model, a.carryover_c};

  const auto drift = sd::drift_from_token(a.drift);
  if (!drift) throw ConfigError("unknown covariate drift '" + a.drift + "'");
  cfg.covariate_drift = *drift;

  cfg.validate();
  const sd::DesignKind design = parse_design(a.design);
  const std::uint64_t seed = a.seed_given ? a.seed : entropy_seed();
  print_seed(seed);
  log.debug("dgp: " + cfg.fingerprint());

  const sd::Simulation sim = sd::simulate_experiment(cfg, design, seed);
  sd::io::write_panel_files(sim.panel, a.out);
  log.info("wrote " + a.out + " and " + sd::io::meta_sidecar_path(a.out) + " (" +
           std::to_string(sim.panel.rows.size()) + " units, design " +
           sd::to_token(design) + ")");
  return 0;
}

// ----------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string in;
  std::vector<std::string> estimators;
  std::string out;
  bool fwl = false;
  bool strict = false;
  bool period_dummy = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_estimate(const EstimateArgs& a, const Log& log) {
  const sd::Panel panel = sd::io::read_panel_files(a.in);
  log.debug("panel: " + std::to_string(panel.rows.size()) + " units, design " +
            sd::to_token(panel.meta.design));

  std::vector<sd::EstimatorKind> kinds;
  for (const std::string& token : a.estimators) {
    const auto k = sd::estimator_from_token(token);
    if (!k) throw ConfigError("unknown estimator '" + token + "'");
    kinds.push_back(*k);
  }
  if (kinds.empty()) throw ConfigError("--estimator: need at least one estimator");

  const std::uint64_t seed = a.seed_given ? a.seed : entropy_seed();
  print_seed(seed);

  sd::EstimateOptions opt;
  opt.add_period_dummy = a.period_dummy;

  nlohmann::json results = nlohmann::json::array();
  std::string csv = "estimator,tau_hat,se,n_used,error\n";
  int failures = 0;

  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const std::string token = sd::to_token(kinds[i]);
    std::string error;
    // Per-estimator stream keyed by list position, so adding an estimator to
    // the list never changes another's draws.
    sd::rng::Stream rs(sd::rng::derive(seed, 1 + static_cast<std::uint64_t>(i)));
    try {
      const sd::EstimateResult r = sd::estimate(panel, kinds[i], rs, opt);
      results.push_back(sd::io::estimate_result_to_json(r));
      csv += token + "," + sd::detail::format_double(r.tau_hat) + "," +
             sd::detail::format_double(r.se) + "," + std::to_string(r.n_used) +
             ",\n";
      continue;
    } catch (const sd::stats::CollinearityError& e) {
      error = "collinear design matrix (column " + std::to_string(e.column()) + ")";
    } catch (const sd::stats::DegenerateOutcome& e) {
      error = e.what();
    }
    ++failures;
    log.info(token + ": " + error);
    results.push_back({{"estimator", token}, {"error", error}});
    csv += token + ",,,," + sanitize_csv_field(error) + "\n";
  }

  nlohmann::json doc{{"results", results}};
  if (a.fwl) {
    try {
      doc["fwl"] = sd::io::fwl_to_json(sd::fwl_decompose(panel));
    } catch (const sd::stats::DegenerateOutcome& e) {
      ++failures;
      log.info(std::string("fwl: ") + e.what());
      doc["fwl"] = {{"error", e.what()}};
    }
  }

  std::cout << doc.dump(2) << "\n";
  if (!a.out.empty()) {
    sd::io::write_text_file(a.out, csv);
    log.info("wrote " + a.out);
  }

  if (a.strict && failures > 0) {
    log.info("strict mode: " + std::to_string(failures) + " analysis failure(s)");
    return 3;
  }
  return 0;
}

// ----------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string in;
  double threshold = 1.96;
  std::string split = "median";
};

int run_diagnose(const DiagnoseArgs& a, const Log& log) {
  const sd::Panel panel = sd::io::read_panel_files(a.in);
  const sd::DiagnosticReport report =
      sd::heuristic_gap(panel, a.threshold, parse_split(a.split));

  using sd::detail::format_double;
  log.info("fisher exact (period 1): p = " + format_double(report.fisher_p) +
           "  [" + report.dichotomizer + "]");
  log.info("tau_t1_hat = " + format_double(report.tau_t1_hat) +
           ", tau_t2_hat = " + format_double(report.tau_t2_hat));
  log.info("gap = " + format_double(report.gap) + " (se " +
           format_double(report.gap_se) + "), z = " + format_double(report.gap_z));
  log.info(std::string("warn: ") + (report.warn ? "yes" : "no") +
           " (threshold " + format_double(report.threshold) + ")");
  log.info("note: a small gap does not certify the design, and a flagged gap "
           "can reflect a changing effect rather than carryover");

  std::cout << sd::io::diagnostic_report_to_json(report).dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string config;
  std::string out;
  int workers = 1;
};

void write_sweep_outputs(const sd::SweepResult& result, const std::string& out,
                         const Log& log) {
  sd::io::write_text_file(out, sd::io::sweep_result_to_csv(result));
  sd::io::write_text_file(sd::io::meta_sidecar_path(out),
                          sd::io::sweep_meta_to_json(result.meta).dump(2) + "\n");
  log.info("wrote " + out + " (wall " +
           sd::detail::format_double(result.meta.wall_seconds) + "s, " +
           std::to_string(result.meta.workers) + " worker(s))");
}

void print_totals(const std::vector<sd::SweepRow>& rows) {
  long long reps = 0, failures = 0;
  for (const sd::SweepRow& r : rows) {
    reps += r.reps;
    failures += r.failures;
  }
  std::cout << "replications: " << reps << ", failures: " << failures << "\n";
}

int run_sweep_cmd(const SweepArgs& a, const Log& log) {
  if (a.workers < 1) throw ConfigError("--workers must be >= 1");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sd::io::read_text_file(a.config));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("sweep config: invalid JSON: " + std::string(e.what()));
  }
  const sd::SweepConfig cfg = sd::io::sweep_config_from_json(j);
  print_seed(cfg.master_seed);
  log.debug("config: " + cfg.fingerprint());

  const sd::SweepResult result = sd::run_sweep(cfg, a.workers);
  write_sweep_outputs(result, a.out, log);
  print_totals(result.rows);
  return 0;
}

// ------------------------------------------------------------------- preset

struct PresetArgs {
  std::string name;
  std::string out;
  int workers = 1;
  int reps = 0;          // 0 = keep preset value
  int gamma_points = 0;  // 0 = keep preset value
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_preset(const PresetArgs& a, const Log& log) {
  if (a.workers < 1) throw ConfigError("--workers must be >= 1");
  std::vector<sd::PresetVariant> variants;
  if (a.name == "fig3") variants = sd::preset_fig3_variants();
  else if (a.name == "fig5") variants = sd::preset_fig5_variants();
  else throw ConfigError("--name must be 'fig3' or 'fig5'");

  std::vector<sd::SweepRow> all_rows;
  bool seed_printed = false;
  for (sd::PresetVariant& v : variants) {
    if (a.reps > 0) v.config.reps = a.reps;
    if (a.gamma_points > 0) v.config.gamma_grid.count = a.gamma_points;
    if (a.seed_given) v.config.master_seed = a.seed;
    if (!seed_printed) {
      print_seed(v.config.master_seed);  // shared across variants
      seed_printed = true;
    }
    log.info("variant " + v.label + ": " +
             std::to_string(v.config.gamma_grid.count) + " gamma values x " +
             std::to_string(v.config.reps) + " reps, design " +
             sd::to_token(v.config.design));
    const sd::SweepResult result = sd::run_sweep(v.config, a.workers);
    write_sweep_outputs(result, a.out + "_" + v.label + ".csv", log);
    all_rows.insert(all_rows.end(), result.rows.begin(), result.rows.end());
  }
  print_totals(all_rows);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation laboratory for two-period, two-arm sequential designs"};
  app.set_version_flag("--version", sd::kVersion);
  app.require_subcommand(1);

  int rc = 0;

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "generate a panel and write it to CSV");
  c_sim->add_option("--design", sim.design,
                    "between_subjects|cwsd|pre_post|seq_rand|selective")->required();
  c_sim->add_option("--n", sim.n, "number of units")->check(CLI::PositiveNumber);
  c_sim->add_option("--out", sim.out, "output CSV path")->required();
  auto* sim_seed = c_sim->add_option("--seed", sim.seed, "seed (default: fresh entropy)");
  c_sim->add_option("--carryover", sim.carryover,
                    "none|constant_symmetric|additive_interaction|compounding|covariate_mediated");
  c_sim->add_option("--carryover-c", sim.carryover_c, "constant carryover shift");
  c_sim->add_option("--drift", sim.drift, "independent_increment|treatment_shift");
  c_sim->add_option("--gamma", sim.gamma, "carryover / drift strength");
  c_sim->add_option("--alpha0", sim.alpha0, "period-1 intercept");
  c_sim->add_option("--alpha1", sim.alpha1, "period-1 treatment effect");
  c_sim->add_option("--alpha2", sim.alpha2, "period-1 covariate coefficient");
  c_sim->add_option("--beta0", sim.beta0, "period-2 intercept");
  c_sim->add_option("--beta1", sim.beta1, "period-2 treatment effect");
  c_sim->add_option("--beta2", sim.beta2, "period-2 covariate coefficient");
  c_sim->add_option("--noise-sd", sim.noise_sd, "outcome noise sd");
  c_sim->add_option("--time-shift", sim.time_shift, "additive period-2 time shift");

  EstimateArgs est;
  CLI::App* c_est = app.add_subcommand("estimate", "run estimators over a saved panel");
  c_est->add_option("--in", est.in, "panel CSV path")->required();
  c_est->add_option("--estimator", est.estimators, "comma-separated estimator list")
      ->required()->delimiter(',');
  c_est->add_option("--out", est.out, "also write results as CSV");
  c_est->add_flag("--fwl", est.fwl, "include the pooled-coefficient decomposition");
  c_est->add_flag("--strict", est.strict, "exit 3 if any estimator fails");
  c_est->add_flag("--period-dummy", est.period_dummy,
                  "add the period indicator to the pooled regressions");
  auto* est_seed = c_est->add_option("--seed", est.seed, "seed (default: fresh entropy)");

  DiagnoseArgs diag;
  CLI::App* c_diag = app.add_subcommand("diagnose", "carryover heuristics for a saved panel");
  c_diag->add_option("--in", diag.in, "panel CSV path")->required();
  c_diag->add_option("--threshold", diag.threshold,
                     "z threshold for the gap warning (inf disables)");
  c_diag->add_option("--split", diag.split, "median or cut:<value>");

  SweepArgs swp;
  CLI::App* c_swp = app.add_subcommand("sweep", "run a sweep from a JSON config");
  c_swp->add_option("--config", swp.config, "sweep config JSON path")->required();
  c_swp->add_option("--out", swp.out, "output CSV path")->required();
  c_swp->add_option("--workers", swp.workers, "worker threads");

  PresetArgs pre;
  CLI::App* c_pre = app.add_subcommand("preset", "run a built-in sweep (both variants)");
  c_pre->add_option("--name", pre.name, "fig3 or fig5")->required();
  c_pre->add_option("--out", pre.out, "output path prefix")->required();
  c_pre->add_option("--workers", pre.workers, "worker threads");
  c_pre->add_option("--reps", pre.reps, "override replications per cell");
  c_pre->add_option("--gamma-points", pre.gamma_points, "override gamma grid size");
  auto* pre_seed = c_pre->add_option("--seed", pre.seed, "override master seed");

  try {
    app.parse(argc, argv);
    const Log log;
    sim.seed_given = sim_seed->count() > 0;
    est.seed_given = est_seed->count() > 0;
    pre.seed_given = pre_seed->count() > 0;
    if (c_sim->parsed()) rc = run_simulate(sim, log);
    else if (c_est->parsed()) rc = run_estimate(est, log);
    else if (c_diag->parsed()) rc = run_diagnose(diag, log);
    else if (c_swp->parsed()) rc = run_sweep_cmd(swp, log);
    else if (c_pre->parsed()) rc = run_preset(pre, log);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sd::stats::DegenerateOutcome& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
