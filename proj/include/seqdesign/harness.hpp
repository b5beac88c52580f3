#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "seqdesign/dgp.hpp"
#include "seqdesign/estimators.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/version.hpp"

// Deterministic, parallelizable Monte Carlo sweeps over carryover magnitudes.
// Every (gamma index, replication) cell derives its own random streams from
// the master seed, and results land in preassigned slots, so the output is
// identical for any worker count or scheduling order.

namespace seqdesign {

struct GammaGrid {
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  // Endpoint-inclusive; written as a single convex combination so symmetric
  // grids hit interior values like 0 exactly.
  double value(int i) const {
    if (count == 1) return start;
    return (start * static_cast<double>(count - 1 - i) +
            stop * static_cast<double>(i)) /
           static_cast<double>(count - 1);
  }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v.push_back(value(i));
    return v;
  }
};

struct SweepConfig {
  GammaGrid gamma_grid;
  int reps = 100;
  int n = 100;  // units per replication (overrides dgp.n)
  DesignKind design = DesignKind::SequentialRandomization;
  DgpConfig dgp;  // template; gamma and n are overwritten per cell
  std::vector<EstimatorKind> estimators;
  std::uint64_t master_seed = 0;
  std::string note;

  DgpConfig cell_dgp(int gamma_index) const {
    DgpConfig d = dgp;
    d.gamma = gamma_grid.value(gamma_index);
    d.n = n;
    return d;
  }

  void validate() const {
    const auto fail = [](const char* msg) { throw std::invalid_argument(std::string("sweep config: ") + msg); };
    if (gamma_grid.count < 1) fail("gamma_grid.count must be >= 1");
    if (!(gamma_grid.start <= gamma_grid.stop)) fail("gamma_grid.start must be <= stop");
    if (reps < 1) fail("reps must be >= 1");
    if (n < 1) fail("n must be >= 1");
    if (estimators.empty()) fail("estimators must be nonempty");
    for (int g = 0; g < gamma_grid.count; ++g) cell_dgp(g).validate();
  }

  std::string fingerprint() const {
    using detail::format_double;
    std::string s = "design=" + std::string(to_token(design)) + ";";
    s += "grid=(" + format_double(gamma_grid.start) + "," +
         format_double(gamma_grid.stop) + "," + std::to_string(gamma_grid.count) + ");";
    s += "reps=" + std::to_string(reps) + ";n=" + std::to_string(n) + ";";
    s += "seed=" + std::to_string(master_seed) + ";estimators=[";
    for (std::size_t i = 0; i < estimators.size(); ++i) {
      if (i) s += ",";
      s += to_token(estimators[i]);
    }
    s += "];dgp{" + dgp.fingerprint() + "}";
    return s;
  }
};

struct SweepRow {
  double gamma = 0.0;
  EstimatorKind estimator = EstimatorKind::NoControl;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
  int reps = 0;      // replications contributing to the summaries
  int failures = 0;  // replications that raised collinearity/degeneracy
};

struct SweepMeta {
  std::string config_fingerprint;
  std::string code_version;
  double wall_seconds = 0.0;
  int workers = 1;
  std::string note;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // gamma-major, estimators in config order
  SweepMeta meta;
};

// Stream layout per (gamma g, rep r) cell: slot 0 seeds the panel simulation,
// slot 1+k seeds estimator k's own stream (only NoiseControl consumes it, but
// giving every estimator its own slot keeps draws independent of ordering).
inline SweepResult run_sweep(const SweepConfig& cfg, int workers = 1) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const int n_gamma = cfg.gamma_grid.count;
  const int n_est = static_cast<int>(cfg.estimators.size());
  const long long n_cells = static_cast<long long>(n_gamma) * cfg.reps;

  std::vector<double> tau(static_cast<std::size_t>(n_cells) * n_est, 0.0);
  std::vector<unsigned char> ok(static_cast<std::size_t>(n_cells) * n_est, 0);

  std::atomic<long long> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto worker = [&] {
    for (;;) {
      const long long cell = next.fetch_add(1, std::memory_order_relaxed);
      if (cell >= n_cells) return;
      const int g = static_cast<int>(cell / cfg.reps);
      const int r = static_cast<int>(cell % cfg.reps);
      try {
        const DgpConfig d = cfg.cell_dgp(g);
        const std::uint64_t panel_seed =
            rng::derive(cfg.master_seed, static_cast<std::uint64_t>(g),
                        static_cast<std::uint64_t>(r), 0)
                .key();
        const Simulation sim = simulate_experiment(d, cfg.design, panel_seed);
        for (int k = 0; k < n_est; ++k) {
          const std::size_t slot = static_cast<std::size_t>(cell) * n_est + k;
          rng::Stream est_stream =
              rng::derive(cfg.master_seed, static_cast<std::uint64_t>(g),
                          static_cast<std::uint64_t>(r),
                          static_cast<std::uint64_t>(1 + k));
          try {
            const EstimateResult res =
                estimate(sim.panel, cfg.estimators[static_cast<std::size_t>(k)], est_stream);
            tau[slot] = res.tau_hat;
            ok[slot] = 1;
          } catch (const stats::CollinearityError&) {
            ok[slot] = 0;
          } catch (const stats::DegenerateOutcome&) {
            ok[slot] = 0;
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int n_workers = std::max(
      1, std::min<long long>(workers, n_cells) > 0
             ? static_cast<int>(std::min<long long>(workers, n_cells))
             : 1);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SweepResult out;
  out.rows.reserve(static_cast<std::size_t>(n_gamma) * n_est);
  for (int g = 0; g < n_gamma; ++g) {
    for (int k = 0; k < n_est; ++k) {
      SweepRow row;
      row.gamma = cfg.gamma_grid.value(g);
      row.estimator = cfg.estimators[static_cast<std::size_t>(k)];
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      int cnt = 0;
      for (int r = 0; r < cfg.reps; ++r) {  // fixed order: determinism
        const std::size_t slot =
            (static_cast<std::size_t>(g) * cfg.reps + r) * n_est + k;
        if (!ok[slot]) continue;
        sum += tau[slot];
        lo = std::min(lo, tau[slot]);
        hi = std::max(hi, tau[slot]);
        ++cnt;
      }
      row.reps = cnt;
      row.failures = cfg.reps - cnt;
      if (cnt > 0) {
        row.mean = sum / cnt;
        row.min = lo;
        row.max = hi;
        double ss = 0.0;
        for (int r = 0; r < cfg.reps; ++r) {
          const std::size_t slot =
              (static_cast<std::size_t>(g) * cfg.reps + r) * n_est + k;
          if (!ok[slot]) continue;
          const double d = tau[slot] - row.mean;
          ss += d * d;
        }
        const double sd = cnt > 1 ? std::sqrt(ss / (cnt - 1)) : 0.0;
        row.mc_se = sd / std::sqrt(static_cast<double>(cnt));
      }
      out.rows.push_back(row);
    }
  }

  out.meta.config_fingerprint = cfg.fingerprint();
  out.meta.code_version = kVersion;
  out.meta.workers = n_workers;
  out.meta.note = cfg.note;
  out.meta.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline constexpr std::uint64_t kFig3Seed = 930103;
inline constexpr std::uint64_t kFig5Seed = 950105;

// Carryover-vs-control protocol: both periods randomized, period-2-only
// regressions with and without the prior-treatment indicator, interaction
// carryover (canonical variant; see preset_fig3_variants for compounding).
inline SweepConfig preset_fig3() {
  SweepConfig c;
  c.gamma_grid = {-5.0, 5.0, 101};
  c.reps = 100;
  c.n = 100;
  c.design = DesignKind::SequentialRandomization;
  c.dgp.alpha0 = 2.0; c.dgp.alpha1 = 5.0; c.dgp.alpha2 = 5.0;
  c.dgp.beta0 = 2.0; c.dgp.beta1 = 5.0; c.dgp.beta2 = 5.0;
  c.dgp.noise_sd = 1.0;
  c.dgp.time_shift_c = 0.0;
  c.dgp.covariate_drift = CovariateDrift::IndependentIncrement;
  c.dgp.carryover = {CarryoverModel::AdditiveInteraction, 0.0};
  c.estimators = {EstimatorKind::NaiveT2, EstimatorKind::CarryoverControlT2};
  c.master_seed = kFig3Seed;
  c.note = "endpoint-inclusive gamma grid: 101 values at step 0.1 "
           "(grids of this span are sometimes quoted as 100 values)";
  return c;
}

// Design-comparison protocol: tau = 1 with treatment-shifted covariate drift,
// five stacked estimation strategies, counterbalanced design (canonical
// variant; see preset_fig5_variants for sequential randomization).
inline SweepConfig preset_fig5() {
  SweepConfig c;
  c.gamma_grid = {-10.0, 10.0, 101};
  c.reps = 100;
  c.n = 1000;
  c.design = DesignKind::Cwsd;
  c.dgp.alpha0 = 0.0; c.dgp.alpha1 = 1.0; c.dgp.alpha2 = 1.0;
  c.dgp.beta0 = 0.0; c.dgp.beta1 = 1.0; c.dgp.beta2 = 1.0;
  c.dgp.noise_sd = 1.0;
  c.dgp.time_shift_c = 0.0;
  c.dgp.covariate_drift = CovariateDrift::TreatmentShift;
  c.dgp.carryover = {CarryoverModel::CovariateMediated, 0.0};
  c.estimators = {EstimatorKind::NoControl, EstimatorKind::DirectControl,
                  EstimatorKind::PropensityScore, EstimatorKind::FixedEffects,
                  EstimatorKind::NoiseControl};
  c.master_seed = kFig5Seed;
  c.note = "endpoint-inclusive gamma grid: 101 values at step 0.2";
  return c;
}

struct PresetVariant {
  std::string label;
  SweepConfig config;
};

inline std::vector<PresetVariant> preset_fig3_variants() {
  SweepConfig interaction = preset_fig3();
  SweepConfig compounding = interaction;
  compounding.dgp.carryover = {CarryoverModel::Compounding, 0.0};
  return {{"interaction", interaction}, {"compounding", compounding}};
}

inline std::vector<PresetVariant> preset_fig5_variants() {
  SweepConfig cwsd = preset_fig5();
  SweepConfig seq = cwsd;
  seq.design = DesignKind::SequentialRandomization;
  return {{"cwsd", cwsd}, {"seq_rand", seq}};
}

} // namespace seqdesign
