#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqdesign/detail/format.hpp"
#include "seqdesign/estimator_kind.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/rng.hpp"

// Data-generating processes: covariate evolution, the period-1/period-2
// outcome models under each carryover structure, full-panel simulation, and
// closed-form population oracles for expected estimator values.

namespace seqdesign {

enum class CarryoverModel {
  None,                // every arm equals the no-prior-exposure outcome
  ConstantSymmetric,   // +C on any arm with prior or current exposure
  AdditiveInteraction, // y2 gains gamma * z1 * z2
  Compounding,         // z2 coefficient becomes beta1^(1 + gamma*z1)
  CovariateMediated,   // carryover only through x_t2(z1) under TreatmentShift
};

struct CarryoverKind {
  CarryoverModel model = CarryoverModel::None;
  double c = 0.0;  // the constant C; read only by ConstantSymmetric
};

inline constexpr const char* to_token(CarryoverModel m) noexcept {
  switch (m) {
    case CarryoverModel::None: return "none";
    case CarryoverModel::ConstantSymmetric: return "constant_symmetric";
    case CarryoverModel::AdditiveInteraction: return "additive_interaction";
    case CarryoverModel::Compounding: return "compounding";
    case CarryoverModel::CovariateMediated: return "covariate_mediated";
  }
  return "unknown";
}

inline std::optional<CarryoverModel> carryover_from_token(std::string_view s) noexcept {
  for (CarryoverModel m :
       {CarryoverModel::None, CarryoverModel::ConstantSymmetric,
        CarryoverModel::AdditiveInteraction, CarryoverModel::Compounding,
        CarryoverModel::CovariateMediated})
    if (s == to_token(m)) return m;
  return std::nullopt;
}

enum class CovariateDrift {
  IndependentIncrement,  // x_t2 = x_t1 + delta, delta ~ N(0,1)
  TreatmentShift,        // x_t2 = x_t1 + gamma * z_t1
};

inline constexpr const char* to_token(CovariateDrift d) noexcept {
  switch (d) {
    case CovariateDrift::IndependentIncrement: return "independent_increment";
    case CovariateDrift::TreatmentShift: return "treatment_shift";
  }
  return "unknown";
}

inline std::optional<CovariateDrift> drift_from_token(std::string_view s) noexcept {
  if (s == "independent_increment") return CovariateDrift::IndependentIncrement;
  if (s == "treatment_shift") return CovariateDrift::TreatmentShift;
  return std::nullopt;
}

struct DgpConfig {
  double alpha0 = 2.0, alpha1 = 5.0, alpha2 = 5.0;  // period-1 model
  double beta0 = 2.0, beta1 = 5.0, beta2 = 5.0;     // period-2 model
  double gamma = 0.0;  // carryover magnitude; doubles as TreatmentShift step
  CarryoverKind carryover;
  CovariateDrift covariate_drift = CovariateDrift::IndependentIncrement;
  double noise_sd = 1.0;
  double time_shift_c = 0.0;  // constant added to every t2 potential outcome
  int n = 100;

  void validate() const {
    const auto fail = [](const char* msg) { throw std::invalid_argument(std::string("dgp config: ") + msg); };
    for (double v : {alpha0, alpha1, alpha2, beta0, beta1, beta2, gamma,
                     carryover.c, noise_sd, time_shift_c})
      if (!std::isfinite(v)) fail("all parameters must be finite");
    if (!(noise_sd > 0.0)) fail("noise_sd must be > 0");
    if (n < 1) fail("n must be >= 1");
    if (carryover.model == CarryoverModel::Compounding && beta1 < 0.0) {
      const double expo = 1.0 + gamma;
      if (expo != std::round(expo))
        fail("compounding with beta1 < 0 needs an integer exponent 1 + gamma");
    }
  }

  // Compact, deterministic description used as panel provenance.
  std::string fingerprint() const {
    using detail::format_double;
    std::string s;
    s += "alpha=(" + format_double(alpha0) + "," + format_double(alpha1) + "," + format_double(alpha2) + ");";
    s += "beta=(" + format_double(beta0) + "," + format_double(beta1) + "," + format_double(beta2) + ");";
    s += "gamma=" + format_double(gamma) + ";";
    s += "carryover=" + std::string(to_token(carryover.model));
    if (carryover.model == CarryoverModel::ConstantSymmetric)
      s += "(" + format_double(carryover.c) + ")";
    s += ";drift=" + std::string(to_token(covariate_drift)) + ";";
    s += "noise_sd=" + format_double(noise_sd) + ";";
    s += "c=" + format_double(time_shift_c) + ";";
    s += "n=" + std::to_string(n);
    return s;
  }
};

// Realized covariate path for one unit given its period-1 assignment.
// Stream use: one normal for x_t1, plus one normal for the increment under
// IndependentIncrement (TreatmentShift consumes none for the step).
inline std::pair<double, double> gen_covariates(const DgpConfig& cfg, int z_t1,
                                                rng::Stream& rs) {
  const double x_t1 = rng::normal(rs);
  double x_t2 = x_t1;
  switch (cfg.covariate_drift) {
    case CovariateDrift::IndependentIncrement: x_t2 = x_t1 + rng::normal(rs); break;
    case CovariateDrift::TreatmentShift: x_t2 = x_t1 + cfg.gamma * static_cast<double>(z_t1); break;
  }
  return {x_t1, x_t2};
}

// One unit's complete ground truth: the counterfactual table plus both
// counterfactual covariate paths. Deliberately takes no assignment — the
// table cannot depend on what later happens to be realized.
struct UnitDraw {
  PotentialOutcomeTable po;
  double x_t1 = 0.0;
  std::array<double, 2> x_t2_by_z1{};  // covariate path under z_t1 = 0 / 1

  double x_t2(int z1) const noexcept { return x_t2_by_z1[static_cast<std::size_t>(z1)]; }
};

// Stream use per unit: x_t1, increment (IndependentIncrement only), eps_t1,
// eps_t2 — in that order. One eps per period, shared across every arm, so
// unit-level carryover contrasts are exact rather than noise-confounded.
inline UnitDraw gen_unit(const DgpConfig& cfg, rng::Stream& rs) {
  UnitDraw u;
  u.x_t1 = rng::normal(rs);
  switch (cfg.covariate_drift) {
    case CovariateDrift::IndependentIncrement: {
      const double step = rng::normal(rs);
      u.x_t2_by_z1 = {u.x_t1 + step, u.x_t1 + step};
      break;
    }
    case CovariateDrift::TreatmentShift:
      u.x_t2_by_z1 = {u.x_t1, u.x_t1 + cfg.gamma};
      break;
  }
  const double eps1 = cfg.noise_sd * rng::normal(rs);
  const double eps2 = cfg.noise_sd * rng::normal(rs);

  u.po.y_t1_0 = cfg.alpha0 + cfg.alpha2 * u.x_t1 + eps1;
  u.po.y_t1_1 = u.po.y_t1_0 + cfg.alpha1;

  // No-prior-exposure outcomes: untreated covariate path, no direct term.
  const auto noprior = [&](int z) {
    return cfg.beta0 + cfg.beta1 * static_cast<double>(z) +
           cfg.beta2 * u.x_t2(0) + eps2 + cfg.time_shift_c;
  };
  u.po.y_t2_noprior_0 = noprior(0);
  u.po.y_t2_noprior_1 = noprior(1);

  for (int z1 : {0, 1}) {
    for (int z2 : {0, 1}) {
      double y = 0.0;
      switch (cfg.carryover.model) {
        case CarryoverModel::None:
          // Zero carryover through every pathway: all arms sit on the
          // no-prior-exposure outcomes (untreated covariate path included).
          y = noprior(z2);
          break;
        case CarryoverModel::ConstantSymmetric:
          // +C whenever any exposure has occurred; only (0,0) is clean.
          y = noprior(z2) + ((z1 == 0 && z2 == 0) ? 0.0 : cfg.carryover.c);
          break;
        case CarryoverModel::AdditiveInteraction:
          y = cfg.beta0 + cfg.beta1 * z2 + cfg.gamma * z1 * z2 +
              cfg.beta2 * u.x_t2(z1) + eps2 + cfg.time_shift_c;
          break;
        case CarryoverModel::Compounding:
          y = cfg.beta0 + std::pow(cfg.beta1, 1.0 + cfg.gamma * z1) * z2 +
              cfg.beta2 * u.x_t2(z1) + eps2 + cfg.time_shift_c;
          break;
        case CarryoverModel::CovariateMediated:
          y = cfg.beta0 + cfg.beta1 * z2 + cfg.beta2 * u.x_t2(z1) + eps2 +
              cfg.time_shift_c;
          break;
      }
      u.po.y_t2_arm[PotentialOutcomeTable::arm_index(z1, z2)] = y;
    }
  }
  return u;
}

struct Simulation {
  Panel panel;
  std::vector<PotentialOutcomeTable> tables;
  std::vector<Assignment> assignments;
};

// Full experiment: assignments and unit tables come from separate child
// streams, so the tables are a pure function of (cfg, seed) — identical
// across designs, which makes assignment-independence a checkable property.
inline Simulation simulate_experiment(const DgpConfig& cfg, DesignKind design,
                                      std::uint64_t seed) {
  cfg.validate();
  rng::Stream assign_stream = rng::derive(seed, 1);
  rng::Stream unit_stream = rng::derive(seed, 2);

  Simulation sim;
  sim.assignments = assign(design, cfg.n, assign_stream);
  sim.tables.reserve(static_cast<std::size_t>(cfg.n));
  sim.panel.rows.reserve(static_cast<std::size_t>(cfg.n));
  sim.panel.meta = PanelMeta{design, seed, cfg.fingerprint()};

  for (int i = 0; i < cfg.n; ++i) {
    const UnitDraw draw = gen_unit(cfg, unit_stream);
    const Assignment& a = sim.assignments[static_cast<std::size_t>(i)];
    const Observation obs = observe(draw.po, a);
    PanelRow row;
    row.unit_id = i;
    row.x_t1 = draw.x_t1;
    row.x_t2 = draw.x_t2(a.z_t1);
    row.z_t1 = a.z_t1;
    row.z_t2 = a.z_t2;
    row.y_t1 = obs.y_t1;
    row.y_t2 = obs.y_t2;
    row.exited = a.exited;
    sim.panel.rows.push_back(row);
    sim.tables.push_back(draw.po);
  }
  validate_panel(sim.panel);
  return sim;
}

// Population probability limit of the named estimator's treatment
// coefficient, when a closed form is catalogued; absent otherwise (callers
// fall back to brute force). Every branch below is plain omitted-variable
// algebra over the generator; each is cross-checked against a large-sample
// fit in the test suite before being trusted.
inline std::optional<double> expected_naive_coefficient(const DgpConfig& cfg,
                                                        DesignKind design,
                                                        EstimatorKind kind) {
  cfg.validate();
  const CarryoverModel m = cfg.carryover.model;
  const bool treatment_shift = cfg.covariate_drift == CovariateDrift::TreatmentShift;
  // Effective covariate step attached to z_t1 (zero when increments are
  // treatment-independent).
  const double drift_step = treatment_shift ? cfg.gamma : 0.0;
  // Whether the observed x_t2 equals the path the outcomes were built on
  // (arms under None/ConstantSymmetric always use the untreated path).
  const bool drift_neutral = !treatment_shift || cfg.gamma == 0.0;
  const bool t1_effect_matches = cfg.alpha1 == cfg.beta1;

  // Period-1 cross-section: randomized everywhere except PrePost.
  if (kind == EstimatorKind::DiffInMeansT1)
    return design == DesignKind::PrePost ? std::nullopt
                                         : std::optional<double>(cfg.alpha1);

  switch (design) {
    case DesignKind::BetweenSubjects:
      // One-period stack: pooled fits reduce to the t1 cross-section.
      switch (kind) {
        case EstimatorKind::NoControl:
        case EstimatorKind::DirectControl:
        case EstimatorKind::PropensityScore:
        case EstimatorKind::NoiseControl:
          return cfg.alpha1;
        default: return std::nullopt;
      }

    case DesignKind::SequentialRandomization: {
      // Both periods randomized: z2 is independent of z1 and of covariates.
      const double ex_z1 = 0.5;
      switch (kind) {
        case EstimatorKind::NaiveT2:
        case EstimatorKind::CarryoverControlT2:
        case EstimatorKind::DiffInMeansT2:
          switch (m) {
            case CarryoverModel::None: return cfg.beta1;
            case CarryoverModel::AdditiveInteraction:
              if (kind != EstimatorKind::DiffInMeansT2 && treatment_shift)
                return std::nullopt;  // x2 carries z1: controlling it is messy
              return cfg.beta1 + cfg.gamma * ex_z1;
            case CarryoverModel::Compounding:
              if (kind != EstimatorKind::DiffInMeansT2 && treatment_shift)
                return std::nullopt;
              return 0.5 * (cfg.beta1 + std::pow(cfg.beta1, 1.0 + cfg.gamma));
            case CarryoverModel::CovariateMediated:
              if (kind == EstimatorKind::DiffInMeansT2)
                return cfg.beta1;  // E[x_t2 | z2] does not vary with z2
              return cfg.beta1;    // regression is correctly specified
            case CarryoverModel::ConstantSymmetric:
              if (kind != EstimatorKind::DiffInMeansT2 && !drift_neutral)
                return std::nullopt;  // observed x2 is not the outcome path
              // z2 = 1 forces an exposed arm; z2 = 0 is exposed iff z1 = 1.
              return cfg.beta1 + cfg.carryover.c * (1.0 - ex_z1);
          }
          return std::nullopt;
        case EstimatorKind::NoControl:
        case EstimatorKind::DirectControl:
        case EstimatorKind::PropensityScore:
        case EstimatorKind::FixedEffects:
        case EstimatorKind::NoiseControl:
          // Pooled over both randomized periods: the z coefficient averages
          // the per-period effects, so it is beta1 when alpha1 = beta1 and
          // nothing differential rides on z (None / CovariateMediated).
          if ((m == CarryoverModel::None || m == CarryoverModel::CovariateMediated) &&
              t1_effect_matches)
            return cfg.beta1;
          return std::nullopt;
        default: return std::nullopt;
      }
    }

    case DesignKind::Cwsd: {
      // Observed period-2 arms are (0,1) and (1,0): the interaction and
      // compounding terms never fire, so the observable t2 law is
      // y2 = beta0 + beta1 z2 + beta2 x_t2(z1) + eps (plus a uniform +C for
      // ConstantSymmetric). Under TreatmentShift, x_t2 = x_t1 + gamma(1 - z2)
      // on outcome-relevant paths, which is what leaks into naive contrasts.
      const bool direct_kind_uses_drift_path =
          m == CarryoverModel::AdditiveInteraction ||
          m == CarryoverModel::Compounding || m == CarryoverModel::CovariateMediated;
      const double leak = direct_kind_uses_drift_path ? cfg.beta2 * drift_step : 0.0;
      switch (kind) {
        case EstimatorKind::DiffInMeansT2:
          return cfg.beta1 - leak;
        case EstimatorKind::NaiveT2:
          // Controls the covariate the outcomes actually used only when the
          // observed path is the outcome path.
          if (direct_kind_uses_drift_path || drift_neutral) return cfg.beta1;
          return std::nullopt;
        case EstimatorKind::NoControl:
        case EstimatorKind::FixedEffects:
          return 0.5 * (cfg.alpha1 + cfg.beta1 - leak);
        case EstimatorKind::DirectControl:
        case EstimatorKind::PropensityScore:
          if (drift_neutral)
            return t1_effect_matches ? std::optional<double>(cfg.beta1)
                                     : std::nullopt;
          if (direct_kind_uses_drift_path) {
            // With cov(z, x) != 0 pooled, any between-period asymmetry leaks
            // through the covariate; demand fully matched period models.
            const bool fully_symmetric =
                cfg.alpha0 == cfg.beta0 && cfg.alpha1 == cfg.beta1 &&
                cfg.alpha2 == cfg.beta2 && cfg.time_shift_c == 0.0;
            if (fully_symmetric) return cfg.beta1;
          }
          return std::nullopt;
        default: return std::nullopt;
      }
    }

    case DesignKind::PrePost:
    case DesignKind::SelectiveSeqRand: {
      // Units reaching t2 all have z_t1 = 0: only the (0, z2) arms matter,
      // where the only surviving carryover is ConstantSymmetric's +C on (0,1).
      switch (kind) {
        case EstimatorKind::DiffInMeansT2:
        case EstimatorKind::NaiveT2:
          if (m == CarryoverModel::ConstantSymmetric)
            return cfg.beta1 + cfg.carryover.c;
          return cfg.beta1;
        default: return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

} // namespace seqdesign
