#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include <seqdesign/dgp.hpp>
#include <seqdesign/estimators.hpp>

using namespace seqdesign;
using Catch::Matchers::WithinAbs;

namespace {

DgpConfig base_config() {
  DgpConfig c;
  c.alpha0 = 1.0;
  c.alpha1 = 2.0;
  c.alpha2 = 0.5;
  c.beta0 = 1.5;
  c.beta1 = 2.0;
  c.beta2 = 0.5;
  c.gamma = 0.0;
  c.carryover = {CarryoverModel::None, 0.0};
  c.covariate_drift = CovariateDrift::IndependentIncrement;
  c.noise_sd = 1.0;
  c.time_shift_c = 0.25;
  c.n = 100;
  return c;
}

} // namespace

TEST_CASE("config validation rejects bad inputs", "[dgp][config]") {
  DgpConfig c = base_config();
  CHECK_NOTHROW(c.validate());

  SECTION("noise sd must be positive") {
    c.noise_sd = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SECTION("n must be at least one") {
    c.n = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SECTION("non-finite parameters are rejected") {
    c.beta1 = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SECTION("negative base effect with fractional compounding exponent") {
    c.carryover = {CarryoverModel::Compounding, 0.0};
    c.beta1 = -2.0;
    c.gamma = 0.5;  // (-2)^1.5 is not real
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.gamma = 1.0;  // (-2)^2 is fine
    CHECK_NOTHROW(c.validate());
  }
}

TEST_CASE("carryover and drift tokens round trip", "[dgp][config]") {
  for (CarryoverModel m :
       {CarryoverModel::None, CarryoverModel::ConstantSymmetric,
        CarryoverModel::AdditiveInteraction, CarryoverModel::Compounding,
        CarryoverModel::CovariateMediated}) {
    const auto back = carryover_from_token(to_token(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
  for (CovariateDrift d :
       {CovariateDrift::IndependentIncrement, CovariateDrift::TreatmentShift}) {
    const auto back = drift_from_token(to_token(d));
    REQUIRE(back.has_value());
    CHECK(*back == d);
  }
  CHECK_FALSE(carryover_from_token("nope").has_value());
  CHECK_FALSE(drift_from_token("nope").has_value());
}

TEST_CASE("fingerprints are stable and injective on parameters", "[dgp][config]") {
  DgpConfig a = base_config();
  DgpConfig b = base_config();
  CHECK(a.fingerprint() == b.fingerprint());
  b.beta1 = 2.5;
  CHECK(a.fingerprint() != b.fingerprint());
  b = base_config();
  b.carryover = {CarryoverModel::ConstantSymmetric, 1.0};
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("unit draws are deterministic in the stream key", "[dgp]") {
  const DgpConfig c = base_config();
  rng::Stream a(314), b(314);
  const UnitDraw ua = gen_unit(c, a);
  const UnitDraw ub = gen_unit(c, b);
  CHECK(ua.x_t1 == ub.x_t1);
  CHECK(ua.po.y_t1_0 == ub.po.y_t1_0);
  CHECK(ua.po.y_t2_arm == ub.po.y_t2_arm);
}

TEST_CASE("noise is shared across arms within a unit", "[dgp]") {
  const DgpConfig c = base_config();
  rng::Stream rs(99);
  for (int i = 0; i < 50; ++i) {
    const UnitDraw u = gen_unit(c, rs);
    // eps_t1 cancels exactly in the within-unit period-1 contrast.
    CHECK_THAT(u.po.y_t1_1 - u.po.y_t1_0, WithinAbs(c.alpha1, 1e-12));
    // Under no carryover every arm equals the no-prior counterfactual.
    for (int z1 : {0, 1})
      for (int z2 : {0, 1})
        CHECK_THAT(carryover(u.po, z1, z2), WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("covariate paths have the documented moments", "[dgp]") {
  DgpConfig c = base_config();
  rng::Stream rs(555);
  const int n = 60000;
  double s1 = 0, s1sq = 0, s2 = 0, s2sq = 0;
  for (int i = 0; i < n; ++i) {
    const UnitDraw u = gen_unit(c, rs);
    s1 += u.x_t1;
    s1sq += u.x_t1 * u.x_t1;
    s2 += u.x_t2(0);
    s2sq += u.x_t2(0) * u.x_t2(0);
    CHECK(u.x_t2(0) == u.x_t2(1));  // increments ignore treatment
  }
  const double var1 = s1sq / n - (s1 / n) * (s1 / n);
  const double var2 = s2sq / n - (s2 / n) * (s2 / n);
  CHECK_THAT(s1 / n, WithinAbs(0.0, 0.02));
  CHECK_THAT(var1, WithinAbs(1.0, 0.05));
  CHECK_THAT(var2, WithinAbs(2.0, 0.08));  // x_t1 variance plus increment variance
}

TEST_CASE("treatment shift moves the treated covariate path only", "[dgp]") {
  DgpConfig c = base_config();
  c.covariate_drift = CovariateDrift::TreatmentShift;
  c.gamma = 2.5;
  rng::Stream rs(77);
  for (int i = 0; i < 50; ++i) {
    const UnitDraw u = gen_unit(c, rs);
    CHECK(u.x_t2(0) == u.x_t1);
    CHECK_THAT(u.x_t2(1) - u.x_t2(0), WithinAbs(2.5, 1e-12));
  }
}

TEST_CASE("constant symmetric carryover exempts the never-treated sequence", "[dgp]") {
  DgpConfig c = base_config();
  c.carryover = {CarryoverModel::ConstantSymmetric, 1.5};
  rng::Stream rs(31);
  for (int i = 0; i < 50; ++i) {
    const UnitDraw u = gen_unit(c, rs);
    CHECK_THAT(carryover(u.po, 0, 0), WithinAbs(0.0, 1e-12));
    CHECK_THAT(carryover(u.po, 0, 1), WithinAbs(1.5, 1e-12));
    CHECK_THAT(carryover(u.po, 1, 0), WithinAbs(1.5, 1e-12));
    CHECK_THAT(carryover(u.po, 1, 1), WithinAbs(1.5, 1e-12));
  }
}

TEST_CASE("compounding carryover multiplies the base effect", "[dgp]") {
  DgpConfig c = base_config();
  c.beta1 = 5.0;
  c.carryover = {CarryoverModel::Compounding, 0.0};
  c.gamma = 1.0;
  rng::Stream rs(41);
  const UnitDraw u = gen_unit(c, rs);
  // (1,1) arm applies beta1^(1+gamma) = 25 instead of 5: carryover 20.
  CHECK_THAT(carryover(u.po, 1, 1), WithinAbs(20.0, 1e-10));
  CHECK_THAT(carryover(u.po, 1, 0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(carryover(u.po, 0, 1), WithinAbs(0.0, 1e-12));
}

TEST_CASE("arms follow the written outcome equations", "[dgp]") {
  DgpConfig c = base_config();
  c.carryover = {CarryoverModel::AdditiveInteraction, 0.0};
  c.gamma = 3.0;
  c.covariate_drift = CovariateDrift::TreatmentShift;
  rng::Stream rs(2718);
  for (int i = 0; i < 50; ++i) {
    const UnitDraw u = gen_unit(c, rs);
    // Recover the shared noises from the z = 0 baselines, then check every
    // other entry against the closed-form equations.
    const double eps1 = u.po.y_t1_0 - (c.alpha0 + c.alpha2 * u.x_t1);
    const double eps2 =
        u.po.y_t2_noprior_0 - (c.beta0 + c.beta2 * u.x_t2(0) + c.time_shift_c);
    CHECK_THAT(u.po.y_t1_1,
               WithinAbs(c.alpha0 + c.alpha1 + c.alpha2 * u.x_t1 + eps1, 1e-10));
    CHECK_THAT(u.po.y_t2_noprior_1,
               WithinAbs(c.beta0 + c.beta1 + c.beta2 * u.x_t2(0) +
                             c.time_shift_c + eps2,
                         1e-10));
    for (int z1 : {0, 1})
      for (int z2 : {0, 1}) {
        const double want = c.beta0 + c.beta1 * z2 + c.gamma * z1 * z2 +
                            c.beta2 * u.x_t2(z1) + c.time_shift_c + eps2;
        CHECK_THAT(u.po.y_t2(z1, z2), WithinAbs(want, 1e-10));
      }
  }
}

TEST_CASE("simulated panels agree with their ground truth", "[dgp][simulate]") {
  DgpConfig c = base_config();
  c.n = 200;
  for (DesignKind d : all_designs()) {
    const Simulation sim = simulate_experiment(c, d, 424242);
    REQUIRE(sim.panel.rows.size() == 200);
    REQUIRE(sim.tables.size() == 200);
    CHECK(sim.panel.meta.design == d);
    CHECK(sim.panel.meta.seed == 424242);
    CHECK(sim.panel.meta.dgp_fingerprint == c.fingerprint());
    for (std::size_t i = 0; i < sim.panel.rows.size(); ++i) {
      const PanelRow& r = sim.panel.rows[i];
      const Assignment& a = sim.assignments[i];
      CHECK(r.unit_id == static_cast<int>(i));
      CHECK(r.z_t1 == a.z_t1);
      CHECK(r.y_t1 == sim.tables[i].y_t1(a.z_t1));
      if (!a.exited) {
        REQUIRE(r.y_t2.has_value());
        CHECK(*r.y_t2 == sim.tables[i].y_t2(a.z_t1, *a.z_t2));
      } else {
        CHECK_FALSE(r.y_t2.has_value());
        CHECK_FALSE(r.z_t2.has_value());
      }
    }
  }
}

TEST_CASE("ground truth is identical across designs for a fixed seed", "[dgp][simulate]") {
  DgpConfig c = base_config();
  c.n = 64;
  const Simulation s1 = simulate_experiment(c, DesignKind::Cwsd, 99);
  const Simulation s2 = simulate_experiment(c, DesignKind::SequentialRandomization, 99);
  const Simulation s3 = simulate_experiment(c, DesignKind::SelectiveSeqRand, 99);
  for (int i = 0; i < 64; ++i) {
    CHECK(s1.tables[i].y_t2_arm == s2.tables[i].y_t2_arm);
    CHECK(s1.tables[i].y_t1_0 == s3.tables[i].y_t1_0);
    CHECK(s1.tables[i].y_t2_noprior_1 == s2.tables[i].y_t2_noprior_1);
  }
}

TEST_CASE("different seeds give different panels", "[dgp][simulate]") {
  const DgpConfig c = base_config();
  const Simulation s1 = simulate_experiment(c, DesignKind::Cwsd, 1);
  const Simulation s2 = simulate_experiment(c, DesignKind::Cwsd, 2);
  bool any_diff = false;
  for (std::size_t i = 0; i < s1.panel.rows.size(); ++i)
    any_diff |= s1.panel.rows[i].y_t1 != s2.panel.rows[i].y_t1;
  CHECK(any_diff);
}

// ---------------------------------------------------------------------------
// The long-run coefficient catalogue, checked two ways: frozen closed forms,
// then large-sample agreement between the catalogue and the actual estimator.
// ---------------------------------------------------------------------------

namespace {

struct CatalogueCase {
  const char* label;
  DgpConfig cfg;
  DesignKind design;
  EstimatorKind kind;
  std::optional<double> want;
};

std::vector<CatalogueCase> catalogue_cases() {
  using D = DesignKind;
  using E = EstimatorKind;
  const DgpConfig base = base_config();

  auto with = [&](CarryoverModel m, double c, CovariateDrift drift, double gamma) {
    DgpConfig out = base;
    out.carryover = {m, c};
    out.covariate_drift = drift;
    out.gamma = gamma;
    return out;
  };
  const auto II = CovariateDrift::IndependentIncrement;
  const auto TS = CovariateDrift::TreatmentShift;

  DgpConfig mismatched = base;  // alpha1 != beta1
  mismatched.alpha1 = 3.0;

  DgpConfig asym = with(CarryoverModel::CovariateMediated, 0.0, TS, 2.0);
  asym.beta0 = 4.0;  // breaks period symmetry for the pooled-control branch

  DgpConfig sym = with(CarryoverModel::CovariateMediated, 0.0, TS, 2.0);
  sym.alpha0 = sym.beta0 = 1.0;
  sym.time_shift_c = 0.0;

  std::vector<CatalogueCase> cases;
  const auto add = [&](const char* label, DgpConfig cfg, D d, E k,
                       std::optional<double> want) {
    cases.push_back({label, cfg, d, k, want});
  };

  // Period-1 cross-section.
  add("t1 diff", base, D::SequentialRandomization, E::DiffInMeansT1, 2.0);
  add("t1 diff cwsd", base, D::Cwsd, E::DiffInMeansT1, 2.0);
  add("t1 diff prepost", base, D::PrePost, E::DiffInMeansT1, std::nullopt);

  // One-period reference design.
  add("between pooled", base, D::BetweenSubjects, E::NoControl, 2.0);
  add("between control", base, D::BetweenSubjects, E::DirectControl, 2.0);
  add("between prop", base, D::BetweenSubjects, E::PropensityScore, 2.0);
  add("between fe", base, D::BetweenSubjects, E::FixedEffects, std::nullopt);
  add("between t2", base, D::BetweenSubjects, E::DiffInMeansT2, std::nullopt);

  // Sequential randomization, period-2 analyses.
  add("seq none naive ts", with(CarryoverModel::None, 0, TS, 2.0),
      D::SequentialRandomization, E::NaiveT2, 2.0);
  add("seq addint dm", with(CarryoverModel::AdditiveInteraction, 0, II, 3.0),
      D::SequentialRandomization, E::DiffInMeansT2, 3.5);
  add("seq addint naive", with(CarryoverModel::AdditiveInteraction, 0, II, 3.0),
      D::SequentialRandomization, E::NaiveT2, 3.5);
  add("seq addint ctrl", with(CarryoverModel::AdditiveInteraction, 0, II, 3.0),
      D::SequentialRandomization, E::CarryoverControlT2, 3.5);
  add("seq addint naive ts", with(CarryoverModel::AdditiveInteraction, 0, TS, 3.0),
      D::SequentialRandomization, E::NaiveT2, std::nullopt);
  add("seq addint dm ts", with(CarryoverModel::AdditiveInteraction, 0, TS, 3.0),
      D::SequentialRandomization, E::DiffInMeansT2, 3.5);
  add("seq comp dm", with(CarryoverModel::Compounding, 0, II, 1.0),
      D::SequentialRandomization, E::DiffInMeansT2, 3.0);
  add("seq comp ctrl", with(CarryoverModel::Compounding, 0, II, 1.0),
      D::SequentialRandomization, E::CarryoverControlT2, 3.0);
  add("seq comp naive ts", with(CarryoverModel::Compounding, 0, TS, 1.0),
      D::SequentialRandomization, E::NaiveT2, std::nullopt);
  add("seq med naive ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::SequentialRandomization, E::NaiveT2, 2.0);
  add("seq med dm ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::SequentialRandomization, E::DiffInMeansT2, 2.0);
  add("seq const dm", with(CarryoverModel::ConstantSymmetric, 1.5, II, 0.0),
      D::SequentialRandomization, E::DiffInMeansT2, 2.75);
  add("seq const naive", with(CarryoverModel::ConstantSymmetric, 1.5, II, 0.0),
      D::SequentialRandomization, E::NaiveT2, 2.75);
  add("seq const naive ts", with(CarryoverModel::ConstantSymmetric, 1.5, TS, 2.0),
      D::SequentialRandomization, E::NaiveT2, std::nullopt);

  // Sequential randomization, pooled analyses.
  add("seq pooled none", base, D::SequentialRandomization, E::NoControl, 2.0);
  add("seq pooled med ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::SequentialRandomization, E::FixedEffects, 2.0);
  add("seq pooled mismatch", mismatched, D::SequentialRandomization,
      E::NoControl, std::nullopt);
  add("seq pooled addint", with(CarryoverModel::AdditiveInteraction, 0, II, 3.0),
      D::SequentialRandomization, E::NoControl, std::nullopt);

  // Counterbalanced design.
  add("cwsd dm none ts", with(CarryoverModel::None, 0, TS, 2.0), D::Cwsd,
      E::DiffInMeansT2, 2.0);
  add("cwsd dm med ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::Cwsd, E::DiffInMeansT2, 1.0);
  add("cwsd dm addint ts", with(CarryoverModel::AdditiveInteraction, 0, TS, 2.0),
      D::Cwsd, E::DiffInMeansT2, 1.0);
  add("cwsd dm comp ts", with(CarryoverModel::Compounding, 0, TS, 1.0), D::Cwsd,
      E::DiffInMeansT2, 1.5);
  add("cwsd naive med ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::Cwsd, E::NaiveT2, 2.0);
  add("cwsd naive const ts", with(CarryoverModel::ConstantSymmetric, 1.5, TS, 2.0),
      D::Cwsd, E::NaiveT2, std::nullopt);
  add("cwsd naive const ii", with(CarryoverModel::ConstantSymmetric, 1.5, II, 0.0),
      D::Cwsd, E::NaiveT2, 2.0);
  add("cwsd pooled med ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::Cwsd, E::NoControl, 1.5);
  add("cwsd fe med ts", with(CarryoverModel::CovariateMediated, 0, TS, 2.0),
      D::Cwsd, E::FixedEffects, 1.5);
  add("cwsd pooled none", base, D::Cwsd, E::NoControl, 2.0);
  add("cwsd direct none", base, D::Cwsd, E::DirectControl, 2.0);
  add("cwsd direct med sym", sym, D::Cwsd, E::DirectControl, 2.0);
  add("cwsd prop med sym", sym, D::Cwsd, E::PropensityScore, 2.0);
  add("cwsd direct med asym", asym, D::Cwsd, E::DirectControl, std::nullopt);
  add("cwsd z1 control", base, D::Cwsd, E::CarryoverControlT2, std::nullopt);

  // Exit-style designs: only the untreated-history arms are reachable.
  add("prepost dm", base, D::PrePost, E::DiffInMeansT2, 2.0);
  add("prepost naive const", with(CarryoverModel::ConstantSymmetric, 1.5, II, 0.0),
      D::PrePost, E::NaiveT2, 3.5);
  add("selective dm addint ts", with(CarryoverModel::AdditiveInteraction, 0, TS, 3.0),
      D::SelectiveSeqRand, E::DiffInMeansT2, 2.0);
  add("selective naive comp", with(CarryoverModel::Compounding, 0, II, 1.0),
      D::SelectiveSeqRand, E::NaiveT2, 2.0);

  return cases;
}

} // namespace

TEST_CASE("coefficient catalogue matches its frozen closed forms", "[dgp][catalogue]") {
  for (const CatalogueCase& c : catalogue_cases()) {
    INFO(c.label);
    const auto got = expected_naive_coefficient(c.cfg, c.design, c.kind);
    CHECK(got.has_value() == c.want.has_value());
    if (got && c.want) CHECK_THAT(*got, WithinAbs(*c.want, 1e-12));
  }
}

TEST_CASE("catalogue values agree with large-sample estimates", "[dgp][catalogue]") {
  int case_index = 0;
  for (const CatalogueCase& c : catalogue_cases()) {
    ++case_index;
    if (!c.want) continue;
    INFO(c.label);
    DgpConfig cfg = c.cfg;
    cfg.n = 60000;
    const Simulation sim =
        simulate_experiment(cfg, c.design, 555000 + static_cast<std::uint64_t>(case_index));
    rng::Stream es(rng::derive(777, static_cast<std::uint64_t>(case_index)));
    const EstimateResult r = estimate(sim.panel, c.kind, es);
    CHECK_THAT(r.tau_hat, WithinAbs(*c.want, 0.08));
  }
}
