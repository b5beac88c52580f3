#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "seqdesign/estimator_kind.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/stats.hpp"

// Estimation strategies over observed panels: pooled regressions (with and
// without controls), the per-period propensity-score adjustment, period
// difference-in-means, two period-2-only regressions, the collider
// demonstration, and the exact pooled-coefficient decomposition into a convex
// combination of per-period estimates.

namespace seqdesign {

// Long format: one row per (unit, period) actually observed. Rows are laid
// out as the full period-1 block (units in id order) followed by the period-2
// block (non-exited units in id order); a BetweenSubjects panel contributes
// its period-1 block only (one-period reference design).
struct StackedPanel {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  Eigen::VectorXd x;
  Eigen::VectorXd period_t1;   // indicator 1{t = t1}
  Eigen::VectorXd y1_of_unit;  // the row's unit's period-1 outcome
  std::vector<int> unit_id;
  Eigen::Index n_t1 = 0;  // rows in the period-1 block
  Eigen::Index n_t2 = 0;  // rows in the period-2 block

  Eigen::Index rows() const noexcept { return n_t1 + n_t2; }
};

inline StackedPanel stack(const Panel& panel) {
  if (panel.rows.empty()) throw std::invalid_argument("stack: empty panel");
  const bool one_period = panel.meta.design == DesignKind::BetweenSubjects;

  StackedPanel s;
  s.n_t1 = static_cast<Eigen::Index>(panel.rows.size());
  if (!one_period)
    for (const PanelRow& r : panel.rows)
      if (!r.exited) ++s.n_t2;
  const Eigen::Index n = s.n_t1 + s.n_t2;
  s.y.resize(n);
  s.z.resize(n);
  s.x.resize(n);
  s.period_t1.resize(n);
  s.y1_of_unit.resize(n);
  s.unit_id.reserve(static_cast<std::size_t>(n));

  Eigen::Index i = 0;
  for (const PanelRow& r : panel.rows) {
    s.y[i] = r.y_t1;
    s.z[i] = static_cast<double>(r.z_t1);
    s.x[i] = r.x_t1;
    s.period_t1[i] = 1.0;
    s.y1_of_unit[i] = r.y_t1;
    s.unit_id.push_back(r.unit_id);
    ++i;
  }
  if (!one_period) {
    for (const PanelRow& r : panel.rows) {
      if (r.exited) continue;
      s.y[i] = *r.y_t2;
      s.z[i] = static_cast<double>(*r.z_t2);
      s.x[i] = r.x_t2;
      s.period_t1[i] = 0.0;
      s.y1_of_unit[i] = r.y_t1;
      s.unit_id.push_back(r.unit_id);
      ++i;
    }
  }
  return s;
}

struct EstimateResult {
  double tau_hat = 0.0;
  double se = 0.0;
  EstimatorKind estimator = EstimatorKind::NoControl;
  int n_used = 0;
  stats::RegressionFit fit;
};

struct EstimateOptions {
  // Adds the period indicator to the NoControl/DirectControl/PropensityScore/
  // NoiseControl designs too (FixedEffects always has it). Off by default to
  // match the strategy definitions; exposed so the choice is flippable.
  bool add_period_dummy = false;
};

namespace detail {

struct Column {
  const Eigen::VectorXd* v;
};

inline Eigen::MatrixXd bind_columns(Eigen::Index n, std::initializer_list<Column> cols) {
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(cols.size()) + 1);
  X.col(0).setOnes();
  Eigen::Index j = 1;
  for (const Column& c : cols) X.col(j++) = *c.v;
  return X;
}

inline void require_two_groups(const Eigen::VectorXd& z, const char* who) {
  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < z.size(); ++i) (z[i] == 1.0 ? any1 : any0) = true;
  if (!any0 || !any1)
    throw stats::DegenerateOutcome(std::string(who) + ": single treatment group");
}

struct WelchGroups {
  double mean0 = 0.0, mean1 = 0.0, var0 = 0.0, var1 = 0.0;
  Eigen::Index n0 = 0, n1 = 0;
};

inline WelchGroups group_summaries(const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  WelchGroups g;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (z[i] == 1.0) { g.mean1 += y[i]; ++g.n1; }
    else { g.mean0 += y[i]; ++g.n0; }
  }
  if (g.n0 > 0) g.mean0 /= static_cast<double>(g.n0);
  if (g.n1 > 0) g.mean1 /= static_cast<double>(g.n1);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = y[i] - (z[i] == 1.0 ? g.mean1 : g.mean0);
    (z[i] == 1.0 ? g.var1 : g.var0) += d * d;
  }
  g.var0 = g.n0 > 1 ? g.var0 / static_cast<double>(g.n0 - 1) : 0.0;
  g.var1 = g.n1 > 1 ? g.var1 / static_cast<double>(g.n1 - 1) : 0.0;
  return g;
}

// Difference of group means with the unequal-variance (Welch) standard error.
inline EstimateResult diff_in_means(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                    EstimatorKind kind) {
  require_two_groups(z, to_token(kind));
  const WelchGroups g = group_summaries(y, z);
  EstimateResult res;
  res.estimator = kind;
  res.n_used = static_cast<int>(g.n0 + g.n1);
  res.tau_hat = g.mean1 - g.mean0;
  res.se = std::sqrt(g.var0 / static_cast<double>(g.n0) +
                     g.var1 / static_cast<double>(g.n1));
  res.fit.coefficients.resize(2);
  res.fit.coefficients << g.mean0, res.tau_hat;
  res.fit.standard_errors.resize(2);
  res.fit.standard_errors << std::sqrt(g.var0 / static_cast<double>(g.n0)), res.se;
  res.fit.rank = 2;
  res.fit.residuals = y;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    res.fit.residuals[i] -= (z[i] == 1.0 ? g.mean1 : g.mean0);
  res.fit.rss = res.fit.residuals.squaredNorm();
  return res;
}

// Per-period logistic fits of z on (1, x), stacked back into one fitted
// column. A pooled single fit is misspecified when the periods have different
// assignment laws (constant 1/2 at t1 vs covariate-dependent at t2 under
// counterbalancing), which is exactly the case this estimator must survive.
inline Eigen::VectorXd fitted_propensities(const StackedPanel& s) {
  Eigen::VectorXd ehat(s.rows());
  const auto fit_block = [&](Eigen::Index begin, Eigen::Index len) {
    Eigen::MatrixXd X(len, 2);
    X.col(0).setOnes();
    X.col(1) = s.x.segment(begin, len);
    const stats::LogisticFit f =
        stats::logistic_fit(X, s.z.segment(begin, len));
    ehat.segment(begin, len) = f.fitted_probabilities;
  };
  fit_block(0, s.n_t1);
  if (s.n_t2 > 0) fit_block(s.n_t1, s.n_t2);
  for (Eigen::Index i = 0; i < ehat.size(); ++i)
    ehat[i] = std::clamp(ehat[i], 1e-6, 1.0 - 1e-6);
  return ehat;
}

} // namespace detail

inline EstimateResult estimate(const Panel& panel, EstimatorKind kind,
                               rng::Stream& rs, const EstimateOptions& opt = {}) {
  validate_panel(panel);
  const StackedPanel s = stack(panel);

  const auto t2_view = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(v.tail(s.n_t2));
  };

  const auto run_ols = [&](const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           Eigen::Index z_col) {
    detail::require_two_groups(X.col(z_col), to_token(kind));
    EstimateResult res;
    res.estimator = kind;
    res.n_used = static_cast<int>(X.rows());
    res.fit = stats::ols_fit(X, y);
    res.tau_hat = res.fit.coefficients[z_col];
    res.se = res.fit.standard_errors[z_col];
    return res;
  };

  const auto pooled = [&](std::initializer_list<detail::Column> extra) {
    std::vector<detail::Column> cols{{&s.z}};
    cols.insert(cols.end(), extra.begin(), extra.end());
    Eigen::MatrixXd X(s.rows(), static_cast<Eigen::Index>(cols.size()) +
                                    (opt.add_period_dummy ? 2 : 1));
    X.col(0).setOnes();
    Eigen::Index j = 1;
    for (const detail::Column& c : cols) X.col(j++) = *c.v;
    if (opt.add_period_dummy) X.col(j) = s.period_t1;
    return run_ols(X, s.y, 1);
  };

  switch (kind) {
    case EstimatorKind::NoControl:
      return pooled({});
    case EstimatorKind::DirectControl:
      return pooled({{&s.x}});
    case EstimatorKind::FixedEffects: {
      Eigen::MatrixXd X = detail::bind_columns(s.rows(), {{&s.z}, {&s.period_t1}});
      return run_ols(X, s.y, 1);
    }
    case EstimatorKind::NoiseControl: {
      Eigen::VectorXd u(s.rows());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng::normal(rs);
      return pooled({{&u}});
    }
    case EstimatorKind::PropensityScore: {
      const Eigen::VectorXd ehat = detail::fitted_propensities(s);
      return pooled({{&ehat}});
    }
    case EstimatorKind::ColliderConditioned: {
      // Pedagogical trap: conditioning period 2 on the period-1 outcome opens
      // a non-causal path through its common causes. Provided to demonstrate
      // the bias, not to be used.
      if (s.n_t2 == 0)
        throw stats::DegenerateOutcome("collider: no period-2 rows");
      const Eigen::VectorXd y2 = t2_view(s.y), z2 = t2_view(s.z), y1 = t2_view(s.y1_of_unit);
      Eigen::MatrixXd X = detail::bind_columns(s.n_t2, {{&z2}, {&y1}});
      return run_ols(X, y2, 1);
    }
    case EstimatorKind::NaiveT2: {
      if (s.n_t2 == 0)
        throw stats::DegenerateOutcome("naive_t2: no period-2 rows");
      const Eigen::VectorXd y2 = t2_view(s.y), z2 = t2_view(s.z), x2 = t2_view(s.x);
      Eigen::MatrixXd X = detail::bind_columns(s.n_t2, {{&z2}, {&x2}});
      return run_ols(X, y2, 1);
    }
    case EstimatorKind::CarryoverControlT2: {
      if (s.n_t2 == 0)
        throw stats::DegenerateOutcome("carryover_control_t2: no period-2 rows");
      // z1 for period-2 rows of a counterbalanced panel is 1 - z2: the fit
      // below then raises CollinearityError by design.
      const Eigen::VectorXd y2 = t2_view(s.y), z2 = t2_view(s.z), x2 = t2_view(s.x);
      Eigen::VectorXd z1(s.n_t2);
      for (Eigen::Index i = 0; i < s.n_t2; ++i)
        z1[i] = static_cast<double>(
            panel.rows[static_cast<std::size_t>(s.unit_id[s.n_t1 + i])].z_t1);
      Eigen::MatrixXd X = detail::bind_columns(s.n_t2, {{&z2}, {&z1}, {&x2}});
      return run_ols(X, y2, 1);
    }
    case EstimatorKind::DiffInMeansT1:
      return detail::diff_in_means(s.y.head(s.n_t1), s.z.head(s.n_t1), kind);
    case EstimatorKind::DiffInMeansT2: {
      if (s.n_t2 == 0)
        throw stats::DegenerateOutcome("diff_means_t2: no period-2 rows");
      return detail::diff_in_means(t2_view(s.y), t2_view(s.z), kind);
    }
  }
  throw std::logic_error("estimate: unhandled estimator kind");
}

struct FwlDecomposition {
  double tau_pooled = 0.0;
  double q = 0.0;  // period-1 weight, a ratio of residual sums of squares
  double tau_t1_component = 0.0;
  double tau_t2_component = 0.0;

  double identity_residual() const noexcept {
    return tau_pooled - (q * tau_t1_component + (1.0 - q) * tau_t2_component);
  }
};

// Decomposes the pooled regression's treatment coefficient into a convex
// combination of per-period estimates. The pooled coefficient is computed by
// its own full regression — not reassembled from the parts — so the identity
// check is a genuine two-route comparison.
inline FwlDecomposition fwl_decompose(const Panel& panel) {
  validate_panel(panel);
  const StackedPanel s = stack(panel);
  const bool two_period = s.n_t2 > 0;

  // Project out W = (1, period dummy, x); a one-period stack drops the dummy.
  Eigen::MatrixXd W(s.rows(), two_period ? 3 : 2);
  W.col(0).setOnes();
  if (two_period) {
    W.col(1) = s.period_t1;
    W.col(2) = s.x;
  } else {
    W.col(1) = s.x;
  }
  const Eigen::VectorXd r_y = stats::residualize(W, s.y);
  const Eigen::VectorXd r_z = stats::residualize(W, s.z);

  const double den_t1 = r_z.head(s.n_t1).squaredNorm();
  const double den_t2 = r_z.tail(s.n_t2).squaredNorm();
  const double den = den_t1 + den_t2;
  if (den <= 0.0)
    throw stats::DegenerateOutcome("fwl_decompose: no residual treatment variation");

  FwlDecomposition d;
  d.q = den_t1 / den;
  d.tau_t1_component =
      den_t1 > 0.0 ? r_y.head(s.n_t1).dot(r_z.head(s.n_t1)) / den_t1 : 0.0;
  d.tau_t2_component =
      den_t2 > 0.0 ? r_y.tail(s.n_t2).dot(r_z.tail(s.n_t2)) / den_t2 : 0.0;

  Eigen::MatrixXd X(s.rows(), two_period ? 4 : 3);
  X.col(0).setOnes();
  X.col(1) = s.z;
  if (two_period) {
    X.col(2) = s.period_t1;
    X.col(3) = s.x;
  } else {
    X.col(2) = s.x;
  }
  d.tau_pooled = stats::ols_fit(X, s.y).coefficients[1];
  return d;
}

} // namespace seqdesign
