#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Small regression toolkit: OLS with hard rank checking, IRLS logistic
// regression with separation handling, FWL-style residualization, and an
// exact Fisher 2x2 test. Dense linear algebra is delegated to Eigen; the
// numerically delicate policies (rank tolerance, step halving, separation
// bound, tail inclusion slack) are pinned here.

namespace seqdesign::stats {

// Thrown when the design matrix is rank deficient; names the first offending
// column (smallest index whose R diagonal collapses under unpivoted QR, i.e.
// the first column linearly dependent on the ones before it).
class CollinearityError : public std::runtime_error {
public:
  explicit CollinearityError(int column)
      : std::runtime_error("design matrix is rank deficient: column " +
                           std::to_string(column) +
                           " is linearly dependent on earlier columns"),
        column_(column) {}
  int column() const noexcept { return column_; }

private:
  int column_;
};

// Thrown when the data admit no estimate at all (single treatment class,
// empty comparison group, zero residual treatment variation, ...).
class DegenerateOutcome : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RegressionFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd residuals;
  Eigen::Index rank = 0;
  double rss = 0.0;
};

// |R_jj| <= kRankTolerance * max_i |R_ii| marks column j as dependent.
inline constexpr double kRankTolerance = 1e-10;

inline RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (k < 1 || y.size() != n)
    throw std::invalid_argument("ols_fit: shape mismatch");
  if (n < k)
    throw std::invalid_argument("ols_fit: fewer rows than columns");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd R =
      qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();

  double diag_max = 0.0;
  for (Eigen::Index j = 0; j < k; ++j)
    diag_max = std::max(diag_max, std::abs(R(j, j)));
  if (diag_max <= 0.0) throw CollinearityError(0);
  for (Eigen::Index j = 0; j < k; ++j)
    if (std::abs(R(j, j)) <= kRankTolerance * diag_max)
      throw CollinearityError(static_cast<int>(j));

  RegressionFit fit;
  fit.rank = k;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - X * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();

  // (X'X)^-1 = R^-1 R^-T, so its diagonal is the squared row norm of R^-1.
  const Eigen::MatrixXd r_inv = R.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(k, k));
  const double dof = static_cast<double>(n - k);
  const double sigma2 = dof > 0.0 ? fit.rss / dof : 0.0;
  fit.standard_errors.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    fit.standard_errors[j] = std::sqrt(sigma2 * r_inv.row(j).squaredNorm());
  return fit;
}

// Residuals of v regressed on X_aux (the FWL projection step).
inline Eigen::VectorXd residualize(const Eigen::MatrixXd& X_aux,
                                   const Eigen::VectorXd& v) {
  return ols_fit(X_aux, v).residuals;
}

struct LogisticFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted_probabilities;
  int iterations = 0;
  bool converged = false;
  bool separation_warning = false;
};

inline double sigmoid(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace detail {

inline double log1pexp(double eta) noexcept {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double binomial_deviance(const Eigen::VectorXd& eta,
                                const Eigen::VectorXd& y) noexcept {
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    loglik += y[i] * eta[i] - log1pexp(eta[i]);
  return -2.0 * loglik;
}

} // namespace detail

// Coefficients larger than this in absolute value are treated as evidence of
// (quasi-)separation: the fit is clamped to the bound and flagged rather than
// allowed to diverge. exp(+-30) saturates a double probability anyway.
inline constexpr double kSeparationBound = 30.0;
inline constexpr int kMaxStepHalvings = 8;
// A fitted probability this close to 0 or 1 (odds beyond ~1e10) is treated as
// numerically saturated when scanning for quasi-separation.
inline constexpr double kSaturationEps = 1e-10;

inline LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                int max_iter = 50, double tol = 1e-8) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (k < 1 || y.size() != n)
    throw std::invalid_argument("logistic_fit: shape mismatch");
  if (n < k)
    throw std::invalid_argument("logistic_fit: fewer rows than columns");
  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 0.0) any0 = true;
    else if (y[i] == 1.0) any1 = true;
    else throw std::invalid_argument("logistic_fit: responses must be 0/1");
  }
  if (!any0 || !any1)
    throw DegenerateOutcome("logistic_fit: single response class");

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double dev = detail::binomial_deviance(eta, y);

  for (int iter = 1; iter <= max_iter; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    const Eigen::VectorXd score = X.transpose() * (y - p);
    if (score.lpNorm<Eigen::Infinity>() <= tol) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd hessian = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd step = hessian.ldlt().solve(score);
    if (!step.allFinite()) {
      fit.separation_warning = true;
      break;
    }

    // Backtrack on the deviance: halve up to kMaxStepHalvings times.
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= kMaxStepHalvings; ++h, scale *= 0.5) {
      const Eigen::VectorXd cand = fit.coefficients + scale * step;
      const Eigen::VectorXd cand_eta = X * cand;
      const double cand_dev = detail::binomial_deviance(cand_eta, y);
      if (cand_dev <= dev + 1e-12) {
        fit.coefficients = cand;
        eta = cand_eta;
        dev = cand_dev;
        accepted = true;
        break;
      }
    }
    if (!accepted) break; // stalled: report non-convergence honestly

    const double mag = fit.coefficients.lpNorm<Eigen::Infinity>();
    if (mag > kSeparationBound) {
      // (Quasi-)separated data: the MLE runs to infinity. Clamp to the bound
      // — fitted probabilities are saturated there — and flag it.
      fit.coefficients *= kSeparationBound / mag;
      eta = X * fit.coefficients;
      fit.separation_warning = true;
      break;
    }
  }

  fit.fitted_probabilities.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    fit.fitted_probabilities[i] = sigmoid(eta[i]);

  // Quasi-separated data can pass the score test with coefficients still
  // inside the bound (the gradient decays exponentially along the escape
  // direction). Numerically saturated probabilities are the footprint of
  // that escape, so flag them too.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = fit.fitted_probabilities[i];
    if (p <= kSaturationEps || p >= 1.0 - kSaturationEps) {
      fit.separation_warning = true;
      break;
    }
  }
  return fit;
}

struct FisherResult {
  double p_two_sided = 1.0;
  double p_table = 1.0; // point probability of the observed table
};

// Two-sided inclusion uses a small relative slack so tables tied with the
// observed one up to rounding are counted (matching exact-arithmetic ties).
inline constexpr double kFisherTieSlack = 1e-7;

struct FisherDetail {
  FisherResult result;
  std::vector<long long> included; // top-left cell values counted in the tail
};

inline FisherDetail fisher_exact_2x2_detail(long long a, long long b,
                                            long long c, long long d,
                                            long long max_total = 1000000) {
  if (a < 0 || b < 0 || c < 0 || d < 0)
    throw std::invalid_argument("fisher_exact_2x2: negative cell count");
  const long long r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  const long long total = r1 + r2;
  if (total == 0)
    throw std::invalid_argument("fisher_exact_2x2: empty table");
  if (total > max_total)
    throw std::invalid_argument(
        "fisher_exact_2x2: table total exceeds the log-factorial budget");
  FisherDetail out;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    // A zero margin admits exactly one table: p = 1 by convention.
    out.result = {1.0, 1.0};
    out.included.push_back(a);
    return out;
  }

  std::vector<double> lf(static_cast<std::size_t>(total) + 1, 0.0);
  for (long long i = 1; i <= total; ++i)
    lf[static_cast<std::size_t>(i)] =
        lf[static_cast<std::size_t>(i - 1)] + std::log(static_cast<double>(i));
  const auto log_p = [&](long long aa) {
    const long long bb = r1 - aa, cc = c1 - aa, dd = r2 - c1 + aa;
    return lf[r1] - lf[aa] - lf[bb] + lf[r2] - lf[cc] - lf[dd] -
           (lf[total] - lf[c1] - lf[c2]);
  };

  const long long a_min = std::max(0LL, c1 - r2);
  const long long a_max = std::min(r1, c1);
  const double log_p_obs = log_p(a);
  const double cutoff = log_p_obs + std::log1p(kFisherTieSlack);

  double p_sum = 0.0;
  for (long long aa = a_min; aa <= a_max; ++aa) {
    const double lp = log_p(aa);
    if (lp <= cutoff) {
      p_sum += std::exp(lp);
      out.included.push_back(aa);
    }
  }
  out.result.p_two_sided = std::min(p_sum, 1.0);
  out.result.p_table = std::exp(log_p_obs);
  return out;
}

inline FisherResult fisher_exact_2x2(long long a, long long b, long long c,
                                     long long d, long long max_total = 1000000) {
  return fisher_exact_2x2_detail(a, b, c, d, max_total).result;
}

} // namespace seqdesign::stats
