#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include <seqdesign/stats.hpp>

using namespace seqdesign::stats;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::MatrixXd with_intercept(const std::vector<double>& x) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[static_cast<std::size_t>(i)];
  }
  return X;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

} // namespace

TEST_CASE("ols recovers the frozen line fit", "[stats][ols]") {
  // y = (2, 4, 7) at x = (0, 1, 2): intercept 11/6, slope 5/2, rss 1/6,
  // se = (sqrt(5)/6, sqrt(1/12)).
  const auto fit = ols_fit(with_intercept({0, 1, 2}), vec({2, 4, 7}));
  CHECK_THAT(fit.coefficients[0], WithinAbs(11.0 / 6.0, 1e-12));
  CHECK_THAT(fit.coefficients[1], WithinAbs(2.5, 1e-12));
  CHECK_THAT(fit.rss, WithinAbs(1.0 / 6.0, 1e-12));
  CHECK_THAT(fit.standard_errors[0], WithinAbs(0.37267799624996495, 1e-10));
  CHECK_THAT(fit.standard_errors[1], WithinAbs(0.28867513459481287, 1e-10));
  CHECK(fit.rank == 2);
  CHECK(fit.residuals.size() == 3);
}

TEST_CASE("ols perfect fit has zero rss and zero se", "[stats][ols]") {
  const auto fit = ols_fit(with_intercept({1, 2, 3}), vec({2, 4, 6}));
  CHECK_THAT(fit.coefficients[1], WithinAbs(2.0, 1e-12));
  CHECK_THAT(fit.rss, WithinAbs(0.0, 1e-20));
  CHECK_THAT(fit.standard_errors[0], WithinAbs(0.0, 1e-12));
}

TEST_CASE("ols names the first dependent column", "[stats][ols]") {
  Eigen::MatrixXd X(4, 3);
  X.col(0).setOnes();
  X.col(1) << 1, 0, 1, 0;
  X.col(2) = X.col(0) - X.col(1);  // exactly dependent on the first two
  try {
    ols_fit(X, vec({1, 2, 3, 4}));
    FAIL("expected CollinearityError");
  } catch (const CollinearityError& e) {
    CHECK(e.column() == 2);
  }
}

TEST_CASE("ols rejects bad shapes", "[stats][ols]") {
  Eigen::MatrixXd X(1, 2);
  X << 1, 2;
  CHECK_THROWS_AS(ols_fit(X, vec({1})), std::invalid_argument);
  CHECK_THROWS_AS(ols_fit(with_intercept({0, 1}), vec({1, 2, 3})),
                  std::invalid_argument);
}

TEST_CASE("residualize returns projection residuals", "[stats][ols]") {
  const Eigen::MatrixXd X = with_intercept({0, 1, 2, 3});
  const Eigen::VectorXd r = residualize(X, vec({1, 3, 2, 4}));
  // Residuals are orthogonal to the design.
  CHECK_THAT((X.transpose() * r).lpNorm<Eigen::Infinity>(), WithinAbs(0.0, 1e-10));
}

TEST_CASE("logistic intercept-only fit is the log odds", "[stats][logistic]") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  const auto fit = logistic_fit(X, vec({1, 0, 0, 0}));
  CHECK(fit.converged);
  CHECK_FALSE(fit.separation_warning);
  CHECK_THAT(fit.coefficients[0], WithinAbs(-1.0986122886681098, 1e-7));
  CHECK_THAT(fit.fitted_probabilities.mean(), WithinAbs(0.25, 1e-7));
}

TEST_CASE("logistic matches a frozen two-parameter fit", "[stats][logistic]") {
  // x = (-2,-1,0,1,2), y = (0,1,0,1,1): MLE computed independently.
  const auto fit = logistic_fit(with_intercept({-2, -1, 0, 1, 2}),
                                vec({0, 1, 0, 1, 1}));
  CHECK(fit.converged);
  CHECK_THAT(fit.coefficients[0], WithinAbs(0.62269007, 1e-5));
  CHECK_THAT(fit.coefficients[1], WithinAbs(1.09042556, 1e-5));
}

TEST_CASE("logistic flags separation instead of diverging", "[stats][logistic]") {
  const auto fit = logistic_fit(with_intercept({-2, -1, 1, 2}), vec({0, 0, 1, 1}));
  CHECK(fit.separation_warning);
  CHECK(fit.coefficients.lpNorm<Eigen::Infinity>() <= kSeparationBound + 1e-9);
  // Fitted probabilities stay usable (finite, ordered with x).
  CHECK(fit.fitted_probabilities.allFinite());
  CHECK(fit.fitted_probabilities[0] < fit.fitted_probabilities[3]);
}

TEST_CASE("logistic validates its inputs", "[stats][logistic]") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
  CHECK_THROWS_AS(logistic_fit(X, vec({0, 1, 2})), std::invalid_argument);
  CHECK_THROWS_AS(logistic_fit(X, vec({1, 1, 1})), DegenerateOutcome);
}

TEST_CASE("fisher matches frozen exact values", "[stats][fisher]") {
  // (3,1 / 1,3): p = 17/35, table probability 16/70.
  const auto r1 = fisher_exact_2x2(3, 1, 1, 3);
  CHECK_THAT(r1.p_two_sided, WithinAbs(0.4857142857142857, 1e-12));
  CHECK_THAT(r1.p_table, WithinAbs(0.22857142857142856, 1e-12));

  // (5,0 / 0,5): p = 2/252.
  const auto r2 = fisher_exact_2x2(5, 0, 0, 5);
  CHECK_THAT(r2.p_two_sided, WithinAbs(0.007936507936507936, 1e-12));

  // Balanced table observed at the mode: everything is included.
  CHECK_THAT(fisher_exact_2x2(2, 2, 2, 2).p_two_sided, WithinAbs(1.0, 1e-12));

  // Strongly negative association: p = 101/92378.
  CHECK_THAT(fisher_exact_2x2(1, 9, 9, 1).p_two_sided,
             WithinAbs(0.001093333910671372, 1e-12));
}

TEST_CASE("fisher detail exposes the included tail", "[stats][fisher]") {
  const auto d = fisher_exact_2x2_detail(3, 1, 1, 3);
  CHECK(d.included == std::vector<long long>{0, 1, 3, 4});
}

TEST_CASE("fisher with a zero margin is the trivial test", "[stats][fisher]") {
  const auto r = fisher_exact_2x2(0, 0, 3, 5);
  CHECK(r.p_two_sided == 1.0);
  CHECK(r.p_table == 1.0);
}

TEST_CASE("fisher is symmetric under transposition and label swaps", "[stats][fisher]") {
  const double base = fisher_exact_2x2(7, 2, 3, 8).p_two_sided;
  CHECK_THAT(fisher_exact_2x2(7, 3, 2, 8).p_two_sided, WithinAbs(base, 1e-12));
  CHECK_THAT(fisher_exact_2x2(8, 3, 2, 7).p_two_sided, WithinAbs(base, 1e-12));
  CHECK_THAT(fisher_exact_2x2(2, 7, 8, 3).p_two_sided, WithinAbs(base, 1e-12));
}

TEST_CASE("fisher rejects invalid tables", "[stats][fisher]") {
  CHECK_THROWS_AS(fisher_exact_2x2(-1, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(fisher_exact_2x2(0, 0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(fisher_exact_2x2_detail(2, 2, 2, 2, /*max_total=*/4),
                  std::invalid_argument);
}

TEST_CASE("sigmoid is stable at extremes", "[stats]") {
  CHECK_THAT(sigmoid(0.0), WithinAbs(0.5, 1e-15));
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(-800.0) < 1e-300);
}
