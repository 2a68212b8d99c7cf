#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wss/chi_square.hpp"
#include "wss/error.hpp"
#include "wss/estimators.hpp"
#include "wss/rng.hpp"
#include "wss/wald.hpp"

using wss::ChiSquare;
using wss::ContrastSpec;
using wss::CovarianceChoice;
using wss::Matrix;
using wss::Vector;

namespace {

// Composite Simpson integral of the chi-square density on [0, x]; the
// substitution u = sqrt(t) removes the singularity at zero for df = 1.
double chi_square_cdf_by_quadrature(double df, double x) {
  const int steps = 20000;
  const double k = df / 2.0;
  const double norm = 1.0 / (std::pow(2.0, k) * std::tgamma(k));
  auto integrand = [&](double u) {
    return 2.0 * norm * std::pow(u, df - 1.0) * std::exp(-u * u / 2.0);
  };
  const double b = std::sqrt(x);
  const double h = b / steps;
  double sum = integrand(0.0) + integrand(b);
  for (int i = 1; i < steps; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
  return sum * h / 3.0;
}

wss::ModelSpec random_spec(std::mt19937_64& gen, int n, int p, double sigma) {
  const Matrix x = oracle::random_design(gen, n, p);
  std::uniform_real_distribution<double> unif(0.5, 4.0);
  Vector l(n);
  for (int i = 0; i < n; ++i) l(i) = unif(gen);
  return wss::ModelSpec(wss::CovariateDesign(x), sigma, wss::CensoringScheme::type_i(l));
}

}  // namespace

TEST_CASE("chi-square distribution values") {
  CHECK(ChiSquare(1).cdf(0.0) == 0.0);
  CHECK(ChiSquare(1).quantile(0.95) == doctest::Approx(3.841459).epsilon(1e-7));
  CHECK(ChiSquare(3).quantile(0.95) == doctest::Approx(7.814728).epsilon(1e-7));
  CHECK(ChiSquare(2).quantile(1.0 - 1e-15) > 60.0);
  CHECK_THROWS_AS(ChiSquare(2).quantile(0.0), wss::Error);
  CHECK_THROWS_AS(ChiSquare(2).quantile(1.0), wss::Error);
}

TEST_CASE("chi-square CDF agrees with numerical integration") {
  for (double df : {1.0, 2.0, 3.0, 5.0, 10.0}) {
    for (double x : {0.1, 0.5, 1.0, 3.0, 7.5, 15.0}) {
      CHECK(ChiSquare(df).cdf(x) ==
            doctest::Approx(chi_square_cdf_by_quadrature(df, x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("chi-square quantile inverts the CDF and the CDF is monotone") {
  for (double df : {1.0, 2.0, 4.0, 7.0}) {
    const ChiSquare chi(df);
    double prev = 0.0;
    for (double x = 0.05; x < 40.0; x *= 1.3) {
      const double c = chi.cdf(x);
      CHECK(c >= prev);
      prev = c;
      if (c > 1e-12 && c < 1.0 - 1e-12) CHECK(chi.quantile(c) == doctest::Approx(x).epsilon(1e-8));
      CHECK(chi.sf(x) == doctest::Approx(1.0 - c).epsilon(1e-12));
    }
  }
}

TEST_CASE("Wald statistic reference values") {
  const ContrastSpec cs = ContrastSpec::full(Vector::Zero(1));
  CHECK(wss::wald_statistic(Vector::Zero(1), Matrix::Identity(1, 1), cs) == 0.0);
  const double w =
      wss::wald_statistic(Vector::Constant(1, 1.959964), Matrix::Identity(1, 1), cs);
  CHECK(w == doctest::Approx(3.8415).epsilon(1e-4));
  CHECK(ChiSquare(1).sf(w) == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("Wald statistic errors") {
  const ContrastSpec cs = ContrastSpec::full(Vector::Zero(2));
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  try {
    wss::wald_statistic(Vector::Ones(2), singular, cs);
    FAIL("expected an exception");
  } catch (const wss::Error& e) {
    CHECK(e.code() == wss::ErrorCode::kTestUndefined);
  }
  CHECK_THROWS_AS(wss::wald_statistic(Vector::Ones(3), Matrix::Identity(3, 3), cs), wss::Error);
  ContrastSpec dependent;
  dependent.c = Matrix::Ones(2, 2);
  dependent.beta0 = Vector::Zero(2);
  CHECK_THROWS_AS(dependent.validate(2), wss::Error);
}

TEST_CASE("Wald statistic is invariant to row scaling of the contrast") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector beta = oracle::random_vector(gen, 4);
    const Matrix cov = oracle::random_spd(gen, 4);
    ContrastSpec cs;
    cs.c = Matrix(2, 4);
    cs.c.row(0) = oracle::random_vector(gen, 4).transpose();
    cs.c.row(1) = oracle::random_vector(gen, 4).transpose();
    cs.beta0 = oracle::random_vector(gen, 4);
    ContrastSpec scaled = cs;
    scaled.c.row(0) *= -3.5;
    scaled.c.row(1) *= 0.02;
    const double a = wss::wald_statistic(beta, cov, cs);
    const double b = wss::wald_statistic(beta, cov, scaled);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, a));
  }
}

TEST_CASE("partitioned information identity on random designs") {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 2 + trial % 3;
    const int q = 1 + trial % (p - 1);
    const auto spec = random_spec(gen, 8, p, 0.7 + 0.1 * (trial % 5));
    const Vector beta = oracle::random_vector(gen, p, 0.5);
    const auto parts = wss::partitioned_information(spec, beta, q);
    const Matrix k_inv = wss::fisher_information(spec, beta).inverse();
    const Matrix direct = k_inv.topLeftCorner(q, q).inverse();
    CHECK((parts.k11_inverse_via_r - direct).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("partitioned information for an orthogonal design") {
  Matrix x(4, 2);
  x << 1, 1, 1, -1, -1, 1, -1, -1;
  const wss::ModelSpec spec(wss::CovariateDesign(x), 1.3, wss::CensoringScheme::uncensored(4));
  const auto parts = wss::partitioned_information(spec, Vector::Zero(2), 1);
  const Matrix x1 = x.leftCols(1);
  CHECK((parts.k11_inverse_via_r - x1.transpose() * x1 / (1.3 * 1.3)).norm() <= 1e-14);
  CHECK(parts.k12.norm() <= 1e-14);
}

TEST_CASE("with only the intercept left, R is the weighted centering of X1") {
  std::mt19937_64 gen(8);
  Matrix x = oracle::random_design(gen, 9, 3);
  x.col(0).swap(x.col(2));  // intercept becomes the last column
  const auto spec = random_spec(gen, 9, 3, 1.0);
  const wss::ModelSpec moved(wss::CovariateDesign(x), 1.0, spec.censoring);
  const Vector beta = oracle::random_vector(gen, 3, 0.3);
  const auto parts = wss::partitioned_information(moved, beta, 2);
  const Vector w = wss::weight_set(moved, beta).w;
  for (int j = 0; j < 2; ++j) {
    const double mean = w.dot(x.col(j)) / w.sum();
    const Vector centered = x.col(j).array() - mean;
    CHECK((parts.residual_columns.col(j) - centered).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("subset Wald statistic equals the partitioned form") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 3;
    const int q = 1 + trial % 2;
    const auto spec = random_spec(gen, 12, p, 1.0);
    const Vector beta = oracle::random_vector(gen, p);
    const Vector null1 = oracle::random_vector(gen, q);
    const Matrix k_inv = wss::fisher_information(spec, beta).inverse();
    const double general =
        wss::wald_statistic(beta, k_inv, ContrastSpec::leading_subset(p, null1));
    const auto parts = wss::partitioned_information(spec, beta, q);
    const double partitioned =
        wss::wald_statistic_partitioned(beta.head(q) - null1, parts);
    CHECK(std::abs(general - partitioned) <= 1e-10 * std::max(1.0, general));
  }
}

TEST_CASE("each variant uses its own estimate and covariance") {
  std::mt19937_64 gen(10);
  const Vector beta = (Vector(2) << 0.5, -0.8).finished();
  const auto spec = random_spec(gen, 25, 2, 1.0);
  wss::RngStream rng(10);
  const auto sample = wss::simulate_sample(spec, beta, rng);
  const auto mle = wss::fit_mle(spec, sample);
  const auto bce = wss::bias_corrected_from(spec, mle);
  const auto firth = wss::fit_firth(spec, sample);
  REQUIRE(mle.converged);
  REQUIRE(firth.converged);
  const auto cs = ContrastSpec::leading_subset(2, Vector::Constant(1, 0.5));

  struct Case {
    const wss::FitResult* fit;
    CovarianceChoice choice;
    wss::WaldVariant variant;
    Matrix cov;
  };
  const std::vector<Case> cases = {
      {&mle, CovarianceChoice::kFirst, wss::WaldVariant::kMle, mle.cov_first},
      {&mle, CovarianceChoice::kSecond, wss::WaldVariant::kMle2,
       wss::second_order_covariance(spec, mle.beta, wss::CovarianceTau::mle())},
      {&bce, CovarianceChoice::kFirst, wss::WaldVariant::kBce,
       wss::fisher_information(spec, bce.beta).inverse()},
      {&bce, CovarianceChoice::kSecond, wss::WaldVariant::kBce2,
       wss::second_order_covariance(spec, bce.beta, wss::CovarianceTau::bce())},
      {&firth, CovarianceChoice::kFirst, wss::WaldVariant::kFirth,
       wss::fisher_information(spec, firth.beta).inverse()},
  };
  for (const auto& c : cases) {
    const auto r = wss::wald_test(*c.fit, c.choice, cs);
    CHECK(r.variant == c.variant);
    CHECK(r.df == 1);
    const double expected = wss::wald_statistic(c.fit->beta, c.cov, cs);
    CHECK(r.statistic == doctest::Approx(expected).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(ChiSquare(1).sf(r.statistic)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(wss::wald_test(firth, CovarianceChoice::kSecond, cs), wss::Error);
}

TEST_CASE("matrix distances") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const auto same = wss::matrix_distances(i2, i2);
  CHECK(same.d1 == 0.0);
  CHECK(same.d2 == 0.0);
  CHECK(same.d3 == 0.0);
  const auto d = wss::matrix_distances(i2, Matrix::Zero(2, 2));
  CHECK(d.d1 == 1.0);
  CHECK(d.d2 == doctest::Approx(std::sqrt(2.0)));
  CHECK(d.d3 == 2.0);

  std::mt19937_64 gen(11);
  const Matrix a = oracle::random_spd(gen, 3), b = oracle::random_spd(gen, 3);
  double frob = 0.0, total = 0.0, diag = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double diff = a(i, j) - b(i, j);
      frob += diff * diff;
      total += std::abs(diff);
      if (i == j) diag = std::max(diag, std::abs(diff));
    }
  const auto r = wss::matrix_distances(a, b);
  CHECK(std::abs(r.d2 - std::sqrt(frob)) <= 1e-12);
  CHECK(std::abs(r.d3 - total) <= 1e-12);
  CHECK(r.d1 == diag);
  CHECK_THROWS_AS(wss::matrix_distances(a, Matrix::Zero(2, 2)), wss::Error);
}
