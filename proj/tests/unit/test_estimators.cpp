#include <doctest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wss/error.hpp"
#include "wss/estimators.hpp"
#include "wss/rng.hpp"

using wss::CensoredSample;
using wss::CensoringScheme;
using wss::CovariateDesign;
using wss::CovarianceTau;
using wss::Matrix;
using wss::ModelSpec;
using wss::Vector;

namespace {

const std::vector<double> kTimes = {0.4, 1.7, 0.9, 2.3, 0.15, 1.1, 3.2, 0.65, 0.8, 1.45};

struct ExponentialCase {
  ModelSpec spec;
  CensoredSample sample;
  double log_mean = 0.0;
};

ExponentialCase exponential_case() {
  const int n = static_cast<int>(kTimes.size());
  ExponentialCase c{ModelSpec(CovariateDesign(Matrix::Ones(n, 1)), 1.0,
                              CensoringScheme::uncensored(n)),
                    {}, 0.0};
  c.sample.y.resize(n);
  c.sample.delta = Vector::Ones(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    c.sample.y(i) = std::log(kTimes[i]);
    mean += kTimes[i] / n;
  }
  c.log_mean = std::log(mean);
  return c;
}

ModelSpec random_censored_spec(std::mt19937_64& gen, int n, int p, double sigma,
                               const Vector& beta) {
  Matrix x = oracle::random_design(gen, n, p);
  std::normal_distribution<double> shift(0.3, 0.8);
  const Vector mu = x * beta;
  Vector l(n);
  for (int i = 0; i < n; ++i) l(i) = std::exp(mu(i) + shift(gen));
  return ModelSpec(CovariateDesign(x), sigma, CensoringScheme::type_i(l));
}

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("exponential MLE is the log of the sample mean") {
  const auto c = exponential_case();
  const auto fit = wss::fit_mle(c.spec, c.sample);
  REQUIRE(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(c.log_mean).epsilon(1e-10));
  CHECK(fit.final_score_norm <= 1e-8);
  CHECK(fit.cov_first(0, 0) == doctest::Approx(0.1));
}

TEST_CASE("exponential bias matches the digamma expansion") {
  const auto c = exponential_case();
  const Vector b = wss::cox_snell_bias(c.spec, Vector::Constant(1, c.log_mean));
  CHECK(b(0) == doctest::Approx(-0.05).epsilon(1e-12));
  const double exact = boost::math::digamma(10.0) - std::log(10.0);
  CHECK(std::abs(b(0) - exact) <= 1e-3);
}

TEST_CASE("exponential bias-corrected estimate adds one over 2n") {
  const auto c = exponential_case();
  const auto bce = wss::fit_bce(c.spec, c.sample);
  REQUIRE(bce.converged);
  CHECK(bce.kind == wss::EstimatorKind::kBce);
  CHECK(bce.beta(0) == doctest::Approx(c.log_mean + 0.05).epsilon(1e-10));
}

TEST_CASE("exponential Firth estimate has the closed-form root") {
  const auto c = exponential_case();
  const auto firth = wss::fit_firth(c.spec, c.sample);
  REQUIRE(firth.converged);
  CHECK(firth.beta(0) == doctest::Approx(c.log_mean + std::log(20.0 / 19.0)).epsilon(1e-10));
  CHECK(wss::firth_score(c.spec, firth.beta, c.sample).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("exponential second-order variance matches the trigamma value") {
  const auto c = exponential_case();
  const Matrix cov2 =
      wss::second_order_covariance(c.spec, Vector::Constant(1, c.log_mean), CovarianceTau::mle());
  CHECK(cov2(0, 0) == doctest::Approx(0.105).epsilon(1e-12));
  CHECK(std::abs(cov2(0, 0) - boost::math::trigamma(10.0)) <= 2e-4);

  const auto d = wss::delta_set(c.spec, Vector::Constant(1, c.log_mean), CovarianceTau::mle());
  CHECK(d.delta1(0, 0) == doctest::Approx(-1.0));
  CHECK(d.delta2(0, 0) == doctest::Approx(-1.0));
  CHECK(d.delta3(0, 0) == 0.0);
  CHECK(d.combined()(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("bias correction subtracts the bias evaluated at the MLE") {
  std::mt19937_64 gen(40);
  const Vector beta = oracle::random_vector(gen, 2);
  const auto spec = random_censored_spec(gen, 30, 2, 1.0, beta);
  wss::RngStream rng(40);
  const auto s = wss::simulate_sample(spec, beta, rng);
  const auto mle = wss::fit_mle(spec, s);
  REQUIRE(mle.converged);
  const auto bce = wss::bias_corrected_from(spec, mle);
  CHECK(max_abs(bce.beta - (mle.beta - wss::cox_snell_bias(spec, mle.beta))) <= 1e-14);
  CHECK(max_abs(bce.cov_first - wss::fisher_information(spec, bce.beta).inverse()) <= 1e-10);

  auto unconverged = mle;
  unconverged.converged = false;
  CHECK_FALSE(wss::bias_corrected_from(spec, unconverged).converged);
}

TEST_CASE("type II bias uses the constant weights only") {
  std::mt19937_64 gen(41);
  const Matrix x = oracle::random_design(gen, 10, 3);
  const double sigma = 1.4;
  const ModelSpec spec(CovariateDesign(x), sigma, CensoringScheme::type_ii(7));
  const Vector beta = oracle::random_vector(gen, 3);
  const Matrix k_inv = (0.7 / (sigma * sigma) * x.transpose() * x).inverse();
  const Matrix z = x * k_inv * x.transpose();
  const Vector expected =
      -(0.7 / (2.0 * std::pow(sigma, 3))) * k_inv * x.transpose() * z.diagonal();
  CHECK(max_abs(wss::cox_snell_bias(spec, beta) - expected) <= 1e-12);
  CHECK(wss::delta_set(spec, beta, CovarianceTau::mle()).delta3.isZero(0.0));
}

TEST_CASE("matrix bias equals the cumulant triple sum") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const double sigma = 0.5 + 0.5 * (trial % 3);
    const Vector beta = oracle::random_vector(gen, 2);
    const auto spec = random_censored_spec(gen, 4, 2, sigma, beta);
    const Vector matrix_form = wss::cox_snell_bias(spec, beta);
    const Vector tensor_form = oracle::tensor_bias(spec, beta);
    CHECK(max_abs(matrix_form - tensor_form) <= 1e-10);
  }
}

TEST_CASE("matrix second-order covariance equals the observation sums") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const double sigma = 0.5 + 0.5 * (trial % 3);
    const Vector beta = oracle::random_vector(gen, 2);
    const auto spec = random_censored_spec(gen, 5, 2, sigma, beta);
    for (const auto tau : {CovarianceTau::mle(), CovarianceTau::bce()}) {
      const auto d = wss::delta_set(spec, beta, tau);
      const auto t = oracle::tensor_deltas(spec, beta, tau.tau1);
      CHECK(max_abs(d.delta1 - t.d1) <= 1e-10);
      CHECK(max_abs(d.delta3 - t.d3) <= 1e-10);
      CHECK(max_abs((d.delta2 + d.delta2.transpose()) - (t.d2 + t.d2.transpose())) <= 1e-10);
      const Matrix cov2 = wss::second_order_covariance(spec, beta, tau);
      CHECK(max_abs(cov2 - oracle::tensor_second_order_covariance(spec, beta, tau.tau1,
                                                                  tau.tau2)) <= 1e-10);
      CHECK((cov2 - cov2.transpose()).norm() == 0.0);
    }
  }
}

TEST_CASE("second-order covariance reduces to the inverse information without deltas") {
  std::mt19937_64 gen(9);
  const Vector beta = oracle::random_vector(gen, 3);
  const auto spec = random_censored_spec(gen, 12, 3, 1.0, beta);
  const Matrix k_inv = wss::fisher_information(spec, beta).inverse();
  wss::DeltaSet zero{Matrix::Zero(3, 3), Matrix::Zero(3, 3), Matrix::Zero(3, 3),
                     CovarianceTau::mle()};
  CHECK(max_abs(wss::second_order_covariance(k_inv, zero) - k_inv) <= 1e-15);
}

TEST_CASE("the second-order correction shrinks like n^-2") {
  std::mt19937_64 gen(10);
  const Vector beta = (Vector(3) << -0.5, 0.7, 0.3).finished();
  const Matrix x = oracle::random_design(gen, 15, 3);
  auto correction_norm = [&](int copies) {
    Matrix big(15 * copies, 3);
    for (int k = 0; k < copies; ++k) big.middleRows(15 * k, 15) = x;
    const double l = wss::calibrate_censoring(big, 1.0, beta, 0.25);
    const ModelSpec spec(CovariateDesign(big), 1.0, CensoringScheme::type_i(l, big.rows()));
    const Matrix k_inv = wss::fisher_information(spec, beta).inverse();
    return (wss::second_order_covariance(spec, beta, CovarianceTau::mle()) - k_inv).norm();
  };
  const double ratio = correction_norm(2) / correction_norm(1);
  CHECK(ratio >= 0.15);
  CHECK(ratio <= 0.40);
}

TEST_CASE("MLE is consistent for a large sample") {
  std::mt19937_64 gen(12);
  const int n = 10000;
  const Vector beta = (Vector(3) << -2.0, 1.5, -1.0).finished();
  const Matrix x = oracle::random_design(gen, n, 3);
  const double l = wss::calibrate_censoring(x, 1.0, beta, 0.25);
  const ModelSpec spec(CovariateDesign(x), 1.0, CensoringScheme::type_i(l, n));
  wss::RngStream rng(12);
  const auto sample = wss::simulate_sample(spec, beta, rng);
  const auto fit = wss::fit_mle(spec, sample);
  REQUIRE(fit.converged);
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(fit.beta(k) - beta(k)) <= 4.0 * std::sqrt(fit.cov_first(k, k)));
  REQUIRE(fit.cov_second.has_value());
  CHECK(fit.cov_second_pd);
}

TEST_CASE("a fully censored dose cell makes the fit diverge") {
  const int per_cell = 5;
  Matrix x = Matrix::Zero(3 * per_cell, 3);
  CensoredSample s;
  s.y.resize(3 * per_cell);
  s.delta.resize(3 * per_cell);
  const double log_l = std::log(3.0);
  for (int cell = 0; cell < 3; ++cell)
    for (int j = 0; j < per_cell; ++j) {
      const int i = cell * per_cell + j;
      x(i, cell) = 1.0;
      const bool censored = cell == 1;
      s.delta(i) = censored ? 0.0 : 1.0;
      s.y(i) = censored ? log_l : std::log(0.3 + 0.4 * j);
    }
  const ModelSpec spec(CovariateDesign(x), 1.0, CensoringScheme::type_i(3.0, 3 * per_cell));
  const auto fit = wss::fit_mle(spec, s);
  CHECK_FALSE(fit.converged);
  CHECK(fit.diagnostics.reason == "divergent coefficient");
  const auto bce = wss::fit_bce(spec, s);
  CHECK_FALSE(bce.converged);
}

TEST_CASE("Firth fixed point and uncensored type II fit") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector beta = oracle::random_vector(gen, 3, 0.5);
    const auto spec = random_censored_spec(gen, 25, 3, 0.8, beta);
    wss::RngStream rng(5, trial);
    const auto s = wss::simulate_sample(spec, beta, rng);
    const auto firth = wss::fit_firth(spec, s);
    if (!firth.converged) continue;
    const Vector u = wss::score(spec, firth.beta, s);
    const Vector kb = wss::fisher_information(spec, firth.beta) *
                      wss::cox_snell_bias(spec, firth.beta);
    CHECK((u - kb).cwiseAbs().maxCoeff() <= 1e-7);
  }

  const Matrix x = oracle::random_design(gen, 20, 2);
  const ModelSpec spec(CovariateDesign(x), 1.0, CensoringScheme::type_ii(20));
  const Vector beta = (Vector(2) << 0.4, -0.6).finished();
  wss::RngStream rng(6);
  const auto s = wss::simulate_sample(spec, beta, rng);
  const auto firth = wss::fit_firth(spec, s);
  REQUIRE(firth.converged);
  CHECK(wss::firth_score(spec, firth.beta, s).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_FALSE(firth.cov_second.has_value());
}

TEST_CASE("initial estimate falls back when uncensored rows are too few") {
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  const ModelSpec spec(CovariateDesign(x), 1.0, CensoringScheme::type_i(5.0, 4));
  CensoredSample s;
  s.y = (Vector(4) << 0.1, 0.5, 0.9, 1.3).finished();
  s.delta = (Vector(4) << 1, 0, 0, 0).finished();
  const Vector init = wss::initial_estimate(spec, s);
  CHECK(init(0) == doctest::Approx(0.1));
  CHECK(init(1) == doctest::Approx(0.4));
}
