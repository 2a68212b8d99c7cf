#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "oracles.hpp"
#include "wss/dose_response.hpp"
#include "wss/error.hpp"
#include "wss/mcpmod.hpp"
#include "wss/study.hpp"

using wss::DoseDesign;
using wss::DoseFamily;
using wss::DoseResponseModel;
using wss::Matrix;
using wss::Vector;

namespace {

constexpr double kDelta = 0.6931471805599453;

DoseDesign reference_design() {
  DoseDesign d;
  d.doses = wss::reference_doses();
  return d;
}

DoseResponseModel emax(double e0, double e1, double ed50) {
  DoseResponseModel m;
  m.family = DoseFamily::kEmax;
  m.theta0 = e0;
  m.theta1 = e1;
  m.nonlinear = {ed50};
  return m;
}

const wss::MaxNormalSampler& sampler(int dimension) {
  static std::vector<std::unique_ptr<wss::MaxNormalSampler>> cache(8);
  auto& slot = cache.at(static_cast<std::size_t>(dimension));
  if (!slot) slot = std::make_unique<wss::MaxNormalSampler>(dimension);
  return *slot;
}

}  // namespace

TEST_CASE("standardized shapes") {
  CHECK(wss::standardized_response(DoseFamily::kEmax, {30.0}, 0.0, 30.0) == 0.5);
  CHECK(wss::standardized_response(DoseFamily::kExponential, {20.0}, 0.0, 0.0) == 0.0);
  CHECK(wss::standardized_response(DoseFamily::kLinear, {}, 0.0, 7.5) == 7.5);
  CHECK(wss::standardized_response(DoseFamily::kLogistic, {40.0, 5.0}, 0.0, 40.0) == 0.5);
  CHECK_THROWS_AS(wss::standardized_response(DoseFamily::kBeta, {1.0, 1.0}, 120.0, 121.0),
                  wss::Error);
  CHECK_THROWS_AS(wss::standardized_response(DoseFamily::kEmax, {-1.0}, 0.0, 1.0), wss::Error);
}

TEST_CASE("beta shape peaks at one") {
  const double d1 = 0.749, d2 = 1.049, scal = 120.0;
  double best = 0.0, arg = 0.0;
  for (int i = 0; i <= 120000; ++i) {
    const double x = i * 0.001;
    const double f = wss::standardized_response(DoseFamily::kBeta, {d1, d2}, scal, x);
    if (f > best) {
      best = f;
      arg = x;
    }
  }
  CHECK(best == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(arg == doctest::Approx(scal * d1 / (d1 + d2)).epsilon(1e-4));
  CHECK(arg == doctest::Approx(49.97).epsilon(1e-3));
}

TEST_CASE("guess constraints convert to model parameters") {
  const double e0 = wss::reference_placebo();
  const double effect = wss::kReferenceMaxEffect;
  CHECK(e0 == doctest::Approx(1.569).epsilon(1e-3));

  const auto em = wss::params_from_guesses(DoseFamily::kEmax, {{0.5, 50.0}}, e0, effect, 100.0);
  CHECK(em.nonlinear.at(0) == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(em.theta1 == doctest::Approx(2.079).epsilon(1e-3));

  const auto ex =
      wss::params_from_guesses(DoseFamily::kExponential, {{0.1, 50.0}}, e0, effect, 100.0);
  const double d = ex.nonlinear.at(0);
  CHECK(d == doctest::Approx(22.756).epsilon(1e-4));
  CHECK(std::abs(std::expm1(50.0 / d) / std::expm1(100.0 / d) - 0.1) <= 1e-6);
  CHECK(ex.theta1 == doctest::Approx(0.017).epsilon(0.02));

  const auto lin = wss::params_from_guesses(DoseFamily::kLinear, {}, e0, effect, 100.0);
  CHECK(lin.nonlinear.empty());
  CHECK(lin.theta1 == doctest::Approx(0.0139).epsilon(2e-3));

  const auto lg = wss::params_from_guesses(DoseFamily::kLogistic, {{0.1, 25.0}, {0.8, 50.0}},
                                           e0, effect, 100.0);
  CHECK(lg.nonlinear.at(0) == doctest::Approx(40.329).epsilon(1e-4));
  CHECK(lg.nonlinear.at(1) == doctest::Approx(6.976).epsilon(1e-3));
  CHECK(lg.theta1 == doctest::Approx(1.391).epsilon(1e-3));

  const auto bt = wss::params_from_guesses(DoseFamily::kBeta, {{1.0, 50.0}, {0.3, 5.0}}, e0,
                                           effect, 100.0, 120.0);
  CHECK(bt.scal == 120.0);
  const double mode = 120.0 * bt.nonlinear[0] / (bt.nonlinear[0] + bt.nonlinear[1]);
  CHECK(mode == doctest::Approx(50.0).epsilon(1e-8));
  CHECK(bt.standardized(5.0) == doctest::Approx(0.3).epsilon(1e-8));

  CHECK_THROWS_AS(wss::params_from_guesses(DoseFamily::kEmax, {}, e0, effect, 100.0),
                  wss::Error);
}

TEST_CASE("the reference curves reach the maximum effect over the dose range") {
  for (const auto& name : {"linear", "emax", "exponential", "logistic", "beta"}) {
    const auto m = wss::reference_model(name);
    CHECK(m.theta1 * wss::max_standardized_effect(m, 100.0) ==
          doctest::Approx(wss::kReferenceMaxEffect).epsilon(1e-9));
  }
  CHECK(wss::reference_model("constant").theta1 == 0.0);
}

TEST_CASE("two-dose optimal contrast") {
  const auto oc = wss::optimal_contrasts({(Vector(2) << 0.0, 1.0).finished()},
                                         Matrix::Identity(2, 2));
  CHECK(oc.contrasts(0, 0) == doctest::Approx(-std::sqrt(0.5)));
  CHECK(oc.contrasts(0, 1) == doctest::Approx(std::sqrt(0.5)));
  CHECK(oc.correlation(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("contrasts are zero-sum, unit-norm and scale invariant") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 3 + trial % 4;
    std::vector<Vector> mu;
    for (int m = 0; m < 4; ++m) mu.push_back(oracle::random_vector(gen, d));
    const Matrix s = oracle::random_spd(gen, d);
    const auto oc = wss::optimal_contrasts(mu, s);
    for (int m = 0; m < 4; ++m) {
      CHECK(std::abs(oc.contrasts.row(m).sum()) <= 1e-12);
      CHECK(oc.contrasts.row(m).norm() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(oc.correlation(m, m) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(oc.contrasts.row(m).dot(mu[static_cast<std::size_t>(m)]) > 0.0);
    }
    std::vector<Vector> shifted;
    for (const auto& v : mu) shifted.push_back((2.0 + 3.5 * v.array()).matrix());
    const auto oc2 = wss::optimal_contrasts(shifted, s);
    CHECK((oc.contrasts - oc2.contrasts).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("optimal contrasts beat random zero-sum contrasts") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 5;
    const Vector mu = oracle::random_vector(gen, d);
    const Matrix s = oracle::random_spd(gen, d);
    const auto oc = wss::optimal_contrasts({mu}, s);
    const double opt = oracle::noncentrality(oc.contrasts.row(0).transpose(), mu, s);
    const double best = oracle::best_random_noncentrality(gen, mu, s, 20000);
    CHECK(best <= opt * (1.0 + 1e-6));
  }
}

TEST_CASE("contrast errors") {
  Matrix singular = Matrix::Ones(3, 3);
  CHECK_THROWS_AS(wss::optimal_contrasts({Vector::LinSpaced(3, 0, 1)}, singular), wss::Error);
  CHECK_THROWS_AS(wss::optimal_contrasts({Vector::Constant(3, 2.0)}, Matrix::Identity(3, 3)),
                  wss::Error);
}

TEST_CASE("critical values of the maximum of correlated normals") {
  // Monte Carlo standard error of the 0.95 quantile from 1e5 draws is about 0.0067.
  const double one = sampler(1).critical_value(Matrix::Identity(1, 1), 0.05);
  CHECK(std::abs(one - 1.6449) <= 0.02);
  const double identical = sampler(5).critical_value(Matrix::Ones(5, 5), 0.05);
  CHECK(std::abs(identical - one) <= 0.02);
  const double independent = sampler(5).critical_value(Matrix::Identity(5, 5), 0.05);
  // P(max of 5 iid normals > c) = 0.05 gives c = Phi^{-1}(0.95^{1/5}) = 2.3187.
  CHECK(std::abs(independent - 2.3187) <= 0.02);
  CHECK(sampler(2).seed() == wss::MaxNormalSampler::kDefaultSeed);
  CHECK(sampler(2).draws() == wss::MaxNormalSampler::kDefaultDraws);
}

TEST_CASE("trend test statistics and their invariance to units") {
  const auto design = reference_design();
  std::vector<Vector> mu0;
  for (const auto& m : wss::reference_candidates()) mu0.push_back(m.evaluate_standardized(design.doses));
  const Matrix s = 0.04 * Matrix::Identity(5, 5);
  const auto oc = wss::optimal_contrasts(mu0, s);
  const Vector mu_hat = emax(1.5, 1.2, 50.0).evaluate(design.doses);
  const auto r = wss::mcp_step(mu_hat, s, oc, 0.05, sampler(5));
  for (int m = 0; m < 5; ++m) {
    const Vector c = oc.contrasts.row(m).transpose();
    CHECK(r.z_stats(m) == doctest::Approx(c.dot(mu_hat) / std::sqrt(c.dot(s * c))));
  }
  CHECK(r.signal == (r.z_stats.maxCoeff() > r.critical_value));
  CHECK(r.signal);
  for (int idx : r.models_significant) CHECK(r.z_stats(idx) > r.critical_value);

  const auto scaled = wss::mcp_step(7.0 * mu_hat, 49.0 * s, oc, 0.05, sampler(5));
  CHECK((scaled.z_stats - r.z_stats).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(scaled.signal == r.signal);
  CHECK(scaled.models_significant == r.models_significant);

  CHECK_THROWS_AS(wss::mcp_step(mu_hat, -s, oc, 0.05, sampler(5)), wss::Error);
}

TEST_CASE("GLS recovers an exact Emax curve") {
  const auto design = reference_design();
  const auto truth = emax(1.2, 2.0, 20.0);
  const Vector mu = truth.evaluate(design.doses);
  const auto fit = wss::gls_fit(DoseFamily::kEmax, mu, Matrix::Identity(5, 5), design,
                                emax(1.0, 1.0, 50.0));
  CHECK(fit.converged);
  CHECK(fit.gls_value <= 1e-8);
  CHECK(std::abs(fit.model.nonlinear[0] - 20.0) <= 1e-4);
  CHECK(std::abs(fit.model.theta0 - 1.2) <= 1e-4);
  CHECK(std::abs(fit.model.theta1 - 2.0) <= 1e-4);
  CHECK(fit.gaic == doctest::Approx(fit.gls_value + 6.0));
}

TEST_CASE("linear GLS solves the weighted normal equations") {
  std::mt19937_64 gen(5);
  const auto design = reference_design();
  for (int trial = 0; trial < 5; ++trial) {
    const Vector mu = oracle::random_vector(gen, 5);
    const Matrix s = oracle::random_spd(gen, 5);
    Matrix x(5, 2);
    x.col(0).setOnes();
    x.col(1) = design.doses;
    const Matrix s_inv = s.inverse();
    const Vector theta = (x.transpose() * s_inv * x).ldlt().solve(x.transpose() * s_inv * mu);
    DoseResponseModel start;
    const auto fit = wss::gls_fit(DoseFamily::kLinear, mu, s, design, start);
    CHECK(std::abs(fit.model.theta0 - theta(0)) <= 1e-8);
    CHECK(std::abs(fit.model.theta1 - theta(1)) <= 1e-8);
    CHECK(fit.gaic == doctest::Approx(fit.gls_value + 4.0));

    // With S = sigma^2 I the fit is ordinary least squares.
    const auto ols = wss::gls_fit(DoseFamily::kLinear, mu, 0.3 * Matrix::Identity(5, 5), design,
                                  start);
    const Vector beta = x.colPivHouseholderQr().solve(mu);
    CHECK(std::abs(ols.model.theta0 - beta(0)) <= 1e-8);
    CHECK(std::abs(ols.model.theta1 - beta(1)) <= 1e-8);
  }
}

TEST_CASE("GLS never ends above its starting value") {
  std::mt19937_64 gen(6);
  const auto design = reference_design();
  const auto candidates = wss::reference_candidates();
  for (int trial = 0; trial < 10; ++trial) {
    const Vector mu = wss::reference_model("emax").evaluate(design.doses) +
                      oracle::random_vector(gen, 5, 0.3);
    const Matrix s = 0.05 * oracle::random_spd(gen, 5, 1.0);
    const Matrix s_inv = s.inverse();
    for (const auto& start : candidates) {
      const auto fit = wss::gls_fit(start.family, mu, s, design, start);
      CHECK(fit.gls_value >= 0.0);
      CHECK(fit.gls_value <= wss::gls_criterion(start, mu, s_inv, design.doses) + 1e-12);
      const auto box = wss::default_parameter_box(start.family, design);
      for (std::size_t k = 0; k < fit.model.nonlinear.size(); ++k) {
        CHECK(fit.model.nonlinear[k] >= box.lower[k]);
        CHECK(fit.model.nonlinear[k] <= box.upper[k]);
      }
    }
  }
}

TEST_CASE("MED of the true curves") {
  const auto design = reference_design();
  const auto em = wss::estimate_med(wss::reference_model("emax"), kDelta, design);
  REQUIRE(em.reached());
  const auto ref = wss::reference_model("emax");
  CHECK(std::abs(*em.med - kDelta * 50.0 / (ref.theta1 - kDelta)) <= 1e-6);
  CHECK(std::abs(*em.med - 25.0) <= 0.005);
  CHECK_FALSE(em.clamped);

  const auto lg = wss::estimate_med(wss::reference_model("logistic"), kDelta, design);
  REQUIRE(lg.reached());
  CHECK(std::abs(*lg.med - 40.37) <= 0.05);
  const auto ex = wss::estimate_med(wss::reference_model("exponential"), kDelta, design);
  REQUIRE(ex.reached());
  CHECK(std::abs(*ex.med - 84.51) <= 0.5);
  const auto bt = wss::estimate_med(wss::reference_model("beta"), kDelta, design);
  REQUIRE(bt.reached());
  CHECK(std::abs(*bt.med - 10.61) <= 0.1);

  CHECK_FALSE(wss::estimate_med(emax(1.0, 0.5, 10.0), kDelta, design).reached());
  CHECK_FALSE(wss::estimate_med(wss::reference_model("constant"), kDelta, design).reached());
}

TEST_CASE("MED beyond the dose range is clamped") {
  const auto design = reference_design();
  // Effect at 100 is 0.6, reaching 0.693 only near 130.
  const auto m = emax(0.0, 1.2, 100.0);
  const auto r = wss::estimate_med(m, kDelta, design);
  REQUIRE(r.reached());
  CHECK(r.clamped);
  CHECK(*r.med == 100.0);
}

TEST_CASE("MED does not decrease with the threshold") {
  const auto design = reference_design();
  for (const auto& name : {"linear", "emax", "exponential", "logistic"}) {
    const auto m = wss::reference_model(name);
    double prev = 0.0;
    for (double delta = 0.05; delta < 1.35; delta += 0.05) {
      const auto r = wss::estimate_med(m, delta, design);
      if (!r.reached()) break;
      CHECK(*r.med >= prev);
      prev = *r.med;
    }
  }
  const auto beta = wss::reference_model("beta");
  double prev = 0.0;
  for (double delta = 0.05; delta < 1.35; delta += 0.05) {
    const auto r = wss::estimate_med(beta, delta, design);
    REQUIRE(r.reached());
    CHECK(*r.med <= 50.0 + 1e-6);
    CHECK(*r.med >= prev);
    prev = *r.med;
  }
}

TEST_CASE("model selection by gAIC") {
  wss::ModFit a, b;
  a.gaic = 10.0;
  b.gaic = 12.0;
  CHECK(wss::select_model({a}) == 0);
  CHECK(wss::select_model({a, b}) == 0);
  CHECK(wss::select_model({b, a}) == 1);
  CHECK(wss::select_model({a, a}) == 0);
  CHECK_THROWS_AS(wss::select_model({}), wss::Error);
}

TEST_CASE("dose design validation") {
  DoseDesign d;
  d.doses = (Vector(3) << 0.0, 10.0, 5.0).finished();
  CHECK_THROWS_AS(d.validate(), wss::Error);
  d.doses = (Vector(3) << 1.0, 5.0, 10.0).finished();
  CHECK_THROWS_AS(d.validate(), wss::Error);
  d.doses = (Vector(3) << 0.0, 5.0, 10.0).finished();
  CHECK_NOTHROW(d.validate());
  CHECK(d.min_positive_dose() == 5.0);
}

TEST_CASE("full pipeline on noiseless Emax cell means") {
  const auto design = reference_design();
  const Vector mu = wss::reference_model("emax").evaluate(design.doses);
  const Matrix s = 0.01 * Matrix::Identity(5, 5);
  const auto out = wss::run_mcpmod(mu, s, wss::reference_candidates(), design, 0.05, kDelta,
                                   sampler(5));
  CHECK(out.mcp.signal);
  REQUIRE(out.selected_family.has_value());
  CHECK(*out.selected_family == DoseFamily::kEmax);
  REQUIRE(out.med.reached());
  CHECK(std::abs(*out.med.med - 25.0) <= 1e-3);
}
