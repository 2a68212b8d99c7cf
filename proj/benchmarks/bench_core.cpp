#include <benchmark/benchmark.h>

#include "wss/estimators.hpp"
#include "wss/mcpmod.hpp"
#include "wss/rng.hpp"
#include "wss/study.hpp"

namespace {

struct Problem {
  wss::ModelSpec spec;
  wss::CensoredSample sample;
  wss::Vector beta;
};

Problem make_problem(int n, int p) {
  wss::RngStream rng(7);
  wss::Matrix x(n, p);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) x(i, j) = rng.normal();
  }
  wss::RegressionScenario sc;
  sc.p = p;
  const wss::Vector beta = sc.beta_true();
  const double l = wss::calibrate_censoring(x, 1.0, beta, 0.25);
  wss::ModelSpec spec(wss::CovariateDesign(x), 1.0, wss::CensoringScheme::type_i(l, n));
  auto sample = wss::simulate_sample(spec, beta, rng);
  return {spec, sample, beta};
}

void BM_FitMle(benchmark::State& state) {
  const Problem pr = make_problem(static_cast<int>(state.range(0)), 3);
  wss::FitOptions opts;
  opts.second_order = false;
  for (auto _ : state) benchmark::DoNotOptimize(wss::fit_mle(pr.spec, pr.sample, opts));
}
BENCHMARK(BM_FitMle)->Arg(20)->Arg(200)->Arg(2000);

void BM_FitFirth(benchmark::State& state) {
  const Problem pr = make_problem(static_cast<int>(state.range(0)), 3);
  wss::FitOptions opts;
  opts.second_order = false;
  for (auto _ : state) benchmark::DoNotOptimize(wss::fit_firth(pr.spec, pr.sample, opts));
}
BENCHMARK(BM_FitFirth)->Arg(20)->Arg(200);

void BM_SecondOrderCovariance(benchmark::State& state) {
  const Problem pr = make_problem(static_cast<int>(state.range(0)), 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        wss::second_order_covariance(pr.spec, pr.beta, wss::CovarianceTau::mle()));
}
BENCHMARK(BM_SecondOrderCovariance)->Arg(20)->Arg(100)->Arg(400);

void BM_McpStep(benchmark::State& state) {
  const wss::Vector doses = wss::reference_doses();
  std::vector<wss::Vector> mu0;
  for (const auto& m : wss::reference_candidates()) mu0.push_back(m.evaluate_standardized(doses));
  const wss::Matrix s = 0.025 * wss::Matrix::Identity(5, 5);
  const auto oc = wss::optimal_contrasts(mu0, s);
  const wss::MaxNormalSampler sampler(5);
  const wss::Vector mu_hat = wss::reference_model("emax").evaluate(doses);
  for (auto _ : state) benchmark::DoNotOptimize(wss::mcp_step(mu_hat, s, oc, 0.05, sampler));
}
BENCHMARK(BM_McpStep);

void BM_GlsFitEmax(benchmark::State& state) {
  wss::DoseDesign design;
  design.doses = wss::reference_doses();
  const auto start = wss::reference_model("emax");
  const wss::Vector mu_hat = wss::reference_model("logistic").evaluate(design.doses);
  const wss::Matrix s = 0.025 * wss::Matrix::Identity(5, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(wss::gls_fit(wss::DoseFamily::kEmax, mu_hat, s, design, start));
}
BENCHMARK(BM_GlsFitEmax);

}  // namespace

BENCHMARK_MAIN();
