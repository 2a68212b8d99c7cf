#pragma once

// Monte Carlo engine for the two simulation studies: the regression study
// (bias, RMSE, covariance distances, Wald type I error and power) and the
// MCP-Mod operating-characteristics study.
//
// Replicate i draws from RngStream(seed, i) and its record is stored at
// position i, so reports do not depend on the number of workers.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wss/dose_response.hpp"
#include "wss/estimators.hpp"
#include "wss/mcpmod.hpp"
#include "wss/wald.hpp"

namespace wss {

// The five estimation strategies share their names with the Wald variants.
using Strategy = WaldVariant;

Strategy strategy_from_string(const std::string& name);
const std::vector<Strategy>& all_strategies();

// Runs body(i) for i in [0, count) on up to `workers` threads (0 means
// hardware concurrency). The body must only write to slot i of its output.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

struct ProportionSummary {
  int count = 0;
  int total = 0;
  double rate = 0.0;  // NaN when total == 0
  double se = 0.0;    // sqrt(rate (1 - rate) / total)
};

ProportionSummary summarize_proportion(int count, int total);

struct EstimateSummary {
  int count = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double se = 0.0;  // Monte Carlo standard error of the bias
};

// Throws Error(kInvalidArgument) for an empty sample.
EstimateSummary summarize_estimates(const std::vector<double>& estimates, double truth);

// ---------------------------------------------------------------------------
// Regression study

inline const std::vector<double>& reference_coefficients() {
  static const std::vector<double> beta = {-2.0, 1.5, -1.0, 2.5, -1.3, 1.8, -0.5};
  return beta;
}

struct RegressionScenario {
  int p = 3;
  int n = 20;
  double sigma = 1.0;
  double censor_rate = 0.25;
  int replicates = 2000;
  int q = 1;
  double alpha = 0.05;
  std::vector<double> psi = {0.05, 0.10, 0.25, 0.50};
  int calibration_rows = 50000;

  Vector beta_true() const;
  Vector alternative(double psi) const;  // (psi 1_q, 0_{p-q})
  void validate() const;
};

struct EstimatorRecord {
  bool converged = false;
  Vector beta;
  Matrix cov_first;
  std::optional<Matrix> cov_second;
};

// Rejection outcome of one Wald test: 1 reject, 0 accept, -1 unavailable
// (estimator not converged or the covariance block not positive definite).
using TestOutcome = signed char;

// The type I test uses data generated at beta_true and the null
// beta_1 = beta_true,1. Power cell k uses fresh data at the alternative
// (psi_k 1_q, 0_{p-q}) on the same covariates and the null beta_1 = 0.
struct RegressionRecord {
  EstimatorRecord mle, bce, firth;
  // [variant][k]: k = 0 is the type I test, k >= 1 follows the psi grid.
  std::vector<std::vector<TestOutcome>> tests;
};

struct EstimatorRow {
  EstimatorKind kind = EstimatorKind::kMle;
  ProportionSummary convergence;
  std::vector<EstimateSummary> coefficients;
};

struct DistanceRow {
  EstimatorKind at = EstimatorKind::kMle;
  MatrixDistanceReport vs_first;   // empirical vs mean K^{-1}
  MatrixDistanceReport vs_second;  // empirical vs mean Cov2
  int replicates = 0;
};

struct RejectionRow {
  WaldVariant variant = WaldVariant::kMle;
  bool power = false;  // false: the type I cell
  double psi = 0.0;
  ProportionSummary rate;
};

struct RegressionReport {
  RegressionScenario scenario;
  std::uint64_t seed = 0;
  // Common censoring times: [0] at beta_true, then one per psi.
  std::vector<double> censor_times;
  bool error = false;
  std::string message;
  std::vector<EstimatorRow> estimators;
  std::vector<DistanceRow> distances;
  std::vector<RejectionRow> rejections;

  const RejectionRow* type_one(WaldVariant v) const;
  const RejectionRow* power(WaldVariant v, double psi) const;
  const EstimatorRow* estimator(EstimatorKind kind) const;
  const DistanceRow* distance(EstimatorKind at) const;
};

// Censoring times for beta_true followed by each power alternative.
std::vector<double> regression_censor_times(const RegressionScenario& scenario,
                                            std::uint64_t seed);

RegressionRecord simulate_regression_replicate(const RegressionScenario& scenario,
                                               const std::vector<double>& censor_times,
                                               std::uint64_t seed, int index);

RegressionReport summarize_regression(const RegressionScenario& scenario,
                                      const std::vector<RegressionRecord>& records);

RegressionReport run_regression_study(const RegressionScenario& scenario, std::uint64_t seed,
                                      int workers = 0);

// ---------------------------------------------------------------------------
// MCP-Mod study

inline constexpr double kReferenceMaxEffect = 1.3862943611198906;  // log 4

// Placebo log-time location for a median survival of 4 with sigma 0.5.
double reference_placebo(double sigma = 0.5);

// Reference dose-response curves built from guess constraints on doses
// (0, 5, 25, 50, 100). name is one of constant, linear, emax, exponential,
// logistic, beta. "constant" is a linear curve with zero slope.
DoseResponseModel reference_model(const std::string& name);
std::vector<DoseResponseModel> reference_candidates();
Vector reference_doses();

struct McpModScenario {
  std::string truth = "emax";
  Vector doses = reference_doses();
  int n_per_dose = 10;
  double sigma = 0.5;
  double censor_rate = 0.10;
  double delta = 0.6931471805599453;  // log 2
  double alpha = 0.05;
  int replicates = 500;
  std::vector<Strategy> strategies = all_strategies();
  std::vector<DoseResponseModel> candidates = reference_candidates();
  std::uint64_t sampler_seed = MaxNormalSampler::kDefaultSeed;
  int sampler_draws = MaxNormalSampler::kDefaultDraws;

  DoseResponseModel true_model() const { return reference_model(truth); }
  std::optional<DoseFamily> true_family() const;
  DoseDesign design() const;
  void validate() const;
};

struct StrategyOutcome {
  bool converged = false;
  bool signal = false;
  std::optional<DoseFamily> selected;
  std::optional<double> med;
  bool med_clamped = false;
};

struct McpModRecord {
  std::vector<StrategyOutcome> outcomes;  // aligned with scenario.strategies
};

struct OcRow {
  Strategy strategy = Strategy::kMle;
  ProportionSummary convergence;
  ProportionSummary signal;
  ProportionSummary selection;     // true family selected, given a signal
  ProportionSummary med_not_reached;  // given a signal
  EstimateSummary med;             // over signals with a reached MED
  bool med_available = false;
};

struct McpModReport {
  McpModScenario scenario;
  std::uint64_t seed = 0;
  double censor_time = 0.0;
  std::optional<double> true_med;
  bool error = false;
  std::string message;
  std::vector<OcRow> rows;

  const OcRow* row(Strategy s) const;
};

McpModRecord simulate_mcpmod_replicate(const McpModScenario& scenario, double censor_time,
                                       const MaxNormalSampler& sampler, std::uint64_t seed,
                                       int index);

McpModReport summarize_mcpmod(const McpModScenario& scenario,
                              const std::vector<McpModRecord>& records);

McpModReport run_mcpmod_study(const McpModScenario& scenario, std::uint64_t seed,
                              int workers = 0);

}  // namespace wss
