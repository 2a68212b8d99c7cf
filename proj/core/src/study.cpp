#include "wss/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "wss/error.hpp"
#include "wss/rng.hpp"
#include "wss/weibull.hpp"

namespace wss {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags kept apart from replicate indices.
constexpr std::uint64_t kCalibrationTag = 0xCA11B7A7E5EEDULL;

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  for (Strategy s : all_strategies())
    if (name == to_string(s)) return s;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + name + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = {Strategy::kMle, Strategy::kMle2, Strategy::kBce,
                                            Strategy::kBce2, Strategy::kFirth};
  return all;
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (count <= 0) return;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count && !failed.load(); i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

ProportionSummary summarize_proportion(int count, int total) {
  if (count < 0 || total < 0 || count > total) {
    throw Error(ErrorCode::kInvalidArgument, "proportion requires 0 <= count <= total");
  }
  ProportionSummary s;
  s.count = count;
  s.total = total;
  if (total == 0) {
    s.rate = kNaN;
    s.se = kNaN;
    return s;
  }
  s.rate = static_cast<double>(count) / total;
  s.se = std::sqrt(s.rate * (1.0 - s.rate) / total);
  return s;
}

EstimateSummary summarize_estimates(const std::vector<double>& estimates, double truth) {
  if (estimates.empty()) throw Error(ErrorCode::kInvalidArgument, "no estimates to summarize");
  const auto n = static_cast<double>(estimates.size());
  double mean = 0.0, mse = 0.0;
  for (double e : estimates) {
    mean += e / n;
    mse += (e - truth) * (e - truth) / n;
  }
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  EstimateSummary s;
  s.count = static_cast<int>(estimates.size());
  s.bias = mean - truth;
  s.rmse = std::sqrt(mse);
  s.se = estimates.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Regression study

Vector RegressionScenario::beta_true() const {
  Vector b(p);
  for (int j = 0; j < p; ++j) b(j) = reference_coefficients()[static_cast<std::size_t>(j)];
  return b;
}

Vector RegressionScenario::alternative(double psi) const {
  Vector b = Vector::Zero(p);
  b.head(q).setConstant(psi);
  return b;
}

void RegressionScenario::validate() const {
  if (p < 1 || p > 7) throw Error(ErrorCode::kInvalidArgument, "p must lie in 1..7");
  if (n < p) throw Error(ErrorCode::kInvalidArgument, "n must be at least p");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  if (!(censor_rate >= 0.0 && censor_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "censoring rate must lie in [0, 1)");
  }
  if (replicates < 0) throw Error(ErrorCode::kInvalidArgument, "replicates must be >= 0");
  if (q < 1 || q > p) throw Error(ErrorCode::kInvalidArgument, "q must satisfy 1 <= q <= p");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha in (0,1)");
  for (double v : psi)
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "psi must be finite");
  if (calibration_rows < 100) {
    throw Error(ErrorCode::kInvalidArgument, "calibration_rows must be >= 100");
  }
}

const RejectionRow* RegressionReport::type_one(WaldVariant v) const {
  for (const auto& r : rejections)
    if (r.variant == v && !r.power) return &r;
  return nullptr;
}

const RejectionRow* RegressionReport::power(WaldVariant v, double psi) const {
  for (const auto& r : rejections)
    if (r.variant == v && r.power && r.psi == psi) return &r;
  return nullptr;
}

const EstimatorRow* RegressionReport::estimator(EstimatorKind kind) const {
  for (const auto& r : estimators)
    if (r.kind == kind) return &r;
  return nullptr;
}

const DistanceRow* RegressionReport::distance(EstimatorKind at) const {
  for (const auto& r : distances)
    if (r.at == at) return &r;
  return nullptr;
}

namespace {

Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = rng.normal();
  return x;
}

EstimatorRecord to_record(const FitResult& fit) {
  EstimatorRecord r;
  r.converged = fit.converged;
  if (fit.converged) {
    r.beta = fit.beta;
    r.cov_first = fit.cov_first;
    r.cov_second = fit.cov_second;
  }
  return r;
}

TestOutcome run_test(const FitResult& fit, CovarianceChoice choice,
                     const ContrastSpec& contrast, double alpha) {
  if (!fit.converged) return -1;
  if (choice == CovarianceChoice::kSecond && !fit.cov_second) return -1;
  try {
    return wald_test(fit, choice, contrast).rejects(alpha) ? 1 : 0;
  } catch (const Error&) {
    return -1;
  }
}

struct Fits {
  FitResult mle, bce, firth;
};

Fits fit_all(const ModelSpec& spec, const CensoredSample& sample) {
  Fits f;
  try {
    f.mle = fit_mle(spec, sample);
  } catch (const Error&) {
    f.mle.converged = false;
  }
  try {
    f.bce = bias_corrected_from(spec, f.mle);
  } catch (const Error&) {
    f.bce.converged = false;
  }
  try {
    FitOptions opts;
    opts.second_order = false;
    if (f.mle.converged) opts.init = f.mle.beta;
    f.firth = fit_firth(spec, sample, opts);
  } catch (const Error&) {
    f.firth.converged = false;
  }
  return f;
}

void record_tests(RegressionRecord& rec, std::size_t cell, const Fits& f,
                  const ContrastSpec& contrast, double alpha) {
  rec.tests[0][cell] = run_test(f.mle, CovarianceChoice::kFirst, contrast, alpha);
  rec.tests[1][cell] = run_test(f.mle, CovarianceChoice::kSecond, contrast, alpha);
  rec.tests[2][cell] = run_test(f.bce, CovarianceChoice::kFirst, contrast, alpha);
  rec.tests[3][cell] = run_test(f.bce, CovarianceChoice::kSecond, contrast, alpha);
  rec.tests[4][cell] = run_test(f.firth, CovarianceChoice::kFirst, contrast, alpha);
}

}  // namespace

std::vector<double> regression_censor_times(const RegressionScenario& sc, std::uint64_t seed) {
  std::vector<double> times;
  if (sc.censor_rate == 0.0) {
    times.assign(1 + sc.psi.size(), std::numeric_limits<double>::infinity());
    return times;
  }
  RngStream rng = RngStream(seed).split(kCalibrationTag);
  const Matrix x = standard_normal_matrix(sc.calibration_rows, sc.p, rng);
  times.push_back(calibrate_censoring(x, sc.sigma, sc.beta_true(), sc.censor_rate));
  for (double psi : sc.psi)
    times.push_back(calibrate_censoring(x, sc.sigma, sc.alternative(psi), sc.censor_rate));
  return times;
}

RegressionRecord simulate_regression_replicate(const RegressionScenario& sc,
                                               const std::vector<double>& censor_times,
                                               std::uint64_t seed, int index) {
  if (censor_times.size() != 1 + sc.psi.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one censoring time per cell is required");
  }
  RngStream rng(seed, static_cast<std::uint64_t>(index));
  const Vector beta = sc.beta_true();
  const std::size_t variants = all_strategies().size();
  const std::size_t cells = 1 + sc.psi.size();

  RegressionRecord rec;
  rec.tests.assign(variants, std::vector<TestOutcome>(cells, -1));

  Matrix x;
  for (int attempt = 0;; ++attempt) {
    x = standard_normal_matrix(sc.n, sc.p, rng);
    if (column_rank(x) == sc.p) break;
    if (attempt >= 10) return rec;
  }
  const CovariateDesign design(x);

  const ModelSpec spec(design, sc.sigma, CensoringScheme::type_i(censor_times[0], sc.n));
  const Fits fits = fit_all(spec, simulate_sample(spec, beta, rng));
  rec.mle = to_record(fits.mle);
  rec.bce = to_record(fits.bce);
  rec.firth = to_record(fits.firth);
  record_tests(rec, 0, fits, ContrastSpec::leading_subset(sc.p, beta.head(sc.q)), sc.alpha);

  const ContrastSpec zero_null = ContrastSpec::leading_subset(sc.p, Vector::Zero(sc.q));
  for (std::size_t k = 1; k < cells; ++k) {
    RngStream cell_rng = rng.split(k);
    const ModelSpec alt(design, sc.sigma, CensoringScheme::type_i(censor_times[k], sc.n));
    const Fits f = fit_all(alt, simulate_sample(alt, sc.alternative(sc.psi[k - 1]), cell_rng));
    record_tests(rec, k, f, zero_null, sc.alpha);
  }
  return rec;
}

namespace {

EstimatorRow summarize_estimator(EstimatorKind kind, const Vector& truth,
                                 const std::vector<const EstimatorRecord*>& recs) {
  EstimatorRow row;
  row.kind = kind;
  int ok = 0;
  for (const auto* r : recs) ok += r->converged ? 1 : 0;
  row.convergence = summarize_proportion(ok, static_cast<int>(recs.size()));
  if (ok == 0) return row;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(ok));
    for (const auto* r : recs)
      if (r->converged) values.push_back(r->beta(j));
    row.coefficients.push_back(summarize_estimates(values, truth(j)));
  }
  return row;
}

std::optional<DistanceRow> summarize_distances(EstimatorKind at,
                                               const std::vector<const EstimatorRecord*>& recs) {
  std::vector<const EstimatorRecord*> used;
  for (const auto* r : recs)
    if (r->converged && r->cov_second) used.push_back(r);
  if (used.size() < 2) return std::nullopt;
  const Eigen::Index p = used.front()->beta.size();
  const auto m = static_cast<double>(used.size());
  Vector mean = Vector::Zero(p);
  Matrix mean_first = Matrix::Zero(p, p), mean_second = Matrix::Zero(p, p);
  for (const auto* r : used) {
    mean += r->beta / m;
    mean_first += r->cov_first / m;
    mean_second += *r->cov_second / m;
  }
  Matrix emp = Matrix::Zero(p, p);
  for (const auto* r : used) {
    const Vector d = r->beta - mean;
    emp += d * d.transpose() / (m - 1.0);
  }
  DistanceRow row;
  row.at = at;
  row.replicates = static_cast<int>(used.size());
  row.vs_first = matrix_distances(emp, mean_first);
  row.vs_second = matrix_distances(emp, mean_second);
  return row;
}

}  // namespace

RegressionReport summarize_regression(const RegressionScenario& sc,
                                      const std::vector<RegressionRecord>& records) {
  RegressionReport report;
  report.scenario = sc;
  if (records.empty()) {
    report.error = true;
    report.message = "no replicates";
    return report;
  }
  const Vector truth = sc.beta_true();
  std::vector<const EstimatorRecord*> mle, bce, firth;
  for (const auto& r : records) {
    mle.push_back(&r.mle);
    bce.push_back(&r.bce);
    firth.push_back(&r.firth);
  }
  report.estimators.push_back(summarize_estimator(EstimatorKind::kMle, truth, mle));
  report.estimators.push_back(summarize_estimator(EstimatorKind::kBce, truth, bce));
  report.estimators.push_back(summarize_estimator(EstimatorKind::kFirth, truth, firth));
  if (auto d = summarize_distances(EstimatorKind::kMle, mle)) report.distances.push_back(*d);
  if (auto d = summarize_distances(EstimatorKind::kBce, bce)) report.distances.push_back(*d);

  const auto& variants = all_strategies();
  const std::size_t cells = 1 + sc.psi.size();
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t k = 0; k < cells; ++k) {
      int rejects = 0, valid = 0;
      for (const auto& r : records) {
        const TestOutcome t = r.tests[v][k];
        if (t < 0) continue;
        ++valid;
        rejects += t;
      }
      RejectionRow row;
      row.variant = variants[v];
      row.power = k > 0;
      row.psi = k == 0 ? 0.0 : sc.psi[k - 1];
      row.rate = summarize_proportion(rejects, valid);
      report.rejections.push_back(row);
    }
  }
  return report;
}

RegressionReport run_regression_study(const RegressionScenario& sc, std::uint64_t seed,
                                      int workers) {
  sc.validate();
  const std::vector<double> censor_times = regression_censor_times(sc, seed);
  std::vector<RegressionRecord> records(static_cast<std::size_t>(sc.replicates));
  parallel_for(sc.replicates, workers, [&](int i) {
    records[static_cast<std::size_t>(i)] =
        simulate_regression_replicate(sc, censor_times, seed, i);
  });
  RegressionReport report = summarize_regression(sc, records);
  report.seed = seed;
  report.censor_times = censor_times;
  return report;
}

// ---------------------------------------------------------------------------
// MCP-Mod study

double reference_placebo(double sigma) {
  // Median of log T is mu + sigma log(log 2); a median survival of 4.
  return std::log(4.0) - sigma * std::log(std::log(2.0));
}

Vector reference_doses() {
  Vector d(5);
  d << 0.0, 5.0, 25.0, 50.0, 100.0;
  return d;
}

DoseResponseModel reference_model(const std::string& name) {
  const double e0 = reference_placebo();
  const double effect = kReferenceMaxEffect;
  const double dmax = 100.0;
  if (name == "constant") {
    DoseResponseModel m;
    m.family = DoseFamily::kLinear;
    m.theta0 = e0;
    m.theta1 = 0.0;
    return m;
  }
  const DoseFamily family = dose_family_from_string(name);
  switch (family) {
    case DoseFamily::kLinear: return params_from_guesses(family, {}, e0, effect, dmax);
    case DoseFamily::kEmax: return params_from_guesses(family, {{0.5, 50.0}}, e0, effect, dmax);
    case DoseFamily::kExponential:
      return params_from_guesses(family, {{0.1, 50.0}}, e0, effect, dmax);
    case DoseFamily::kLogistic:
      return params_from_guesses(family, {{0.1, 25.0}, {0.8, 50.0}}, e0, effect, dmax);
    case DoseFamily::kBeta:
      return params_from_guesses(family, {{1.0, 50.0}, {0.3, 5.0}}, e0, effect, dmax, 120.0);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown reference model '" + name + "'");
}

std::vector<DoseResponseModel> reference_candidates() {
  return {reference_model("linear"), reference_model("emax"), reference_model("exponential"),
          reference_model("logistic"), reference_model("beta")};
}

std::optional<DoseFamily> McpModScenario::true_family() const {
  if (truth == "constant") return std::nullopt;
  return dose_family_from_string(truth);
}

DoseDesign McpModScenario::design() const {
  DoseDesign d;
  d.doses = doses;
  d.n_per_dose.assign(static_cast<std::size_t>(doses.size()), n_per_dose);
  return d;
}

void McpModScenario::validate() const {
  design().validate();
  true_model().validate();
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  if (!(censor_rate >= 0.0 && censor_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "censoring rate must lie in [0, 1)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha in (0,1)");
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta must be positive");
  if (replicates < 0) throw Error(ErrorCode::kInvalidArgument, "replicates must be >= 0");
  if (strategies.empty()) throw Error(ErrorCode::kInvalidArgument, "no strategies");
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidate models");
  for (const auto& c : candidates) c.validate();
}

const OcRow* McpModReport::row(Strategy s) const {
  for (const auto& r : rows)
    if (r.strategy == s) return &r;
  return nullptr;
}

namespace {

Matrix anova_design(const Vector& doses, int n_per_dose) {
  const Eigen::Index d = doses.size();
  Matrix x = Matrix::Zero(d * n_per_dose, d);
  for (Eigen::Index k = 0; k < d; ++k)
    for (int i = 0; i < n_per_dose; ++i) x(k * n_per_dose + i, k) = 1.0;
  return x;
}

double mcpmod_censor_time(const McpModScenario& sc) {
  if (sc.censor_rate == 0.0) return std::numeric_limits<double>::infinity();
  const Eigen::Index d = sc.doses.size();
  return calibrate_censoring(Matrix::Identity(d, d), sc.sigma,
                             sc.true_model().evaluate(sc.doses), sc.censor_rate);
}

}  // namespace

McpModRecord simulate_mcpmod_replicate(const McpModScenario& sc, double censor_time,
                                       const MaxNormalSampler& sampler, std::uint64_t seed,
                                       int index) {
  RngStream rng(seed, static_cast<std::uint64_t>(index));
  const Matrix x = anova_design(sc.doses, sc.n_per_dose);
  const ModelSpec spec(CovariateDesign(x), sc.sigma,
                       CensoringScheme::type_i(censor_time, x.rows()));
  const Vector mu = sc.true_model().evaluate(sc.doses);
  const CensoredSample sample = simulate_sample(spec, mu, rng);
  const DoseDesign design = sc.design();

  McpModRecord rec;
  rec.outcomes.resize(sc.strategies.size());

  bool need_mle = false, need_bce = false, need_firth = false;
  for (Strategy s : sc.strategies) {
    need_mle = need_mle || s != Strategy::kFirth;
    need_bce = need_bce || s == Strategy::kBce || s == Strategy::kBce2;
    need_firth = need_firth || s == Strategy::kFirth;
  }
  FitResult mle, bce, firth;
  if (need_mle || need_firth) {
    try {
      mle = fit_mle(spec, sample);
    } catch (const Error&) {
      mle.converged = false;
    }
  }
  if (need_bce) {
    try {
      bce = bias_corrected_from(spec, mle);
    } catch (const Error&) {
      bce.converged = false;
    }
  }
  if (need_firth) {
    try {
      FitOptions opts;
      opts.second_order = false;
      if (mle.converged) opts.init = mle.beta;
      firth = fit_firth(spec, sample, opts);
    } catch (const Error&) {
      firth.converged = false;
    }
  }

  for (std::size_t k = 0; k < sc.strategies.size(); ++k) {
    const Strategy s = sc.strategies[k];
    const FitResult& fit = s == Strategy::kMle || s == Strategy::kMle2   ? mle
                           : s == Strategy::kBce || s == Strategy::kBce2 ? bce
                                                                         : firth;
    const bool second = s == Strategy::kMle2 || s == Strategy::kBce2;
    StrategyOutcome& out = rec.outcomes[k];
    if (!fit.converged || (second && !fit.cov_second)) continue;
    const Matrix& s_hat = second ? *fit.cov_second : fit.cov_first;
    try {
      const McpModOutcome o =
          run_mcpmod(fit.beta, s_hat, sc.candidates, design, sc.alpha, sc.delta, sampler);
      out.converged = o.gls_converged;
      out.signal = o.mcp.signal;
      out.selected = o.selected_family;
      out.med = o.med.med;
      out.med_clamped = o.med.clamped;
    } catch (const Error&) {
      out = StrategyOutcome{};
    }
  }
  return rec;
}

McpModReport summarize_mcpmod(const McpModScenario& sc,
                              const std::vector<McpModRecord>& records) {
  McpModReport report;
  report.scenario = sc;
  report.true_med = estimate_med(sc.true_model(), sc.delta, sc.design()).med;
  if (records.empty()) {
    report.error = true;
    report.message = "no replicates";
    return report;
  }
  const auto truth_family = sc.true_family();
  for (std::size_t k = 0; k < sc.strategies.size(); ++k) {
    int converged = 0, signals = 0, selected = 0, not_reached = 0;
    std::vector<double> meds;
    for (const auto& r : records) {
      const StrategyOutcome& o = r.outcomes[k];
      if (!o.converged) continue;
      ++converged;
      if (!o.signal) continue;
      ++signals;
      if (truth_family && o.selected == truth_family) ++selected;
      if (o.med) {
        meds.push_back(*o.med);
      } else {
        ++not_reached;
      }
    }
    OcRow row;
    row.strategy = sc.strategies[k];
    row.convergence = summarize_proportion(converged, static_cast<int>(records.size()));
    row.signal = summarize_proportion(signals, converged);
    row.selection = truth_family ? summarize_proportion(selected, signals)
                                 : summarize_proportion(0, 0);
    row.med_not_reached = summarize_proportion(not_reached, signals);
    if (report.true_med && !meds.empty()) {
      row.med = summarize_estimates(meds, *report.true_med);
      row.med_available = true;
    }
    report.rows.push_back(row);
  }
  return report;
}

McpModReport run_mcpmod_study(const McpModScenario& sc, std::uint64_t seed, int workers) {
  sc.validate();
  const double censor_time = mcpmod_censor_time(sc);
  const MaxNormalSampler sampler(static_cast<int>(sc.candidates.size()), sc.sampler_draws,
                                 sc.sampler_seed);
  std::vector<McpModRecord> records(static_cast<std::size_t>(sc.replicates));
  parallel_for(sc.replicates, workers, [&](int i) {
    records[static_cast<std::size_t>(i)] =
        simulate_mcpmod_replicate(sc, censor_time, sampler, seed, i);
  });
  McpModReport report = summarize_mcpmod(sc, records);
  report.seed = seed;
  report.censor_time = censor_time;
  return report;
}

}  // namespace wss
