#include "wss/weibull.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "wss/error.hpp"

namespace wss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_exponent(double v, int* clamped) {
  if (v > kExponentClamp) {
    if (clamped) ++*clamped;
    return kExponentClamp;
  }
  if (v < -kExponentClamp) {
    if (clamped) ++*clamped;
    return -kExponentClamp;
  }
  return v;
}

}  // namespace

const char* to_string(CensoringKind kind) noexcept {
  switch (kind) {
    case CensoringKind::kTypeI: return "type-I";
    case CensoringKind::kTypeII: return "type-II";
    case CensoringKind::kHybrid: return "hybrid";
  }
  return "unknown";
}

CovariateDesign::CovariateDesign(Matrix x) : x_(std::move(x)) {
  if (x_.rows() == 0 || x_.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "design matrix is empty");
  }
  if (!x_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "design matrix has non-finite entries");
  }
  if (x_.rows() < x_.cols()) {
    throw Error(ErrorCode::kInvalidArgument,
                "design has p = " + std::to_string(x_.cols()) + " > n = " +
                    std::to_string(x_.rows()) + "; rank(X) = p is impossible");
  }
  if (column_rank(x_) < x_.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "design matrix is rank-deficient");
  }
}

CensoringScheme CensoringScheme::type_i(Vector censor_times) {
  CensoringScheme c;
  c.kind = CensoringKind::kTypeI;
  c.censor_times = std::move(censor_times);
  c.q = 1.0;
  return c;
}

CensoringScheme CensoringScheme::type_i(double common_time, Eigen::Index n) {
  return type_i(Vector::Constant(n, common_time));
}

CensoringScheme CensoringScheme::uncensored(Eigen::Index n) {
  return type_i(Vector::Constant(n, kInf));
}

CensoringScheme CensoringScheme::type_ii(Eigen::Index failures) {
  CensoringScheme c;
  c.kind = CensoringKind::kTypeII;
  c.failures = failures;
  c.q = 0.0;
  return c;
}

CensoringScheme CensoringScheme::hybrid(Vector censor_times, Eigen::Index failures,
                                        double q) {
  CensoringScheme c;
  c.kind = CensoringKind::kHybrid;
  c.censor_times = std::move(censor_times);
  c.failures = failures;
  c.q = q;
  return c;
}

void CensoringScheme::validate(Eigen::Index n) const {
  const bool needs_times = kind != CensoringKind::kTypeII;
  const bool needs_r = kind != CensoringKind::kTypeI;
  if (needs_times) {
    if (censor_times.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "censoring times: expected " + std::to_string(n) + " values, got " +
                      std::to_string(censor_times.size()));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(censor_times(i) > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "censoring times must be positive");
      }
    }
  }
  if (needs_r && (failures < 1 || failures > n)) {
    throw Error(ErrorCode::kInvalidArgument, "failure count r must satisfy 1 <= r <= n");
  }
  if (kind == CensoringKind::kTypeI && q != 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "type I censoring requires q = 1");
  }
  if (kind == CensoringKind::kTypeII && q != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "type II censoring requires q = 0");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mixing probability q must lie in [0, 1]");
  }
}

ModelSpec::ModelSpec(CovariateDesign d, double s, CensoringScheme c)
    : design(std::move(d)), sigma(s), censoring(std::move(c)) {
  validate();
}

void ModelSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "shape sigma must be positive and finite");
  }
  censoring.validate(design.n());
}

double CensoredSample::censored_fraction() const {
  if (delta.size() == 0) return 0.0;
  return 1.0 - delta.mean();
}

namespace detail {

void check_dimensions(const ModelSpec& spec, const Vector& beta) {
  if (beta.size() != spec.p()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "beta has " + std::to_string(beta.size()) + " entries, design has p = " +
                    std::to_string(spec.p()));
  }
}

void check_dimensions(const ModelSpec& spec, const Vector& beta,
                      const CensoredSample& sample) {
  check_dimensions(spec, beta);
  if (sample.y.size() != spec.n() || sample.delta.size() != spec.n()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "sample size does not match the design (n = " +
                    std::to_string(spec.n()) + ")");
  }
}

double log_likelihood_raw(const ModelSpec& spec, const Vector& beta,
                          const CensoredSample& sample) {
  const Vector mu = spec.design.x() * beta;
  const double log_sigma = std::log(spec.sigma);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double z = (sample.y(i) - mu(i)) / spec.sigma;
    ll += sample.delta(i) * (-log_sigma + z) - std::exp(z);
  }
  return ll;
}

}  // namespace detail

double log_likelihood(const ModelSpec& spec, const Vector& beta,
                      const CensoredSample& sample) {
  detail::check_dimensions(spec, beta, sample);
  const double ll = detail::log_likelihood_raw(spec, beta, sample);
  if (!std::isfinite(ll)) {
    throw Error(ErrorCode::kNonFinite, "non-finite log-likelihood");
  }
  return ll;
}

Vector score(const ModelSpec& spec, const Vector& beta, const CensoredSample& sample) {
  detail::check_dimensions(spec, beta, sample);
  const Matrix& x = spec.design.x();
  const Vector mu = x * beta;
  Vector resid(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    resid(i) = -sample.delta(i) + std::exp((sample.y(i) - mu(i)) / spec.sigma);
  }
  Vector u = x.transpose() * resid / spec.sigma;
  if (!u.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite score");
  }
  return u;
}

WeightSet weight_set(const ModelSpec& spec, const Vector& beta) {
  detail::check_dimensions(spec, beta);
  const auto& cens = spec.censoring;
  const double sigma = spec.sigma;
  const Eigen::Index n = spec.n();
  const Vector mu = spec.design.x() * beta;

  WeightSet ws;
  ws.w.setZero(n);
  ws.w_prime.setZero(n);
  ws.w_dprime.setZero(n);

  const double q = cens.q;
  const double type_ii_weight =
      cens.kind == CensoringKind::kTypeI
          ? 0.0
          : static_cast<double>(cens.failures) / static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double wi = 0.0, dwi = 0.0, d2wi = 0.0;
    if (q > 0.0) {
      const double l = cens.censor_times(i);
      if (std::isinf(l)) {
        wi = 1.0;
      } else {
        // a = L^{1/sigma} exp(-mu/sigma); w = 1 - exp(-a);
        // w' = -a e^{-a} / sigma; w'' = -a e^{-a} (a - 1) / sigma^2.
        const double log_a = clamp_exponent((std::log(l) - mu(i)) / sigma, &ws.clamped);
        const double a = std::exp(log_a);
        const double a_exp_neg_a = std::exp(log_a - a);
        wi = -std::expm1(-a);
        dwi = -a_exp_neg_a / sigma;
        d2wi = -a_exp_neg_a * (a - 1.0) / (sigma * sigma);
      }
    }
    ws.w(i) = q * wi + (1.0 - q) * type_ii_weight;
    ws.w_prime(i) = q * dwi;
    ws.w_dprime(i) = q * d2wi;
  }
  return ws;
}

Matrix fisher_information(const ModelSpec& spec, const WeightSet& weights) {
  const Matrix& x = spec.design.x();
  if (weights.w.size() != spec.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "weight vector does not match the design");
  }
  Matrix k = x.transpose() * weights.w.asDiagonal() * x;
  k /= spec.sigma * spec.sigma;
  k = symmetrize(k);
  if (!is_positive_definite(k)) {
    throw Error(ErrorCode::kSingularMatrix, "Fisher information is singular");
  }
  return k;
}

Matrix fisher_information(const ModelSpec& spec, const Vector& beta) {
  return fisher_information(spec, weight_set(spec, beta));
}

CensoredSample simulate_sample(const ModelSpec& spec, const Vector& beta,
                               RngStream& rng) {
  detail::check_dimensions(spec, beta);
  const Eigen::Index n = spec.n();
  const Vector mu = spec.design.x() * beta;
  const auto& cens = spec.censoring;

  // log T = mu + sigma * log(-log U), i.e. T = lambda (-log U)^sigma.
  Vector log_t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    log_t(i) = mu(i) + spec.sigma * std::log(-std::log(rng.uniform()));
  }

  Vector log_cut = Vector::Constant(n, kInf);
  if (cens.kind != CensoringKind::kTypeII) {
    log_cut = cens.censor_times.array().log();
  }
  if (cens.kind != CensoringKind::kTypeI) {
    std::vector<double> sorted(log_t.data(), log_t.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + (cens.failures - 1), sorted.end());
    const double rth = sorted[static_cast<std::size_t>(cens.failures - 1)];
    log_cut = log_cut.cwiseMin(rth);
  }

  CensoredSample s;
  s.y.resize(n);
  s.delta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool failed = log_t(i) <= log_cut(i);
    s.y(i) = failed ? log_t(i) : log_cut(i);
    s.delta(i) = failed ? 1.0 : 0.0;
  }
  return s;
}

double expected_censoring_rate(const Matrix& x, double sigma, const Vector& beta,
                               double censor_time) {
  if (std::isinf(censor_time)) return 0.0;
  const Vector mu = x * beta;
  const double log_l = std::log(censor_time);
  double total = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double log_a = clamp_exponent((log_l - mu(i)) / sigma, nullptr);
    total += std::exp(-std::exp(log_a));
  }
  return total / static_cast<double>(mu.size());
}

double calibrate_censoring(const Matrix& x, double sigma, const Vector& beta,
                           double target_rate) {
  if (!(target_rate >= 0.0 && target_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target censoring rate must lie in [0, 1)");
  }
  if (x.cols() != beta.size() || x.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "calibration design does not match beta");
  }
  if (target_rate == 0.0) return kInf;

  auto rate_at = [&](double log_l) {
    return expected_censoring_rate(x, sigma, beta, std::exp(log_l));
  };

  const Vector mu = x * beta;
  const double centre = mu.mean();
  double lo = centre - 1.0;
  double hi = centre + 1.0;
  double step = 1.0;
  // The rate decreases in log L.
  for (int k = 0; rate_at(lo) <= target_rate; ++k) {
    if (k > 60) throw Error(ErrorCode::kNoRoot, "cannot bracket censoring rate (low side)");
    step *= 2.0;
    lo -= step;
  }
  step = 1.0;
  for (int k = 0; rate_at(hi) >= target_rate; ++k) {
    if (k > 60) throw Error(ErrorCode::kNoRoot, "cannot bracket censoring rate (high side)");
    step *= 2.0;
    hi += step;
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = rate_at(mid);
    if (std::abs(r - target_rate) <= 1e-10) break;
    if (r > target_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(mid);
}

}  // namespace wss
