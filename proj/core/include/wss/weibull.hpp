#pragma once

// Censored Weibull regression on the log-time (extreme-value) scale with a
// known shape parameter. y_i = log t_i, mu_i = x_i' beta, and the standardized
// residual is z_i = (y_i - mu_i) / sigma.

#include <cstddef>
#include <limits>

#include "wss/linalg.hpp"
#include "wss/rng.hpp"

namespace wss {

class CovariateDesign {
 public:
  CovariateDesign() = default;
  // Throws Error(kInvalidArgument) when n < p, entries are non-finite, or
  // the columns are linearly dependent.
  explicit CovariateDesign(Matrix x);

  const Matrix& x() const noexcept { return x_; }
  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index p() const noexcept { return x_.cols(); }

 private:
  Matrix x_;
};

enum class CensoringKind { kTypeI, kTypeII, kHybrid };

const char* to_string(CensoringKind kind) noexcept;

struct CensoringScheme {
  CensoringKind kind = CensoringKind::kTypeI;
  // Censoring times L_i on the time scale; +inf means "never censored".
  // Empty for type II.
  Vector censor_times;
  // Failure count r for type II / hybrid; 0 when unused.
  Eigen::Index failures = 0;
  // Mixing probability; forced to 1 (type I) or 0 (type II).
  double q = 1.0;

  static CensoringScheme type_i(Vector censor_times);
  static CensoringScheme type_i(double common_time, Eigen::Index n);
  static CensoringScheme uncensored(Eigen::Index n);
  static CensoringScheme type_ii(Eigen::Index failures);
  static CensoringScheme hybrid(Vector censor_times, Eigen::Index failures, double q);

  void validate(Eigen::Index n) const;
};

struct ModelSpec {
  CovariateDesign design;
  double sigma = 1.0;
  CensoringScheme censoring;

  ModelSpec() = default;
  ModelSpec(CovariateDesign d, double s, CensoringScheme c);

  Eigen::Index n() const noexcept { return design.n(); }
  Eigen::Index p() const noexcept { return design.p(); }
  void validate() const;
};

struct CensoredSample {
  Vector y;      // log of min(T_i, L_i)
  Vector delta;  // 1 = observed failure, 0 = censored

  Eigen::Index size() const noexcept { return y.size(); }
  double censored_fraction() const;
};

// w, w' and w'' are derivatives with respect to mu_i.
struct WeightSet {
  Vector w;
  Vector w_prime;
  Vector w_dprime;
  // Number of observations whose exponent argument hit the +/-700 clamp.
  int clamped = 0;
};

inline constexpr double kExponentClamp = 700.0;

double log_likelihood(const ModelSpec& spec, const Vector& beta,
                      const CensoredSample& sample);

Vector score(const ModelSpec& spec, const Vector& beta, const CensoredSample& sample);

WeightSet weight_set(const ModelSpec& spec, const Vector& beta);

// K = sigma^-2 X' W X. Throws Error(kSingularMatrix) when not positive
// definite (e.g. zero weights leaving X'WX rank-deficient).
Matrix fisher_information(const ModelSpec& spec, const Vector& beta);
Matrix fisher_information(const ModelSpec& spec, const WeightSet& weights);

CensoredSample simulate_sample(const ModelSpec& spec, const Vector& beta,
                               RngStream& rng);

// Common type I censoring time L (time scale) such that the expected
// censored fraction (1/n) sum_i P(T_i > L) equals target_rate. Returns +inf
// for a zero target.
double calibrate_censoring(const Matrix& x, double sigma, const Vector& beta,
                           double target_rate);

// Expected censored fraction under a common type I time L.
double expected_censoring_rate(const Matrix& x, double sigma, const Vector& beta,
                               double censor_time);

namespace detail {
// Log-likelihood without the finiteness check; used by line searches.
double log_likelihood_raw(const ModelSpec& spec, const Vector& beta,
                          const CensoredSample& sample);
void check_dimensions(const ModelSpec& spec, const Vector& beta);
void check_dimensions(const ModelSpec& spec, const Vector& beta,
                      const CensoredSample& sample);
}  // namespace detail

}  // namespace wss
