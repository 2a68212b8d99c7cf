#pragma once

#include <optional>

#include "wss/estimators.hpp"
#include "wss/linalg.hpp"
#include "wss/weibull.hpp"

namespace wss {

enum class WaldVariant { kMle, kMle2, kBce, kBce2, kFirth };
enum class CovarianceChoice { kFirst, kSecond };

const char* to_string(WaldVariant v) noexcept;

// Which estimator/covariance pair a variant uses.
WaldVariant wald_variant(EstimatorKind kind, CovarianceChoice choice);

// Tests C beta = C beta0.
struct ContrastSpec {
  Matrix c;      // m x p
  Vector beta0;  // p

  // C selects the first q coordinates; beta0 holds null1 there and zeros
  // elsewhere.
  static ContrastSpec leading_subset(Eigen::Index p, const Vector& null1);
  static ContrastSpec full(const Vector& beta0);

  Eigen::Index m() const noexcept { return c.rows(); }
  void validate(Eigen::Index p) const;
};

struct WaldResult {
  WaldVariant variant = WaldVariant::kMle;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;

  bool rejects(double alpha) const { return p_value < alpha; }
};

// W = (C b - C b0)' (C S C')^{-1} (C b - C b0), applied through a Cholesky
// solve. Throws Error(kTestUndefined) when C S C' is not positive definite.
double wald_statistic(const Vector& beta, const Matrix& covariance,
                      const ContrastSpec& contrast);

WaldResult wald_test(const FitResult& fit, CovarianceChoice choice,
                     const ContrastSpec& contrast);

struct PartitionedInformation {
  Matrix k11, k12, k22;
  // sigma^-2 R' W R with R = X1 - X2 C, C = (X2'WX2)^{-1} X2'WX1; equals
  // the inverse of the leading q x q block of K^{-1}.
  Matrix k11_inverse_via_r;
  Matrix residual_columns;  // R, n x q
};

PartitionedInformation partitioned_information(const ModelSpec& spec,
                                               const Vector& beta, Eigen::Index q);

// (b1 - b10)' {K^11}^{-1} (b1 - b10) for the leading q coordinates.
double wald_statistic_partitioned(const Vector& beta1_minus_null,
                                  const PartitionedInformation& parts);

struct MatrixDistanceReport {
  double d1 = 0.0;  // max |diag(A - B)|
  double d2 = 0.0;  // Frobenius norm of A - B
  double d3 = 0.0;  // sum of |a_ij - b_ij|
};

MatrixDistanceReport matrix_distances(const Matrix& a, const Matrix& b);

}  // namespace wss
