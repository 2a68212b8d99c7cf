#include "wss/wald.hpp"

#include <string>

#include "wss/chi_square.hpp"
#include "wss/error.hpp"

namespace wss {

const char* to_string(WaldVariant v) noexcept {
  switch (v) {
    case WaldVariant::kMle: return "MLE";
    case WaldVariant::kMle2: return "MLE2";
    case WaldVariant::kBce: return "BCE";
    case WaldVariant::kBce2: return "BCE2";
    case WaldVariant::kFirth: return "Firth";
  }
  return "unknown";
}

WaldVariant wald_variant(EstimatorKind kind, CovarianceChoice choice) {
  const bool second = choice == CovarianceChoice::kSecond;
  switch (kind) {
    case EstimatorKind::kMle: return second ? WaldVariant::kMle2 : WaldVariant::kMle;
    case EstimatorKind::kBce: return second ? WaldVariant::kBce2 : WaldVariant::kBce;
    case EstimatorKind::kFirth:
      if (second) {
        throw Error(ErrorCode::kInvalidArgument,
                    "no second-order covariance is defined for the Firth estimator");
      }
      return WaldVariant::kFirth;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown estimator kind");
}

ContrastSpec ContrastSpec::leading_subset(Eigen::Index p, const Vector& null1) {
  const Eigen::Index q = null1.size();
  if (q < 1 || q > p) {
    throw Error(ErrorCode::kInvalidArgument, "subset size q must satisfy 1 <= q <= p");
  }
  ContrastSpec cs;
  cs.c = Matrix::Zero(q, p);
  cs.c.leftCols(q).setIdentity();
  cs.beta0 = Vector::Zero(p);
  cs.beta0.head(q) = null1;
  return cs;
}

ContrastSpec ContrastSpec::full(const Vector& beta0) {
  ContrastSpec cs;
  cs.c = Matrix::Identity(beta0.size(), beta0.size());
  cs.beta0 = beta0;
  return cs;
}

void ContrastSpec::validate(Eigen::Index p) const {
  if (c.cols() != p || beta0.size() != p) {
    throw Error(ErrorCode::kDimensionMismatch,
                "contrast has " + std::to_string(c.cols()) + " columns and null of length " +
                    std::to_string(beta0.size()) + "; expected p = " + std::to_string(p));
  }
  if (c.rows() < 1 || c.rows() > p) {
    throw Error(ErrorCode::kInvalidArgument, "contrast must have 1 <= m <= p rows");
  }
  if (column_rank(c.transpose()) < c.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "contrast matrix must have full row rank");
  }
}

double wald_statistic(const Vector& beta, const Matrix& covariance,
                      const ContrastSpec& contrast) {
  contrast.validate(beta.size());
  if (covariance.rows() != beta.size() || covariance.cols() != beta.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance does not match beta");
  }
  const Vector diff = contrast.c * (beta - contrast.beta0);
  const Matrix middle = symmetrize(contrast.c * covariance * contrast.c.transpose());
  Eigen::LLT<Matrix> llt(middle);
  if (!is_positive_definite(middle)) {
    throw Error(ErrorCode::kTestUndefined, "C S C' is not positive definite");
  }
  return diff.dot(llt.solve(diff));
}

WaldResult wald_test(const FitResult& fit, CovarianceChoice choice,
                     const ContrastSpec& contrast) {
  WaldResult r;
  r.variant = wald_variant(fit.kind, choice);
  if (!fit.converged) {
    throw Error(ErrorCode::kTestUndefined, "fit did not converge");
  }
  const Matrix* cov = &fit.cov_first;
  if (choice == CovarianceChoice::kSecond) {
    if (!fit.cov_second) {
      throw Error(ErrorCode::kTestUndefined, "second-order covariance not available");
    }
    cov = &*fit.cov_second;
  }
  r.statistic = wald_statistic(fit.beta, *cov, contrast);
  r.df = static_cast<int>(contrast.m());
  r.p_value = ChiSquare(r.df).sf(r.statistic);
  return r;
}

PartitionedInformation partitioned_information(const ModelSpec& spec,
                                               const Vector& beta, Eigen::Index q) {
  const Eigen::Index p = spec.p();
  if (q < 1 || q >= p) {
    throw Error(ErrorCode::kInvalidArgument, "partition requires 1 <= q < p");
  }
  const WeightSet ws = weight_set(spec, beta);
  const Matrix k = fisher_information(spec, ws);
  const Matrix& x = spec.design.x();
  const Matrix x1 = x.leftCols(q);
  const Matrix x2 = x.rightCols(p - q);
  const auto w = ws.w.asDiagonal();

  PartitionedInformation out;
  out.k11 = k.topLeftCorner(q, q);
  out.k12 = k.topRightCorner(q, p - q);
  out.k22 = k.bottomRightCorner(p - q, p - q);

  const Matrix x2wx2 = x2.transpose() * w * x2;
  if (!is_positive_definite(x2wx2)) {
    throw Error(ErrorCode::kSingularMatrix, "X2' W X2 is singular");
  }
  const Matrix coef = x2wx2.llt().solve(x2.transpose() * w * x1);
  out.residual_columns = x1 - x2 * coef;
  out.k11_inverse_via_r = symmetrize(out.residual_columns.transpose() * w *
                                     out.residual_columns) /
                          (spec.sigma * spec.sigma);
  return out;
}

double wald_statistic_partitioned(const Vector& beta1_minus_null,
                                  const PartitionedInformation& parts) {
  if (beta1_minus_null.size() != parts.k11_inverse_via_r.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "subset vector does not match q");
  }
  return beta1_minus_null.dot(parts.k11_inverse_via_r * beta1_minus_null);
}

MatrixDistanceReport matrix_distances(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix distance: shape mismatch");
  }
  const Matrix d = a - b;
  MatrixDistanceReport r;
  r.d1 = d.rows() ? d.diagonal().cwiseAbs().maxCoeff() : 0.0;
  r.d2 = std::sqrt((d.transpose() * d).trace());
  r.d3 = d.cwiseAbs().sum();
  return r;
}

}  // namespace wss
