#include "wss/linalg.hpp"

#include <cmath>
#include <string>

#include "wss/error.hpp"

namespace wss {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kSingularMatrix: return "singular-matrix";
    case ErrorCode::kNoRoot: return "no-root";
    case ErrorCode::kTestUndefined: return "test-undefined";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

// LLT succeeds on some matrices that are singular to working precision;
// reject pivots that are tiny relative to the largest diagonal entry.
bool llt_ok(const Eigen::LLT<Matrix>& llt, const Matrix& a) {
  if (llt.info() != Eigen::Success) return false;
  const double scale = a.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;
  const auto l = llt.matrixL();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double d = l(i, i);
    if (!(d * d > 1e-14 * scale)) return false;
  }
  return true;
}

}  // namespace

std::optional<Matrix> try_spd_inverse(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) return std::nullopt;
  if (!a.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(a);
  if (!llt_ok(llt, a)) return std::nullopt;
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  return symmetrize(inv);
}

Matrix spd_inverse(const Matrix& a, const char* what) {
  auto inv = try_spd_inverse(a);
  if (!inv) {
    throw Error(ErrorCode::kSingularMatrix,
                std::string(what) + " is singular or not positive definite");
  }
  return *inv;
}

Vector spd_solve(const Matrix& a, const Vector& b, const char* what) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": dimension mismatch in solve");
  }
  Eigen::LLT<Matrix> llt(a);
  if (!a.allFinite() || !llt_ok(llt, a)) {
    throw Error(ErrorCode::kSingularMatrix,
                std::string(what) + " is singular or not positive definite");
  }
  return llt.solve(b);
}

bool is_positive_definite(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) return false;
  Eigen::LLT<Matrix> llt(a);
  return llt_ok(llt, a);
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Eigen::Index column_rank(const Matrix& x) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  return qr.rank();
}

}  // namespace wss
