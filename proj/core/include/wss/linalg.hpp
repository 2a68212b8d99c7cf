#pragma once

#include <Eigen/Dense>

#include <optional>

namespace wss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Inverse of a symmetric positive definite matrix via LLT. Throws
// Error(kSingularMatrix) when the factorization fails or the matrix is
// numerically singular.
Matrix spd_inverse(const Matrix& a, const char* what = "matrix");

// Returns nullopt instead of throwing.
std::optional<Matrix> try_spd_inverse(const Matrix& a);

// Solves a x = b for symmetric positive definite a.
Vector spd_solve(const Matrix& a, const Vector& b, const char* what = "matrix");

bool is_positive_definite(const Matrix& a);

Matrix symmetrize(const Matrix& a);

// Numerical column rank with the QR default threshold.
Eigen::Index column_rank(const Matrix& x);

}  // namespace wss
