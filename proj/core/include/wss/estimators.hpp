#pragma once

// Maximum likelihood, Cox-Snell bias-corrected and Firth estimators for the
// censored Weibull regression coefficients, together with first-order
// (inverse Fisher information) and second-order covariance matrices.

#include <optional>
#include <string>

#include "wss/linalg.hpp"
#include "wss/weibull.hpp"

namespace wss {

enum class EstimatorKind { kMle, kBce, kFirth };

const char* to_string(EstimatorKind kind) noexcept;

struct FitOptions {
  double tol = 1e-8;        // on the infinity norm of the (modified) score
  int max_iter = 50;
  int max_halvings = 20;
  double divergence_bound = 1e6;
  // A converged iterate must also have a Fisher step below this size; a
  // vanishing score with a non-vanishing step signals an estimate escaping
  // to infinity along a flat direction.
  double step_tol = 1e-6;
  std::optional<Vector> init;
  bool second_order = true;
};

struct FitDiagnostics {
  int step_halvings = 0;
  int clamped_weights = 0;
  int forced_steps = 0;  // Firth: steps accepted without merit decrease
  std::string reason;    // empty when converged
};

// (tau1, tau2) = (1, 1) selects the second-order covariance of the MLE,
// (0, -1) that of the bias-corrected estimator.
struct CovarianceTau {
  double tau1 = 1.0;
  double tau2 = 1.0;

  static constexpr CovarianceTau mle() { return {1.0, 1.0}; }
  static constexpr CovarianceTau bce() { return {0.0, -1.0}; }
};

struct FitResult {
  EstimatorKind kind = EstimatorKind::kMle;
  Vector beta;
  Matrix cov_first;                  // K^{-1} at beta
  std::optional<Matrix> cov_second;  // Cov2 at beta (MLE and BCE only)
  bool cov_second_pd = false;
  bool converged = false;
  int iterations = 0;
  double final_score_norm = 0.0;
  FitDiagnostics diagnostics;
};

struct DeltaSet {
  Matrix delta1;
  Matrix delta2;
  Matrix delta3;
  CovarianceTau tau;

  // -1/2 D1 + 1/4 D2 + tau2/2 D3
  Matrix combined() const;
};

// Least squares of y on X over the uncensored rows, falling back to all rows
// and then to zero when those are rank-deficient.
Vector initial_estimate(const ModelSpec& spec, const CensoredSample& sample);

FitResult fit_mle(const ModelSpec& spec, const CensoredSample& sample,
                  const FitOptions& options = {});

// O(1/n) bias B(beta) = -(1/(2 sigma^3)) P Z_d (W + 2 sigma W') 1 with
// P = K^{-1} X' and Z = X K^{-1} X'.
Vector cox_snell_bias(const ModelSpec& spec, const Vector& beta);
Vector cox_snell_bias(const ModelSpec& spec, const WeightSet& weights,
                      const Matrix& k_inverse);

// beta_tilde = beta_hat - B(beta_hat), with covariances re-evaluated at
// beta_tilde. Non-convergence of the MLE propagates.
FitResult bias_corrected_from(const ModelSpec& spec, const FitResult& mle,
                              const FitOptions& options = {});
FitResult fit_bce(const ModelSpec& spec, const CensoredSample& sample,
                  const FitOptions& options = {});

// Root of U*(beta) = U(beta) - K(beta) B(beta) by Fisher scoring.
FitResult fit_firth(const ModelSpec& spec, const CensoredSample& sample,
                    const FitOptions& options = {});
Vector firth_score(const ModelSpec& spec, const Vector& beta,
                   const CensoredSample& sample);

DeltaSet delta_set(const ModelSpec& spec, const Vector& beta, CovarianceTau tau);
DeltaSet delta_set(const ModelSpec& spec, const WeightSet& weights,
                   const Matrix& k_inverse, CovarianceTau tau);

// Cov2 = K^{-1} + K^{-1} (Delta + Delta') K^{-1}, symmetrized.
Matrix second_order_covariance(const ModelSpec& spec, const Vector& beta,
                               CovarianceTau tau);
Matrix second_order_covariance(const Matrix& k_inverse, const DeltaSet& deltas);

}  // namespace wss
