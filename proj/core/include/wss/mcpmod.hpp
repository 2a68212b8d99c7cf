#pragma once

// MCP-Mod: optimal contrasts, the multiplicity-adjusted trend test over a
// candidate set, generalized least squares fits of the candidate shapes to
// cell estimates, model selection and minimum effective dose estimation.

#include <cstdint>
#include <optional>
#include <vector>

#include "wss/dose_response.hpp"
#include "wss/linalg.hpp"

namespace wss {

struct DoseDesign {
  Vector doses;                 // x0 = 0 < x1 < ...
  std::vector<int> n_per_dose;  // empty or one entry per dose

  double max_dose() const { return doses(doses.size() - 1); }
  double min_positive_dose() const;
  void validate() const;
};

struct OptimalContrasts {
  Matrix contrasts;    // M x D, rows zero-sum with unit Euclidean norm
  Matrix correlation;  // M x M
};

// c_m proportional to S^{-1}(mu0_m - (mu0_m' S^{-1} 1 / 1' S^{-1} 1) 1),
// oriented so that c_m' mu0_m > 0.
OptimalContrasts optimal_contrasts(const std::vector<Vector>& mu0, const Matrix& s);

Matrix contrast_correlation(const Matrix& contrasts, const Matrix& s);

// Fixed pool of iid standard normal draws used to estimate the upper
// quantile of max(Z_1..Z_M), Z ~ N(0, R). Immutable after construction, so
// one sampler can serve concurrent callers.
class MaxNormalSampler {
 public:
  static constexpr std::uint64_t kDefaultSeed = 20240607;
  static constexpr int kDefaultDraws = 100000;

  MaxNormalSampler(int dimension, int draws = kDefaultDraws,
                   std::uint64_t seed = kDefaultSeed);

  int dimension() const noexcept { return static_cast<int>(pool_.cols()); }
  std::uint64_t seed() const noexcept { return seed_; }
  int draws() const noexcept { return static_cast<int>(pool_.rows()); }

  // Upper alpha quantile of the maximum; correlation may be singular.
  double critical_value(const Matrix& correlation, double alpha) const;

 private:
  Matrix pool_;  // draws x dimension
  std::uint64_t seed_;
};

struct McpResult {
  Vector z_stats;
  double critical_value = 0.0;
  bool signal = false;
  std::vector<int> models_significant;  // indices into the candidate list
};

// z_m = c_m' mu_hat / sqrt(c_m' S_hat c_m); signal when max z exceeds the
// critical value. Throws Error(kSingularMatrix) for non-PD S_hat.
McpResult mcp_step(const Vector& mu_hat, const Matrix& s_hat,
                   const OptimalContrasts& contrasts, double alpha,
                   const MaxNormalSampler& sampler);
McpResult mcp_step(const Vector& mu_hat, const Matrix& s_hat,
                   const OptimalContrasts& contrasts, double alpha);

struct ModFit {
  DoseResponseModel model;
  double gls_value = 0.0;  // Psi(theta_hat)
  double gaic = 0.0;       // Psi + 2 * parameter count
  bool converged = false;
};

// Psi(theta) = (mu_hat - f(x, theta))' S_hat^{-1} (mu_hat - f(x, theta)).
double gls_criterion(const DoseResponseModel& model, const Vector& mu_hat,
                     const Matrix& s_hat_inverse, const Vector& doses);

struct ParameterBox {
  std::vector<double> lower;
  std::vector<double> upper;
};

ParameterBox default_parameter_box(DoseFamily family, const DoseDesign& design);

// Profiles (theta0, theta1) in closed form and searches the nonlinear
// parameters inside a box; Psi(result) <= Psi(start).
ModFit gls_fit(DoseFamily family, const Vector& mu_hat, const Matrix& s_hat,
               const DoseDesign& design, const DoseResponseModel& start);

struct MedEstimate {
  std::optional<double> med;  // nullopt: the effect never attains delta
  bool clamped = false;       // root beyond the dose range, set to max dose

  bool reached() const noexcept { return med.has_value(); }
};

// Smallest dose in (0, max dose] with f(x) - f(0) = delta.
MedEstimate estimate_med(const DoseResponseModel& model, double delta,
                         const DoseDesign& design);

// Smallest gAIC; ties go to the earlier entry. Returns the index.
std::size_t select_model(const std::vector<ModFit>& fits);

struct McpModOutcome {
  McpResult mcp;
  std::vector<ModFit> fits;            // one per significant candidate
  std::optional<std::size_t> selected;  // index into fits
  std::optional<DoseFamily> selected_family;
  MedEstimate med;
  bool gls_converged = true;
};

// Full pipeline for one set of cell estimates: contrasts from the
// candidates' guess shapes and S_hat, the trend test, then GLS fits of the
// significant candidates, gAIC selection and the MED of the chosen fit.
McpModOutcome run_mcpmod(const Vector& mu_hat, const Matrix& s_hat,
                         const std::vector<DoseResponseModel>& candidates,
                         const DoseDesign& design, double alpha, double delta,
                         const MaxNormalSampler& sampler);

}  // namespace wss
