#pragma once

// Standardized dose-response shapes f(x, theta) = theta0 + theta1 f0(x, theta_nl).

#include <string>
#include <string_view>
#include <vector>

#include "wss/linalg.hpp"

namespace wss {

enum class DoseFamily { kLinear, kEmax, kExponential, kLogistic, kBeta };

const char* to_string(DoseFamily f) noexcept;
DoseFamily dose_family_from_string(std::string_view name);

// Number of parameters inside f0 (ED50, delta, ...).
int nonlinear_parameter_count(DoseFamily f) noexcept;
// theta0 + theta1 + nonlinear parameters.
int parameter_count(DoseFamily f) noexcept;

struct DoseResponseModel {
  DoseFamily family = DoseFamily::kLinear;
  double theta0 = 0.0;
  double theta1 = 1.0;
  // Emax: {ED50}; Exponential: {delta}; Logistic: {ED50, delta};
  // Beta: {delta1, delta2}; Linear: {}.
  std::vector<double> nonlinear;
  double scal = 0.0;  // Beta only; must exceed the maximum dose

  double standardized(double x) const;
  double operator()(double x) const { return theta0 + theta1 * standardized(x); }
  Vector evaluate(const Vector& doses) const;
  Vector evaluate_standardized(const Vector& doses) const;

  void validate() const;
};

// f0(x, theta_nl). Throws for invalid parameters or x > scal (Beta).
double standardized_response(DoseFamily family, const std::vector<double>& nonlinear,
                             double scal, double x);

// Beta normalizing constant (d1 + d2)^(d1 + d2) / (d1^d1 d2^d2), making the
// maximum of f0 on (0, scal) equal to one.
double beta_normalizer(double delta1, double delta2);

// "Percent p of the maximum effect is reached at dose x."
struct GuessConstraint {
  double percent = 0.5;  // in (0, 1]; 1 marks the dose of maximum effect (Beta)
  double dose = 0.0;
};

// Converts guess constraints into model parameters. Percentages refer to the
// asymptotic maximum of f0 (Emax, Logistic, Beta) or to f0 at the largest
// dose (Exponential, which has no asymptote). The linear parameters put the
// placebo response at e0 and the maximal change over [0, max dose] at
// max_effect. Throws Error(kNoRoot) when a constraint cannot be met.
DoseResponseModel params_from_guesses(DoseFamily family,
                                      const std::vector<GuessConstraint>& constraints,
                                      double e0, double max_effect, double max_dose,
                                      double scal = 0.0);

// Largest value of f0 - f0(0) over [0, max_dose].
double max_standardized_effect(const DoseResponseModel& model, double max_dose);

}  // namespace wss
