#pragma once

namespace wss {

// Chi-square distribution with df degrees of freedom. The CDF is the
// regularized lower incomplete gamma P(df/2, x/2).
class ChiSquare {
 public:
  explicit ChiSquare(double df);

  double df() const noexcept { return df_; }
  double cdf(double x) const;
  // Upper tail 1 - cdf(x), computed without cancellation.
  double sf(double x) const;
  // Inverse CDF; p must lie in (0, 1).
  double quantile(double p) const;

 private:
  double df_;
};

}  // namespace wss
