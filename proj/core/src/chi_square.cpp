#include "wss/chi_square.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>

#include "wss/error.hpp"

namespace wss {

ChiSquare::ChiSquare(double df) : df_(df) {
  if (!(df >= 1.0) || !std::isfinite(df)) {
    throw Error(ErrorCode::kInvalidArgument, "chi-square degrees of freedom must be >= 1");
  }
}

double ChiSquare::cdf(double x) const {
  if (std::isnan(x)) throw Error(ErrorCode::kInvalidArgument, "chi-square cdf of NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * df_, 0.5 * x);
}

double ChiSquare::sf(double x) const {
  if (std::isnan(x)) throw Error(ErrorCode::kInvalidArgument, "chi-square sf of NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df_, 0.5 * x);
}

double ChiSquare::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "chi-square quantile requires p in (0, 1)");
  }
  return 2.0 * boost::math::gamma_p_inv(0.5 * df_, p);
}

}  // namespace wss
