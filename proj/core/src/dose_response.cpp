#include "wss/dose_response.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "wss/error.hpp"

namespace wss {

const char* to_string(DoseFamily f) noexcept {
  switch (f) {
    case DoseFamily::kLinear: return "linear";
    case DoseFamily::kEmax: return "emax";
    case DoseFamily::kExponential: return "exponential";
    case DoseFamily::kLogistic: return "logistic";
    case DoseFamily::kBeta: return "beta";
  }
  return "unknown";
}

DoseFamily dose_family_from_string(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "linear") return DoseFamily::kLinear;
  if (s == "emax") return DoseFamily::kEmax;
  if (s == "exponential" || s == "exp") return DoseFamily::kExponential;
  if (s == "logistic") return DoseFamily::kLogistic;
  if (s == "beta") return DoseFamily::kBeta;
  throw Error(ErrorCode::kInvalidArgument, "unknown dose-response family '" + s + "'");
}

int nonlinear_parameter_count(DoseFamily f) noexcept {
  switch (f) {
    case DoseFamily::kLinear: return 0;
    case DoseFamily::kEmax:
    case DoseFamily::kExponential: return 1;
    case DoseFamily::kLogistic:
    case DoseFamily::kBeta: return 2;
  }
  return 0;
}

int parameter_count(DoseFamily f) noexcept { return 2 + nonlinear_parameter_count(f); }

double beta_normalizer(double delta1, double delta2) {
  const double s = delta1 + delta2;
  return std::exp(s * std::log(s) - delta1 * std::log(delta1) - delta2 * std::log(delta2));
}

double standardized_response(DoseFamily family, const std::vector<double>& nl,
                             double scal, double x) {
  if (static_cast<int>(nl.size()) != nonlinear_parameter_count(family)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("wrong number of parameters for ") + to_string(family));
  }
  for (double v : nl) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(to_string(family)) + ": nonlinear parameters must be positive");
    }
  }
  if (x < 0.0) throw Error(ErrorCode::kInvalidArgument, "dose must be non-negative");
  switch (family) {
    case DoseFamily::kLinear:
      return x;
    case DoseFamily::kEmax:
      return x / (x + nl[0]);
    case DoseFamily::kExponential:
      return std::expm1(x / nl[0]);
    case DoseFamily::kLogistic:
      return 1.0 / (1.0 + std::exp((nl[0] - x) / nl[1]));
    case DoseFamily::kBeta: {
      if (x > scal) throw Error(ErrorCode::kInvalidArgument, "beta model: dose exceeds scal");
      const double u = x / scal;
      if (u <= 0.0 || u >= 1.0) return 0.0;
      return beta_normalizer(nl[0], nl[1]) * std::pow(u, nl[0]) * std::pow(1.0 - u, nl[1]);
    }
  }
  return 0.0;
}

double DoseResponseModel::standardized(double x) const {
  return standardized_response(family, nonlinear, scal, x);
}

Vector DoseResponseModel::evaluate(const Vector& doses) const {
  Vector out(doses.size());
  for (Eigen::Index i = 0; i < doses.size(); ++i) out(i) = (*this)(doses(i));
  return out;
}

Vector DoseResponseModel::evaluate_standardized(const Vector& doses) const {
  Vector out(doses.size());
  for (Eigen::Index i = 0; i < doses.size(); ++i) out(i) = standardized(doses(i));
  return out;
}

void DoseResponseModel::validate() const {
  if (static_cast<int>(nonlinear.size()) != nonlinear_parameter_count(family)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("wrong number of parameters for ") + to_string(family));
  }
  for (double v : nonlinear) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(to_string(family)) + ": nonlinear parameters must be positive");
    }
  }
  if (family == DoseFamily::kBeta && !(scal > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "beta model requires scal > 0");
  }
  if (!std::isfinite(theta0) || !std::isfinite(theta1)) {
    throw Error(ErrorCode::kInvalidArgument, "linear parameters must be finite");
  }
}

double max_standardized_effect(const DoseResponseModel& m, double max_dose) {
  const double base = m.standardized(0.0);
  double top = m.standardized(max_dose);
  if (m.family == DoseFamily::kBeta) {
    const double mode = m.scal * m.nonlinear[0] / (m.nonlinear[0] + m.nonlinear[1]);
    if (mode <= max_dose) top = m.standardized(mode);
  }
  return top - base;
}

namespace {

void require_count(DoseFamily family, std::size_t got) {
  if (static_cast<int>(got) != nonlinear_parameter_count(family)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(family)) + " needs " +
                    std::to_string(nonlinear_parameter_count(family)) +
                    " guess constraint(s), got " + std::to_string(got));
  }
}

void require_open_percent(const GuessConstraint& g) {
  if (!(g.percent > 0.0 && g.percent < 1.0) || !(g.dose > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "guess constraint needs 0 < percent < 1 at a positive dose");
  }
}

// Kullback-Leibler divergence between Bernoulli(m) and Bernoulli(u).
double bernoulli_kl(double m, double u) {
  return m * std::log(m / u) + (1.0 - m) * std::log((1.0 - m) / (1.0 - u));
}

std::vector<double> beta_from_guesses(const std::vector<GuessConstraint>& g, double scal) {
  const bool first_is_mode = g[0].percent == 1.0;
  const bool second_is_mode = g[1].percent == 1.0;
  if (first_is_mode || second_is_mode) {
    // Mode m*scal fixes delta1 / (delta1 + delta2) = m, and then
    // f0(x) = exp(-(delta1 + delta2) KL(m || x/scal)).
    const GuessConstraint& mode = first_is_mode ? g[0] : g[1];
    const GuessConstraint& other = first_is_mode ? g[1] : g[0];
    require_open_percent(other);
    const double m = mode.dose / scal;
    const double u = other.dose / scal;
    if (!(m > 0.0 && m < 1.0 && u > 0.0 && u < 1.0) || m == u) {
      throw Error(ErrorCode::kNoRoot, "beta guesses: doses must lie strictly inside (0, scal)");
    }
    const double total = -std::log(other.percent) / bernoulli_kl(m, u);
    return {m * total, (1.0 - m) * total};
  }

  // General case: damped Newton on log f0(x_k) = log p_k in (log d1, log d2).
  for (const auto& c : g) require_open_percent(c);
  auto residual = [&](const Eigen::Vector2d& t) {
    const double d1 = std::exp(t(0)), d2 = std::exp(t(1));
    Eigen::Vector2d r;
    for (int k = 0; k < 2; ++k) {
      const double u = g[static_cast<std::size_t>(k)].dose / scal;
      r(k) = std::log(beta_normalizer(d1, d2)) + d1 * std::log(u) +
             d2 * std::log(1.0 - u) - std::log(g[static_cast<std::size_t>(k)].percent);
    }
    return r;
  };
  Eigen::Vector2d t(0.0, 0.0);
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector2d r = residual(t);
    if (r.cwiseAbs().maxCoeff() < 1e-12) {
      return {std::exp(t(0)), std::exp(t(1))};
    }
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d tp = t;
      tp(j) += 1e-7;
      jac.col(j) = (residual(tp) - r) / 1e-7;
    }
    Eigen::Vector2d step = jac.fullPivLu().solve(-r);
    double lambda = 1.0;
    while (lambda > 1e-6 && residual(t + lambda * step).norm() >= r.norm()) lambda *= 0.5;
    t += lambda * step;
    t = t.cwiseMax(-10.0).cwiseMin(10.0);
  }
  throw Error(ErrorCode::kNoRoot, "beta guesses: no solution found");
}

}  // namespace

DoseResponseModel params_from_guesses(DoseFamily family,
                                      const std::vector<GuessConstraint>& g,
                                      double e0, double max_effect, double max_dose,
                                      double scal) {
  if (!(max_dose > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "maximum dose must be positive");
  }
  require_count(family, g.size());
  DoseResponseModel m;
  m.family = family;
  switch (family) {
    case DoseFamily::kLinear:
      break;
    case DoseFamily::kEmax: {
      require_open_percent(g[0]);
      // x / (x + ED50) = p
      m.nonlinear = {g[0].dose * (1.0 - g[0].percent) / g[0].percent};
      break;
    }
    case DoseFamily::kExponential: {
      require_open_percent(g[0]);
      const double ratio_target = g[0].percent;
      const double x = g[0].dose;
      // (e^{x/d} - 1) / (e^{D/d} - 1) increases from 0 to x/D as d grows.
      if (!(x < max_dose) || !(ratio_target < x / max_dose)) {
        throw Error(ErrorCode::kNoRoot,
                    "exponential guess: percent must be below dose / max dose");
      }
      auto f = [&](double log_d) {
        const double d = std::exp(log_d);
        // Ratio in a form that does not overflow for small d.
        const double r = std::exp((x - max_dose) / d) * std::expm1(-x / d) /
                         std::expm1(-max_dose / d);
        return r - ratio_target;
      };
      double lo = std::log(max_dose) - 12.0;
      double hi = std::log(max_dose) + 12.0;
      if (!(f(lo) < 0.0 && f(hi) > 0.0)) {
        throw Error(ErrorCode::kNoRoot, "exponential guess: root not bracketed");
      }
      std::uintmax_t iters = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(50);
      auto root = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi), tol, iters);
      m.nonlinear = {std::exp(0.5 * (root.first + root.second))};
      break;
    }
    case DoseFamily::kLogistic: {
      require_open_percent(g[0]);
      require_open_percent(g[1]);
      // (ED50 - x_k) / delta = log(1/p_k - 1)
      const double a1 = std::log(1.0 / g[0].percent - 1.0);
      const double a2 = std::log(1.0 / g[1].percent - 1.0);
      if (a1 == a2) throw Error(ErrorCode::kNoRoot, "logistic guesses are inconsistent");
      const double delta = (g[1].dose - g[0].dose) / (a1 - a2);
      if (!(delta > 0.0)) {
        throw Error(ErrorCode::kNoRoot, "logistic guesses imply a non-increasing curve");
      }
      m.nonlinear = {g[0].dose + delta * a1, delta};
      break;
    }
    case DoseFamily::kBeta: {
      if (!(scal > max_dose)) {
        throw Error(ErrorCode::kInvalidArgument, "beta model requires scal > max dose");
      }
      m.scal = scal;
      m.nonlinear = beta_from_guesses(g, scal);
      break;
    }
  }
  if (family == DoseFamily::kBeta) m.scal = scal;
  m.theta1 = 1.0;
  m.theta0 = 0.0;
  const double span = max_standardized_effect(m, max_dose);
  m.theta1 = max_effect / span;
  m.theta0 = e0 - m.theta1 * m.standardized(0.0);
  m.validate();
  return m;
}

}  // namespace wss
