#include "wss/mcpmod.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "wss/error.hpp"
#include "wss/rng.hpp"

namespace wss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix sqrt_psd(const Matrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(r);
  const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

Eigen::LLT<Matrix> checked_llt(const Matrix& s, const char* what) {
  if (!is_positive_definite(s)) {
    throw Error(ErrorCode::kSingularMatrix, std::string(what) + " is not positive definite");
  }
  return Eigen::LLT<Matrix>(s);
}

struct NelderMeadResult {
  std::vector<double> x;
  double value = kInf;
  bool converged = false;
};

// Nelder-Mead on a box; trial points are projected onto the box.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const std::vector<double>& lo,
                             const std::vector<double>& hi, double ftol, int max_evals) {
  const std::size_t k = x0.size();
  auto project = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < k; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  };
  std::vector<std::vector<double>> simplex(k + 1, project(x0));
  for (std::size_t i = 0; i < k; ++i) {
    const double span = hi[i] - lo[i];
    double step = 0.05 * span;
    if (simplex[i + 1][i] + step > hi[i]) step = -step;
    simplex[i + 1][i] += step;
  }
  std::vector<double> values(k + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };
  for (std::size_t i = 0; i <= k; ++i) values[i] = eval(simplex[i]);

  NelderMeadResult out;
  while (evals < max_evals) {
    std::vector<std::size_t> order(k + 1);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[k - 1];
    const double spread = values[worst] - values[best];
    double size = 0.0;
    for (std::size_t i = 0; i <= k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        size = std::max(size, std::abs(simplex[i][j] - simplex[best][j]));
    if (spread <= ftol * (std::abs(values[best]) + 1e-12) + 1e-14 && size < 1e-9) {
      out.converged = true;
      break;
    }

    std::vector<double> centroid(k, 0.0);
    for (std::size_t i = 0; i <= k; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < k; ++j) centroid[j] += simplex[i][j] / static_cast<double>(k);
    }
    auto along = [&](double t) {
      std::vector<double> x(k);
      for (std::size_t j = 0; j < k; ++j)
        x[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
      return project(x);
    };
    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < values[best]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = xr;
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, values[worst])) {
        simplex[worst] = xc;
        values[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= k; ++i) {
          if (i == best) continue;
          for (std::size_t j = 0; j < k; ++j)
            simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
          values[i] = eval(simplex[i]);
        }
      }
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  out.value = *it;
  out.x = simplex[static_cast<std::size_t>(it - values.begin())];
  return out;
}

}  // namespace

double DoseDesign::min_positive_dose() const {
  for (Eigen::Index i = 0; i < doses.size(); ++i)
    if (doses(i) > 0.0) return doses(i);
  throw Error(ErrorCode::kInvalidArgument, "dose design has no positive dose");
}

void DoseDesign::validate() const {
  if (doses.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "dose design needs placebo and at least one dose");
  }
  if (doses(0) != 0.0) throw Error(ErrorCode::kInvalidArgument, "first dose must be placebo (0)");
  for (Eigen::Index i = 1; i < doses.size(); ++i) {
    if (!(doses(i) > doses(i - 1))) {
      throw Error(ErrorCode::kInvalidArgument, "doses must be strictly increasing");
    }
  }
  if (!n_per_dose.empty()) {
    if (static_cast<Eigen::Index>(n_per_dose.size()) != doses.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "n_per_dose must have one entry per dose");
    }
    for (int n : n_per_dose)
      if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n_per_dose entries must be >= 1");
  }
}

Matrix contrast_correlation(const Matrix& contrasts, const Matrix& s) {
  const Matrix cov = contrasts * s * contrasts.transpose();
  const Vector sd = cov.diagonal().cwiseSqrt();
  Matrix corr = cov.array() / (sd * sd.transpose()).array();
  corr.diagonal().setOnes();
  return symmetrize(corr);
}

OptimalContrasts optimal_contrasts(const std::vector<Vector>& mu0, const Matrix& s) {
  if (mu0.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidate models");
  const Eigen::Index d = s.rows();
  if (s.cols() != d) throw Error(ErrorCode::kDimensionMismatch, "S must be square");
  auto llt = checked_llt(s, "S");
  const Vector ones = Vector::Ones(d);
  const Vector s_inv_one = llt.solve(ones);
  const double denom = ones.dot(s_inv_one);

  OptimalContrasts out;
  out.contrasts.resize(static_cast<Eigen::Index>(mu0.size()), d);
  for (std::size_t m = 0; m < mu0.size(); ++m) {
    const Vector& mu = mu0[m];
    if (mu.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "candidate mean vector does not match S");
    }
    const double centre = mu.dot(s_inv_one) / denom;
    Vector c = llt.solve(mu - centre * ones);
    const double norm = c.norm();
    if (!(norm > 1e-12 * (mu.cwiseAbs().maxCoeff() + 1.0))) {
      throw Error(ErrorCode::kInvalidArgument,
                  "candidate " + std::to_string(m) + " has a flat dose-response shape");
    }
    c /= norm;
    if (c.dot(mu) < 0.0) c = -c;
    out.contrasts.row(static_cast<Eigen::Index>(m)) = c.transpose();
  }
  out.correlation = contrast_correlation(out.contrasts, s);
  return out;
}

MaxNormalSampler::MaxNormalSampler(int dimension, int draws, std::uint64_t seed)
    : seed_(seed) {
  if (dimension < 1 || draws < 100) {
    throw Error(ErrorCode::kInvalidArgument, "sampler needs dimension >= 1 and >= 100 draws");
  }
  RngStream rng(seed, static_cast<std::uint64_t>(dimension));
  pool_.resize(draws, dimension);
  for (int i = 0; i < draws; ++i)
    for (int j = 0; j < dimension; ++j) pool_(i, j) = rng.normal();
}

double MaxNormalSampler::critical_value(const Matrix& correlation, double alpha) const {
  if (correlation.rows() != pool_.cols() || correlation.cols() != pool_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "correlation does not match sampler dimension");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  const Matrix a = sqrt_psd(correlation);
  const Matrix z = pool_ * a.transpose();
  std::vector<double> maxima(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) maxima[static_cast<std::size_t>(i)] = z.row(i).maxCoeff();
  const auto n = static_cast<double>(maxima.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n)) - 1;
  k = std::min(k, maxima.size() - 1);
  std::nth_element(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(k), maxima.end());
  return maxima[k];
}

McpResult mcp_step(const Vector& mu_hat, const Matrix& s_hat,
                   const OptimalContrasts& contrasts, double alpha,
                   const MaxNormalSampler& sampler) {
  const Matrix& c = contrasts.contrasts;
  if (mu_hat.size() != c.cols() || s_hat.rows() != c.cols() || s_hat.cols() != c.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "MCP step: dimensions do not match contrasts");
  }
  checked_llt(s_hat, "estimated covariance");
  McpResult r;
  r.z_stats.resize(c.rows());
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    const Vector cm = c.row(m).transpose();
    r.z_stats(m) = cm.dot(mu_hat) / std::sqrt(cm.dot(s_hat * cm));
  }
  r.critical_value = sampler.critical_value(contrast_correlation(c, s_hat), alpha);
  for (Eigen::Index m = 0; m < c.rows(); ++m)
    if (r.z_stats(m) > r.critical_value) r.models_significant.push_back(static_cast<int>(m));
  r.signal = !r.models_significant.empty();
  return r;
}

McpResult mcp_step(const Vector& mu_hat, const Matrix& s_hat,
                   const OptimalContrasts& contrasts, double alpha) {
  const MaxNormalSampler sampler(static_cast<int>(contrasts.contrasts.rows()));
  return mcp_step(mu_hat, s_hat, contrasts, alpha, sampler);
}

double gls_criterion(const DoseResponseModel& model, const Vector& mu_hat,
                     const Matrix& s_hat_inverse, const Vector& doses) {
  const Vector r = mu_hat - model.evaluate(doses);
  return r.dot(s_hat_inverse * r);
}

ParameterBox default_parameter_box(DoseFamily family, const DoseDesign& design) {
  const double dmax = design.max_dose();
  const double ed50_lo = 0.1 * design.min_positive_dose();
  const double ed50_hi = 10.0 * dmax;
  const double delta_lo = 0.05 * dmax;
  const double delta_hi = 20.0 * dmax;
  switch (family) {
    case DoseFamily::kLinear: return {};
    case DoseFamily::kEmax: return {{ed50_lo}, {ed50_hi}};
    case DoseFamily::kExponential: return {{delta_lo}, {delta_hi}};
    case DoseFamily::kLogistic: return {{ed50_lo, delta_lo}, {ed50_hi, delta_hi}};
    case DoseFamily::kBeta: return {{0.05, 0.05}, {20.0, 20.0}};
  }
  return {};
}

namespace {

// Best (theta0, theta1) for fixed nonlinear parameters.
struct Profiled {
  double value = kInf;
  DoseResponseModel model;
};

Profiled profile_linear(DoseResponseModel model, const Vector& mu_hat,
                        const Matrix& s_inv, const Vector& doses) {
  Profiled out;
  out.model = std::move(model);
  Vector g;
  try {
    g = out.model.evaluate_standardized(doses);
  } catch (const Error&) {
    return out;
  }
  if (!g.allFinite()) return out;
  Matrix f(doses.size(), 2);
  f.col(0).setOnes();
  f.col(1) = g;
  const Matrix ftsf = f.transpose() * s_inv * f;
  Eigen::LDLT<Matrix> ldlt(ftsf);
  if (ldlt.info() != Eigen::Success || std::abs(ldlt.vectorD().minCoeff()) <
                                           1e-12 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    return out;
  }
  const Vector theta = ldlt.solve(f.transpose() * s_inv * mu_hat);
  out.model.theta0 = theta(0);
  out.model.theta1 = theta(1);
  const Vector r = mu_hat - f * theta;
  out.value = r.dot(s_inv * r);
  if (!std::isfinite(out.value)) out.value = kInf;
  return out;
}

}  // namespace

ModFit gls_fit(DoseFamily family, const Vector& mu_hat, const Matrix& s_hat,
               const DoseDesign& design, const DoseResponseModel& start) {
  design.validate();
  if (start.family != family) {
    throw Error(ErrorCode::kInvalidArgument, "start model family does not match");
  }
  if (mu_hat.size() != design.doses.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cell estimates do not match the dose design");
  }
  const Matrix s_inv = spd_inverse(s_hat, "estimated covariance");
  const Vector& doses = design.doses;
  const int k = nonlinear_parameter_count(family);

  ModFit fit;
  fit.model = start;

  const ParameterBox box = k > 0 ? default_parameter_box(family, design) : ParameterBox{};
  auto with_params = [&](const std::vector<double>& log_params) {
    DoseResponseModel m = start;
    m.nonlinear.resize(log_params.size());
    for (std::size_t i = 0; i < log_params.size(); ++i)
      m.nonlinear[i] = std::clamp(std::exp(log_params[i]), box.lower[i], box.upper[i]);
    return m;
  };
  auto objective = [&](const std::vector<double>& log_params) {
    return profile_linear(with_params(log_params), mu_hat, s_inv, doses).value;
  };

  Profiled best = profile_linear(start, mu_hat, s_inv, doses);
  bool optimizer_ok = true;

  if (k > 0) {
    std::vector<double> lo(static_cast<std::size_t>(k)), hi(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      lo[static_cast<std::size_t>(i)] = std::log(box.lower[static_cast<std::size_t>(i)]);
      hi[static_cast<std::size_t>(i)] = std::log(box.upper[static_cast<std::size_t>(i)]);
    }

    if (k == 1) {
      constexpr int kGrid = 80;
      double best_t = lo[0];
      double best_v = kInf;
      int best_i = 0;
      for (int i = 0; i <= kGrid; ++i) {
        const double t = lo[0] + (hi[0] - lo[0]) * i / kGrid;
        const double v = objective({t});
        if (v < best_v) {
          best_v = v;
          best_t = t;
          best_i = i;
        }
      }
      const double h = (hi[0] - lo[0]) / kGrid;
      const double a = std::max(lo[0], best_t - h);
      const double b = std::min(hi[0], best_t + h);
      std::uintmax_t iters = 500;
      auto res = boost::math::tools::brent_find_minima(
          [&](double t) { return objective({t}); }, a, b, 40, iters);
      optimizer_ok = iters < 500 && std::isfinite(res.second);
      (void)best_i;
      const Profiled cand = profile_linear(with_params({res.first}), mu_hat, s_inv, doses);
      const Profiled grid = profile_linear(with_params({best_t}), mu_hat, s_inv, doses);
      if (grid.value < best.value) best = grid;
      if (cand.value < best.value) best = cand;
    } else {
      constexpr int kGrid = 24;
      std::vector<double> best_x = {lo[0], lo[1]};
      double best_v = kInf;
      for (int i = 0; i <= kGrid; ++i) {
        for (int j = 0; j <= kGrid; ++j) {
          const std::vector<double> x = {lo[0] + (hi[0] - lo[0]) * i / kGrid,
                                         lo[1] + (hi[1] - lo[1]) * j / kGrid};
          const double v = objective(x);
          if (v < best_v) {
            best_v = v;
            best_x = x;
          }
        }
      }
      // Start the simplex from the better of the grid optimum and the guess.
      std::vector<double> x0 = best_x;
      if (start.nonlinear.size() == 2) {
        std::vector<double> guess = {std::log(start.nonlinear[0]), std::log(start.nonlinear[1])};
        bool inside = true;
        for (int i = 0; i < 2; ++i)
          inside = inside && guess[static_cast<std::size_t>(i)] >= lo[static_cast<std::size_t>(i)] &&
                   guess[static_cast<std::size_t>(i)] <= hi[static_cast<std::size_t>(i)];
        if (inside && objective(guess) < best_v) x0 = guess;
      }
      const auto nm = nelder_mead(objective, x0, lo, hi, 1e-12, 4000);
      optimizer_ok = nm.converged && std::isfinite(nm.value);
      const Profiled cand = profile_linear(with_params(nm.x), mu_hat, s_inv, doses);
      if (cand.value < best.value) best = cand;
      const Profiled grid = profile_linear(with_params(best_x), mu_hat, s_inv, doses);
      if (grid.value < best.value) best = grid;
    }
  }

  if (!std::isfinite(best.value)) {
    fit.converged = false;
    fit.gls_value = kInf;
    fit.gaic = kInf;
    return fit;
  }
  // The start with its own linear parameters can only be worse than its
  // profiled version, so Psi(result) <= Psi(start) holds.
  fit.model = best.model;
  fit.gls_value = std::max(0.0, best.value);
  fit.gaic = fit.gls_value + 2.0 * parameter_count(family);
  fit.converged = optimizer_ok;
  return fit;
}

MedEstimate estimate_med(const DoseResponseModel& model, double delta,
                         const DoseDesign& design) {
  const double dmax = design.max_dose();
  const double base = model(0.0);
  auto gap = [&](double x) { return model(x) - base - delta; };

  auto first_crossing = [&](double from, double to, int points) -> std::optional<double> {
    double prev_x = from;
    double prev_g = gap(from);
    if (prev_g > 0.0 && from > 0.0) return from;
    for (int i = 1; i <= points; ++i) {
      const double x = from + (to - from) * i / points;
      const double g = gap(x);
      if (g > 0.0 || (g == 0.0 && prev_g < 0.0)) {
        double a = prev_x, b = x;
        while (b - a > 1e-9 * std::max(1.0, b)) {
          const double mid = 0.5 * (a + b);
          if (gap(mid) >= 0.0) {
            b = mid;
          } else {
            a = mid;
          }
        }
        return 0.5 * (a + b);
      }
      prev_x = x;
      prev_g = g;
    }
    return std::nullopt;
  };

  MedEstimate out;
  if (auto x = first_crossing(0.0, dmax, 1000)) {
    out.med = *x;
    return out;
  }
  // Beyond the dose range: report the closest dose when the curve gets there.
  double upper = 20.0 * dmax;
  if (model.family == DoseFamily::kBeta) upper = model.scal * (1.0 - 1e-9);
  if (upper > dmax && first_crossing(dmax, upper, 2000)) {
    out.med = dmax;
    out.clamped = true;
  }
  return out;
}

std::size_t select_model(const std::vector<ModFit>& fits) {
  if (fits.empty()) throw Error(ErrorCode::kInvalidArgument, "no fits to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i)
    if (fits[i].gaic < fits[best].gaic) best = i;
  return best;
}

McpModOutcome run_mcpmod(const Vector& mu_hat, const Matrix& s_hat,
                         const std::vector<DoseResponseModel>& candidates,
                         const DoseDesign& design, double alpha, double delta,
                         const MaxNormalSampler& sampler) {
  std::vector<Vector> mu0;
  mu0.reserve(candidates.size());
  for (const auto& c : candidates) mu0.push_back(c.evaluate_standardized(design.doses));
  const OptimalContrasts contrasts = optimal_contrasts(mu0, s_hat);

  McpModOutcome out;
  out.mcp = mcp_step(mu_hat, s_hat, contrasts, alpha, sampler);
  if (!out.mcp.signal) return out;

  std::vector<DoseFamily> families;
  for (int m : out.mcp.models_significant) {
    const auto& cand = candidates[static_cast<std::size_t>(m)];
    ModFit f = gls_fit(cand.family, mu_hat, s_hat, design, cand);
    out.gls_converged = out.gls_converged && f.converged;
    out.fits.push_back(std::move(f));
    families.push_back(cand.family);
  }
  out.selected = select_model(out.fits);
  out.selected_family = families[*out.selected];
  out.med = estimate_med(out.fits[*out.selected].model, delta, design);
  return out;
}

}  // namespace wss
