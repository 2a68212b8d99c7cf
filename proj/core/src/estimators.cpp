#include "wss/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wss/error.hpp"

namespace wss {

const char* to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::kMle: return "MLE";
    case EstimatorKind::kBce: return "BCE";
    case EstimatorKind::kFirth: return "Firth";
  }
  return "unknown";
}

Matrix DeltaSet::combined() const {
  return -0.5 * delta1 + 0.25 * delta2 + 0.5 * tau.tau2 * delta3;
}

namespace {

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::optional<Vector> least_squares(const Matrix& x, const Vector& y) {
  if (x.rows() < x.cols()) return std::nullopt;
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) return std::nullopt;
  Vector b = qr.solve(y);
  if (!b.allFinite()) return std::nullopt;
  return b;
}

// Per-iteration quantities shared by the MLE and Firth updates.
struct ScoringState {
  WeightSet weights;
  Matrix k;
  Matrix k_inv;
};

// Inverse observed information sigma^-2 X' diag(exp(z)) X. The log-likelihood
// is concave in beta, so this is positive definite for a full-rank design and
// Newton steps converge quadratically where expected-information scoring is
// only linear.
std::optional<Matrix> observed_information_inverse(const ModelSpec& spec, const Vector& beta,
                                                   const CensoredSample& sample) {
  const Matrix& x = spec.design.x();
  const Vector mu = x * beta;
  Vector e(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double z = std::clamp((sample.y(i) - mu(i)) / spec.sigma, -kExponentClamp,
                                kExponentClamp);
    e(i) = std::exp(z);
  }
  const Matrix j = symmetrize(x.transpose() * e.asDiagonal() * x / (spec.sigma * spec.sigma));
  return try_spd_inverse(j);
}

std::optional<ScoringState> scoring_state(const ModelSpec& spec, const Vector& beta) {
  ScoringState st;
  st.weights = weight_set(spec, beta);
  const Matrix& x = spec.design.x();
  st.k = symmetrize(x.transpose() * st.weights.w.asDiagonal() * x /
                    (spec.sigma * spec.sigma));
  auto inv = try_spd_inverse(st.k);
  if (!inv) return std::nullopt;
  st.k_inv = std::move(*inv);
  return st;
}

void attach_covariances(const ModelSpec& spec, FitResult& fit, CovarianceTau tau,
                        bool second_order) {
  auto st = scoring_state(spec, fit.beta);
  if (!st) {
    fit.converged = false;
    fit.diagnostics.reason = "singular information";
    return;
  }
  fit.cov_first = st->k_inv;
  fit.diagnostics.clamped_weights += st->weights.clamped;
  if (second_order) {
    const DeltaSet d = delta_set(spec, st->weights, st->k_inv, tau);
    Matrix cov2 = second_order_covariance(st->k_inv, d);
    fit.cov_second_pd = is_positive_definite(cov2);
    fit.cov_second = std::move(cov2);
  }
}

// "divergent coefficient" when the scoring step stays large although the
// objective no longer improves: the estimate is running off along a flat
// direction (e.g. a cell with no observed failures).
std::string classify_failure(const Vector& beta, double last_step, double last_gain,
                             const FitOptions& o) {
  if (!beta.allFinite() || inf_norm(beta) > o.divergence_bound) {
    return "divergent coefficient";
  }
  if (last_step > 0.1 && last_gain < 1e-4) return "divergent coefficient";
  return "iteration limit reached";
}

}  // namespace

Vector initial_estimate(const ModelSpec& spec, const CensoredSample& sample) {
  const Matrix& x = spec.design.x();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < sample.delta.size(); ++i) {
    if (sample.delta(i) > 0.5) rows.push_back(i);
  }
  if (static_cast<Eigen::Index>(rows.size()) >= x.cols()) {
    Matrix xs(static_cast<Eigen::Index>(rows.size()), x.cols());
    Vector ys(xs.rows());
    for (Eigen::Index k = 0; k < xs.rows(); ++k) {
      xs.row(k) = x.row(rows[static_cast<std::size_t>(k)]);
      ys(k) = sample.y(rows[static_cast<std::size_t>(k)]);
    }
    if (auto b = least_squares(xs, ys)) return *b;
  }
  if (auto b = least_squares(x, sample.y)) return *b;
  return Vector::Zero(x.cols());
}

FitResult fit_mle(const ModelSpec& spec, const CensoredSample& sample,
                  const FitOptions& options) {
  detail::check_dimensions(spec, Vector::Zero(spec.p()), sample);
  FitResult fit;
  fit.kind = EstimatorKind::kMle;
  Vector beta = options.init ? *options.init : initial_estimate(spec, sample);
  detail::check_dimensions(spec, beta);

  double ll = detail::log_likelihood_raw(spec, beta, sample);
  double last_step = 0.0;
  double last_gain = 0.0;
  bool stalled = false;

  for (int iter = 0; iter <= options.max_iter; ++iter) {
    fit.iterations = iter;
    auto st = scoring_state(spec, beta);
    if (!st) {
      fit.beta = beta;
      fit.diagnostics.reason = iter > 0 && last_step > 0.1 ? "divergent coefficient"
                                                           : "singular information";
      return fit;
    }
    const Vector u = score(spec, beta, sample);
    const auto j_inv = observed_information_inverse(spec, beta, sample);
    const Vector step = j_inv ? Vector(*j_inv * u) : Vector(st->k_inv * u);
    fit.final_score_norm = inf_norm(u);
    last_step = inf_norm(step);
    if (fit.final_score_norm <= options.tol && last_step <= options.step_tol) {
      fit.converged = true;
      break;
    }
    if (iter == options.max_iter || stalled) break;

    double t = 1.0;
    bool accepted = false;
    Vector candidate;
    double ll_new = ll;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = beta + t * step;
      ll_new = detail::log_likelihood_raw(spec, candidate, sample);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        accepted = true;
        break;
      }
      ++fit.diagnostics.step_halvings;
      t *= 0.5;
    }
    if (!accepted) {
      // No ascent along the scoring direction at machine precision.
      stalled = true;
      last_gain = 0.0;
      continue;
    }
    last_gain = ll_new - ll;
    beta = candidate;
    ll = ll_new;
    if (inf_norm(beta) > options.divergence_bound) {
      fit.beta = beta;
      fit.diagnostics.reason = "divergent coefficient";
      return fit;
    }
  }

  fit.beta = beta;
  if (!fit.converged) {
    fit.diagnostics.reason = classify_failure(beta, last_step, last_gain, options);
    return fit;
  }
  attach_covariances(spec, fit, CovarianceTau::mle(), options.second_order);
  return fit;
}

Vector cox_snell_bias(const ModelSpec& spec, const WeightSet& weights,
                      const Matrix& k_inverse) {
  const Matrix& x = spec.design.x();
  const double sigma = spec.sigma;
  // z_ii = x_i' K^{-1} x_i
  const Vector zd = (x * k_inverse).cwiseProduct(x).rowwise().sum();
  const Vector c = weights.w + 2.0 * sigma * weights.w_prime;
  return -(1.0 / (2.0 * sigma * sigma * sigma)) *
         (k_inverse * (x.transpose() * zd.cwiseProduct(c)));
}

Vector cox_snell_bias(const ModelSpec& spec, const Vector& beta) {
  const WeightSet ws = weight_set(spec, beta);
  const Matrix k_inv = spd_inverse(fisher_information(spec, ws), "Fisher information");
  return cox_snell_bias(spec, ws, k_inv);
}

FitResult bias_corrected_from(const ModelSpec& spec, const FitResult& mle,
                              const FitOptions& options) {
  FitResult fit;
  fit.kind = EstimatorKind::kBce;
  fit.iterations = mle.iterations;
  fit.final_score_norm = mle.final_score_norm;
  fit.diagnostics = mle.diagnostics;
  fit.beta = mle.beta;
  if (!mle.converged) return fit;

  auto st = scoring_state(spec, mle.beta);
  if (!st) {
    fit.diagnostics.reason = "singular information";
    return fit;
  }
  fit.beta = mle.beta - cox_snell_bias(spec, st->weights, st->k_inv);
  fit.converged = true;
  attach_covariances(spec, fit, CovarianceTau::bce(), options.second_order);
  return fit;
}

FitResult fit_bce(const ModelSpec& spec, const CensoredSample& sample,
                  const FitOptions& options) {
  FitOptions o = options;
  o.second_order = false;
  return bias_corrected_from(spec, fit_mle(spec, sample, o), options);
}

Vector firth_score(const ModelSpec& spec, const Vector& beta,
                   const CensoredSample& sample) {
  const WeightSet ws = weight_set(spec, beta);
  const Matrix k = fisher_information(spec, ws);
  const Matrix k_inv = spd_inverse(k, "Fisher information");
  return score(spec, beta, sample) - k * cox_snell_bias(spec, ws, k_inv);
}

FitResult fit_firth(const ModelSpec& spec, const CensoredSample& sample,
                    const FitOptions& options) {
  detail::check_dimensions(spec, Vector::Zero(spec.p()), sample);
  FitResult fit;
  fit.kind = EstimatorKind::kFirth;
  Vector beta = options.init ? *options.init : initial_estimate(spec, sample);
  detail::check_dimensions(spec, beta);

  // Merit: U*' J^{-1} U*, the squared length of the step in the metric of
  // the observed information J.
  struct Eval {
    Vector modified_score;
    Vector step;
    double merit = 0.0;
  };
  auto evaluate = [&](const Vector& b) -> std::optional<Eval> {
    if (!b.allFinite()) return std::nullopt;
    auto st = scoring_state(spec, b);
    if (!st) return std::nullopt;
    const Vector mu = spec.design.x() * b;
    Vector resid(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      resid(i) = -sample.delta(i) + std::exp((sample.y(i) - mu(i)) / spec.sigma);
    }
    Eval e;
    const Vector u = spec.design.x().transpose() * resid / spec.sigma;
    e.modified_score = u - st->k * cox_snell_bias(spec, st->weights, st->k_inv);
    if (!e.modified_score.allFinite()) return std::nullopt;
    const auto j_inv = observed_information_inverse(spec, b, sample);
    e.step = j_inv ? Vector(*j_inv * e.modified_score) : Vector(st->k_inv * e.modified_score);
    e.merit = e.modified_score.dot(e.step);
    return e;
  };

  auto current = evaluate(beta);
  double last_step = 0.0;
  double last_gain = 0.0;
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    fit.iterations = iter;
    if (!current) {
      fit.beta = beta;
      fit.diagnostics.reason = iter > 0 && last_step > 0.1 ? "divergent coefficient"
                                                           : "singular information";
      return fit;
    }
    fit.final_score_norm = inf_norm(current->modified_score);
    last_step = inf_norm(current->step);
    if (fit.final_score_norm <= options.tol && last_step <= options.step_tol) {
      fit.converged = true;
      break;
    }
    if (iter == options.max_iter) break;

    double t = 1.0;
    std::optional<Eval> next;
    Vector candidate;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = beta + t * current->step;
      next = evaluate(candidate);
      if (next && next->merit < current->merit) break;
      ++fit.diagnostics.step_halvings;
      next.reset();
      t *= 0.5;
    }
    if (!next) {
      // The scoring direction need not be a descent direction for the merit
      // far from the root; take the full step and let the iteration cap
      // decide.
      ++fit.diagnostics.forced_steps;
      candidate = beta + current->step;
      next = evaluate(candidate);
    }
    last_gain = next ? current->merit - next->merit : 0.0;
    beta = candidate;
    current = std::move(next);
    if (inf_norm(beta) > options.divergence_bound) {
      fit.beta = beta;
      fit.diagnostics.reason = "divergent coefficient";
      return fit;
    }
  }

  fit.beta = beta;
  if (!fit.converged) {
    fit.diagnostics.reason = classify_failure(beta, last_step, std::abs(last_gain), options);
    return fit;
  }
  attach_covariances(spec, fit, CovarianceTau::mle(), false);
  return fit;
}

DeltaSet delta_set(const ModelSpec& spec, const WeightSet& weights,
                   const Matrix& k_inverse, CovarianceTau tau) {
  const Matrix& x = spec.design.x();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double s = spec.sigma;
  const double s2 = s * s;
  const Vector& w = weights.w;
  const Vector& w1 = weights.w_prime;
  const Vector& w2 = weights.w_dprime;

  const Matrix xm = x * k_inverse;                 // rows x_i' K^{-1}
  const Vector zd = xm.cwiseProduct(x).rowwise().sum();  // z_ii

  DeltaSet d;
  d.tau = tau;

  // Delta1 = sigma^-4 X' W* Z_d X
  const Vector w_star = (w.array() * (w.array() - 2.0) - 2.0 * s * w1.array() +
                         s * tau.tau1 * (w1.array() + 2.0 * s * w2.array()))
                            .matrix();
  d.delta1 = x.transpose() * w_star.cwiseProduct(zd).asDiagonal() * x / (s2 * s2);

  // Delta2 = -sigma^-6 X' [W Z2 W - 2 sigma W Z2 W' - 6 sigma^2 W' Z2 W'] X,
  // Z2 = Z o Z. With u_i = vec(x_i x_i'), z_ij^2 = u_i' (M (x) M) u_j, so
  // sum_ij g_i h_j z_ij^2 x_i x_j' = A_g' (M (x) M) A_h, A_g = sum_i g_i u_i x_i'.
  const Eigen::Index pp = p * p;
  Matrix kron(pp, pp);
  for (Eigen::Index l = 0; l < p; ++l)
    for (Eigen::Index k = 0; k < p; ++k)
      for (Eigen::Index nn = 0; nn < p; ++nn)
        for (Eigen::Index m = 0; m < p; ++m)
          kron(k + p * l, m + p * nn) = k_inverse(k, m) * k_inverse(l, nn);

  Matrix a_w = Matrix::Zero(pp, p);
  Matrix a_w1 = Matrix::Zero(pp, p);
  Vector u(pp);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index l = 0; l < p; ++l)
      for (Eigen::Index k = 0; k < p; ++k) u(k + p * l) = x(i, k) * x(i, l);
    a_w.noalias() += (w(i) * u) * x.row(i);
    a_w1.noalias() += (w1(i) * u) * x.row(i);
  }
  const Matrix kw = kron * a_w;
  const Matrix kw1 = kron * a_w1;
  const Matrix inner = a_w.transpose() * kw - 2.0 * s * a_w.transpose() * kw1 -
                       6.0 * s2 * a_w1.transpose() * kw1;
  d.delta2 = -inner / (s2 * s2 * s2);

  // Delta3 = sigma^-5 X' W' W** X with W**_i = sum_j z_ij (w_j + 2 sigma w'_j) z_jj.
  const Vector c = w + 2.0 * s * w1;
  const Vector v = x.transpose() * c.cwiseProduct(zd);
  const Vector w_star2 = xm * v;
  d.delta3 = x.transpose() * w1.cwiseProduct(w_star2).asDiagonal() * x / (s2 * s2 * s);
  return d;
}

DeltaSet delta_set(const ModelSpec& spec, const Vector& beta, CovarianceTau tau) {
  const WeightSet ws = weight_set(spec, beta);
  const Matrix k_inv = spd_inverse(fisher_information(spec, ws), "Fisher information");
  return delta_set(spec, ws, k_inv, tau);
}

Matrix second_order_covariance(const Matrix& k_inverse, const DeltaSet& deltas) {
  const Matrix delta = deltas.combined();
  const Matrix correction = k_inverse * (delta + delta.transpose()) * k_inverse;
  return symmetrize(k_inverse + correction);
}

Matrix second_order_covariance(const ModelSpec& spec, const Vector& beta,
                               CovarianceTau tau) {
  const WeightSet ws = weight_set(spec, beta);
  const Matrix k_inv = spd_inverse(fisher_information(spec, ws), "Fisher information");
  return second_order_covariance(k_inv, delta_set(spec, ws, k_inv, tau));
}

}  // namespace wss
