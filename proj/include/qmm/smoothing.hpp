#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qmm/problem.hpp"

namespace qmm {

/// Smoothing parameters around a ball center x̄.
///
/// epsilon_prime = epsilon / (2 ln N) and the default radius
/// r = epsilon / (2 L_f ln N) = epsilon_prime / L_f. Logarithms are natural.
/// `ball_param` is the constant c with r L_f <= c epsilon_prime and
/// lambda <= c L_f / r under which the exponentiated softmax is well behaved.
struct SmoothingContext {
  double epsilon = 0.0;
  double epsilon_prime = 0.0;
  double lambda = 0.0;
  Vector center;
  double radius = 0.0;
  double ball_param = 1.0;

  static SmoothingContext make(const FunctionFamily& family, double epsilon, double lambda,
                               Vector center) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (static_cast<std::size_t>(center.size()) != family.dim()) {
      throw std::invalid_argument("ball center dimension mismatch");
    }
    SmoothingContext ctx;
    ctx.epsilon = epsilon;
    ctx.epsilon_prime = epsilon / (2.0 * std::log(static_cast<double>(family.size())));
    ctx.lambda = lambda;
    ctx.center = std::move(center);
    ctx.radius = ctx.epsilon_prime / family.lipschitz();
    return ctx;
  }

  SmoothingContext recentered(Vector new_center, double new_lambda, double new_radius) const {
    SmoothingContext ctx = *this;
    ctx.center = std::move(new_center);
    ctx.lambda = new_lambda;
    ctx.radius = new_radius;
    return ctx;
  }

  /// c = r L_f / epsilon_prime, the ball parameter actually in force.
  double effective_ball_param(double lipschitz) const { return radius * lipschitz / epsilon_prime; }
};

/// Max-shifted log-sum-exp of v / scale, times scale.
inline double scaled_log_sum_exp(const Vector& v, double scale) {
  const double m = v.maxCoeff();
  double s = 0.0;
  for (const double x : v) s += std::exp((x - m) / scale);
  return m + scale * std::log(s);
}

inline double f_max(const FunctionFamily& family, const Vector& x, QueryLedger& ledger) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) best = std::max(best, evaluate(family, i, x, ledger));
  return best;
}

inline Vector metered_values(const FunctionFamily& family, const Vector& x, QueryLedger& ledger) {
  Vector v(static_cast<Eigen::Index>(family.size()));
  for (std::size_t i = 0; i < family.size(); ++i) v[static_cast<Eigen::Index>(i)] = evaluate(family, i, x, ledger);
  return v;
}

/// Softmax surrogate epsilon' log sum_i exp(f_i(x)/epsilon').
inline double f_smax(const FunctionFamily& family, const Vector& x, const SmoothingContext& ctx,
                     QueryLedger& ledger) {
  return scaled_log_sum_exp(metered_values(family, x, ledger), ctx.epsilon_prime);
}

/// f_smax plus lambda/2 ||x - x̄||^2.
inline double f_smax_reg(const FunctionFamily& family, const Vector& x, const SmoothingContext& ctx,
                         QueryLedger& ledger) {
  return f_smax(family, x, ctx, ledger) + 0.5 * ctx.lambda * (x - ctx.center).squaredNorm();
}

/// Exact softmax distribution at the center together with the values it was
/// computed from.
struct SoftmaxWeights {
  Vector probabilities;
  Vector center_values;
};

inline Vector softmax(const Vector& values, double scale) {
  const double m = values.maxCoeff();
  Vector p = ((values.array() - m) / scale).exp().matrix();
  return p / p.sum();
}

inline SoftmaxWeights softmax_weights(const FunctionFamily& family, const Vector& center,
                                      const SmoothingContext& ctx, QueryLedger& ledger) {
  SoftmaxWeights w;
  w.center_values = metered_values(family, center, ledger);
  w.probabilities = softmax(w.center_values, ctx.epsilon_prime);
  return w;
}

namespace detail {

inline void require_in_ball(const Vector& x, const SmoothingContext& ctx, double lipschitz,
                            const char* who) {
  const double tol = 1e-9 * std::max(1.0, ctx.radius);
  if ((x - ctx.center).norm() > ctx.radius + tol) {
    throw std::domain_error(std::string(who) + ": point lies outside the ball B_r(center)");
  }
  if (ctx.effective_ball_param(lipschitz) > ctx.ball_param * (1.0 + 1e-12)) {
    throw std::domain_error(std::string(who) + ": radius * L_f exceeds c * epsilon'");
  }
}

}  // namespace detail

/// Exponentiated softmax
///   Gamma(x) = sum_i p_i eps' exp((f_i^lambda(x) - f_i^lambda(x̄)) / eps')
/// with p the softmax at x̄ and f_i^lambda(x) = f_i(x) + lambda/2 ||x - x̄||^2.
/// Valid only on B_r(x̄). Charges N (values at x) given cached weights.
inline double gamma(const FunctionFamily& family, const Vector& x, const SmoothingContext& ctx,
                    const SoftmaxWeights& weights, QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma");
  const double reg = 0.5 * ctx.lambda * (x - ctx.center).squaredNorm();
  double total = 0.0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double delta = evaluate(family, i, x, ledger) + reg - weights.center_values[k];
    total += weights.probabilities[k] * std::exp(delta / ctx.epsilon_prime);
  }
  return ctx.epsilon_prime * total;
}

/// Uncached form: 2N value queries.
inline double gamma(const FunctionFamily& family, const Vector& x, const SmoothingContext& ctx,
                    QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma");
  return gamma(family, x, ctx, softmax_weights(family, ctx.center, ctx, ledger), ledger);
}

/// sum_i p_i exp(Delta_i / eps') grad f_i^lambda(x), where
/// grad f_i^lambda(x) = grad f_i(x) + lambda (x - x̄).
inline Vector gamma_gradient_exact(const FunctionFamily& family, const Vector& x,
                                   const SmoothingContext& ctx, const SoftmaxWeights& weights,
                                   QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma_gradient_exact");
  const Vector shift = x - ctx.center;
  const double reg = 0.5 * ctx.lambda * shift.squaredNorm();
  Vector g = Vector::Zero(x.size());
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double delta = evaluate(family, i, x, ledger) + reg - weights.center_values[k];
    const double w = weights.probabilities[k] * std::exp(delta / ctx.epsilon_prime);
    g += w * (subgradient_query(family, i, x, ledger) + ctx.lambda * shift);
  }
  return g;
}

/// Uncached form: 2N value + N gradient queries.
inline Vector gamma_gradient_exact(const FunctionFamily& family, const Vector& x,
                                   const SmoothingContext& ctx, QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma_gradient_exact");
  return gamma_gradient_exact(family, x, ctx, softmax_weights(family, ctx.center, ctx, ledger), ledger);
}

/// One-sample estimator exp((f_i^lambda(x) - f_i^lambda(x̄))/eps') grad f_i^lambda(x)
/// for i drawn from the softmax at x̄. Charges 2 values and 1 gradient.
inline Vector gamma_stochastic_gradient(const FunctionFamily& family, std::size_t i,
                                        const Vector& x, const SmoothingContext& ctx,
                                        QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma_stochastic_gradient");
  const Vector shift = x - ctx.center;
  const double at_x = evaluate(family, i, x, ledger) + 0.5 * ctx.lambda * shift.squaredNorm();
  const double at_center = evaluate(family, i, ctx.center, ledger);
  Vector g = subgradient_query(family, i, x, ledger);
  g += ctx.lambda * shift;
  g *= std::exp((at_x - at_center) / ctx.epsilon_prime);
  return g;
}

/// Same estimator with f_i(x̄) taken from a cache of center values. The center
/// query is still charged, so the ledger matches the uncached form.
inline Vector gamma_stochastic_gradient(const FunctionFamily& family, std::size_t i, const Vector& x,
                                        const SmoothingContext& ctx, double center_value, QueryLedger& ledger) {
  detail::require_in_ball(x, ctx, family.lipschitz(), "gamma_stochastic_gradient");
  const double at_x = evaluate(family, i, x, ledger) + 0.5 * ctx.lambda * (x - ctx.center).squaredNorm();
  ledger.record_value();
  Vector g = subgradient_query(family, i, x, ledger);
  g += ctx.lambda * (x - ctx.center);
  g *= std::exp((at_x - center_value) / ctx.epsilon_prime);
  return g;
}

/// Tight norm bound e^{c + c^2/2} (L_f + lambda r) on the one-sample estimator,
/// with c = r L_f / eps'.
inline double stochastic_gradient_bound(double lipschitz, const SmoothingContext& ctx) {
  const double c = ctx.effective_ball_param(lipschitz);
  return std::exp(c + 0.5 * c * c) * (lipschitz + ctx.lambda * ctx.radius);
}

/// Default G = e^2 (L_f + lambda r) used to size the first epoch domain.
inline double default_gradient_bound(double lipschitz, const SmoothingContext& ctx) {
  return std::exp(2.0) * (lipschitz + ctx.lambda * ctx.radius);
}

}  // namespace qmm
