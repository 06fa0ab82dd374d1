#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qmm/qsampler.hpp"

namespace qmm {

/// One ball-regularized optimization request: approximately minimize
/// F_smax(x) + lambda/2 ||x - x̄||^2 over B_r(x̄) to accuracy lambda delta^2 / 2.
struct BrooQuery {
  Vector center;
  double lambda = 0.0;
  double accuracy = 0.0;      // delta
  double failure_prob = 0.0;  // sigma
  double radius = 0.0;        // r_eps
};

/// Parameters of one Epoch-SGD epoch.
struct EpochState {
  std::size_t index = 1;
  std::uint64_t length = 0;  // T_k
  double step_size = 0.0;    // eta_k
  double domain_radius = 0.0;  // D_k
  Vector anchor;             // x_1^k
};

inline constexpr std::uint64_t kFirstEpochLength = 450;

/// Two readings of the BROO accuracy: lambda delta^2 / 2 (the oracle
/// definition) or lambda delta / 2 (the inner-loop analysis).
enum class ContractForm { definition, analysis };

inline double contract_tolerance(double lambda, double delta, ContractForm form = ContractForm::definition) {
  return form == ContractForm::definition ? 0.5 * lambda * delta * delta : 0.5 * lambda * delta;
}

/// ceil(c_iters L_f^2 lambda^-2 delta^-2 ln(ln(max(L_f/(lambda delta), e^2)) / sigma)).
inline std::uint64_t iteration_budget(double lambda, double delta, double sigma, double lipschitz,
                                      double c_iters = 1.0) {
  if (!(lambda > 0.0 && delta > 0.0 && lipschitz > 0.0)) {
    throw std::invalid_argument("iteration budget needs positive lambda, delta and L_f");
  }
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0, 1)");
  const double ratio = std::max(lipschitz / (lambda * delta), std::exp(2.0));
  const double log_term = std::log(std::log(ratio) / sigma);
  const double base = lipschitz * lipschitz / (lambda * lambda * delta * delta);
  const double t = std::ceil(c_iters * base * log_term);
  return static_cast<std::uint64_t>(std::max(1.0, t));
}

namespace detail {
inline Vector project_ball(const Vector& y, const Vector& c, double r) {
  const Vector off = y - c;
  const double n = off.norm();
  if (n <= r) return y;
  return c + (r / n) * off;
}
}  // namespace detail

/// Euclidean projection onto B_{r1}(c1) ∩ B_{r2}(c2) by Dykstra's alternating
/// projections. r2 may be +infinity. The result always lies in the first ball;
/// it lies in the second within `tol`.
inline Vector project_two_balls(const Vector& y, const Vector& c1, double r1, const Vector& c2,
                                double r2, double tol = 1e-10, int max_sweeps = 200) {
  if (!std::isfinite(r2)) return detail::project_ball(y, c1, r1);
  if ((y - c1).norm() <= r1 && (y - c2).norm() <= r2) return y;
  if ((c1 - c2).norm() > r1 + r2 + tol) {
    throw std::logic_error("project_two_balls: the balls do not intersect");
  }
  const Vector p1 = detail::project_ball(y, c1, r1);
  if ((p1 - c2).norm() <= r2) return p1;
  const Vector p2 = detail::project_ball(y, c2, r2);
  if ((p2 - c1).norm() <= r1) return p2;

  Vector x = y;
  Vector inc1 = Vector::Zero(y.size());
  Vector inc2 = Vector::Zero(y.size());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector a = detail::project_ball(x + inc1, c1, r1);
    inc1 = x + inc1 - a;
    const Vector b = detail::project_ball(a + inc2, c2, r2);
    inc2 = a + inc2 - b;
    const double change = (b - x).norm();
    x = b;
    if (change <= tol && (x - c1).norm() <= r1 + tol) break;
  }
  x = detail::project_ball(x, c1, r1);
  if ((x - c2).norm() > r2 + std::max(tol, 1e-8 * r2)) {
    throw std::logic_error("project_two_balls: intersection is numerically empty");
  }
  return x;
}

struct BrooOptions {
  bool record_epochs = false;
  SamplerOptions sampler;
  double gradient_bound = 0.0;  // G; 0 selects e^2 (L_f + lambda r)
};

struct BrooResult {
  Vector point;
  std::uint64_t budget = 0;      // script T
  std::uint64_t iterations = 0;  // SGD steps actually taken
  bool truncated = false;        // budget < T_1: single short epoch
  std::vector<EpochState> epochs;
  std::uint64_t sampling_charge = 0;
  double success_prob = 1.0;
  bool failure_injected = false;
  // Every iterate stayed in B_r(x̄) (checked each step).
  bool iterates_feasible = true;
};

namespace detail {

/// Epoch-SGD with projection on the exponentiated softmax, consuming
/// pre-drawn sample indices in order.
inline BrooResult run_epoch_sgd(const FunctionFamily& family, const BrooQuery& query,
                                const SmoothingContext& ctx, const std::vector<std::size_t>& samples,
                                std::uint64_t budget, QueryLedger& ledger, const BrooOptions& options) {
  BrooResult result;
  result.budget = budget;
  const double lambda = query.lambda;
  const double g_bound = options.gradient_bound > 0.0 ? options.gradient_bound
                                                      : default_gradient_bound(family.lipschitz(), ctx);
  const double log_term = std::log(std::max(std::log(static_cast<double>(std::max<std::uint64_t>(budget, 3))),
                                            1.0) / query.failure_prob);
  EpochState epoch;
  epoch.index = 1;
  epoch.length = std::min(kFirstEpochLength, budget);
  result.truncated = budget < kFirstEpochLength;
  epoch.step_size = 1.0 / (3.0 * lambda);
  epoch.domain_radius = ledger.constants().c_domain * g_bound * std::sqrt(std::max(log_term, 0.0)) / lambda;
  epoch.anchor = query.center;

  PhaseScope phase(ledger, Phase::gradient_estimation);
  const double feas_tol = 1e-9 * std::max(1.0, query.radius);
  std::uint64_t used = 0;
  std::size_t next_sample = 0;
  const Vector center_values = family.values(query.center);
  Vector x = epoch.anchor;
  while (used + epoch.length <= budget) {
    if (options.record_epochs) result.epochs.push_back(epoch);
    Vector sum = Vector::Zero(x.size());
    x = epoch.anchor;
    Vector step(x.size());
    for (std::uint64_t t = 0; t < epoch.length; ++t) {
      sum += x;
      const std::size_t i = samples[next_sample++];
      const Vector g = gamma_stochastic_gradient(family, i, x, ctx, center_values[static_cast<Eigen::Index>(i)], ledger);
      step.noalias() = x - epoch.step_size * g;
      if ((step - query.center).norm() <= query.radius && (step - epoch.anchor).norm() <= epoch.domain_radius) {
        x.swap(step);
      } else {
        x = project_two_balls(step, query.center, query.radius, epoch.anchor, epoch.domain_radius);
      }
      if ((x - query.center).norm() > query.radius + feas_tol) result.iterates_feasible = false;
    }
    used += epoch.length;
    EpochState next;
    next.index = epoch.index + 1;
    next.length = 2 * epoch.length;
    next.step_size = epoch.step_size / 2.0;
    next.domain_radius = epoch.domain_radius / std::sqrt(2.0);
    next.anchor = sum / static_cast<double>(epoch.length);
    epoch = std::move(next);
    if (result.truncated) break;
  }
  result.iterations = used;
  result.point = epoch.anchor;
  return result;
}

inline void validate_query(const FunctionFamily& family, const BrooQuery& query, const SmoothingContext& ctx) {
  if (!(query.lambda > 0.0)) throw std::invalid_argument("BROO needs lambda > 0");
  if (!(query.accuracy > 0.0)) throw std::invalid_argument("BROO needs delta > 0");
  if (!(query.radius > 0.0)) throw std::invalid_argument("BROO needs a positive radius");
  detail::require_failure_prob(query.failure_prob);
  if (query.lambda > ctx.ball_param * family.lipschitz() / query.radius * (1.0 + 1e-12)) {
    throw std::invalid_argument("BROO needs lambda <= c L_f / r");
  }
}

}  // namespace detail

/// Ball-regularized optimization oracle with quantum-emulated sampling.
///
/// Draws all script-T softmax samples up front at x̄ (charged by the quantum
/// formula with failure probability sigma), then runs Epoch-SGD with
/// T_1 = 450, eta_1 = 1/(3 lambda), D_1 = c_D G sqrt(ln(ln(T)/sigma)) / lambda.
/// Each step charges 2 value queries and one gradient query.
inline BrooResult broo_solve(const FunctionFamily& family, const BrooQuery& query,
                             const SmoothingContext& ctx, QueryLedger& ledger, Engine& rng,
                             const BrooOptions& options = {}, Engine* failure_rng = nullptr,
                             Engine* rounds_rng = nullptr) {
  detail::validate_query(family, query, ctx);
  const SmoothingContext local = ctx.recentered(query.center, query.lambda, query.radius);
  const auto budget = iteration_budget(query.lambda, query.accuracy, query.failure_prob,
                                       family.lipschitz(), ledger.constants().c_iters);
  auto batch = sample_batch(family, query.center, budget, query.failure_prob, local, ledger, rng,
                            options.sampler, failure_rng, rounds_rng);
  auto result = detail::run_epoch_sgd(family, query, local, batch.indices, budget, ledger, options);
  result.sampling_charge = batch.charged;
  result.success_prob = batch.success_prob;
  result.failure_injected = batch.failure_injected;
  return result;
}

/// Classical baseline: identical optimization path, but the sampling step
/// pays N value queries for the exact weights.
inline BrooResult classical_broo_solve(const FunctionFamily& family, const BrooQuery& query,
                                       const SmoothingContext& ctx, QueryLedger& ledger, Engine& rng,
                                       const BrooOptions& options = {}) {
  detail::validate_query(family, query, ctx);
  const SmoothingContext local = ctx.recentered(query.center, query.lambda, query.radius);
  const auto budget = iteration_budget(query.lambda, query.accuracy, query.failure_prob,
                                       family.lipschitz(), ledger.constants().c_iters);
  auto batch = classical_sample_batch(family, query.center, budget, local, ledger, rng);
  auto result = detail::run_epoch_sgd(family, query, local, batch.indices, budget, ledger, options);
  result.sampling_charge = batch.charged;
  result.success_prob = batch.success_prob;
  return result;
}

}  // namespace qmm
