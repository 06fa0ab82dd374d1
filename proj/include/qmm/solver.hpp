#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "qmm/broo.hpp"
#include "qmm/config.hpp"
#include "qmm/hardness.hpp"
#include "qmm/version.hpp"

namespace qmm {

struct SolveReport {
  std::string method;
  std::string arm;
  Vector output_point;
  double f_max = 0.0;  // unmetered, at output_point
  std::optional<double> suboptimality_estimate;
  QueryLedger ledger_snapshot;
  std::uint64_t iterations = 0;  // subgradient steps or BROO calls
  std::uint64_t inner_iterations = 0;
  std::uint64_t sampling_charge = 0;
  bool budget_exhausted = false;
  bool feasible = true;
  double wall_time = 0.0;
  Json config_echo = Json::object();

  Json to_json(bool include_timing = true) const {
    Json j;
    j["version"] = kVersion;
    j["method"] = method;
    j["arm"] = arm;
    j["output_point"] = std::vector<double>(output_point.data(), output_point.data() + output_point.size());
    j["f_max"] = f_max;
    j["suboptimality_estimate"] = suboptimality_estimate ? Json(*suboptimality_estimate) : Json(nullptr);
    j["iterations"] = iterations;
    j["inner_iterations"] = inner_iterations;
    j["sampling_charge"] = sampling_charge;
    j["budget_exhausted"] = budget_exhausted;
    j["feasible"] = feasible;
    Json l;
    l["value_queries"] = ledger_snapshot.value_queries();
    l["gradient_queries"] = ledger_snapshot.gradient_queries();
    l["emulated_queries"] = ledger_snapshot.emulated_queries();
    l["quantum_charged"] = ledger_snapshot.quantum_charged();
    l["out_of_domain"] = ledger_snapshot.out_of_domain();
    Json phases = Json::object();
    for (std::size_t p = 0; p < static_cast<std::size_t>(Phase::count_); ++p) {
      phases[std::string(phase_name(static_cast<Phase>(p)))] = ledger_snapshot.phase_total(static_cast<Phase>(p));
    }
    l["phases"] = phases;
    j["ledger"] = l;
    j["config"] = config_echo;
    if (include_timing) j["wall_time"] = wall_time;
    return j;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Vector project_onto_ball(const Vector& y, const Vector& c, double r) { return project_ball(y, c, r); }

inline void finish_report(SolveReport& rep, const FunctionFamily& family, const Vector& x0, double radius,
                          const QueryLedger& ledger) {
  rep.f_max = family.values(rep.output_point).maxCoeff();
  if (family.traits().known_minimum) rep.suboptimality_estimate = rep.f_max - *family.traits().known_minimum;
  rep.feasible = (rep.output_point - x0).norm() <= radius + 1e-9;
  rep.ledger_snapshot = ledger;
}

}  // namespace detail

/// Projected subgradient on F_max over B_R(x0): T = ceil((L_f R / eps)^2)
/// steps of size R / (L_f sqrt(T)); each step identifies the argmax (N value
/// queries) and asks for one subgradient. Returns the average of x_0..x_{T-1}.
inline SolveReport subgradient_method(const FunctionFamily& family, const Vector& x0, double radius, double epsilon,
                                      QueryLedger& ledger) {
  if (!(epsilon > 0.0 && radius > 0.0)) throw std::invalid_argument("subgradient method needs eps, R > 0");
  const auto t0 = std::chrono::steady_clock::now();
  const double lr = family.lipschitz() * radius / epsilon;
  const auto steps = static_cast<std::uint64_t>(std::max(1.0, std::ceil(lr * lr - 1e-9)));
  const double eta = radius / (family.lipschitz() * std::sqrt(static_cast<double>(steps)));

  Vector x = x0;
  Vector sum = Vector::Zero(x0.size());
  for (std::uint64_t t = 0; t < steps; ++t) {
    sum += x;
    std::size_t best = 0;
    {
      PhaseScope scope(ledger, Phase::evaluation);
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < family.size(); ++i) {
        const double v = evaluate(family, i, x, ledger);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
    }
    PhaseScope scope(ledger, Phase::gradient_estimation);
    const Vector g = subgradient_query(family, best, x, ledger);
    x = detail::project_onto_ball(x - eta * g, x0, radius);
  }
  SolveReport rep;
  rep.method = "subgradient";
  rep.arm = "classical";
  rep.output_point = detail::project_onto_ball(sum / static_cast<double>(steps), x0, radius);
  rep.iterations = steps;
  detail::finish_report(rep, family, x0, radius, ledger);
  rep.wall_time = detail::seconds_since(t0);
  return rep;
}

enum class SamplingArm { quantum, classical };
enum class OuterStrategy { simple_proximal };

struct ProxOuterOptions {
  OuterStrategy strategy = OuterStrategy::simple_proximal;
  SamplingArm arm = SamplingArm::quantum;
  std::uint64_t outer_budget = 0;  // 0: ceil(4 R / r)
  std::uint64_t seed = 1;
  SamplerOptions sampler;
  // Maps (center, BROO output) to the next center; empty means "take the
  // output". Slot for an accelerated outer loop.
  std::function<Vector(const Vector&, const Vector&)> recenter;
};

/// Parameters prox_outer hands to each BROO call.
struct ProxSchedule {
  double epsilon_prime = 0.0;
  double radius = 0.0;  // r_eps
  double lambda = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  std::uint64_t outer_budget = 0;
};

inline ProxSchedule prox_schedule(const FunctionFamily& family, double radius, double epsilon, double c_delta,
                                  std::uint64_t outer_budget = 0) {
  ProxSchedule s;
  s.epsilon_prime = epsilon / (2.0 * std::log(static_cast<double>(family.size())));
  s.radius = s.epsilon_prime / family.lipschitz();
  s.lambda = epsilon / (s.radius * radius);
  s.delta = c_delta * epsilon / (s.lambda * radius);
  s.outer_budget = outer_budget > 0 ? outer_budget
                                    : static_cast<std::uint64_t>(std::ceil(4.0 * radius / s.radius));
  s.sigma = 1.0 / (6.0 * static_cast<double>(s.outer_budget));
  return s;
}

/// Ball-proximal outer loop: repeatedly solve the BROO subproblem at the
/// current center with lambda = eps / (r R) and delta = c_delta eps / (lambda R),
/// recenter at the (B_R(x0)-projected) output, stop once a step moves less
/// than r / 2. Returns the best center seen by F_smax.
inline SolveReport prox_outer(const FunctionFamily& family, const Vector& x0, double radius, double epsilon,
                              const ProxOuterOptions& options, QueryLedger& ledger) {
  if (!(epsilon > 0.0 && radius > 0.0)) throw std::invalid_argument("prox_outer needs eps, R > 0");
  if (options.strategy != OuterStrategy::simple_proximal) throw std::invalid_argument("unsupported outer strategy");
  const auto t0 = std::chrono::steady_clock::now();
  const ProxSchedule sched = prox_schedule(family, radius, epsilon, ledger.constants().c_delta, options.outer_budget);
  const SmoothingContext base = SmoothingContext::make(family, epsilon, sched.lambda, x0);

  SolveReport rep;
  rep.method = "prox_outer";
  rep.arm = options.arm == SamplingArm::quantum ? "quantum" : "classical";

  auto track = [&](const Vector& x) {
    PhaseScope scope(ledger, Phase::tracking);
    return f_smax(family, x, base, ledger);
  };

  Vector center = x0;
  Vector best = x0;
  double best_value = track(x0);
  rep.budget_exhausted = true;
  BrooOptions bopts;
  bopts.sampler = options.sampler;
  for (std::uint64_t k = 0; k < sched.outer_budget; ++k) {
    BrooQuery q{center, sched.lambda, sched.delta, sched.sigma, sched.radius};
    Engine rng = make_stream(options.seed, k, Stream::sampling);
    Engine fail = make_stream(options.seed, k, Stream::failure);
    Engine rounds = make_stream(options.seed, k, Stream::amplification);
    const BrooResult res = options.arm == SamplingArm::quantum
                               ? broo_solve(family, q, base, ledger, rng, bopts, &fail, &rounds)
                               : classical_broo_solve(family, q, base, ledger, rng, bopts);
    rep.inner_iterations += res.iterations;
    rep.sampling_charge += res.sampling_charge;
    rep.iterations = k + 1;
    if (!res.iterates_feasible) rep.feasible = false;
    Vector next = options.recenter ? options.recenter(center, res.point) : res.point;
    next = detail::project_onto_ball(next, x0, radius);
    const double moved = (next - center).norm();
    center = next;
    const double v = track(center);
    if (v < best_value) {
      best_value = v;
      best = center;
    }
    if (moved < 0.5 * sched.radius) {
      rep.budget_exhausted = false;
      break;
    }
  }
  rep.output_point = best;
  const bool inner_feasible = rep.feasible;
  detail::finish_report(rep, family, x0, radius, ledger);
  rep.feasible = rep.feasible && inner_feasible;
  rep.wall_time = detail::seconds_since(t0);
  return rep;
}

/// Test instance plus starting point described by a config.
struct BuiltInstance {
  FunctionFamily family;
  Vector start;
  bool dim_clipped = false;
};

inline BuiltInstance build_instance(const InstanceSpec& spec, const SolveSpec& solve,
                                    std::ostream* warnings = nullptr) {
  std::optional<FunctionFamily> fam;
  bool clipped = false;
  if (spec.kind == "affine") {
    fam = make_affine_family(spec.seed, spec.n_functions, spec.dim, spec.lipschitz, spec.radius);
  } else if (spec.kind == "symmetric_affine") {
    fam = make_symmetric_affine_family(spec.lipschitz, spec.dim, spec.radius);
  } else if (spec.kind == "hard") {
    auto h = scaled_hard_family(spec.lipschitz, spec.smoothness, spec.radius, solve.epsilon, spec.n_functions,
                                spec.seed, spec.dim_cap, warnings);
    clipped = h.clipped;
    fam = h.family;
  } else {
    throw ConfigError("unknown instance kind '" + spec.kind + "'");
  }
  Vector start = Vector::Zero(static_cast<Eigen::Index>(fam->dim()));
  if (solve.start == "e1") {
    start[0] = spec.radius;
  } else if (solve.start == "point") {
    if (solve.start_point.size() != fam->dim()) throw ConfigError("config key 'solve.start' has the wrong length");
    for (std::size_t i = 0; i < solve.start_point.size(); ++i) start[static_cast<Eigen::Index>(i)] = solve.start_point[i];
  }
  return BuiltInstance{*fam, start, clipped};
}

/// Builds the instance and dispatches to the configured method and arm.
/// `trial` selects the RNG call space so repeated trials are independent.
inline SolveReport solve(const ExperimentConfig& config, std::uint64_t trial = 0, std::ostream* warnings = nullptr) {
  const auto built = build_instance(config.instance, config.solve, warnings);
  QueryLedger ledger(config.constants);
  SolveReport rep;
  if (config.solve.method == "subgradient") {
    rep = subgradient_method(built.family, built.start, config.instance.radius, config.solve.epsilon, ledger);
  } else {
    ProxOuterOptions opts;
    opts.arm = config.solve.arm == "classical" ? SamplingArm::classical : SamplingArm::quantum;
    opts.outer_budget = config.solve.outer_budget;
    opts.seed = stream_key(config.seed, trial, Stream::trial);
    opts.sampler.emulate_failure = config.sampler.emulate_failure;
    opts.sampler.stochastic_rounds = config.sampler.stochastic_rounds;
    rep = prox_outer(built.family, built.start, config.instance.radius, config.solve.epsilon, opts, ledger);
  }
  rep.config_echo = config.echo;
  return rep;
}

}  // namespace qmm
