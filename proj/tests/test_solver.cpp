#include <gtest/gtest.h>

#include "qmm/solver.hpp"
#include "support/oracles.hpp"

using namespace qmm;

namespace {

Vector e1(std::size_t d, double s) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  v[0] = s;
  return v;
}

CostConstants frozen() {
  CostConstants c;
  c.c_iters = 16.0;
  return c;
}

}  // namespace

TEST(Subgradient, SymmetricPairConverges) {
  auto fam = make_symmetric_affine_family(1.0, 2, 1.0);
  QueryLedger ledger;
  const auto rep = subgradient_method(fam, e1(2, 1.0), 1.0, 0.1, ledger);
  EXPECT_EQ(rep.iterations, 100u);
  ASSERT_TRUE(rep.suboptimality_estimate.has_value());
  EXPECT_LE(*rep.suboptimality_estimate, 0.1);
  EXPECT_TRUE(rep.feasible);
  // N values plus one subgradient per step
  EXPECT_EQ(ledger.quantum_charged(), 3u * 100u);
  EXPECT_EQ(ledger.phase_total(Phase::evaluation), 200u);
  EXPECT_EQ(ledger.phase_total(Phase::gradient_estimation), 100u);
}

TEST(Subgradient, ChargeIsLinearInN) {
  auto fam = make_affine_family(4, 50, 3, 1.0, 1.0);
  QueryLedger ledger;
  const auto rep = subgradient_method(fam, Vector::Zero(3), 1.0, 0.25, ledger);
  EXPECT_EQ(rep.iterations, 16u);
  EXPECT_EQ(ledger.quantum_charged(), 51u * 16u);
}

TEST(Subgradient, CoarseTargetTakesOneStep) {
  auto fam = make_symmetric_affine_family(1.0, 2, 1.0);
  QueryLedger ledger;
  const auto rep = subgradient_method(fam, e1(2, 0.5), 1.0, 2.0, ledger);
  EXPECT_EQ(rep.iterations, 1u);
  EXPECT_EQ(rep.output_point, e1(2, 0.5));
  EXPECT_THROW(subgradient_method(fam, e1(2, 0.5), 1.0, 0.0, ledger), std::invalid_argument);
}

TEST(ProxSchedule, Formulas) {
  auto fam = make_affine_family(1, 8, 2, 1.0, 1.0);
  const auto s = prox_schedule(fam, 1.0, 0.1, 1.0);
  const double eps_prime = 0.1 / (2.0 * std::log(8.0));
  EXPECT_DOUBLE_EQ(s.epsilon_prime, eps_prime);
  EXPECT_DOUBLE_EQ(s.radius, eps_prime);
  EXPECT_NEAR(s.lambda, 0.1 / eps_prime, 1e-12);
  EXPECT_NEAR(s.delta, 0.1 / s.lambda, 1e-12);
  EXPECT_EQ(s.outer_budget, static_cast<std::uint64_t>(std::ceil(4.0 / eps_prime)));
  EXPECT_NEAR(s.sigma, 1.0 / (6.0 * static_cast<double>(s.outer_budget)), 1e-15);
  // lambda stays inside the admissible band lambda <= L/r once eps <= L R
  EXPECT_LE(s.lambda, fam.lipschitz() / s.radius);
  EXPECT_EQ(prox_schedule(fam, 1.0, 0.1, 1.0, 7).outer_budget, 7u);
}

TEST(ProxOuter, SymmetricPairFromBoundary) {
  auto fam = make_symmetric_affine_family(1.0, 2, 1.0);
  ProxOuterOptions opts;
  opts.seed = 3;
  QueryLedger ledger(frozen());
  const auto rep = prox_outer(fam, e1(2, 1.0), 1.0, 0.2, opts, ledger);
  ASSERT_TRUE(rep.suboptimality_estimate.has_value());
  EXPECT_LE(*rep.suboptimality_estimate, 0.2);
  EXPECT_TRUE(rep.feasible);
  EXPECT_GT(rep.sampling_charge, 0u);
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(Phase::count_); ++p) sum += ledger.phase_total(static_cast<Phase>(p));
  EXPECT_EQ(sum, ledger.quantum_charged());
  EXPECT_EQ(ledger.phase_total(Phase::sampling), rep.sampling_charge);
}

TEST(ProxOuter, RandomAffineMatchesGridMinimum) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto fam = make_affine_family(seed, 8, 2, 1.0, 1.0);
    ProxOuterOptions opts;
    opts.seed = seed;
    QueryLedger ledger(frozen());
    const auto rep = prox_outer(fam, Vector::Zero(2), 1.0, 0.2, opts, ledger);
    // F_max minimum over the unit disc by fine grid
    double best = std::numeric_limits<double>::infinity();
    const int m = 300;
    for (int i = -m; i <= m; ++i) {
      for (int j = -m; j <= m; ++j) {
        Vector x(2);
        x << static_cast<double>(i) / m, static_cast<double>(j) / m;
        if (x.norm() <= 1.0) best = std::min(best, fam.values(x).maxCoeff());
      }
    }
    EXPECT_LE(rep.f_max - best, 0.2) << "seed=" << seed;
    EXPECT_TRUE(rep.feasible);
  }
}

TEST(ProxOuter, ArmsAgreeUnderMatchedStreams) {
  auto fam = make_affine_family(9, 32, 2, 1.0, 1.0);
  ProxOuterOptions q, c;
  q.seed = c.seed = 11;
  c.arm = SamplingArm::classical;
  q.outer_budget = c.outer_budget = 6;
  QueryLedger lq, lc;
  const auto rq = prox_outer(fam, Vector::Zero(2), 1.0, 0.3, q, lq);
  const auto rc = prox_outer(fam, Vector::Zero(2), 1.0, 0.3, c, lc);
  EXPECT_EQ(rq.output_point, rc.output_point);
  EXPECT_EQ(rq.iterations, rc.iterations);
  EXPECT_EQ(rq.arm, "quantum");
  EXPECT_EQ(rc.arm, "classical");
}

TEST(ProxOuter, QuantumSamplingIsCheaperAtLargeN) {
  auto fam = make_affine_family(2, 4096, 2, 1.0, 1.0);
  ProxOuterOptions q, c;
  q.seed = c.seed = 5;
  c.arm = SamplingArm::classical;
  q.outer_budget = c.outer_budget = 8;
  QueryLedger lq, lc;
  const auto rq = prox_outer(fam, Vector::Zero(2), 1.0, 1.0, q, lq);
  const auto rc = prox_outer(fam, Vector::Zero(2), 1.0, 1.0, c, lc);
  EXPECT_GE(static_cast<double>(rc.sampling_charge) / static_cast<double>(rq.sampling_charge), 4.0);
  EXPECT_LT(lq.quantum_charged(), lc.quantum_charged());
}

TEST(ProxOuter, StopsWhenTheCenterSettles) {
  auto fam = make_symmetric_affine_family(1.0, 2, 1.0);
  ProxOuterOptions opts;
  opts.seed = 2;
  QueryLedger ledger(frozen());
  const auto rep = prox_outer(fam, Vector::Zero(2), 1.0, 0.2, opts, ledger);
  EXPECT_FALSE(rep.budget_exhausted);
  EXPECT_LT(rep.iterations, prox_schedule(fam, 1.0, 0.2, 1.0).outer_budget);
}

TEST(ProxOuter, RecenterHookIsApplied) {
  auto fam = make_symmetric_affine_family(1.0, 2, 1.0);
  ProxOuterOptions opts;
  opts.outer_budget = 3;
  int calls = 0;
  opts.recenter = [&](const Vector& c, const Vector&) {
    ++calls;
    return c;
  };
  QueryLedger ledger;
  const auto rep = prox_outer(fam, e1(2, 0.5), 1.0, 0.2, opts, ledger);
  EXPECT_EQ(calls, 1);  // zero movement stops the loop after one call
  EXPECT_EQ(rep.output_point, e1(2, 0.5));
}

TEST(Solve, ConfigDispatch) {
  ExperimentConfig cfg;
  cfg.instance.kind = "symmetric_affine";
  cfg.instance.dim = 2;
  cfg.solve.method = "subgradient";
  cfg.solve.epsilon = 0.5;
  cfg.solve.start = "e1";
  const auto a = solve(cfg);
  EXPECT_EQ(a.method, "subgradient");
  EXPECT_EQ(a.iterations, 4u);
  cfg.solve.method = "prox_outer";
  cfg.solve.arm = "classical";
  cfg.solve.outer_budget = 2;
  const auto b = solve(cfg);
  EXPECT_EQ(b.method, "prox_outer");
  EXPECT_EQ(b.arm, "classical");
  const auto b2 = solve(cfg);
  EXPECT_EQ(b.output_point, b2.output_point);
  const auto b3 = solve(cfg, 1);
  EXPECT_LE(b3.iterations, 2u);
  cfg.instance.kind = "nope";
  EXPECT_THROW(solve(cfg), ConfigError);
}
