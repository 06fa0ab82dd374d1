#include <gtest/gtest.h>

#include <sstream>

#include "qmm/hardness.hpp"
#include "support/oracles.hpp"

using namespace qmm;

namespace {

Vector random_in_ball(std::size_t d, double radius, Engine& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  Vector x(static_cast<Eigen::Index>(d));
  for (auto& v : x) v = g(rng);
  return x * (radius * std::pow(u(rng), 1.0 / static_cast<double>(d)) / x.norm());
}

}  // namespace

TEST(Psi, Pieces) {
  EXPECT_EQ(psi(0.1, 0.25, 4.0), 0.0);
  EXPECT_EQ(psi(-0.25, 0.25, 4.0), 0.0);
  EXPECT_DOUBLE_EQ(psi(0.5, 0.25, 4.0), 0.125);
  EXPECT_DOUBLE_EQ(psi(-0.5, 0.25, 4.0), 0.125);
  EXPECT_DOUBLE_EQ(psi(1.0, 0.25, 4.0), 0.625);
  EXPECT_DOUBLE_EQ(psi(1.0, 0.25, 0.0), 0.75);
  EXPECT_DOUBLE_EQ(psi_derivative(0.375, 0.25, 4.0), 0.5);
  EXPECT_DOUBLE_EQ(psi_derivative(-2.0, 0.25, 4.0), -1.0);
  EXPECT_EQ(psi_derivative(0.2, 0.25, 0.0), 0.0);
}

TEST(Psi, ContinuousDerivativeAtTheJoin) {
  const double a = 0.1, ell = 3.0, join = a + 1.0 / ell;
  EXPECT_NEAR(psi(join - 1e-9, a, ell), psi(join + 1e-9, a, ell), 1e-8);
  EXPECT_NEAR(psi_derivative(join - 1e-12, a, ell), psi_derivative(join + 1e-12, a, ell), 1e-9);
}

TEST(ChainShape, AlphaAndBase) {
  const auto s = ChainShape::make(4, 8, 1.0);
  EXPECT_DOUBLE_EQ(s.alpha, 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(s.base, 0.5);
  EXPECT_THROW(ChainShape::make(0, 8, 1.0), std::invalid_argument);
  EXPECT_THROW(ChainShape::make(4, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(ChainShape::make(2, 3, -1.0), std::invalid_argument);
}

TEST(Chain, ValuesAndGradients) {
  const auto s = ChainShape::make(2, 4, 0.0);
  // alpha = 1/(8 sqrt 2), base = 1/sqrt 2
  Vector z(3);
  z << 0.0, 0.0, 0.7;
  EXPECT_NEAR(hard_value(0, z, s), 0.5 * s.base - s.alpha, 1e-15);
  EXPECT_EQ(hard_value(1, z, s), 0.0);
  EXPECT_EQ(hard_value(3, z, s), 0.0);
  EXPECT_THROW(hard_value(4, z, s), std::out_of_range);
  const Vector g0 = hard_gradient(0, z, s);
  EXPECT_DOUBLE_EQ(g0[0], -0.5);
  EXPECT_EQ(g0[1], 0.0);
  z << 0.5, -0.3, 0.0;
  const Vector g1 = hard_gradient(1, z, s);
  EXPECT_DOUBLE_EQ(g1[1], -0.5);
  EXPECT_DOUBLE_EQ(g1[0], 0.5);
  EXPECT_EQ(g1[2], 0.0);
}

TEST(Prog, Examples) {
  Vector z(4);
  z << 0.5, 0.0, 0.1, 0.01;
  EXPECT_EQ(prog(z, 0.1), 3u);
  EXPECT_EQ(prog(z, 0.6), 0u);
  EXPECT_EQ(prog(z, 0.01), 4u);
  for (double a : {0.05, 0.2}) EXPECT_EQ(prog(z, a), oracle::progress(z, a));
}

TEST(Floors, HandValues) {
  EXPECT_DOUBLE_EQ(suboptimality_floor(1, 100.0), 0.125);
  EXPECT_DOUBLE_EQ(suboptimality_floor(4, 1.0), 1.0 / 2048.0);
  EXPECT_DOUBLE_EQ(suboptimality_floor(2, 0.0), 0.0);
  // the drop x_[0] - alpha over T steps of size 2|t|
  const double td = 3.0, a = 1.0 / (4.0 * td * std::sqrt(td)), b = 1.0 / std::sqrt(td);
  EXPECT_NEAR(low_progress_infimum(3, 0.0), (b - a) / (2.0 * td) - a, 1e-15);
  EXPECT_LE(step_floor(3, 1.0), low_progress_infimum(3, 1.0));
}

TEST(Floors, LowProgressInfimumIsAttained) {
  for (std::size_t t : {2u, 3u, 4u}) {
    for (double ell : {0.0, 1.0}) {
      const auto inst = make_identity_instance(t, t, ell, t);
      const double a = inst.shape.alpha, b = inst.shape.base;
      // evenly spaced descent from x_[0] to alpha (just below: prog < T)
      Vector z(static_cast<Eigen::Index>(t));
      for (std::size_t k = 0; k < t; ++k) z[static_cast<Eigen::Index>(k)] = b - (b - a) * static_cast<double>(k + 1) / t;
      z[static_cast<Eigen::Index>(t - 1)] = a * (1.0 - 1e-12);
      ASSERT_LT(inst.progress(z), t);
      double f = 0.0;
      for (std::size_t i = 0; i < t; ++i) f = std::max(f, inst.value(i, z));
      EXPECT_NEAR(f, low_progress_infimum(t, ell), 1e-10) << "T=" << t << " ell=" << ell;
    }
  }
}

TEST(HardInstance, MinimumIsZeroOnTheUnitBall) {
  const auto inst = make_shuffled_instance(3, 6, 1.0, 10, 4);
  const Vector z = Vector::Constant(3, inst.shape.base);
  const Vector x = inst.rotation * z;
  EXPECT_NEAR(x.norm(), 1.0, 1e-12);
  EXPECT_NEAR(inst.family().values(x).maxCoeff(), 0.0, 1e-15);
  EXPECT_GT(inst.family().values(Vector::Zero(10)).maxCoeff(), 0.0);
}

TEST(HardInstance, RotationAndPermutation) {
  const auto inst = make_shuffled_instance(4, 8, 2.0, 30, 17);
  const Matrix gram = inst.rotation.transpose() * inst.rotation;
  EXPECT_LE((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NO_THROW(validate_instance(inst));
  std::vector<std::size_t> sorted = inst.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(inst.inverse[inst.permutation[i]], i);
  const auto other = make_shuffled_instance(4, 8, 2.0, 30, 18);
  EXPECT_GT((other.rotation - inst.rotation).norm(), 1e-3);
  const auto again = make_shuffled_instance(4, 8, 2.0, 30, 17);
  EXPECT_EQ(again.rotation, inst.rotation);
  EXPECT_EQ(again.permutation, inst.permutation);
  auto broken = inst;
  broken.permutation[0] = broken.permutation[1];
  EXPECT_THROW(validate_instance(broken), std::logic_error);
}

TEST(HardInstance, ShuffledMatchesBaseChainInRotatedCoordinates) {
  const auto inst = make_shuffled_instance(3, 5, 1.0, 12, 2);
  Engine rng(6);
  for (int k = 0; k < 50; ++k) {
    const Vector x = random_in_ball(12, 1.0, rng);
    const Vector z = inst.project(x);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(inst.value(i, x), hard_value(inst.inverse[i], z, inst.shape), 1e-14);
      EXPECT_LE((inst.gradient(i, x) - inst.rotation * hard_gradient(inst.inverse[i], z, inst.shape)).norm(), 1e-14);
    }
    EXPECT_EQ(inst.progress(x), prog(z, inst.shape.alpha));
  }
}

TEST(HardInstance, LipschitzAndSmooth) {
  const double ell = 2.0;
  const auto inst = make_shuffled_instance(3, 4, ell, 8, 9);
  const auto fam = inst.family();
  Engine rng(12);
  for (int k = 0; k < 2000; ++k) {
    const Vector x = random_in_ball(8, 1.0, rng), y = random_in_ball(8, 1.0, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_LE(std::abs(fam.value(i, x) - fam.value(i, y)), (x - y).norm() + 1e-12);
      EXPECT_LE((fam.subgradient(i, x) - fam.subgradient(i, y)).norm(), ell * (x - y).norm() + 1e-12);
    }
  }
}

TEST(HardInstance, GradientMatchesFiniteDifferences) {
  const auto inst = make_shuffled_instance(3, 4, 1.0, 6, 3);
  const auto fam = inst.family();
  Engine rng(1);
  for (int k = 0; k < 30; ++k) {
    const Vector x = random_in_ball(6, 1.0, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto fd = oracle::central_difference([&](const Vector& y) { return fam.value(i, y); }, x, 1e-6);
      EXPECT_LE((fd - fam.subgradient(i, x)).norm(), 1e-6);
    }
  }
}

TEST(ZeroChain, BruteForce) {
  Engine rng(7);
  for (std::size_t t : {1u, 2u, 3u}) {
    for (double ell : {0.0, 1.0, 4.0}) {
      const auto rep = oracle::check_zero_chain(t, t + 2, ell, rng, 3);
      EXPECT_GT(rep.checked, 0u);
      EXPECT_EQ(rep.violations, 0u) << "T=" << t << " ell=" << ell;
    }
  }
}

TEST(ZeroChain, SubgradientDiscoversOneCoordinateAtATime) {
  const auto inst = make_identity_instance(4, 4, 0.0, 8);
  QueryLedger ledger;
  Engine rng(1);
  const auto trace = run_progress_experiment(ProgressArm::subgradient, inst, 400, ledger, rng);
  ASSERT_FALSE(trace.discovery_order.empty());
  for (std::size_t k = 0; k < trace.discovery_order.size(); ++k) EXPECT_EQ(trace.discovery_order[k], k + 1);
  EXPECT_EQ(trace.records.size(), 400u * 5u);
  EXPECT_EQ(trace.records.back().cumulative_charge, ledger.quantum_charged());
  EXPECT_EQ(ledger.quantum_charged(), 400u * 5u);
}

TEST(Guessing, RareAtLargeDimension) {
  // uniform points are rotation invariant, so the identity instance suffices
  const std::size_t t = 8, d = 100000;
  const auto inst = make_identity_instance(t, t, 0.0, d);
  QueryLedger ledger;
  Engine rng(21);
  const auto trace = run_progress_experiment(ProgressArm::random_guess, inst, 1000, ledger, rng);
  std::size_t hits = 0;
  for (const auto& r : trace.records) hits += r.prog >= t ? 1 : 0;
  EXPECT_LE(hits, 10u);
  EXPECT_EQ(ledger.quantum_charged(), 0u);
}

TEST(ScaledFamily, ChainLengthAndScaling) {
  std::ostringstream warn;
  const auto h = scaled_hard_family(1.0, 0.0, 1.0, 1.0 / 40.0, 8, 3, 20, &warn);
  EXPECT_EQ(h.instance.shape.chain_len, 3u);
  EXPECT_TRUE(h.clipped);
  EXPECT_EQ(h.family.dim(), 20u);
  EXPECT_NE(warn.str().find("clipped"), std::string::npos);
  EXPECT_GT(h.required_dim, 20.0);
  EXPECT_THROW(scaled_hard_family(1.0, 0.0, 1.0, 2.0, 8, 3), std::invalid_argument);
  EXPECT_THROW(scaled_hard_family(1.0, 0.0, 1.0, 1e-4, 8, 3), std::invalid_argument);  // needs N >= T

  const double lf = 2.0, r = 3.0;
  const auto s = scaled_hard_family(lf, 0.5, r, 0.5, 8, 5);
  const auto& inst = s.instance;
  EXPECT_DOUBLE_EQ(inst.shape.ell, 0.5 * r / lf);
  Engine rng(2);
  for (int k = 0; k < 500; ++k) {
    const Vector x = random_in_ball(s.family.dim(), r, rng), y = random_in_ball(s.family.dim(), r, rng);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(s.family.value(i, x), lf * r * inst.value(i, x / r), 1e-12);
      EXPECT_LE(std::abs(s.family.value(i, x) - s.family.value(i, y)), lf * (x - y).norm() + 1e-12);
      EXPECT_LE(s.family.subgradient(i, x).norm(), lf + 1e-12);
    }
  }
  const Vector xs = r * inst.rotation * Vector::Constant(static_cast<Eigen::Index>(inst.shape.chain_len), inst.shape.base);
  EXPECT_NEAR(s.family.values(xs).maxCoeff(), 0.0, 1e-14);
  ASSERT_TRUE(s.family.traits().known_minimum.has_value());
}

TEST(ProgressTrace, CsvLayout) {
  ProgressTrace tr;
  tr.record(Vector::Zero(2), 0, 3);
  tr.record(Vector::Zero(2), 2, 5);
  std::ostringstream os;
  tr.write_csv(os);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("query_index,prog,cumulative_charge,version\r\n", 0), 0u);
  EXPECT_NE(s.find("1,2,5,"), std::string::npos);
  EXPECT_EQ(tr.discovery_order, (std::vector<std::size_t>{2}));
}
