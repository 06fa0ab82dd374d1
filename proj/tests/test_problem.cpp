#include <gtest/gtest.h>

#include "qmm/hardness.hpp"
#include "qmm/problem.hpp"

using namespace qmm;

namespace {

Vector e(std::size_t d, std::size_t k, double s = 1.0) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  v[static_cast<Eigen::Index>(k)] = s;
  return v;
}

}  // namespace

TEST(Evaluate, AffineValueAndCharge) {
  auto fam = make_affine_family({e(3, 0), e(3, 1)}, {0.0, 0.5}, 5.0);
  QueryLedger ledger;
  EXPECT_DOUBLE_EQ(evaluate(fam, 0, e(3, 0, 2.0), ledger), 2.0);
  EXPECT_EQ(ledger.value_queries(), 1u);
  EXPECT_EQ(ledger.quantum_charged(), 1u);
  EXPECT_DOUBLE_EQ(evaluate(fam, 1, e(3, 0, 2.0), ledger), 0.5);
}

TEST(Evaluate, RepeatedCallsAreIdenticalAndEachCharged) {
  auto fam = make_affine_family(7, 5, 3, 1.0, 1.0);
  QueryLedger ledger;
  const Vector x = e(3, 2, 0.3);
  const double a = evaluate(fam, 3, x, ledger);
  const double b = evaluate(fam, 3, x, ledger);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ledger.quantum_charged(), 2u);
}

TEST(Evaluate, IndexOutOfRangeThrows) {
  auto fam = make_affine_family(1, 4, 2, 1.0, 1.0);
  QueryLedger ledger;
  EXPECT_THROW(evaluate(fam, 4, Vector::Zero(2), ledger), std::out_of_range);
  EXPECT_THROW(subgradient_query(fam, 9, Vector::Zero(2), ledger), std::out_of_range);
  EXPECT_EQ(ledger.quantum_charged(), 0u);
}

TEST(Evaluate, OutOfDomainIsFlaggedNotRejected) {
  auto fam = make_affine_family(1, 4, 2, 1.0, 1.0);
  QueryLedger ledger;
  EXPECT_NO_THROW(evaluate(fam, 0, e(2, 0, 3.0), ledger));
  EXPECT_EQ(ledger.out_of_domain(), 1u);
  EXPECT_EQ(ledger.quantum_charged(), 1u);
}

TEST(Evaluate, HardChainAtOrigin) {
  // T = 1, ell = 4: alpha = 1/4, x_[0] = 1, f_1(0) = psi(-1/2) = 2 (1/4)^2 = 1/8.
  const auto fam = make_identity_instance(1, 2, 4.0, 3).family();
  QueryLedger ledger;
  EXPECT_NEAR(evaluate(fam, 0, Vector::Zero(3), ledger), 0.125, 1e-15);
  EXPECT_EQ(evaluate(fam, 1, Vector::Zero(3), ledger), 0.0);
}

TEST(SubgradientQuery, AffineSlopeEverywhere) {
  auto fam = make_affine_family({e(2, 0, 2.0), e(2, 1, -1.0)}, {0.0, 0.0}, 1.0);
  QueryLedger ledger;
  for (double s : {-0.7, 0.0, 0.4}) {
    EXPECT_TRUE(subgradient_query(fam, 0, e(2, 1, s), ledger).isApprox(e(2, 0, 2.0)));
  }
  EXPECT_EQ(ledger.gradient_queries(), 3u);
  EXPECT_EQ(ledger.quantum_charged(), 3u);
}

TEST(SubgradientQuery, HardChainAtOriginMatchesFiniteDifference) {
  // t = (x_1 - 1)/2 = -1/2 at x = 0; psi'(-1/2) = -ell (1/2 - 1/4) = -1, times 1/2.
  const auto fam = make_identity_instance(1, 2, 4.0, 2).family();
  QueryLedger ledger;
  const Vector g = subgradient_query(fam, 0, Vector::Zero(2), ledger);
  EXPECT_NEAR(g[0], -0.5, 1e-15);
  EXPECT_EQ(g[1], 0.0);
  const double h = 1e-6;
  const double fd = (fam.value(0, e(2, 0, h)) - fam.value(0, e(2, 0, -h))) / (2 * h);
  // |t| = 1/2 sits on the quadratic/linear join, so the difference is only O(h) accurate
  EXPECT_NEAR(fd, -0.5, 1e-6);
  EXPECT_EQ(ledger.quantum_charged(), 1u);
}

TEST(AffineFamily, SymmetricPairMinimumAtOrigin) {
  auto fam = make_symmetric_affine_family(2.0, 3, 1.0);
  ASSERT_TRUE(fam.traits().known_minimum.has_value());
  EXPECT_EQ(*fam.traits().known_minimum, 0.0);
  EXPECT_EQ(fam.values(Vector::Zero(3)).maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(fam.values(e(3, 0, 0.5)).maxCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(fam.values(e(3, 0, -0.5)).maxCoeff(), 1.0);
}

TEST(AffineFamily, SameSeedSameFamily) {
  auto a = make_affine_family(42, 6, 4, 1.5, 2.0);
  auto b = make_affine_family(42, 6, 4, 1.5, 2.0);
  auto c = make_affine_family(43, 6, 4, 1.5, 2.0);
  const Vector x = Vector::LinSpaced(4, -0.5, 0.7);
  EXPECT_EQ(a.values(x), b.values(x));
  EXPECT_NE(a.values(x), c.values(x));
}

TEST(AffineFamily, LipschitzOnRandomPairs) {
  auto fam = make_affine_family(5, 8, 3, 1.5, 1.0);
  Engine rng(11);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    Vector x(3), y(3);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    for (std::size_t i = 0; i < fam.size(); ++i) {
      EXPECT_LE(std::abs(fam.value(i, x) - fam.value(i, y)), fam.lipschitz() * (x - y).norm() + 1e-12);
      // convexity: the slope is a subgradient
      EXPECT_GE(fam.value(i, y), fam.value(i, x) + fam.subgradient(i, x).dot(y - x) - 1e-12);
    }
  }
}

TEST(FunctionFamily, RejectsSingleFunction) {
  EXPECT_THROW(make_affine_family({e(2, 0)}, {0.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(make_affine_family(1, 1, 2, 1.0, 1.0), std::invalid_argument);
}

TEST(Ledger, PhaseTotalsSumToCharge) {
  auto fam = make_affine_family(2, 4, 2, 1.0, 1.0);
  QueryLedger ledger;
  {
    PhaseScope s(ledger, Phase::sampling);
    evaluate(fam, 0, Vector::Zero(2), ledger);
    ledger.record_emulated(10);
    {
      PhaseScope inner(ledger, Phase::gradient_estimation);
      subgradient_query(fam, 1, Vector::Zero(2), ledger);
    }
    evaluate(fam, 2, Vector::Zero(2), ledger);
  }
  evaluate(fam, 3, Vector::Zero(2), ledger);
  EXPECT_EQ(ledger.phase_total(Phase::sampling), 12u);
  EXPECT_EQ(ledger.phase_total(Phase::gradient_estimation), 1u);
  EXPECT_EQ(ledger.phase_total(Phase::unattributed), 1u);
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(Phase::count_); ++p) sum += ledger.phase_total(static_cast<Phase>(p));
  EXPECT_EQ(sum, ledger.quantum_charged());
  EXPECT_EQ(ledger.quantum_charged(), ledger.value_queries() + ledger.gradient_queries() + ledger.emulated_queries());
}

TEST(Rng, StreamsDependOnlyOnTheirKey) {
  Engine a = make_stream(9, 3, Stream::sampling);
  Engine b = make_stream(9, 3, Stream::sampling);
  Engine c = make_stream(9, 3, Stream::failure);
  Engine d = make_stream(9, 4, Stream::sampling);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}
