#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qmm/ledger.hpp"
#include "qmm/rng.hpp"

namespace qmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Static description of a function family f_1..f_N over R^d.
struct FamilyTraits {
  std::size_t n_functions = 0;
  std::size_t dim = 0;
  double lipschitz = 0.0;
  std::optional<double> smoothness;  // nullopt: nonsmooth
  double domain_radius = 0.0;        // domain is the ball B_R(0)
  std::string kind;
  std::optional<double> known_minimum;  // min of F_max over the domain, if known
};

/// N convex Lipschitz functions with value and subgradient access.
///
/// Immutable and cheap to copy; safe to share across threads. The raw
/// `value` / `subgradient` members are unmetered emulator access; the
/// metered oracles are the free functions `evaluate` and `subgradient_query`.
/// Function indices are 0-based.
class FunctionFamily {
 public:
  using ValueFn = std::function<double(std::size_t, const Vector&)>;
  using GradientFn = std::function<Vector(std::size_t, const Vector&)>;

  FunctionFamily(FamilyTraits traits, ValueFn value, GradientFn gradient)
      : impl_(std::make_shared<Impl>(Impl{std::move(traits), std::move(value), std::move(gradient)})) {
    const auto& t = impl_->traits;
    if (t.n_functions < 2) {
      throw std::invalid_argument("function family needs N >= 2 (log N must be positive)");
    }
    if (t.dim < 1) throw std::invalid_argument("function family needs dim >= 1");
    if (!(t.lipschitz > 0.0)) throw std::invalid_argument("lipschitz constant must be positive");
    if (!(t.domain_radius > 0.0)) throw std::invalid_argument("domain radius must be positive");
    if (t.smoothness && *t.smoothness < 0.0) {
      throw std::invalid_argument("smoothness must be nonnegative");
    }
  }

  const FamilyTraits& traits() const { return impl_->traits; }
  std::size_t size() const { return impl_->traits.n_functions; }
  std::size_t dim() const { return impl_->traits.dim; }
  double lipschitz() const { return impl_->traits.lipschitz; }
  double domain_radius() const { return impl_->traits.domain_radius; }

  double value(std::size_t i, const Vector& x) const { return impl_->value(i, x); }
  Vector subgradient(std::size_t i, const Vector& x) const { return impl_->gradient(i, x); }

  /// All N values at x, unmetered.
  Vector values(const Vector& x) const {
    Vector out(size());
    for (std::size_t i = 0; i < size(); ++i) out[static_cast<Eigen::Index>(i)] = value(i, x);
    return out;
  }

  bool in_domain(const Vector& x, double slack = 1e-9) const {
    return x.norm() <= domain_radius() * (1.0 + slack) + slack;
  }

  /// Same functions, different metadata.
  FunctionFamily with_traits(FamilyTraits traits) const {
    return FunctionFamily(std::move(traits), impl_->value, impl_->gradient);
  }

 private:
  struct Impl {
    FamilyTraits traits;
    ValueFn value;
    GradientFn gradient;
  };
  std::shared_ptr<const Impl> impl_;
};

namespace detail {

inline void check_query(const FunctionFamily& family, std::size_t i, const Vector& x,
                        QueryLedger& ledger) {
  if (i >= family.size()) {
    throw std::out_of_range("function index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(family.size()) + ")");
  }
  if (static_cast<std::size_t>(x.size()) != family.dim()) {
    throw std::invalid_argument("query point has dimension " + std::to_string(x.size()) +
                                ", family expects " + std::to_string(family.dim()));
  }
  if (!family.in_domain(x)) ledger.record_out_of_domain();
}

}  // namespace detail

/// One emulated call to the evaluation oracle: returns f_i(x).
inline double evaluate(const FunctionFamily& family, std::size_t i, const Vector& x,
                       QueryLedger& ledger) {
  detail::check_query(family, i, x, ledger);
  ledger.record_value();
  return family.value(i, x);
}

/// Emulated one-query gradient estimation: returns a subgradient of f_i at x.
inline Vector subgradient_query(const FunctionFamily& family, std::size_t i, const Vector& x,
                                QueryLedger& ledger) {
  detail::check_query(family, i, x, ledger);
  ledger.record_gradient();
  return family.subgradient(i, x);
}

/// f_i(x) = <a_i, x> + b_i.
inline FunctionFamily make_affine_family(std::vector<Vector> slopes, std::vector<double> offsets,
                                         double domain_radius, std::string kind = "affine") {
  if (slopes.size() != offsets.size() || slopes.empty()) {
    throw std::invalid_argument("affine family needs matching, nonempty slopes and offsets");
  }
  const auto d = static_cast<std::size_t>(slopes.front().size());
  double lip = 0.0;
  for (const auto& a : slopes) {
    if (static_cast<std::size_t>(a.size()) != d) throw std::invalid_argument("ragged slopes");
    lip = std::max(lip, a.norm());
  }
  FamilyTraits traits;
  traits.n_functions = slopes.size();
  traits.dim = d;
  traits.lipschitz = lip > 0.0 ? lip : 1.0;
  traits.smoothness = 0.0;
  traits.domain_radius = domain_radius;
  traits.kind = std::move(kind);

  auto shared = std::make_shared<const std::pair<std::vector<Vector>, std::vector<double>>>(
      std::move(slopes), std::move(offsets));
  return FunctionFamily(
      std::move(traits),
      [shared](std::size_t i, const Vector& x) { return shared->first[i].dot(x) + shared->second[i]; },
      [shared](std::size_t i, const Vector&) { return shared->first[i]; });
}

/// Random affine family reproducible from `seed`: directions uniform on the
/// sphere, slope norms in [L_f/2, L_f], offsets uniform in [-L_f R/10, L_f R/10].
/// The family's Lipschitz constant is reported as L_f.
inline FunctionFamily make_affine_family(std::uint64_t seed, std::size_t n, std::size_t d,
                                         double lipschitz, double domain_radius) {
  if (n < 2) throw std::invalid_argument("affine family needs N >= 2");
  if (d < 1) throw std::invalid_argument("affine family needs d >= 1");
  Engine rng = make_stream(seed, 0, Stream::instance);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 1.0);
  std::uniform_real_distribution<double> offset(-0.1, 0.1);
  std::vector<Vector> slopes;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < n; ++i) {
    Vector a(static_cast<Eigen::Index>(d));
    for (auto& v : a) v = gauss(rng);
    a *= lipschitz * scale(rng) / a.norm();
    slopes.push_back(std::move(a));
    offsets.push_back(offset(rng) * lipschitz * domain_radius);
  }
  auto family = make_affine_family(std::move(slopes), std::move(offsets), domain_radius);
  auto traits = family.traits();
  traits.lipschitz = lipschitz;
  return family.with_traits(std::move(traits));
}

/// f_1 = L <e_1, x>, f_2 = -L <e_1, x>: F_max = L |x_1|, minimum 0.
inline FunctionFamily make_symmetric_affine_family(double lipschitz, std::size_t d,
                                                   double domain_radius) {
  Vector a = Vector::Zero(static_cast<Eigen::Index>(d));
  a[0] = lipschitz;
  auto family = make_affine_family({a, Vector(-a)}, {0.0, 0.0}, domain_radius, "symmetric-affine");
  auto traits = family.traits();
  traits.known_minimum = 0.0;
  return family.with_traits(std::move(traits));
}

}  // namespace qmm
