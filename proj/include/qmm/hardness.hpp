#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmm/problem.hpp"
#include "qmm/version.hpp"

namespace qmm {

/// Huber-like ramp: 0 on |t| <= alpha, quadratic (ell/2)(|t| - alpha)^2 up to
/// |t| = alpha + 1/ell, then linear with slope 1. ell = 0 is the limiting
/// form max(|t| - alpha, 0).
inline double psi(double t, double alpha, double ell) {
  const double a = std::abs(t);
  if (a <= alpha) return 0.0;
  if (ell == 0.0) return a - alpha;
  if (a <= alpha + 1.0 / ell) return 0.5 * ell * (a - alpha) * (a - alpha);
  return a - alpha - 0.5 / ell;
}

/// Derivative of psi. At the kink |t| = alpha (ell = 0) the flat-side limit 0
/// is returned.
inline double psi_derivative(double t, double alpha, double ell) {
  const double a = std::abs(t);
  if (a <= alpha) return 0.0;
  const double sign = t > 0.0 ? 1.0 : -1.0;
  if (ell == 0.0) return sign;
  if (a <= alpha + 1.0 / ell) return sign * ell * (a - alpha);
  return sign;
}

/// Chain parameters (T, N, ell) with alpha_T = 1/(4 T^{3/2}) and the anchor
/// coordinate x_[0] = 1/sqrt(T).
struct ChainShape {
  std::size_t chain_len = 1;
  std::size_t n_functions = 1;
  double ell = 0.0;
  double alpha = 0.0;
  double base = 0.0;

  static ChainShape make(std::size_t t, std::size_t n, double ell) {
    if (t < 1) throw std::invalid_argument("chain length must be >= 1");
    if (n < t) throw std::invalid_argument("need N >= T");
    if (ell < 0.0) throw std::invalid_argument("ell must be nonnegative");
    ChainShape s;
    s.chain_len = t;
    s.n_functions = n;
    s.ell = ell;
    const double td = static_cast<double>(t);
    s.alpha = 1.0 / (4.0 * td * std::sqrt(td));
    s.base = 1.0 / std::sqrt(td);
    return s;
  }
};

/// Base chain function i (0-based) at z in R^m, m >= T: psi((z_i - z_{i-1})/2)
/// for i < T with z_{-1} = x_[0]; 0 for i >= T.
inline double hard_value(std::size_t i, const Vector& z, const ChainShape& s) {
  if (i >= s.n_functions) throw std::out_of_range("hard_value: index out of range");
  if (i >= s.chain_len) return 0.0;
  if (static_cast<std::size_t>(z.size()) < s.chain_len) throw std::invalid_argument("hard_value: point too short");
  const auto k = static_cast<Eigen::Index>(i);
  const double prev = i == 0 ? s.base : z[k - 1];
  return psi(0.5 * (z[k] - prev), s.alpha, s.ell);
}

inline Vector hard_gradient(std::size_t i, const Vector& z, const ChainShape& s) {
  if (i >= s.n_functions) throw std::out_of_range("hard_gradient: index out of range");
  Vector g = Vector::Zero(z.size());
  if (i >= s.chain_len) return g;
  const auto k = static_cast<Eigen::Index>(i);
  const double prev = i == 0 ? s.base : z[k - 1];
  const double d = 0.5 * psi_derivative(0.5 * (z[k] - prev), s.alpha, s.ell);
  g[k] += d;
  if (i > 0) g[k - 1] -= d;
  return g;
}

/// Largest 1-based index with |z_i| >= alpha, or 0 if none.
inline std::size_t prog(const Vector& z, double alpha) {
  for (Eigen::Index k = z.size(); k > 0; --k) {
    if (std::abs(z[k - 1]) >= alpha) return static_cast<std::size_t>(k);
  }
  return 0;
}

/// d x T matrix with orthonormal columns, Haar distributed: Gaussian matrix,
/// thin QR, columns sign-fixed so that diag(R) > 0.
inline Matrix haar_orthonormal_columns(std::size_t d, std::size_t t, Engine& rng) {
  if (t > d) throw std::invalid_argument("need d >= T for orthonormal columns");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t));
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  const Matrix r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

/// Shuffled zero chain f~_i(x) = f_{Pi^{-1}(i)}(U^T x).
struct HardInstance {
  ChainShape shape;
  std::size_t dim = 0;
  Matrix rotation;                       // U, d x T
  std::vector<std::size_t> permutation;  // Pi: base index -> shuffled index
  std::vector<std::size_t> inverse;      // Pi^{-1}
  std::uint64_t seed = 0;

  Vector project(const Vector& x) const { return rotation.transpose() * x; }
  std::size_t progress(const Vector& x) const { return prog(project(x), shape.alpha); }

  // f_i and its gradient at x * scale. Only the two chain coordinates that
  // f_i reads are projected.
  double value(std::size_t i, const Vector& x, double scale = 1.0) const {
    const std::size_t j = inverse.at(i);
    if (j >= shape.chain_len) return 0.0;
    const auto k = static_cast<Eigen::Index>(j);
    const double cur = scale * rotation.col(k).dot(x);
    const double prev = j == 0 ? shape.base : scale * rotation.col(k - 1).dot(x);
    return psi(0.5 * (cur - prev), shape.alpha, shape.ell);
  }
  Vector gradient(std::size_t i, const Vector& x, double scale = 1.0) const {
    const std::size_t j = inverse.at(i);
    if (j >= shape.chain_len) return Vector::Zero(x.size());
    const auto k = static_cast<Eigen::Index>(j);
    const double cur = scale * rotation.col(k).dot(x);
    const double prev = j == 0 ? shape.base : scale * rotation.col(k - 1).dot(x);
    const double d = 0.5 * psi_derivative(0.5 * (cur - prev), shape.alpha, shape.ell);
    if (j == 0) return d * rotation.col(k);
    return d * (rotation.col(k) - rotation.col(k - 1));
  }

  /// Unit-domain family, 1-Lipschitz and ell-smooth; min F_max = 0 on B_1(0).
  FunctionFamily family() const {
    FamilyTraits traits;
    traits.n_functions = shape.n_functions;
    traits.dim = dim;
    traits.lipschitz = 1.0;
    if (shape.ell > 0.0) traits.smoothness = shape.ell;
    traits.domain_radius = 1.0;
    traits.kind = "hard-chain";
    traits.known_minimum = 0.0;
    auto self = std::make_shared<const HardInstance>(*this);
    return FunctionFamily(
        std::move(traits), [self](std::size_t i, const Vector& x) { return self->value(i, x); },
        [self](std::size_t i, const Vector& x) { return self->gradient(i, x); });
  }
};

inline void validate_instance(const HardInstance& h) {
  const Matrix gram = h.rotation.transpose() * h.rotation;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::logic_error("rotation columns are not orthonormal");
  }
  std::vector<char> seen(h.shape.n_functions, 0);
  if (h.permutation.size() != h.shape.n_functions) throw std::logic_error("permutation has wrong size");
  for (std::size_t i = 0; i < h.permutation.size(); ++i) {
    const auto j = h.permutation[i];
    if (j >= seen.size() || seen[j] || h.inverse.at(j) != i) throw std::logic_error("permutation is not a bijection");
    seen[j] = 1;
  }
}

/// Test mode: U = leading columns of the identity, Pi = identity.
inline HardInstance make_identity_instance(std::size_t t, std::size_t n, double ell, std::size_t d) {
  if (d < t) throw std::invalid_argument("need d >= T");
  HardInstance h;
  h.shape = ChainShape::make(t, n, ell);
  h.dim = d;
  h.rotation = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t));
  h.permutation.resize(n);
  std::iota(h.permutation.begin(), h.permutation.end(), std::size_t{0});
  h.inverse = h.permutation;
  return h;
}

inline HardInstance make_shuffled_instance(std::size_t t, std::size_t n, double ell, std::size_t d,
                                           std::uint64_t seed) {
  if (d < t) throw std::invalid_argument("need d >= T (d=" + std::to_string(d) + ", T=" + std::to_string(t) + ")");
  HardInstance h;
  h.shape = ChainShape::make(t, n, ell);
  h.dim = d;
  h.seed = seed;
  Engine rng = make_stream(seed, 0, Stream::instance);
  h.rotation = haar_orthonormal_columns(d, t, rng);
  h.permutation.resize(n);
  std::iota(h.permutation.begin(), h.permutation.end(), std::size_t{0});
  std::shuffle(h.permutation.begin(), h.permutation.end(), rng);
  h.inverse.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) h.inverse[h.permutation[i]] = i;
  validate_instance(h);
  return h;
}

/// min(1/(8 T^{3/2}), ell/(32 T^3)).
inline double suboptimality_floor(std::size_t t, double ell) {
  const double td = static_cast<double>(t);
  return std::min(1.0 / (8.0 * td * std::sqrt(td)), ell / (32.0 * td * td * td));
}

/// psi(3/(8 T^{3/2})): any point with prog < T has a chain step of at least
/// this size, so this lower-bounds F_max there (the minimum over B_1(0) is 0).
inline double step_floor(std::size_t t, double ell) {
  const auto s = ChainShape::make(t, t, ell);
  const double td = static_cast<double>(t);
  return psi(3.0 / (8.0 * td * std::sqrt(td)), s.alpha, ell);
}

/// Exact infimum of F_max over {prog < T}: the drop from x_[0] to below alpha
/// spread evenly over T steps.
inline double low_progress_infimum(std::size_t t, double ell) {
  const auto s = ChainShape::make(t, t, ell);
  const double td = static_cast<double>(t);
  return psi((s.base - s.alpha) / (2.0 * td), s.alpha, ell);
}

/// Dimension the lower-bound argument asks for:
/// T + max(32 T^3 ln(32 sqrt(N) T^5), 32 T^3 ln(4T/delta)).
inline double required_dimension(std::size_t t, std::size_t n, double delta = 1.0 / 3.0) {
  const double td = static_cast<double>(t);
  const double c = 32.0 * td * td * td;
  return td + std::max(c * std::log(32.0 * std::sqrt(static_cast<double>(n)) * std::pow(td, 5.0)),
                       c * std::log(4.0 * td / delta));
}

struct ScaledHardFamily {
  HardInstance instance;
  FunctionFamily family;
  double scale_lipschitz = 1.0;
  double scale_radius = 1.0;
  double required_dim = 0.0;
  bool clipped = false;
};

/// L_f R f~(x / R) with T = ceil(max((L_f R/eps)^{2/3}, (L_g R^2/eps)^{1/3}) / 5)
/// and ell = L_g R / L_f. d is min(required, dim_cap), at least T.
inline ScaledHardFamily scaled_hard_family(double lipschitz, double smoothness, double radius, double epsilon,
                                           std::size_t n, std::uint64_t seed, std::size_t dim_cap = 20,
                                           std::ostream* warnings = nullptr) {
  if (!(lipschitz > 0.0 && smoothness >= 0.0 && radius > 0.0 && epsilon > 0.0)) {
    throw std::invalid_argument("scaled hard family needs positive L_f, R, eps and L_g >= 0");
  }
  const double smooth_scale = smoothness * radius * radius;
  if (!(epsilon < lipschitz * radius) || (smoothness > 0.0 && !(epsilon < smooth_scale))) {
    throw std::invalid_argument("eps must be below min(L_f R, L_g R^2)");
  }
  const double a = std::pow(lipschitz * radius / epsilon, 2.0 / 3.0);
  const double b = smoothness > 0.0 ? std::cbrt(smooth_scale / epsilon) : 0.0;
  const auto t = static_cast<std::size_t>(std::max(1.0, std::ceil(std::max(a, b) / 5.0 - 1e-12)));
  if (n < t) throw std::invalid_argument("need N >= T = " + std::to_string(t));
  const double ell = smoothness * radius / lipschitz;

  const double required = required_dimension(t, n);
  std::size_t d = std::max(t, dim_cap);
  if (static_cast<double>(d) >= required) d = static_cast<std::size_t>(std::ceil(required));
  const bool clipped = static_cast<double>(d) < required;
  if (clipped && warnings) {
    *warnings << "warning: hard instance dimension clipped to d=" << d << " (lower-bound argument needs d >= "
              << required << "); results are illustrative\n";
  }
  auto instance = make_shuffled_instance(t, n, ell, d, seed);

  FamilyTraits traits;
  traits.n_functions = n;
  traits.dim = d;
  traits.lipschitz = lipschitz;
  if (smoothness > 0.0) traits.smoothness = smoothness;
  traits.domain_radius = radius;
  traits.kind = "scaled-hard-chain";
  traits.known_minimum = 0.0;
  auto self = std::make_shared<const HardInstance>(instance);
  const double lr = lipschitz * radius;
  FunctionFamily family(
      std::move(traits),
      [self, lr, radius](std::size_t i, const Vector& x) { return lr * self->value(i, x, 1.0 / radius); },
      [self, lipschitz, radius](std::size_t i, const Vector& x) {
        Vector g = self->gradient(i, x, 1.0 / radius);
        g *= lipschitz;
        return g;
      });
  ScaledHardFamily out{std::move(instance), std::move(family), lipschitz, radius, required, clipped};
  return out;
}

struct ProgressRecord {
  std::uint64_t query_index = 0;
  std::size_t prog = 0;
  std::uint64_t cumulative_charge = 0;
  Vector point;
};

struct ProgressTrace {
  std::vector<ProgressRecord> records;
  std::size_t max_prog = 0;
  std::vector<std::size_t> discovery_order;  // prog values at which max_prog rose

  void record(const Vector& x, std::size_t p, std::uint64_t charge, bool keep_point = false) {
    ProgressRecord r;
    r.query_index = records.size();
    r.prog = p;
    r.cumulative_charge = charge;
    if (keep_point) r.point = x;
    records.push_back(std::move(r));
    if (p > max_prog) {
      max_prog = p;
      discovery_order.push_back(p);
    }
  }

  void write_csv(std::ostream& os) const {
    os << "query_index,prog,cumulative_charge,version\r\n";
    for (const auto& r : records) {
      os << r.query_index << ',' << r.prog << ',' << r.cumulative_charge << ',' << kVersion << "\r\n";
    }
  }
};

enum class ProgressArm { random_guess, subgradient };

/// Records prog_alpha(U^T x) at every query point.
///
/// random_guess draws `budget` points uniformly from B_R(0) without touching
/// the oracle. subgradient runs `budget` projected subgradient steps on F_max
/// (N values and one gradient per step, step R / sqrt(budget)) and logs
/// every oracle query.
inline ProgressTrace run_progress_experiment(ProgressArm arm, const HardInstance& instance, std::uint64_t budget,
                                             QueryLedger& ledger, Engine& rng, bool keep_points = false) {
  ProgressTrace trace;
  const auto d = static_cast<Eigen::Index>(instance.dim);
  if (arm == ProgressArm::random_guess) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::uint64_t q = 0; q < budget; ++q) {
      Vector x(d);
      for (auto& v : x) v = gauss(rng);
      x *= std::pow(unit(rng), 1.0 / static_cast<double>(d)) / x.norm();
      trace.record(x, instance.progress(x), ledger.quantum_charged(), keep_points);
    }
    return trace;
  }

  const FunctionFamily family = instance.family();
  const double step = budget > 0 ? family.domain_radius() / std::sqrt(static_cast<double>(budget)) : 0.0;
  Vector x = Vector::Zero(d);
  for (std::uint64_t q = 0; q < budget; ++q) {
    const std::size_t p = instance.progress(x);
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    {
      PhaseScope scope(ledger, Phase::evaluation);
      for (std::size_t i = 0; i < family.size(); ++i) {
        const double v = evaluate(family, i, x, ledger);
        trace.record(x, p, ledger.quantum_charged(), keep_points);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
    }
    PhaseScope scope(ledger, Phase::gradient_estimation);
    const Vector g = subgradient_query(family, best, x, ledger);
    trace.record(x, p, ledger.quantum_charged(), keep_points);
    const double gn = g.norm();
    if (gn == 0.0) continue;
    x -= step * g / gn;
    const double n = x.norm();
    if (n > family.domain_radius()) x *= family.domain_radius() / n;
  }
  return trace;
}

}  // namespace qmm
