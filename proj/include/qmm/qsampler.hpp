#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmm/smoothing.hpp"

namespace qmm {

/// Indices of the K largest entries, ties broken by the smaller index.
/// Returned in descending order of value.
inline std::vector<std::size_t> top_k_indices(const Vector& values, std::size_t k) {
  const auto n = static_cast<std::size_t>(values.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("top-K needs 1 <= K <= N (K=" + std::to_string(k) +
                                ", N=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const double va = values[static_cast<Eigen::Index>(a)];
    const double vb = values[static_cast<Eigen::Index>(b)];
    return va > vb || (va == vb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  return idx;
}

/// Emulated cost ceil(c_topk sqrt(K N) ln(1/delta)) of top-K maximum finding.
inline std::uint64_t top_k_charge(std::size_t k, std::size_t n, double delta, double c_topk) {
  return static_cast<std::uint64_t>(
      std::ceil(c_topk * std::sqrt(static_cast<double>(k) * static_cast<double>(n)) * std::log(1.0 / delta)));
}

namespace detail {
inline void require_failure_prob(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("failure probability must lie in (0, 1)");
}
}  // namespace detail

/// Exact top-K set of (f_i(x̄))_i. Values are read through unmetered emulator
/// access; the ledger is charged the top-K formula instead.
inline std::vector<std::size_t> top_k(const FunctionFamily& family, const Vector& center,
                                      std::size_t k, double delta, QueryLedger& ledger) {
  detail::require_failure_prob(delta);
  auto h = top_k_indices(family.values(center), k);
  ledger.record_emulated(top_k_charge(k, family.size(), delta, ledger.constants().c_topk));
  return h;
}

/// Proposal used by the sampler: exact softmax weight on the top set H, the
/// threshold weight exp(h/eps') everywhere else.
///
/// Exponents are stored relative to the largest center value so nothing
/// overflows; `normalizer` and `total_weight` share that shift.
struct TruncatedDistribution {
  std::vector<std::size_t> top_set;
  std::vector<char> in_top;       // membership mask over [N]
  double threshold = 0.0;         // h = min_{i in H} f_i(x̄)
  double normalizer = 0.0;        // Z (shifted)
  double total_weight = 0.0;      // W = sum_i exp(f_i(x̄)/eps') (shifted)
  double success_prob = 0.0;      // p̂ = W / Z
  double shift = 0.0;
  double epsilon_prime = 0.0;
  Vector center_values;

  std::size_t size() const { return in_top.size(); }

  /// w'_i.
  double weight(std::size_t i) const {
    const double v = in_top[i] ? center_values[static_cast<Eigen::Index>(i)] : threshold;
    return std::exp((v - shift) / epsilon_prime) / normalizer;
  }
};

inline TruncatedDistribution build_truncated(const Vector& center_values,
                                             std::vector<std::size_t> top_set, double epsilon_prime) {
  const auto n = static_cast<std::size_t>(center_values.size());
  if (top_set.empty() || top_set.size() > n) throw std::invalid_argument("top set must have 1..N entries");
  TruncatedDistribution t;
  t.epsilon_prime = epsilon_prime;
  t.center_values = center_values;
  t.shift = center_values.maxCoeff();
  t.in_top.assign(n, 0);
  t.threshold = std::numeric_limits<double>::infinity();
  double top_mass = 0.0;
  for (const auto i : top_set) {
    if (i >= n || t.in_top[i]) throw std::invalid_argument("top set has invalid or repeated index");
    t.in_top[i] = 1;
    const double v = center_values[static_cast<Eigen::Index>(i)];
    t.threshold = std::min(t.threshold, v);
    top_mass += std::exp((v - t.shift) / epsilon_prime);
  }
  const double k = static_cast<double>(top_set.size());
  t.normalizer = (static_cast<double>(n) - k) * std::exp((t.threshold - t.shift) / epsilon_prime) + top_mass;
  t.total_weight = 0.0;
  for (const double v : center_values) t.total_weight += std::exp((v - t.shift) / epsilon_prime);
  t.success_prob = t.total_weight / t.normalizer;
  bool genuine = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!t.in_top[i] && center_values[static_cast<Eigen::Index>(i)] > t.threshold) genuine = false;
  }
  if (genuine && t.success_prob < k / static_cast<double>(n) * (1.0 - 1e-12)) {
    throw std::logic_error("truncated proposal violates p_hat >= K/N");
  }
  t.top_set = std::move(top_set);
  return t;
}

/// Uses the cached (unmetered) center values the top-K search already revealed.
inline TruncatedDistribution build_truncated(const FunctionFamily& family, const Vector& center,
                                             std::vector<std::size_t> top_set,
                                             const SmoothingContext& ctx) {
  return build_truncated(family.values(center), std::move(top_set), ctx.epsilon_prime);
}

/// Emulated amplitude-amplification rounds for success probability p̂:
/// ceil(c_amp / sqrt(p̂)).
inline std::uint64_t amplification_rounds(double p_hat, double c_amp = 1.0) {
  if (!(p_hat > 0.0)) throw std::logic_error("amplification needs a positive success probability");
  const double p = std::min(p_hat, 1.0);
  // Guard against 1/sqrt(1/4) evaluating to 2.0000000000000004.
  const double r = c_amp / std::sqrt(p);
  const double rounded = std::round(r);
  const double rounds = std::abs(r - rounded) < 1e-12 * std::max(1.0, r) ? rounded : std::ceil(r);
  return static_cast<std::uint64_t>(std::max(1.0, rounds));
}

/// Stochastic mode: geometric number of rounds with mean c_amp / sqrt(p̂).
inline std::uint64_t amplification_rounds(double p_hat, double c_amp, Engine& rng) {
  if (!(p_hat > 0.0)) throw std::logic_error("amplification needs a positive success probability");
  std::geometric_distribution<std::uint64_t> geom(std::sqrt(std::min(p_hat, 1.0)));
  const double draw = static_cast<double>(geom(rng) + 1);
  return static_cast<std::uint64_t>(std::max(1.0, std::ceil(c_amp * draw)));
}

/// Draws one index from the proposal and accepts it with probability
/// exp((f_i - h)/eps') off the top set. Accepted draws follow the exact
/// softmax whenever H really is a top set. Returns the number of trials.
class RejectionSampler {
 public:
  explicit RejectionSampler(const TruncatedDistribution& proposal) : proposal_(proposal) {
    const auto n = proposal_.size();
    std::vector<double> top_weights;
    top_weights.reserve(proposal_.top_set.size());
    double top_mass = 0.0;
    for (const auto i : proposal_.top_set) {
      const double w = std::exp((proposal_.center_values[static_cast<Eigen::Index>(i)] - proposal_.shift) /
                                proposal_.epsilon_prime);
      top_weights.push_back(w);
      top_mass += w;
    }
    top_pick_ = std::discrete_distribution<std::size_t>(top_weights.begin(), top_weights.end());
    top_prob_ = top_mass / proposal_.normalizer;
    for (std::size_t i = 0; i < n; ++i) {
      if (!proposal_.in_top[i]) rest_.push_back(i);
    }
  }

  std::size_t draw(Engine& rng, std::uint64_t* trials = nullptr) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uint64_t count = 0;
    while (true) {
      ++count;
      if (rest_.empty() || unit(rng) < top_prob_) {
        if (trials) *trials += count;
        return proposal_.top_set[top_pick_(rng)];
      }
      std::uniform_int_distribution<std::size_t> pick(0, rest_.size() - 1);
      const std::size_t i = rest_[pick(rng)];
      const double accept = std::exp(
          (proposal_.center_values[static_cast<Eigen::Index>(i)] - proposal_.threshold) / proposal_.epsilon_prime);
      if (unit(rng) < accept) {
        if (trials) *trials += count;
        return i;
      }
    }
  }

 private:
  const TruncatedDistribution& proposal_;
  std::discrete_distribution<std::size_t> top_pick_;
  double top_prob_ = 1.0;
  std::vector<std::size_t> rest_;
};

struct SamplerOptions {
  bool emulate_failure = false;    // with probability delta, corrupt H by one swap
  bool stochastic_rounds = false;  // geometric amplification rounds
};

struct SampleBatch {
  std::vector<std::size_t> indices;
  std::size_t top_set_size = 0;
  double success_prob = 1.0;     // p̂ of the proposal actually used
  std::uint64_t charged = 0;     // emulated charge of this batch
  std::uint64_t trials = 0;      // classical rejection trials (uncharged)
  bool failure_injected = false;
};

/// Shared sampling law for both arms: `count` i.i.d. softmax draws by
/// rejection from the truncated proposal of size min(count, N).
inline SampleBatch draw_softmax_samples(const Vector& center_values, double epsilon_prime,
                                        std::size_t count, Engine& rng) {
  SampleBatch batch;
  const auto n = static_cast<std::size_t>(center_values.size());
  batch.top_set_size = std::min(count, n);
  auto proposal = build_truncated(center_values, top_k_indices(center_values, batch.top_set_size), epsilon_prime);
  batch.success_prob = proposal.success_prob;
  RejectionSampler sampler(proposal);
  batch.indices.reserve(count);
  for (std::size_t s = 0; s < count; ++s) batch.indices.push_back(sampler.draw(rng, &batch.trials));
  return batch;
}

/// Quantum arm: T i.i.d. softmax samples at x̄ while charging
///   top-K cost with K = min(T, N)  +  T * 2 * amplification_rounds(p̂).
/// Each amplification round calls the state-preparation circuit, which makes
/// two oracle queries.
inline SampleBatch sample_batch(const FunctionFamily& family, const Vector& center,
                                std::size_t t_samples, double delta, const SmoothingContext& ctx,
                                QueryLedger& ledger, Engine& rng, const SamplerOptions& options = {},
                                Engine* failure_rng = nullptr, Engine* rounds_rng = nullptr) {
  detail::require_failure_prob(delta);
  if (t_samples < 1) throw std::invalid_argument("sample_batch needs at least one sample");
  PhaseScope phase(ledger, Phase::sampling);
  const auto n = family.size();
  const std::size_t k = std::min(t_samples, n);
  const std::uint64_t before = ledger.quantum_charged();
  auto top = top_k(family, center, k, delta, ledger);
  const Vector values = family.values(center);

  SampleBatch batch;
  if (options.emulate_failure && failure_rng != nullptr && k < n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(*failure_rng) < delta) {
      std::vector<char> mask(n, 0);
      for (auto i : top) mask[i] = 1;
      std::vector<std::size_t> outside;
      for (std::size_t i = 0; i < n; ++i) if (!mask[i]) outside.push_back(i);
      std::uniform_int_distribution<std::size_t> pick_in(0, top.size() - 1), pick_out(0, outside.size() - 1);
      top[pick_in(*failure_rng)] = outside[pick_out(*failure_rng)];
      batch.failure_injected = true;
    }
  }

  if (batch.failure_injected) {
    auto proposal = build_truncated(values, top, ctx.epsilon_prime);
    batch.success_prob = std::min(1.0, proposal.success_prob);
    RejectionSampler sampler(proposal);
    for (std::size_t s = 0; s < t_samples; ++s) batch.indices.push_back(sampler.draw(rng, &batch.trials));
    batch.top_set_size = k;
  } else {
    batch = draw_softmax_samples(values, ctx.epsilon_prime, t_samples, rng);
  }

  const double c_amp = ledger.constants().c_amp;
  std::uint64_t amp = 0;
  for (std::size_t s = 0; s < t_samples; ++s) {
    const auto rounds = (options.stochastic_rounds && rounds_rng != nullptr)
                            ? amplification_rounds(batch.success_prob, c_amp, *rounds_rng)
                            : amplification_rounds(batch.success_prob, c_amp);
    amp += 2 * rounds;
  }
  ledger.record_emulated(amp);
  batch.charged = ledger.quantum_charged() - before;
  return batch;
}

/// Classical arm: computes all N softmax weights (N value queries), after
/// which samples are free. Uses the same sampling law as `sample_batch`.
inline SampleBatch classical_sample_batch(const FunctionFamily& family, const Vector& center,
                                          std::size_t t_samples, const SmoothingContext& ctx,
                                          QueryLedger& ledger, Engine& rng) {
  if (t_samples < 1) throw std::invalid_argument("sample batch needs at least one sample");
  PhaseScope phase(ledger, Phase::sampling);
  const std::uint64_t before = ledger.quantum_charged();
  const Vector values = metered_values(family, center, ledger);
  auto batch = draw_softmax_samples(values, ctx.epsilon_prime, t_samples, rng);
  batch.charged = ledger.quantum_charged() - before;
  return batch;
}

}  // namespace qmm
