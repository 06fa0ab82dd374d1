#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qmm/rng.hpp"

namespace qmm {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr std::size_t kDefaultAmplitudeCap = std::size_t{1} << 20;

/// Multi-round search instance: items a_1..a_K (0-based values in [0, N)),
/// keys s_1 = 0, s_2..s_K pairwise distinct d-bit strings.
struct SearchInstance {
  std::size_t n_items = 0;
  std::size_t rounds = 0;  // K
  std::size_t key_bits = 0;
  std::vector<std::size_t> items;
  std::vector<std::uint64_t> keys;
  std::uint64_t seed = 0;

  std::uint64_t key_space() const { return std::uint64_t{1} << key_bits; }
};

inline void validate_search_instance(const SearchInstance& in) {
  if (in.n_items < 1 || in.rounds < 1 || in.key_bits < 1 || in.key_bits > 30) {
    throw std::invalid_argument("search instance needs N >= 1, K >= 1 and 1 <= d <= 30");
  }
  if (in.items.size() != in.rounds || in.keys.size() != in.rounds) {
    throw std::invalid_argument("search instance needs K items and K keys");
  }
  if (in.keys.front() != 0) throw std::invalid_argument("s_1 must be the all-zero string");
  std::unordered_set<std::uint64_t> seen;
  for (const auto k : in.keys) {
    if (k >= in.key_space()) throw std::invalid_argument("key does not fit in d bits");
    if (!seen.insert(k).second) throw std::invalid_argument("keys must be pairwise distinct");
  }
  for (const auto a : in.items) {
    if (a >= in.n_items) throw std::invalid_argument("item index out of range");
  }
}

/// Random instance with K keys. Warns when d < 10 K ln N.
inline SearchInstance make_search_instance(std::size_t n, std::size_t k, std::size_t d, std::uint64_t seed,
                                           std::ostream* warnings = nullptr) {
  if (d < 1 || d > 30) throw std::invalid_argument("key_bits must lie in [1, 30]");
  if (k > (std::uint64_t{1} << d)) throw std::invalid_argument("K distinct keys need 2^d >= K");
  if (n < 1) throw std::invalid_argument("need N >= 1");
  SearchInstance in;
  in.n_items = n;
  in.rounds = k;
  in.key_bits = d;
  in.seed = seed;
  Engine rng = make_stream(seed, 0, Stream::instance);
  std::uniform_int_distribution<std::size_t> item(0, n - 1);
  std::uniform_int_distribution<std::uint64_t> key(1, in.key_space() - 1);
  in.keys.push_back(0);
  std::unordered_set<std::uint64_t> used{0};
  for (std::size_t i = 0; i < k; ++i) in.items.push_back(item(rng));
  while (in.keys.size() < k) {
    const auto s = key(rng);
    if (used.insert(s).second) in.keys.push_back(s);
  }
  if (warnings && n > 1 && static_cast<double>(d) < 10.0 * static_cast<double>(k) * std::log(static_cast<double>(n))) {
    *warnings << "warning: key_bits d=" << d << " is below 10 K ln N = "
              << 10.0 * static_cast<double>(k) * std::log(static_cast<double>(n)) << "; results are illustrative\n";
  }
  validate_search_instance(in);
  return in;
}

/// s_{i+1} when (a, s) = (a_i, s_i) for some i < K, otherwise 0 (this
/// includes the last pair (a_K, s_K)).
inline std::uint64_t f_search(std::size_t a, std::uint64_t s, const SearchInstance& in) {
  for (std::size_t i = 0; i + 1 < in.rounds; ++i) {
    if (in.items[i] == a && in.keys[i] == s) return in.keys[i + 1];
  }
  return 0;
}

enum class Register { key, item, result };

/// Dense amplitudes over |s>|a>|r>, flattened as (s * N + a) * 2^d + r.
class SearchState {
 public:
  SearchState(std::size_t key_bits, std::size_t n_items, std::size_t cap = kDefaultAmplitudeCap)
      : key_bits_(key_bits), key_dim_(std::size_t{1} << key_bits), n_items_(n_items) {
    const double need = static_cast<double>(key_dim_) * static_cast<double>(key_dim_) * static_cast<double>(n_items);
    if (need > static_cast<double>(cap)) {
      throw std::invalid_argument("search state needs " + std::to_string(static_cast<std::uint64_t>(need)) +
                                  " amplitudes (" + std::to_string(static_cast<std::uint64_t>(need * 16.0 / 1048576.0)) +
                                  " MiB), above the cap of " + std::to_string(cap));
    }
    amps_ = ComplexVector::Zero(static_cast<Eigen::Index>(need));
    amps_[0] = 1.0;
  }

  static SearchState for_instance(const SearchInstance& in, std::size_t cap = kDefaultAmplitudeCap) {
    return SearchState(in.key_bits, in.n_items, cap);
  }

  std::size_t key_bits() const { return key_bits_; }
  std::size_t key_dim() const { return key_dim_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t size() const { return static_cast<std::size_t>(amps_.size()); }
  std::size_t register_dim(Register r) const { return r == Register::item ? n_items_ : key_dim_; }

  std::size_t index(std::uint64_t s, std::size_t a, std::uint64_t r) const {
    return (static_cast<std::size_t>(s) * n_items_ + a) * key_dim_ + static_cast<std::size_t>(r);
  }

  Complex& at(std::uint64_t s, std::size_t a, std::uint64_t r) { return amps_[static_cast<Eigen::Index>(index(s, a, r))]; }
  Complex at(std::uint64_t s, std::size_t a, std::uint64_t r) const {
    return amps_[static_cast<Eigen::Index>(index(s, a, r))];
  }

  ComplexVector& amplitudes() { return amps_; }
  const ComplexVector& amplitudes() const { return amps_; }
  double norm() const { return amps_.norm(); }

  std::uint64_t oracle_queries() const { return queries_; }
  void count_query() { ++queries_; }

  /// Resets to the computational basis state |s>|a>|r>.
  void set_basis(std::uint64_t s, std::size_t a, std::uint64_t r) {
    amps_.setZero();
    at(s, a, r) = 1.0;
  }

  /// Visits every amplitude; `fn(s, a, r, amp)`.
  template <class Fn>
  void for_each(Fn&& fn) {
    for (std::uint64_t s = 0; s < key_dim_; ++s)
      for (std::size_t a = 0; a < n_items_; ++a)
        for (std::uint64_t r = 0; r < key_dim_; ++r) fn(s, a, r, at(s, a, r));
  }

 private:
  std::size_t key_bits_;
  std::size_t key_dim_;
  std::size_t n_items_;
  ComplexVector amps_;
  std::uint64_t queries_ = 0;
};

/// |s>|a>|r> -> |s>|a>|r xor F_search(a, s)>. Self-inverse.
inline void apply_search_oracle(SearchState& state, const SearchInstance& in) {
  if (state.key_bits() != in.key_bits || state.n_items() != in.n_items) {
    throw std::invalid_argument("state and instance dimensions differ");
  }
  state.count_query();
  for (std::uint64_t s = 0; s < state.key_dim(); ++s) {
    for (std::size_t a = 0; a < state.n_items(); ++a) {
      const std::uint64_t f = f_search(a, s, in);
      if (f == 0) continue;
      for (std::uint64_t r = 0; r < state.key_dim(); ++r) {
        const std::uint64_t partner = r ^ f;
        if (r < partner) std::swap(state.at(s, a, r), state.at(s, a, partner));
      }
    }
  }
}

namespace step {
struct Identity {};
/// Walsh-Hadamard on every qubit of a register (item register only when N is
/// a power of two).
struct HadamardAll {
  Register reg = Register::key;
};
/// Householder reflection exchanging |0> and the uniform superposition.
struct PrepareUniform {
  Register reg = Register::item;
};
/// 2|u><u| - I on the item register, optionally only where the key register
/// holds `key`.
struct Diffusion {
  std::optional<std::uint64_t> key;
};
/// -1 on every basis state whose result register is nonzero.
struct PhaseFlipNonzero {};
struct SwapKeyResult {};
/// X gates: register value v -> v xor mask.
struct XorRegister {
  Register reg = Register::key;
  std::uint64_t mask = 0;
};
/// Arbitrary unitary on one register.
struct CustomMatrix {
  Register reg = Register::item;
  ComplexMatrix matrix;
};
}  // namespace step

using AdversaryStep = std::variant<step::Identity, step::HadamardAll, step::PrepareUniform, step::Diffusion,
                                   step::PhaseFlipNonzero, step::SwapKeyResult, step::XorRegister,
                                   step::CustomMatrix>;

namespace detail {

/// Applies `op` to every fiber of the state along register `reg`. `op`
/// receives a vector of length register_dim(reg) and the fixed values of the
/// other two registers.
template <class Op>
void for_each_fiber(SearchState& st, Register reg, Op&& op) {
  const std::size_t n = st.register_dim(reg);
  ComplexVector fiber(static_cast<Eigen::Index>(n));
  auto run = [&](auto&& idx, std::uint64_t fixed_key) {
    for (std::size_t v = 0; v < n; ++v) fiber[static_cast<Eigen::Index>(v)] = st.amplitudes()[static_cast<Eigen::Index>(idx(v))];
    if (!op(fiber, fixed_key)) return;
    for (std::size_t v = 0; v < n; ++v) st.amplitudes()[static_cast<Eigen::Index>(idx(v))] = fiber[static_cast<Eigen::Index>(v)];
  };
  switch (reg) {
    case Register::key:
      for (std::size_t a = 0; a < st.n_items(); ++a)
        for (std::uint64_t r = 0; r < st.key_dim(); ++r)
          run([&](std::size_t v) { return st.index(v, a, r); }, 0);
      break;
    case Register::item:
      for (std::uint64_t s = 0; s < st.key_dim(); ++s)
        for (std::uint64_t r = 0; r < st.key_dim(); ++r)
          run([&](std::size_t v) { return st.index(s, v, r); }, s);
      break;
    case Register::result:
      for (std::uint64_t s = 0; s < st.key_dim(); ++s)
        for (std::size_t a = 0; a < st.n_items(); ++a)
          run([&](std::size_t v) { return st.index(s, a, v); }, s);
      break;
  }
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void walsh_hadamard(ComplexVector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  const double scale = 1.0 / std::sqrt(2.0);
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const Complex x = v[static_cast<Eigen::Index>(j)];
        const Complex y = v[static_cast<Eigen::Index>(j + len)];
        v[static_cast<Eigen::Index>(j)] = (x + y) * scale;
        v[static_cast<Eigen::Index>(j + len)] = (x - y) * scale;
      }
    }
  }
}

/// Reflection I - 2 w w^* with w = (e_0 - u) / ||e_0 - u||.
inline void prepare_uniform(ComplexVector& v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() == 1) return;
  ComplexVector w = ComplexVector::Constant(v.size(), -1.0 / std::sqrt(n));
  w[0] += 1.0;
  w /= w.norm();
  v -= 2.0 * w * w.dot(v);
}

inline void check_unitary(const ComplexMatrix& m, std::size_t dim) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
    throw std::invalid_argument("custom step must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  const double err = (m.adjoint() * m - ComplexMatrix::Identity(m.rows(), m.cols())).norm();
  if (err > 1e-8) throw std::invalid_argument("custom step is not unitary (||U*U - I|| = " + std::to_string(err) + ")");
}

}  // namespace detail

inline void apply_adversary_step(SearchState& st, const AdversaryStep& spec) {
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, step::Identity>) {
        } else if constexpr (std::is_same_v<S, step::HadamardAll>) {
          if (!detail::is_power_of_two(st.register_dim(s.reg))) {
            throw std::invalid_argument("Hadamard needs a power-of-two register");
          }
          detail::for_each_fiber(st, s.reg, [](ComplexVector& v, std::uint64_t) {
            detail::walsh_hadamard(v);
            return true;
          });
        } else if constexpr (std::is_same_v<S, step::PrepareUniform>) {
          detail::for_each_fiber(st, s.reg, [](ComplexVector& v, std::uint64_t) {
            detail::prepare_uniform(v);
            return true;
          });
        } else if constexpr (std::is_same_v<S, step::Diffusion>) {
          detail::for_each_fiber(st, Register::item, [&](ComplexVector& v, std::uint64_t key) {
            if (s.key && *s.key != key) return false;
            const Complex mean = v.mean();
            v = (2.0 * mean) * ComplexVector::Ones(v.size()) - v;
            return true;
          });
        } else if constexpr (std::is_same_v<S, step::PhaseFlipNonzero>) {
          st.for_each([](std::uint64_t, std::size_t, std::uint64_t r, Complex& amp) {
            if (r != 0) amp = -amp;
          });
        } else if constexpr (std::is_same_v<S, step::SwapKeyResult>) {
          for (std::uint64_t a_s = 0; a_s < st.key_dim(); ++a_s)
            for (std::size_t a = 0; a < st.n_items(); ++a)
              for (std::uint64_t r = a_s + 1; r < st.key_dim(); ++r) std::swap(st.at(a_s, a, r), st.at(r, a, a_s));
        } else if constexpr (std::is_same_v<S, step::XorRegister>) {
          if (s.mask >= st.register_dim(s.reg)) throw std::invalid_argument("xor mask exceeds register");
          if (s.reg == Register::item && !detail::is_power_of_two(st.n_items())) {
            throw std::invalid_argument("xor on the item register needs N a power of two");
          }
          detail::for_each_fiber(st, s.reg, [&](ComplexVector& v, std::uint64_t) {
            ComplexVector out(v.size());
            for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(static_cast<std::uint64_t>(i) ^ s.mask)] = v[i];
            v = out;
            return true;
          });
        } else if constexpr (std::is_same_v<S, step::CustomMatrix>) {
          detail::check_unitary(s.matrix, st.register_dim(s.reg));
          detail::for_each_fiber(st, s.reg, [&](ComplexVector& v, std::uint64_t) {
            v = s.matrix * v;
            return true;
          });
        }
      },
      spec);
}

/// Norm of the projection onto key-register value s_k (k is 1-based).
inline double key_overlap(const SearchState& st, std::size_t k, const SearchInstance& in) {
  if (k < 1 || k > in.rounds) throw std::out_of_range("key index must lie in [1, K]");
  const std::uint64_t s = in.keys[k - 1];
  if (s >= st.key_dim()) throw std::invalid_argument("key outside the state's key register");
  double total = 0.0;
  for (std::size_t a = 0; a < st.n_items(); ++a)
    for (std::uint64_t r = 0; r < st.key_dim(); ++r) total += std::norm(st.at(s, a, r));
  return std::sqrt(total);
}

/// Outcome probabilities of measuring one register.
inline std::vector<double> register_distribution(const SearchState& st, Register reg) {
  std::vector<double> p(st.register_dim(reg), 0.0);
  for (std::uint64_t s = 0; s < st.key_dim(); ++s)
    for (std::size_t a = 0; a < st.n_items(); ++a)
      for (std::uint64_t r = 0; r < st.key_dim(); ++r) {
        const double w = std::norm(st.at(s, a, r));
        const std::size_t v = reg == Register::key ? s : reg == Register::item ? a : r;
        p[v] += w;
      }
  return p;
}

struct ChainedGroverResult {
  double success_prob = 0.0;      // P(held key == s_K) after K - 1 rounds
  std::uint64_t oracle_queries = 0;
  std::size_t grover_iterations = 0;  // per round
  std::vector<double> round_success;  // P(held key == s_{i+1}) after round i
};

/// Canonical chained adversary. Each of the K - 1 rounds starts from
/// |held key>|0>|0>, spreads the item register uniformly, runs Grover
/// iterations (oracle, phase flip on nonzero result, oracle, diffusion),
/// reads the oracle once more and measures the result register. A nonzero
/// outcome becomes the held key. `per_round_queries` q buys (q - 1) / 2
/// iterations plus the reading query; q = 0 skips the round. Measurement
/// outcomes are branched exactly, so the result is a probability, not a
/// Monte Carlo estimate.
inline ChainedGroverResult run_chained_grover(const SearchInstance& in, std::size_t per_round_queries,
                                              std::size_t cap = kDefaultAmplitudeCap) {
  validate_search_instance(in);
  SearchState st = SearchState::for_instance(in, cap);
  ChainedGroverResult out;
  const bool read = per_round_queries >= 1;
  const std::size_t iters = read ? (per_round_queries - 1) / 2 : 0;
  out.grover_iterations = iters;

  std::map<std::uint64_t, double> branches{{in.keys.front(), 1.0}};
  for (std::size_t round = 0; round + 1 < in.rounds; ++round) {
    std::map<std::uint64_t, double> next;
    for (const auto& [held, weight] : branches) {
      if (!read) {
        next[held] += weight;
        continue;
      }
      st.set_basis(held, 0, 0);
      apply_adversary_step(st, step::PrepareUniform{Register::item});
      for (std::size_t t = 0; t < iters; ++t) {
        apply_search_oracle(st, in);
        apply_adversary_step(st, step::PhaseFlipNonzero{});
        apply_search_oracle(st, in);
        apply_adversary_step(st, step::Diffusion{});
      }
      apply_search_oracle(st, in);
      const auto dist = register_distribution(st, Register::result);
      for (std::uint64_t r = 0; r < dist.size(); ++r) {
        if (dist[r] <= 0.0) continue;
        next[r == 0 ? held : r] += weight * dist[r];
      }
    }
    branches = std::move(next);
    const auto it = branches.find(in.keys[round + 1]);
    out.round_success.push_back(it == branches.end() ? 0.0 : it->second);
  }
  const auto it = branches.find(in.keys.back());
  out.success_prob = it == branches.end() ? 0.0 : it->second;
  if (in.rounds == 1) out.success_prob = 1.0;
  // Query count of one branch; every branch makes the same number.
  out.oracle_queries = read ? static_cast<std::uint64_t>(in.rounds - 1) * (2 * iters + 1) : 0;
  return out;
}

}  // namespace qmm
