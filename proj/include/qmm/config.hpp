#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qmm/ledger.hpp"

namespace qmm {

using Json = nlohmann::json;

/// Raised for malformed configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Strict view of one JSON object: unknown keys are rejected up front and
/// type errors name the full key path.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw ConfigError("unknown config key '" + join(k) + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const Json& raw(const char* key) const { return j_.at(key); }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const char* key) const {
    if (!has(key)) throw ConfigError("missing config key '" + join(key) + "'");
    return as<T>(key);
  }

  template <class T>
  T as(const char* key) const {
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<std::int64_t>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + join(key) + "' has the wrong type");
    }
  }

  StrictObject child(const char* key, std::initializer_list<const char*> allowed) const {
    return StrictObject(j_.at(key), join(key), allowed);
  }

 private:
  std::string label() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }
  const Json& j_;
  std::string path_;
};

}  // namespace detail

struct InstanceSpec {
  std::string kind = "affine";  // affine | symmetric_affine | hard
  std::size_t n_functions = 8;
  std::size_t dim = 2;
  double lipschitz = 1.0;
  double smoothness = 1.0;  // hard instances only
  double radius = 1.0;
  std::uint64_t seed = 1;
  std::size_t dim_cap = 20;  // hard instances only
};

struct SamplerSpec {
  bool emulate_failure = false;
  bool stochastic_rounds = false;
};

struct SolveSpec {
  std::string method = "prox_outer";  // subgradient | prox_outer
  std::string arm = "quantum";        // quantum | classical
  std::string strategy = "simple_proximal";
  double epsilon = 0.1;
  std::string start = "origin";  // origin | e1 (R e_1)
  std::vector<double> start_point;
  std::uint64_t outer_budget = 0;  // 0: ceil(4 R / r)
};

struct BenchSamplerSpec {
  std::vector<std::size_t> n_values{64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::size_t t_samples = 64;
  double delta = 0.01;
  double epsilon = 0.1;
  std::size_t dim = 4;
  std::size_t chi2_n = 64;
  std::size_t chi2_draws = 100000;
};

struct BenchScalingSpec {
  std::vector<std::size_t> n_values{64, 256, 1024, 4096};
  double epsilon = 0.2;
  std::size_t dim = 2;
  std::uint64_t outer_budget = 0;
};

struct HardnessSpec {
  std::size_t chain_len = 3;
  std::vector<std::size_t> n_values{8, 16, 32};
  double ell = 1.0;
  std::size_t dim = 20;
  std::uint64_t budget = 200;
  std::string arm = "subgradient";  // subgradient | random_guess
};

struct SearchSimSpec {
  std::size_t n_items = 8;
  std::vector<std::size_t> rounds{1, 2, 3};  // search rounds (K - 1 keys to find)
  std::size_t key_bits = 4;
  std::vector<std::size_t> per_round_queries{1, 3, 5};
  std::size_t amplitude_cap = std::size_t{1} << 20;
};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::size_t jobs = 1;
  InstanceSpec instance;
  SolveSpec solve;
  SamplerSpec sampler;
  CostConstants constants;
  BenchSamplerSpec bench_sampler;
  BenchScalingSpec bench_scaling;
  HardnessSpec hardness;
  SearchSimSpec searchsim;
  std::string out_dir;
  Json echo = Json::object();
};

namespace detail {

template <class T>
std::vector<T> read_list(const StrictObject& o, const char* key, std::vector<T> fallback) {
  if (!o.has(key)) return fallback;
  const Json& v = o.raw(key);
  if (!v.is_array() || v.empty()) throw ConfigError("config key '" + o.join(key) + "' must be a nonempty array");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
        throw ConfigError("config key '" + o.join(key) + "' must hold nonnegative integers");
      }
    } else if (!e.is_number()) {
      throw ConfigError("config key '" + o.join(key) + "' must hold numbers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

inline void require_choice(const StrictObject& o, const char* key, const std::string& v,
                           std::initializer_list<const char*> choices) {
  for (const char* c : choices) {
    if (v == c) return;
  }
  std::string msg = "config key '" + o.join(key) + "' must be one of";
  for (const char* c : choices) msg += std::string(" ") + c;
  throw ConfigError(msg + " (got '" + v + "')");
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  using detail::StrictObject;
  ExperimentConfig c;
  StrictObject root(j, "",
                    {"command", "seed", "trials", "jobs", "instance", "solve", "sampler", "constants", "bench_sampler",
                     "bench_scaling", "hardness", "searchsim", "out_dir", "$schema"});
  c.command = root.get<std::string>("command", "");
  c.seed = root.get<std::uint64_t>("seed", c.seed);
  c.trials = root.get<std::size_t>("trials", c.trials);
  c.jobs = root.get<std::size_t>("jobs", c.jobs);
  c.out_dir = root.get<std::string>("out_dir", "");
  if (c.trials < 1) throw ConfigError("config key 'trials' must be >= 1");

  if (root.has("instance")) {
    auto o = root.child("instance", {"kind", "n_functions", "dim", "lipschitz", "smoothness", "radius", "seed", "dim_cap"});
    auto& s = c.instance;
    s.kind = o.get<std::string>("kind", s.kind);
    detail::require_choice(o, "kind", s.kind, {"affine", "symmetric_affine", "hard"});
    s.n_functions = o.get<std::size_t>("n_functions", s.n_functions);
    s.dim = o.get<std::size_t>("dim", s.dim);
    s.lipschitz = o.get<double>("lipschitz", s.lipschitz);
    s.smoothness = o.get<double>("smoothness", s.smoothness);
    s.radius = o.get<double>("radius", s.radius);
    s.seed = o.get<std::uint64_t>("seed", s.seed);
    s.dim_cap = o.get<std::size_t>("dim_cap", s.dim_cap);
  }
  if (root.has("solve")) {
    auto o = root.child("solve", {"method", "arm", "strategy", "epsilon", "start", "outer_budget"});
    auto& s = c.solve;
    s.method = o.get<std::string>("method", s.method);
    detail::require_choice(o, "method", s.method, {"subgradient", "prox_outer"});
    s.arm = o.get<std::string>("arm", s.arm);
    detail::require_choice(o, "arm", s.arm, {"quantum", "classical"});
    s.strategy = o.get<std::string>("strategy", s.strategy);
    detail::require_choice(o, "strategy", s.strategy, {"simple_proximal"});
    s.epsilon = o.get<double>("epsilon", s.epsilon);
    if (!(s.epsilon > 0.0)) throw ConfigError("config key 'solve.epsilon' must be positive");
    if (o.has("start")) {
      if (o.raw("start").is_array()) {
        s.start = "point";
        s.start_point = detail::read_list<double>(o, "start", {});
      } else {
        s.start = o.as<std::string>("start");
        detail::require_choice(o, "start", s.start, {"origin", "e1"});
      }
    }
    s.outer_budget = o.get<std::uint64_t>("outer_budget", s.outer_budget);
  }
  if (root.has("sampler")) {
    auto o = root.child("sampler", {"emulate_failure", "stochastic_rounds"});
    c.sampler.emulate_failure = o.get<bool>("emulate_failure", false);
    c.sampler.stochastic_rounds = o.get<bool>("stochastic_rounds", false);
  }
  if (root.has("constants")) {
    auto o = root.child("constants", {"c_topk", "c_amp", "c_iters", "c_domain", "c_delta"});
    auto& k = c.constants;
    k.c_topk = o.get<double>("c_topk", k.c_topk);
    k.c_amp = o.get<double>("c_amp", k.c_amp);
    k.c_iters = o.get<double>("c_iters", k.c_iters);
    k.c_domain = o.get<double>("c_domain", k.c_domain);
    k.c_delta = o.get<double>("c_delta", k.c_delta);
    for (double v : {k.c_topk, k.c_amp, k.c_iters, k.c_domain, k.c_delta}) {
      if (!(v > 0.0)) throw ConfigError("cost constants must be positive");
    }
  }
  if (root.has("bench_sampler")) {
    auto o = root.child("bench_sampler", {"n_values", "t_samples", "delta", "epsilon", "dim", "chi2_n", "chi2_draws"});
    auto& s = c.bench_sampler;
    s.n_values = detail::read_list<std::size_t>(o, "n_values", s.n_values);
    s.t_samples = o.get<std::size_t>("t_samples", s.t_samples);
    s.delta = o.get<double>("delta", s.delta);
    s.epsilon = o.get<double>("epsilon", s.epsilon);
    s.dim = o.get<std::size_t>("dim", s.dim);
    s.chi2_n = o.get<std::size_t>("chi2_n", s.chi2_n);
    s.chi2_draws = o.get<std::size_t>("chi2_draws", s.chi2_draws);
  }
  if (root.has("bench_scaling")) {
    auto o = root.child("bench_scaling", {"n_values", "epsilon", "dim", "outer_budget"});
    auto& s = c.bench_scaling;
    s.n_values = detail::read_list<std::size_t>(o, "n_values", s.n_values);
    s.epsilon = o.get<double>("epsilon", s.epsilon);
    s.dim = o.get<std::size_t>("dim", s.dim);
    s.outer_budget = o.get<std::uint64_t>("outer_budget", s.outer_budget);
  }
  if (root.has("hardness")) {
    auto o = root.child("hardness", {"chain_len", "n_values", "ell", "dim", "budget", "arm"});
    auto& s = c.hardness;
    s.chain_len = o.get<std::size_t>("chain_len", s.chain_len);
    s.n_values = detail::read_list<std::size_t>(o, "n_values", s.n_values);
    s.ell = o.get<double>("ell", s.ell);
    s.dim = o.get<std::size_t>("dim", s.dim);
    s.budget = o.get<std::uint64_t>("budget", s.budget);
    s.arm = o.get<std::string>("arm", s.arm);
    detail::require_choice(o, "arm", s.arm, {"subgradient", "random_guess"});
  }
  if (root.has("searchsim")) {
    auto o = root.child("searchsim", {"n_items", "rounds", "key_bits", "per_round_queries", "amplitude_cap"});
    auto& s = c.searchsim;
    s.n_items = o.get<std::size_t>("n_items", s.n_items);
    s.rounds = detail::read_list<std::size_t>(o, "rounds", s.rounds);
    s.key_bits = o.get<std::size_t>("key_bits", s.key_bits);
    s.per_round_queries = detail::read_list<std::size_t>(o, "per_round_queries", s.per_round_queries);
    s.amplitude_cap = o.get<std::size_t>("amplitude_cap", s.amplitude_cap);
  }
  c.echo = j;
  return c;
}

/// Reads and parses a config file. A missing file throws std::ios_base::failure.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace qmm
