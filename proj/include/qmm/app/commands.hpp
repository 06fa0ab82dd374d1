#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "qmm/config.hpp"
#include "qmm/hardness.hpp"
#include "qmm/qsampler.hpp"
#include "qmm/searchsim.hpp"
#include "qmm/solver.hpp"
#include "qmm/version.hpp"

namespace qmm::app {

inline constexpr const char* kOutDirEnv = "QMM_OUT_DIR";

enum ExitCode : int { ok = 0, failure = 1, missing_input = 2, bad_config = 3 };

/// Command-line overrides; unset fields fall back to the config file.
struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> jobs;
};

/// Runs fn(0..n-1) on `jobs` workers; results come back in trial order.
template <class Result, class Fn>
std::vector<Result> run_trials(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::optional<Result>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<Result> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace detail {

inline std::filesystem::path resolve_out_dir(const CliOptions& cli, const ExperimentConfig& cfg) {
  std::string dir = "out";
  if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
  if (!cfg.out_dir.empty()) dir = cfg.out_dir;
  if (cli.out_dir) dir = *cli.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + p.string() + "'");
  out << content;
}

/// Shortest round-trippable decimal form, stable across runs.
inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Least-squares slope of log(y) on log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

struct GoodnessOfFit {
  double chi2 = 0.0;
  std::size_t dof = 0;
  double p_value = 0.0;
  double tv_distance = 0.0;
};

/// Pearson chi-square (cells with expected count < 5 pooled) and total
/// variation between empirical counts and p.
inline GoodnessOfFit goodness_of_fit(const std::vector<std::size_t>& counts, const Vector& p) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  GoodnessOfFit g;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * p[static_cast<Eigen::Index>(i)];
    const double o = static_cast<double>(counts[i]);
    g.tv_distance += 0.5 * std::abs(o / n - p[static_cast<Eigen::Index>(i)]);
    if (e < 5.0) {
      pooled_obs += o;
      pooled_exp += e;
      continue;
    }
    g.chi2 += (o - e) * (o - e) / e;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    g.chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  g.dof = cells > 1 ? cells - 1 : 1;
  boost::math::chi_squared dist(static_cast<double>(g.dof));
  g.p_value = boost::math::cdf(boost::math::complement(dist, g.chi2));
  return g;
}

/// Affine family whose center values are moderately spread: f_i(0) = b_i.
inline FunctionFamily bench_family(std::uint64_t seed, std::size_t n, std::size_t d) {
  return make_affine_family(seed, n, d, 1.0, 1.0);
}

/// Skewed center values for exactness checks: f_i(0) = eps' * 3 * (i / N)^2 * ln N.
inline FunctionFamily skewed_family(std::size_t n, double epsilon) {
  const double eps_prime = epsilon / (2.0 * std::log(static_cast<double>(n)));
  std::vector<Vector> slopes;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < n; ++i) {
    Vector a = Vector::Zero(1);
    a[0] = 1.0;
    slopes.push_back(a);
    const double u = static_cast<double>(i) / static_cast<double>(n);
    offsets.push_back(eps_prime * 3.0 * u * u * std::log(static_cast<double>(n)));
  }
  return make_affine_family(std::move(slopes), std::move(offsets), 1.0, "skewed-affine");
}

}  // namespace detail

struct SamplerBenchRow {
  std::size_t n = 0;
  std::string arm;
  std::size_t trial = 0;
  std::uint64_t charged = 0;
  double success_prob = 1.0;
};

/// One quantum or classical sampling batch; shared by the CLI bench and tests.
inline SamplerBenchRow sampler_bench_row(const BenchSamplerSpec& spec, const CostConstants& constants,
                                         std::uint64_t seed, std::size_t n, bool quantum, std::size_t trial) {
  const std::uint64_t call = (static_cast<std::uint64_t>(n) << 20) + trial;
  const auto family = detail::bench_family(stream_key(seed, call, Stream::instance), n, spec.dim);
  const Vector center = Vector::Zero(static_cast<Eigen::Index>(spec.dim));
  const auto ctx = SmoothingContext::make(family, spec.epsilon, 0.0, center);
  QueryLedger ledger(constants);
  Engine rng = make_stream(seed, call, Stream::sampling);
  SamplerBenchRow row;
  row.n = n;
  row.arm = quantum ? "quantum" : "classical";
  row.trial = trial;
  const SampleBatch batch = quantum ? sample_batch(family, center, spec.t_samples, spec.delta, ctx, ledger, rng)
                                    : classical_sample_batch(family, center, spec.t_samples, ctx, ledger, rng);
  row.charged = batch.charged;
  row.success_prob = batch.success_prob;
  return row;
}

inline int cmd_solve(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out, std::ostream& err) {
  const auto dir = detail::resolve_out_dir(cli, cfg);
  std::ostringstream warn;
  auto reports = run_trials<SolveReport>(cfg.trials, cfg.jobs, [&](std::size_t t) {
    std::ostringstream local;
    auto rep = solve(cfg, t, t == 0 ? &local : nullptr);
    if (t == 0) warn << local.str();
    return rep;
  });
  err << warn.str();
  Json j;
  j["version"] = kVersion;
  j["command"] = "solve";
  j["seed"] = cfg.seed;
  j["reports"] = Json::array();
  std::size_t within = 0;
  for (const auto& r : reports) {
    j["reports"].push_back(r.to_json(true));
    if (r.suboptimality_estimate && *r.suboptimality_estimate <= cfg.solve.epsilon) ++within;
  }
  detail::write_file(dir / "solve_report.json", j.dump(2) + "\n");
  const auto& r0 = reports.front();
  out << "solve method=" << r0.method << " arm=" << r0.arm << " trials=" << reports.size()
      << " f_max=" << detail::fmt(r0.f_max) << " charged=" << r0.ledger_snapshot.quantum_charged();
  if (r0.suboptimality_estimate) out << " within_eps=" << within << "/" << reports.size();
  out << " report=" << (dir / "solve_report.json").string() << "\n";
  return ok;
}

inline int cmd_bench_sampler(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out, std::ostream&) {
  const auto dir = detail::resolve_out_dir(cli, cfg);
  const auto& spec = cfg.bench_sampler;
  struct Job {
    std::size_t n;
    bool quantum;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto n : spec.n_values)
    for (const bool q : {true, false})
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({n, q, t});
  auto rows = run_trials<SamplerBenchRow>(jobs.size(), cfg.jobs, [&](std::size_t i) {
    return sampler_bench_row(spec, cfg.constants, cfg.seed, jobs[i].n, jobs[i].quantum, jobs[i].trial);
  });

  std::ostringstream csv;
  csv << "n,arm,trial,t_samples,charged,success_prob,version\r\n";
  for (const auto& r : rows) {
    csv << r.n << ',' << r.arm << ',' << r.trial << ',' << spec.t_samples << ',' << r.charged << ','
        << detail::fmt(r.success_prob) << ',' << kVersion << "\r\n";
  }
  detail::write_file(dir / "bench_sampler.csv", csv.str());

  Json summary;
  summary["version"] = kVersion;
  for (const char* arm : {"quantum", "classical"}) {
    std::vector<double> xs, ys;
    for (const auto n : spec.n_values) {
      double sum = 0.0;
      std::size_t c = 0;
      for (const auto& r : rows) {
        if (r.n == n && r.arm == arm) {
          sum += static_cast<double>(r.charged);
          ++c;
        }
      }
      xs.push_back(static_cast<double>(n));
      ys.push_back(sum / static_cast<double>(c));
    }
    summary["slopes"][arm] = spec.n_values.size() >= 2 ? detail::loglog_slope(xs, ys) : 0.0;
  }

  const auto skew = detail::skewed_family(spec.chi2_n, spec.epsilon);
  const Vector center = Vector::Zero(1);
  const auto ctx = SmoothingContext::make(skew, spec.epsilon, 0.0, center);
  QueryLedger ledger(cfg.constants);
  Engine rng = make_stream(cfg.seed, 0, Stream::sampling);
  const auto batch = sample_batch(skew, center, spec.chi2_draws, spec.delta, ctx, ledger, rng);
  std::vector<std::size_t> counts(spec.chi2_n, 0);
  for (const auto i : batch.indices) ++counts[i];
  const Vector p = softmax(skew.values(center), ctx.epsilon_prime);
  const auto gof = detail::goodness_of_fit(counts, p);
  summary["exactness"] = {{"n", spec.chi2_n},         {"draws", spec.chi2_draws}, {"chi2", gof.chi2},
                          {"dof", gof.dof},            {"p_value", gof.p_value},  {"tv_distance", gof.tv_distance}};
  detail::write_file(dir / "bench_sampler_summary.json", summary.dump(2) + "\n");
  out << "bench-sampler rows=" << rows.size() << " slope_quantum=" << detail::fmt(summary["slopes"]["quantum"].get<double>())
      << " slope_classical=" << detail::fmt(summary["slopes"]["classical"].get<double>())
      << " chi2_p=" << detail::fmt(gof.p_value) << " tv=" << detail::fmt(gof.tv_distance) << "\n";
  return ok;
}

inline int cmd_bench_scaling(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out, std::ostream&) {
  const auto dir = detail::resolve_out_dir(cli, cfg);
  const auto& spec = cfg.bench_scaling;
  struct Job {
    std::size_t n;
    bool quantum;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto n : spec.n_values)
    for (const bool q : {true, false})
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({n, q, t});
  auto reports = run_trials<SolveReport>(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& job = jobs[i];
    const std::uint64_t call = (static_cast<std::uint64_t>(job.n) << 20) + job.trial;
    const auto family = detail::bench_family(stream_key(cfg.seed, call, Stream::instance), job.n, spec.dim);
    QueryLedger ledger(cfg.constants);
    ProxOuterOptions opts;
    opts.arm = job.quantum ? SamplingArm::quantum : SamplingArm::classical;
    opts.outer_budget = spec.outer_budget;
    opts.seed = stream_key(cfg.seed, call, Stream::trial);
    return prox_outer(family, Vector::Zero(static_cast<Eigen::Index>(spec.dim)), 1.0, spec.epsilon, opts, ledger);
  });
  std::ostringstream csv;
  csv << "n,arm,trial,broo_calls,inner_iterations,sampling_charge,total_charge,f_max,version\r\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = reports[i];
    csv << jobs[i].n << ',' << r.arm << ',' << jobs[i].trial << ',' << r.iterations << ',' << r.inner_iterations << ','
        << r.sampling_charge << ',' << r.ledger_snapshot.quantum_charged() << ',' << detail::fmt(r.f_max) << ','
        << kVersion << "\r\n";
  }
  detail::write_file(dir / "bench_scaling.csv", csv.str());
  out << "bench-scaling rows=" << jobs.size() << " csv=" << (dir / "bench_scaling.csv").string() << "\n";
  return ok;
}

inline int cmd_hardness(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out, std::ostream& err) {
  const auto dir = detail::resolve_out_dir(cli, cfg);
  const auto& spec = cfg.hardness;
  for (const auto n : spec.n_values) {
    const double need = required_dimension(spec.chain_len, n);
    if (static_cast<double>(spec.dim) < need) {
      err << "warning: hardness dim d=" << spec.dim << " is below the required " << need << " for N=" << n
          << "; results are illustrative\n";
    }
  }
  struct Job {
    std::size_t n;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto n : spec.n_values)
    for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({n, t});
  const auto arm = spec.arm == "random_guess" ? ProgressArm::random_guess : ProgressArm::subgradient;
  auto traces = run_trials<ProgressTrace>(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t call = (static_cast<std::uint64_t>(jobs[i].n) << 20) + jobs[i].trial;
    const auto inst = make_shuffled_instance(spec.chain_len, jobs[i].n, spec.ell, spec.dim,
                                             stream_key(cfg.seed, call, Stream::instance));
    QueryLedger ledger(cfg.constants);
    Engine rng = make_stream(cfg.seed, call, Stream::guessing);
    return run_progress_experiment(arm, inst, spec.budget, ledger, rng);
  });
  std::ostringstream summary;
  summary << "n,trial,arm,queries,max_prog,first_query_at_max,final_charge,version\r\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& tr = traces[i];
    std::ostringstream csv;
    tr.write_csv(csv);
    detail::write_file(dir / ("hardness_n" + std::to_string(jobs[i].n) + "_t" + std::to_string(jobs[i].trial) + ".csv"),
                       csv.str());
    std::uint64_t first = 0;
    for (const auto& r : tr.records) {
      if (r.prog == tr.max_prog) {
        first = r.query_index;
        break;
      }
    }
    summary << jobs[i].n << ',' << jobs[i].trial << ',' << spec.arm << ',' << tr.records.size() << ',' << tr.max_prog
            << ',' << first << ',' << (tr.records.empty() ? 0 : tr.records.back().cumulative_charge) << ','
            << kVersion << "\r\n";
  }
  detail::write_file(dir / "hardness_summary.csv", summary.str());
  out << "hardness traces=" << traces.size() << " summary=" << (dir / "hardness_summary.csv").string() << "\n";
  return ok;
}

inline int cmd_searchsim(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out, std::ostream& err) {
  const auto dir = detail::resolve_out_dir(cli, cfg);
  const auto& spec = cfg.searchsim;
  const double amps = std::ldexp(1.0, static_cast<int>(2 * spec.key_bits)) * static_cast<double>(spec.n_items);
  if (amps > static_cast<double>(spec.amplitude_cap)) {
    err << "error: searchsim needs " << amps << " amplitudes (" << amps * 16.0 / 1048576.0
        << " MiB), above the cap of " << spec.amplitude_cap << "\n";
    return bad_config;
  }
  struct Job {
    std::size_t rounds;
    std::size_t queries;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto k : spec.rounds)
    for (const auto q : spec.per_round_queries)
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({k, q, t});
  std::ostringstream warn;
  struct Row {
    std::uint64_t seed;
    ChainedGroverResult result;
  };
  auto rows = run_trials<Row>(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& job = jobs[i];
    const std::uint64_t seed = stream_key(cfg.seed, job.trial, Stream::instance);
    const auto inst = make_search_instance(spec.n_items, job.rounds + 1, spec.key_bits, seed);
    return Row{seed, run_chained_grover(inst, job.queries, spec.amplitude_cap)};
  });
  if (!spec.rounds.empty() && spec.n_items > 1 &&
      static_cast<double>(spec.key_bits) <
          10.0 * static_cast<double>(*std::max_element(spec.rounds.begin(), spec.rounds.end()) + 1) *
              std::log(static_cast<double>(spec.n_items))) {
    err << "warning: key_bits d=" << spec.key_bits << " is below 10 K ln N; results are illustrative\n";
  }
  std::ostringstream csv;
  csv << "K,rounds,d,N,per_round_queries,queries,success_prob,seed,version\r\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    csv << jobs[i].rounds + 1 << ',' << jobs[i].rounds << ',' << spec.key_bits << ',' << spec.n_items << ','
        << jobs[i].queries << ',' << rows[i].result.oracle_queries << ',' << detail::fmt(rows[i].result.success_prob)
        << ',' << rows[i].seed << ',' << kVersion << "\r\n";
  }
  detail::write_file(dir / "searchsim.csv", csv.str());
  out << "searchsim rows=" << jobs.size() << " csv=" << (dir / "searchsim.csv").string() << "\n";
  return ok;
}

/// Loads the config, applies CLI overrides and runs `command`.
inline int run_command(const std::string& command, const CliOptions& cli, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  if (!cli.config_path.empty()) {
    if (!std::filesystem::exists(cli.config_path)) {
      err << "error: config file '" << cli.config_path << "' not found\n";
      return missing_input;
    }
    try {
      cfg = load_config(cli.config_path);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return bad_config;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return missing_input;
    }
  }
  if (!cfg.command.empty() && cfg.command != command) {
    err << "error: config is for command '" << cfg.command << "', not '" << command << "'\n";
    return bad_config;
  }
  if (cli.seed) cfg.seed = *cli.seed;
  if (cli.trials) cfg.trials = *cli.trials;
  if (cli.jobs) cfg.jobs = *cli.jobs;
  if (cfg.trials < 1) {
    err << "error: --trials must be >= 1\n";
    return bad_config;
  }
  cfg.echo["seed"] = cfg.seed;
  cfg.echo["trials"] = cfg.trials;
  cfg.echo.erase("jobs");
  try {
    if (command == "solve") return cmd_solve(cfg, cli, out, err);
    if (command == "bench-sampler") return cmd_bench_sampler(cfg, cli, out, err);
    if (command == "bench-scaling") return cmd_bench_scaling(cfg, cli, out, err);
    if (command == "hardness") return cmd_hardness(cfg, cli, out, err);
    if (command == "searchsim") return cmd_searchsim(cfg, cli, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return bad_config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return failure;
  }
  err << "error: unknown command '" << command << "'\n";
  return missing_input;
}

}  // namespace qmm::app
