#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qmm/app/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Minimax optimization harness with an emulated quantum query-cost model.\n"
               "Logarithms are natural throughout (eps' = eps / (2 ln N))."};
  app.require_subcommand(1);
  app.set_version_flag("--version", qmm::kVersion);

  qmm::app::CliOptions opts;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t trials = 0;
  std::size_t jobs = 0;

  const char* commands[][2] = {
      {"solve", "minimize F_max with the subgradient baseline or the BROO outer loop"},
      {"bench-sampler", "sweep N and record sampling charges for both arms"},
      {"bench-scaling", "run the outer loop on both arms across N"},
      {"hardness", "progress experiments on shuffled zero-chain instances"},
      {"searchsim", "chained Grover sweeps on the multi-round search simulator"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", opts.config_path, "JSON config file (schema in docs/config.schema.json)");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out-dir", out_dir,
                    std::string("output directory (default: config out_dir, then $") + qmm::app::kOutDirEnv +
                        ", then ./out)");
    sub->add_option("--trials", trials, "number of trials");
    sub->add_option("--jobs", jobs, "worker threads; outputs do not depend on it");
  }
  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--out-dir")) opts.out_dir = out_dir;
  if (sub->count("--trials")) opts.trials = trials;
  if (sub->count("--jobs")) opts.jobs = jobs;
  return qmm::app::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
