// Command-line front end: run single experiments, sweep grids, verify the
// library's analytic invariants, and export synthetic datasets.
//
// Exit codes: 0 success, 1 numerical abort, 2 bad config/usage, 3 failed checks.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swd/swd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitConfig = 2;
constexpr int kExitChecksFailed = 3;

int cmd_run(const std::string& config_path, const std::string& out_override) {
  swd::RunConfig cfg = swd::load_run_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.out_dir.empty()) cfg.out_dir = "run_out";
  const swd::RunResult res = swd::run_to_dir(cfg, cfg.out_dir);
  std::printf("steps=%lld  final_train_loss=%s  rho=%s\n", res.steps,
              swd::format_double(res.final_train_loss).c_str(),
              swd::format_double(res.rho).c_str());
  if (res.stability && !res.aborted)
    std::printf("decay coefficients: %s\n", res.stability->stable ? "stable" : "UNSTABLE");
  std::printf("wrote %s/{log.csv,summary.json,config.echo.json}\n", cfg.out_dir.c_str());
  if (res.aborted) {
    std::fprintf(stderr, "aborted at step %lld: %s\n", res.abort_step, res.abort_reason.c_str());
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const std::string& out_dir, unsigned jobs) {
  const swd::RunConfig base = swd::load_run_config(config_path);
  const swd::SweepGrid grid = swd::load_sweep_grid(grid_path);
  const swd::SweepResult res = swd::sweep(base, grid, out_dir, jobs);
  int ok = 0, bad = 0;
  for (const swd::SweepCell& c : res.cells) (c.status == "ok" ? ok : bad)++;
  std::printf("%d/%zu cells ok", ok, res.cells.size());
  if (bad > 0) std::printf(" (%d flagged)", bad);
  std::printf("; wrote %s/summary.csv\n", out_dir.c_str());
  return kExitOk;  // flagged cells are rows in the summary, not a sweep failure
}

int cmd_verify(const std::string& suite) {
  const std::vector<swd::CheckResult> results = swd::run_verify(suite);
  return swd::print_verify_report(results, std::cout) ? kExitOk : kExitChecksFailed;
}

int cmd_gen_data(const std::string& name, std::uint64_t seed, const std::string& out,
                 std::size_t n, double noise, std::size_t dim, double separation,
                 double spread) {
  swd::SyntheticDataset ds;
  if (name == "two_moons") {
    ds = swd::make_two_moons(n, noise, seed);
  } else if (name == "blobs") {
    std::vector<swd::ParamVector> centers(2, swd::ParamVector(dim, 0.0));
    centers[0][0] = -separation / 2.0;
    centers[1][0] = separation / 2.0;
    ds = swd::make_blobs(n, centers, spread, seed);
  } else {
    throw swd::ConfigError("unknown dataset '" + name + "' (expected two_moons or blobs)");
  }
  swd::write_dataset_csv(ds, out);
  std::printf("wrote %zu rows (%zu train, %zu test) to %s\n", ds.size(),
              ds.train_indices().size(), ds.test_indices().size(), out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stable weight decay experiment harness"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  CLI::App* run = app.add_subcommand("run", "execute one experiment from a JSON config");
  run->add_option("--config", run_config, "experiment config (JSON)")->required();
  run->add_option("--out", run_out, "output directory (overrides the config)");

  std::string sweep_config, sweep_grid, sweep_out;
  unsigned jobs = 1;
  CLI::App* sw = app.add_subcommand("sweep", "run a hyperparameter grid");
  sw->add_option("--config", sweep_config, "base experiment config (JSON)")->required();
  sw->add_option("--grid", sweep_grid, "grid config (JSON)")->required();
  sw->add_option("--out", sweep_out, "output directory")->required();
  sw->add_option("--jobs", jobs, "worker threads (default 1)");

  std::string suite = "all";
  CLI::App* ver = app.add_subcommand("verify", "check the analytic invariants");
  ver->add_option("--suite", suite, "propositions | equivalences | gradients | all");

  std::string ds_name, ds_out;
  std::uint64_t ds_seed = 0;
  std::size_t ds_n = 512, ds_dim = 2;
  double ds_noise = 0.2, ds_sep = 6.0, ds_spread = 1.0;
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  gen->add_option("--name", ds_name, "two_moons | blobs")->required();
  gen->add_option("--seed", ds_seed, "generator seed")->required();
  gen->add_option("--out", ds_out, "output CSV path")->required();
  gen->add_option("--n", ds_n, "sample count (default 512)");
  gen->add_option("--noise", ds_noise, "two_moons noise sigma (default 0.2)");
  gen->add_option("--dim", ds_dim, "blobs feature dim (default 2)");
  gen->add_option("--separation", ds_sep, "blobs center distance (default 6)");
  gen->add_option("--spread", ds_spread, "blobs per-coordinate sigma (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out);
    if (sw->parsed()) return cmd_sweep(sweep_config, sweep_grid, sweep_out, jobs);
    if (ver->parsed()) return cmd_verify(suite);
    if (gen->parsed())
      return cmd_gen_data(ds_name, ds_seed, ds_out, ds_n, ds_noise, ds_dim, ds_sep, ds_spread);
  } catch (const swd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitConfig;
}
