#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "swd/config.hpp"
#include "swd/run.hpp"

namespace swd {

struct SweepCell {
  std::size_t index = 0;
  double lambda = 0.0;
  double eta = 0.0;
  DecayMode mode = DecayMode::none;
  std::string status = "ok";  // ok | aborted:<reason> | error:<reason>
  double final_train_loss = 0.0;
  std::optional<double> best_test_loss;
  double rho = 1.0;
  bool stable = false;
  std::optional<double> lambda_rescaled;  // decoupled cells: stable-scale value
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

// Grid enumeration order: mode-major, then lambda, then eta. Empty grid axes
// fall back to the base config's value.
inline std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepGrid& grid) {
  const std::vector<DecayMode> modes =
      grid.modes.empty() ? std::vector<DecayMode>{base.mode} : grid.modes;
  const std::vector<double> lambdas =
      grid.lambdas.empty() ? std::vector<double>{base.hp.lambda} : grid.lambdas;
  const std::vector<double> etas =
      grid.etas.empty() ? std::vector<double>{base.hp.eta} : grid.etas;
  std::vector<RunConfig> cells;
  std::size_t index = 0;
  for (DecayMode mode : modes)
    for (double lambda : lambdas)
      for (double eta : etas) {
        RunConfig cfg = base;
        cfg.mode = mode;
        cfg.hp.lambda = lambda;
        cfg.hp.eta = eta;
        if (cfg.schedule.kind == ScheduleKind::constant && cfg.schedule.eta0 == base.hp.eta)
          cfg.schedule.eta0 = eta;  // keep "schedule follows eta" behavior
        cfg.seed = RandomSource(base.seed).derived(index).seed();
        if (!decay_mode_valid(cfg.kind, mode))
          throw ConfigError("grid: decay mode '" + std::string(to_string(mode)) +
                            "' is not valid for kind '" +
                            std::string(to_string(cfg.kind)) + "'");
        cells.push_back(std::move(cfg));
        ++index;
      }
  return cells;
}

// Stable-scale equivalent of a decoupled lambda: the value a stable run
// would need for the same per-step shrinkage. Heavy-ball kinds divide by the
// momentum bias factor; Adam-family kinds report the classic lambda*eta
// conversion (the adaptive factor varies per run).
inline std::optional<double> rescaled_lambda(OptimizerKind kind, DecayMode mode,
                                             const HyperParams& hp) {
  if (mode != DecayMode::decoupled) return std::nullopt;
  switch (kind) {
    case OptimizerKind::sgd:
    case OptimizerKind::tf_sgd:
    case OptimizerKind::adai:
      return hp.lambda * (1.0 - hp.beta1) / hp.beta3;
    case OptimizerKind::adam:
    case OptimizerKind::amsgrad:
      return hp.lambda * hp.eta;
  }
  return std::nullopt;
}

// Run every cell (optionally across threads), each into out_dir/cell_<k>/.
// Cell results are ordered by index, never by completion time, and a failing
// cell becomes a flagged row instead of a sweep failure.
inline SweepResult sweep(const RunConfig& base, const SweepGrid& grid,
                         const std::string& out_dir, unsigned jobs = 1) {
  namespace fs = std::filesystem;
  const std::vector<RunConfig> cells = expand_grid(base, grid);
  fs::create_directories(out_dir);

  SweepResult result;
  result.cells.resize(cells.size());
  if (jobs == 0) jobs = 1;

  auto run_cell = [&](std::size_t k) {
    const RunConfig& cfg = cells[k];
    SweepCell cell;
    cell.index = k;
    cell.lambda = cfg.hp.lambda;
    cell.eta = cfg.hp.eta;
    cell.mode = cfg.mode;
    cell.lambda_rescaled = rescaled_lambda(cfg.kind, cfg.mode, cfg.hp);
    char name[32];
    std::snprintf(name, sizeof(name), "cell_%03zu", k);
    try {
      const RunResult r = run_to_dir(cfg, (fs::path(out_dir) / name).string());
      cell.final_train_loss = r.final_train_loss;
      cell.best_test_loss = r.best_test_loss;
      cell.rho = r.rho;
      cell.stable = r.stability ? r.stability->stable : false;
      if (r.aborted) cell.status = "aborted:" + r.abort_reason;
    } catch (const std::exception& e) {
      cell.status = std::string("error:") + e.what();
    }
    result.cells[k] = std::move(cell);
  };

  if (jobs <= 1 || cells.size() <= 1) {
    for (std::size_t k = 0; k < cells.size(); ++k) run_cell(k);
  } else {
    std::vector<std::thread> workers;
    std::size_t next = 0;
    std::mutex mu;
    const unsigned nw = std::min<std::size_t>(jobs, cells.size());
    for (unsigned w = 0; w < nw; ++w)
      workers.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= cells.size()) return;
            k = next++;
          }
          run_cell(k);
        }
      });
    for (auto& t : workers) t.join();
  }

  std::ofstream f(fs::path(out_dir) / "summary.csv", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write summary.csv in '" + out_dir + "'");
  write_csv_row(f, {"cell", "lambda", "eta", "mode", "status", "final_train_loss",
                    "best_test_loss", "rho", "stable", "lambda_rescaled"});
  for (const SweepCell& c : result.cells) {
    write_csv_row(
        f, {std::to_string(c.index), format_double(c.lambda), format_double(c.eta),
            std::string(to_string(c.mode)), c.status, format_double(c.final_train_loss),
            c.best_test_loss ? format_double(*c.best_test_loss) : std::string(),
            format_double(c.rho), c.stable ? "true" : "false",
            c.lambda_rescaled ? format_double(*c.lambda_rescaled) : std::string()});
  }
  return result;
}

}  // namespace swd
