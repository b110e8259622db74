#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swd/config.hpp"
#include "swd/csv.hpp"
#include "swd/diagnostics.hpp"
#include "swd/optimizers.hpp"
#include "swd/problems.hpp"
#include "swd/random.hpp"
#include "swd/schedules.hpp"

namespace swd {

struct LogRow {
  long long step = 0;
  long long epoch = 0;
  double eta_t = 0.0;
  double train_loss = 0.0;
  std::optional<double> test_loss;
  double theta_norm = 0.0;
  double grad_norm = 0.0;
  double rate_mean = 0.0;
  double rate_std = 0.0;
  double coeff_sq_norm = 0.0;
  double rho = 1.0;
};

struct RunResult {
  std::vector<LogRow> rows;
  std::vector<DecayRecord> records;
  ParamVector theta_final;
  long long steps = 0;
  double final_train_loss = 0.0;
  std::optional<double> final_test_loss;
  std::optional<double> best_test_loss;
  double rho = 1.0;
  std::optional<StabilityReport> stability;  // needs >= 2 records
  bool aborted = false;
  std::string abort_reason;
  long long abort_step = 0;
};

inline Problem build_problem(const RunConfig& cfg) {
  if (cfg.problem_name == "quadratic") {
    auto [a, b] = make_random_spd(cfg.quad_dim, cfg.problem_seed);
    return quadratic_problem(a, b);
  }
  SyntheticDataset ds = cfg.generator == "two_moons"
                            ? make_two_moons(cfg.data_n, cfg.noise, cfg.problem_seed)
                            : make_blobs(cfg.data_n, cfg.centers, cfg.spread,
                                         cfg.problem_seed);
  if (cfg.problem_name == "logistic") return logistic_problem(ds);
  return mlp_problem(ds, cfg.hidden, cfg.activation);
}

// Deterministic training loop. RNG draw order: theta0 first, then one
// shuffle per epoch. All diagnostics are recorded every step; log rows are
// kept at log_every cadence plus the final step.
inline RunResult run(const RunConfig& cfg) {
  const Problem problem = build_problem(cfg);
  Optimizer opt = make_optimizer(cfg.kind, problem.dim, cfg.hp, cfg.mode);

  ScheduleSpec schedule = cfg.schedule;
  const long long steps_per_epoch =
      problem.train_size == 0
          ? 1
          : (static_cast<long long>(problem.train_size) + cfg.batch_size - 1) /
                cfg.batch_size;
  schedule.steps_per_epoch = steps_per_epoch;
  schedule.validate();

  RandomSource rng(cfg.seed);
  ParamVector theta = rng.normal_vector(problem.dim);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(problem.dim));
  for (double& x : theta) x *= init_scale;

  // Batches carry absolute dataset row ids; the shuffled order is a
  // permutation of the problem's train split.
  std::vector<std::size_t> train_order = problem.train_rows;

  std::unique_ptr<ThetaEmaTracker> ema;
  if (cfg.mode == DecayMode::l2)
    ema = std::make_unique<ThetaEmaTracker>(cfg.hp.beta1, problem.dim);

  RunResult result;
  result.rho = 1.0;
  ParamVector grad;
  std::vector<std::size_t> batch;
  const long long total_steps = cfg.epochs * steps_per_epoch;
  long long step = 0;
  std::optional<double> current_test;

  auto flush_row = [&](double eta_t, long long epoch, double train_loss,
                       const DecayRecord& rec, double gnorm) {
    LogRow row;
    row.step = step;
    row.epoch = epoch;
    row.eta_t = eta_t;
    row.train_loss = train_loss;
    row.test_loss = current_test;
    row.theta_norm = l2_norm(theta);
    row.grad_norm = gnorm;
    const SummaryStats rs = nan_aware_stats(rec.rate);
    row.rate_mean = rs.mean;
    row.rate_std = rs.stddev;
    row.coeff_sq_norm = rec.coeff_sq_norm;
    row.rho = rec.rho;
    result.rows.push_back(std::move(row));
  };

  try {
    for (long long epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (!train_order.empty()) rng.shuffle(train_order);
      for (long long s = 0; s < steps_per_epoch; ++s) {
        ++step;
        MinibatchView view{};
        if (!train_order.empty()) {
          const std::size_t lo = static_cast<std::size_t>(s * cfg.batch_size);
          const std::size_t hi =
              std::min(train_order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
          batch.assign(train_order.begin() + static_cast<std::ptrdiff_t>(lo),
                       train_order.begin() + static_cast<std::ptrdiff_t>(hi));
          view.indices = batch;
        }
        const double eta_t = lr_at(schedule, epoch, s);
        const double loss = problem.eval(theta, view, grad);
        if (!std::isfinite(loss))
          throw std::domain_error("train loss became non-finite");
        ensure_finite(grad, "gradient");

        if (ema) ema->observe(theta);
        const StepOutput out = opt.step(theta, grad, eta_t);
        theta = out.theta_next;

        DecayRecord rec;
        rec.step = step;
        const double s_t =
            isotropic_decay_scale(cfg.kind, cfg.mode, opt.state(), cfg.hp, eta_t);
        const double mult = 1.0 - (eta_t * cfg.hp.lambda) * s_t;
        if (!(mult > 0.0))
          throw std::domain_error("decay overshoot in cumulative effect");
        result.rho *= mult;
        rec.rho = result.rho;
        std::optional<ThetaHistory> hist;
        if (ema) hist = ema->history();
        const ThetaHistory* hist_ptr = hist ? &*hist : nullptr;
        rec.rate = weight_decay_rate(cfg.kind, cfg.mode, opt.state(), cfg.hp, eta_t,
                                     hist_ptr);
        rec.coeff_sq_norm =
            coeff_sq_norm(cfg.kind, cfg.mode, opt.state(), cfg.hp, eta_t, hist_ptr);
        rec.multiplier = out.decay_multiplier;

        const bool epoch_end = s == steps_per_epoch - 1;
        if (epoch_end && problem.test_loss) {
          const double tl = problem.test_loss(theta);
          if (!std::isfinite(tl)) throw std::domain_error("test loss became non-finite");
          current_test = tl;
          if (!result.best_test_loss || tl < *result.best_test_loss)
            result.best_test_loss = tl;
        }
        if (step % cfg.log_every == 0 || step == total_steps)
          flush_row(eta_t, epoch, loss, rec, l2_norm(grad));

        result.records.push_back(std::move(rec));
        result.final_train_loss = loss;
      }
    }
  } catch (const std::exception& e) {
    result.aborted = true;
    result.abort_reason = e.what();
    result.abort_step = step;
  }

  result.steps = step;
  result.theta_final = theta;
  result.final_test_loss = current_test;
  if (result.records.size() >= 2) result.stability = stability_report(result.records);
  return result;
}

inline void write_log_csv(const RunResult& result, std::ostream& os) {
  write_csv_row(os, {"step", "epoch", "eta_t", "train_loss", "test_loss", "theta_norm",
                     "grad_norm", "rate_mean", "rate_std", "coeff_sq_norm", "rho"});
  for (const LogRow& r : result.rows) {
    write_csv_row(os, {std::to_string(r.step), std::to_string(r.epoch),
                       format_double(r.eta_t), format_double(r.train_loss),
                       r.test_loss ? format_double(*r.test_loss) : std::string(),
                       format_double(r.theta_norm), format_double(r.grad_norm),
                       format_double(r.rate_mean), format_double(r.rate_std),
                       format_double(r.coeff_sq_norm), format_double(r.rho)});
  }
}

inline Json summary_json(const RunResult& result) {
  Json j;
  j["status"] = result.aborted ? "aborted" : "ok";
  if (result.aborted) {
    j["abort_reason"] = result.abort_reason;
    j["abort_step"] = result.abort_step;
  }
  j["steps"] = result.steps;
  j["final_train_loss"] = result.final_train_loss;
  j["final_test_loss"] = result.final_test_loss ? Json(*result.final_test_loss) : Json();
  j["best_test_loss"] = result.best_test_loss ? Json(*result.best_test_loss) : Json();
  j["rho"] = result.rho;
  j["stable"] = result.stability ? result.stability->stable : false;
  if (result.stability) {
    j["coeff_sq_norm_mean"] = result.stability->coeff.mean;
    j["coeff_sq_norm_std"] = result.stability->coeff.stddev;
    j["rate_mean_over_time"] = result.stability->rate_mean.mean;
    j["rate_std_over_time"] = result.stability->rate_std.mean;
  }
  return j;
}

// Execute the run and write log.csv, config.echo.json, summary.json.
inline RunResult run_to_dir(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const RunResult result = run(cfg);

  {
    std::ofstream f(fs::path(out_dir) / "log.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write log.csv in '" + out_dir + "'");
    write_log_csv(result, f);
  }
  {
    std::ofstream f(fs::path(out_dir) / "config.echo.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write config.echo.json in '" + out_dir + "'");
    f << serialize_run_config(cfg).dump(2) << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "summary.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write summary.json in '" + out_dir + "'");
    f << summary_json(result).dump(2) << '\n';
  }
  return result;
}

}  // namespace swd
