// Acceptance gate: one check per guaranteed behavior, one PASS/FAIL line
// each, nonzero exit if anything fails. Links the library only; the CLI
// checks shell out to the binary named by the SWD_CLI environment variable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "swd/swd.hpp"

namespace fs = std::filesystem;
using namespace swd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.3g", x);
  return b;
}

// Logistic regression on well-separated blobs; model dim equals data dim.
RunConfig blobs_logistic(std::size_t dim, std::uint64_t seed) {
  RunConfig cfg;
  cfg.problem_name = "logistic";
  cfg.problem_seed = seed;
  cfg.generator = "blobs";
  cfg.data_n = 256;
  cfg.spread = 1.0;
  cfg.centers.assign(2, ParamVector(dim, 1.0));
  for (double& x : cfg.centers[0]) x = -1.0;
  return cfg;
}

// Gap relative to the larger iterate magnitude, so coordinates passing
// through zero do not dominate.
double rel_gap(const ParamVector& a, const ParamVector& b) {
  double scale = 1e-12, worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  return worst;
}

// Drive one optimizer against the full-batch objective.
ParamVector descend(const Problem& p, Optimizer& opt, ParamVector theta, long long steps,
                    ParamVector* other = nullptr, Optimizer* opt2 = nullptr,
                    double* worst_gap = nullptr) {
  ParamVector grad, grad2;
  const MinibatchView full{};
  for (long long t = 0; t < steps; ++t) {
    p.eval(theta, full, grad);
    theta = opt.step(theta, grad, opt.hyper().eta).theta_next;
    if (other) {
      p.eval(*other, full, grad2);
      *other = opt2->step(*other, grad2, opt2->hyper().eta).theta_next;
      if (worst_gap) *worst_gap = std::max(*worst_gap, rel_gap(theta, *other));
    }
  }
  return theta;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return {};
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// ---- 1. AdamS keeps sum c_i^2 pinned at the model dimension ----------------

Outcome check_adams_invariant() {
  const auto t0 = Clock::now();
  double worst_dev = 0.0, worst_drift = 0.0;
  for (std::size_t dim : {std::size_t{1}, std::size_t{10}, std::size_t{1000}}) {
    RunConfig cfg = blobs_logistic(dim, 11);
    cfg.kind = OptimizerKind::adam;
    cfg.mode = DecayMode::stable;
    cfg.hp.eta = 0.001;
    cfg.hp.lambda = 0.0005;
    cfg.schedule.eta0 = cfg.hp.eta;
    cfg.epochs = 500;
    cfg.batch_size = 64;  // 205 train rows -> 4 steps/epoch -> 2000 steps
    cfg.log_every = 1000;
    cfg.seed = dim;
    const RunResult res = run(cfg);
    if (res.aborted) return {false, "run aborted at step " + std::to_string(res.abort_step)};
    if (res.steps != 2000) return {false, "expected 2000 steps, got " + std::to_string(res.steps)};
    const double d = static_cast<double>(dim);
    for (const DecayRecord& rec : res.records)
      worst_dev = std::max(worst_dev, std::fabs(rec.coeff_sq_norm - d) / d);
    if (!res.stability || !res.stability->stable)
      return {false, "dim " + std::to_string(dim) + ": coefficient norm not flagged stable"};
    worst_drift = std::max(
        worst_drift, res.stability->coeff.stddev / std::fabs(res.stability->coeff.mean));
  }

  // Same run with decoupled decay: the norm tracks sum vhat and must move.
  RunConfig cfg = blobs_logistic(10, 11);
  cfg.kind = OptimizerKind::adam;
  cfg.mode = DecayMode::decoupled;
  cfg.hp.eta = 0.001;
  cfg.hp.lambda = 0.0005;
  cfg.schedule.eta0 = cfg.hp.eta;
  cfg.epochs = 500;
  cfg.batch_size = 64;
  cfg.log_every = 1000;
  cfg.seed = 10;
  const RunResult adamw = run(cfg);
  std::vector<double> csn;
  for (const DecayRecord& rec : adamw.records) csn.push_back(rec.coeff_sq_norm);
  const SummaryStats st = nan_aware_stats(csn);
  const double adamw_drift = st.stddev / std::fabs(st.mean);
  const double secs = seconds_since(t0);

  const bool pass = worst_dev <= 1e-9 && worst_drift <= 1e-12 && adamw_drift > 1e-3 &&
                    secs < 30.0;
  return {pass, "2000 steps, dim {1,10,1000}: max|csn-d|/d=" + num(worst_dev) +
                    " drift=" + num(worst_drift) + " adamw_drift=" + num(adamw_drift) +
                    " (" + num(secs) + "s)"};
}

// ---- 2. Decoupled decay with zero gradient is a pure geometric shrink ------

Outcome check_zero_grad_geometric() {
  HyperParams hp;
  hp.eta = 0.001;
  hp.lambda = 0.5;
  const ParamVector theta0 = {1.0, -2.0, 0.5, 3.0, -0.25};
  Optimizer opt = make_optimizer(OptimizerKind::adam, theta0.size(), hp, DecayMode::decoupled);
  const ParamVector zero(theta0.size(), 0.0);
  ParamVector theta = theta0;
  double worst = 0.0;
  for (long long t = 1; t <= 1000; ++t) {
    theta = opt.step(theta, zero, hp.eta).theta_next;
    const double want = std::pow(1.0 - hp.eta * hp.lambda, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i)
      worst = std::max(worst, std::fabs(theta[i] / theta0[i] - want) / want);
  }
  return {worst <= 1e-12, "1000 steps: max rel dev from (1-eta*lambda)^t = " + num(worst)};
}

// ---- 3. Lr-independent decay at lambda0 = eta*lambda matches plain decay ---

Outcome check_vanilla_plain() {
  const auto [a, b] = make_random_spd(10, 4);
  const Problem p = quadratic_problem(a, b);
  HyperParams plain;
  plain.eta = 0.1;
  plain.lambda = 0.1;
  plain.beta1 = 0.0;
  HyperParams van = plain;
  van.lambda = plain.eta * plain.lambda;
  Optimizer o1 = make_optimizer(OptimizerKind::sgd, 10, plain, DecayMode::plain);
  Optimizer o2 = make_optimizer(OptimizerKind::sgd, 10, van, DecayMode::vanilla);
  ParamVector t1(10, 0.5), t2 = t1;
  double worst = 0.0;
  descend(p, o1, t1, 1000, &t2, &o2, &worst);
  return {worst <= 1e-12, "1000 steps on 10-d quadratic: max rel gap = " + num(worst)};
}

// ---- 4. Plain decay is a pure coordinate rescaling -------------------------

Outcome check_rescaled_coordinates() {
  const auto [a, b] = make_random_spd(10, 2);
  const Problem p = quadratic_problem(a, b);
  HyperParams hp;
  hp.eta = 0.1;
  hp.lambda = 0.1;
  hp.beta1 = 0.0;
  const ParamVector theta0 = RandomSource(2).normal_vector(10);
  const double worst = rescaled_trajectory_check(p, hp, 200, theta0);
  return {worst <= 1e-8, "200 steps: max rel deviation = " + num(worst)};
}

// ---- 5. Plain decay converges to the ridge solution ------------------------

Outcome check_ridge_fixed_point() {
  const auto t0 = Clock::now();
  const auto [a, b] = make_random_spd(10, 5);
  const Problem p = quadratic_problem(a, b);
  HyperParams hp;
  hp.eta = 0.05;
  hp.lambda = 0.1;
  hp.beta1 = 0.0;
  const ParamVector star = ridge_closed_form(a, b, hp.lambda);
  Optimizer opt = make_optimizer(OptimizerKind::sgd, 10, hp, DecayMode::plain);
  ParamVector theta(10, 1.0), grad;
  long long used = 0;
  double err = 0.0;
  for (long long t = 1; t <= 10000; ++t) {
    p.eval(theta, {}, grad);
    theta = opt.step(theta, grad, hp.eta).theta_next;
    err = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i)
      err = std::max(err, std::fabs(theta[i] - star[i]));
    used = t;
    if (err <= 1e-6) break;
  }
  const double secs = seconds_since(t0);
  return {err <= 1e-6 && secs < 5.0,
          "max|theta - ridge| = " + num(err) + " after " + std::to_string(used) +
              " steps (" + num(secs) + "s)"};
}

// ---- 6. Stable decay is retuned decoupled decay, but not retuned l2 --------

Outcome check_sgds_retuning() {
  RunConfig base = blobs_logistic(4, 17);
  const Problem p = build_problem(base);
  HyperParams s;
  s.eta = 0.1;
  s.lambda = 0.0005;
  s.beta1 = 0.9;
  HyperParams w = s;
  w.lambda = s.lambda * (s.beta3 / (1.0 - s.beta1));
  HyperParams l2 = s;  // same nominal lambda, decay through the gradient

  Optimizer os = make_optimizer(OptimizerKind::sgd, p.dim, s, DecayMode::stable);
  Optimizer ow = make_optimizer(OptimizerKind::sgd, p.dim, w, DecayMode::decoupled);
  Optimizer ol = make_optimizer(OptimizerKind::sgd, p.dim, l2, DecayMode::l2);

  ParamVector ts(p.dim, 0.5), tw = ts, tl = ts;
  double gap_ws = 0.0;
  descend(p, os, ts, 100, &tw, &ow, &gap_ws);
  Optimizer os_fresh = make_optimizer(OptimizerKind::sgd, p.dim, s, DecayMode::stable);
  ParamVector tref(p.dim, 0.5);
  double gap_l2 = 0.0;
  descend(p, os_fresh, tref, 100, &tl, &ol, &gap_l2);

  const bool pass = gap_ws <= 1e-15 && gap_l2 > 1e-6;
  return {pass, "100 steps: stable-vs-retuned-decoupled gap = " + num(gap_ws) +
                    ", stable-vs-l2 gap = " + num(gap_l2)};
}

// ---- 7. Momentum of an l2 run decomposes into grad and decay histories -----

Outcome check_momentum_decomposition() {
  RunConfig base = blobs_logistic(2, 21);
  const Problem p = build_problem(base);
  HyperParams hp;
  hp.eta = 0.1;
  hp.lambda = 0.001;
  hp.beta1 = 0.9;
  Optimizer opt = make_optimizer(OptimizerKind::sgd, p.dim, hp, DecayMode::l2);
  SgdL2Trace trace;
  ParamVector theta(p.dim, 0.25), grad;
  for (long long t = 0; t < 500; ++t) {
    trace.theta_prev.push_back(theta);
    p.eval(theta, {}, grad);
    theta = opt.step(theta, grad, hp.eta).theta_next;
    trace.momentum.push_back(opt.state().m);
    trace.momentum_grad.push_back(opt.state().m_grad);
  }
  double worst = 0.0;
  for (const MomentumSplit& split : momentum_l2_decomposition(trace, hp))
    worst = std::max(worst, split.recon_rel_error);
  return {worst <= 1e-10, "500 steps: max reconstruction error = " + num(worst)};
}

// ---- 8. Analytic gradients agree with central differences ------------------

double fd_worst(const Problem& p, std::uint64_t seed, int probes) {
  RandomSource rng(seed);
  ParamVector grad, work;
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    ParamVector theta = rng.normal_vector(p.dim);
    for (double& x : theta) x *= 0.5;
    p.eval(theta, {}, grad);
    work = theta;
    for (std::size_t i = 0; i < p.dim; ++i) {
      const double h = 1e-6 * (1.0 + std::fabs(theta[i]));
      ParamVector dummy;
      work[i] = theta[i] + h;
      const double lp = p.eval(work, {}, dummy);
      work[i] = theta[i] - h;
      const double lm = p.eval(work, {}, dummy);
      work[i] = theta[i];
      const double fd = (lp - lm) / (2.0 * h);
      const double scale = std::max({1e-8, std::fabs(grad[i]), std::fabs(fd)});
      worst = std::max(worst, std::fabs(grad[i] - fd) / scale);
    }
  }
  return worst;
}

Outcome check_gradients() {
  const auto t0 = Clock::now();
  const auto [a, b] = make_random_spd(8, 6);
  const SyntheticDataset moons = make_two_moons(128, 0.2, 41);
  RunConfig lg = blobs_logistic(20, 31);
  double worst = fd_worst(quadratic_problem(a, b), 101, 10);
  worst = std::max(worst, fd_worst(build_problem(lg), 102, 10));
  worst = std::max(worst, fd_worst(mlp_problem(moons, {8}, Activation::tanh_act), 103, 10));
  worst = std::max(worst, fd_worst(mlp_problem(moons, {8}, Activation::relu), 104, 10));
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 10.0,
          "4 problems x 10 probes: max central-diff gap = " + num(worst) + " (" +
              num(secs) + "s)"};
}

// ---- 9. The tensorflow momentum form matches heavy ball without decay ------

Outcome check_tf_hbm() {
  const auto [a, b] = make_random_spd(10, 4);
  const Problem p = quadratic_problem(a, b);
  HyperParams hp;
  hp.eta = 0.05;
  hp.lambda = 0.0;
  hp.beta1 = 0.9;
  Optimizer hb = make_optimizer(OptimizerKind::sgd, 10, hp, DecayMode::none);
  Optimizer tf = make_optimizer(OptimizerKind::tf_sgd, 10, hp, DecayMode::none);
  ParamVector t1(10, 0.5), t2 = t1;
  double worst = 0.0;
  descend(p, hb, t1, 1000, &t2, &tf, &worst);
  return {worst <= 1e-12, "1000 steps: max rel gap = " + num(worst)};
}

// ---- 10. Schedules hit their published values ------------------------------

Outcome check_schedules() {
  const std::vector<long long> bounds = restart_boundaries(14, 2, 210);
  if (bounds != std::vector<long long>{14, 42, 98, 210})
    return {false, "restart_boundaries(14,2,210) mismatch"};
  ScheduleSpec ms;
  ms.kind = ScheduleKind::milestones;
  ms.eta0 = 0.1;
  ms.milestones = {80, 160};
  ms.decay_factor = 0.1;
  ms.validate();
  double worst = 0.0;
  for (long long epoch = 0; epoch < 210; ++epoch) {
    const double want = epoch < 80 ? 0.1 : epoch < 160 ? 0.01 : 0.001;
    worst = std::max(worst, std::fabs(lr_at(ms, epoch, 0) - want) / want);
  }
  return {worst <= 1e-12,
          "boundaries [14,42,98,210] exact; milestone lr dev = " + num(worst)};
}

// ---- 11. The CLI is deterministic run to run and across sweep workers ------

Outcome check_cli_determinism() {
  const char* cli = std::getenv("SWD_CLI");
  if (!cli) return {false, "SWD_CLI is not set"};
  const fs::path dir = "tmp_acc_cli";
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "run.json", std::ios::binary);
    f << R"({"problem": {"name": "logistic", "seed": 7,
                         "dataset": {"generator": "two_moons", "n": 64, "noise": 0.2}},
             "optimizer": {"kind": "adam", "mode": "stable", "eta": 0.01, "lambda": 0.001},
             "epochs": 5, "batch_size": 16, "log_every": 6, "seed": 12})";
    std::ofstream g(dir / "grid.json", std::ios::binary);
    g << R"({"lambda": [1e-4, 5e-4, 1e-3], "mode": ["l2", "decoupled", "stable"]})";
  }
  auto shell = [&](const std::string& args) {
    const std::string cmd = '"' + std::string(cli) + "\" " + args + " >> \"" +
                            (dir / "cli.out").string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string cfg = " --config \"" + (dir / "run.json").string() + '"';
  if (shell("run" + cfg + " --out \"" + (dir / "r1").string() + '"') != 0 ||
      shell("run" + cfg + " --out \"" + (dir / "r2").string() + '"') != 0)
    return {false, "swd run exited nonzero (see tmp_acc_cli/cli.out)"};
  const std::string log1 = slurp(dir / "r1" / "log.csv");
  if (log1.empty() || log1 != slurp(dir / "r2" / "log.csv"))
    return {false, "two identical runs produced different log.csv"};
  if (slurp(dir / "r1" / "summary.json") != slurp(dir / "r2" / "summary.json"))
    return {false, "two identical runs produced different summary.json"};

  const std::string grid = " --grid \"" + (dir / "grid.json").string() + '"';
  if (shell("sweep" + cfg + grid + " --out \"" + (dir / "s1").string() + "\" --jobs 1") != 0 ||
      shell("sweep" + cfg + grid + " --out \"" + (dir / "s2").string() + "\" --jobs 4") != 0)
    return {false, "swd sweep exited nonzero (see tmp_acc_cli/cli.out)"};
  const std::string sum1 = slurp(dir / "s1" / "summary.csv");
  if (sum1.empty() || sum1 != slurp(dir / "s2" / "summary.csv"))
    return {false, "sweep summaries differ between --jobs 1 and --jobs 4"};
  long long rows = 0;
  for (char c : sum1) rows += c == '\n';
  fs::remove_all(dir, ec);
  return {rows == 10, "log.csv bytes = " + std::to_string(log1.size()) +
                          ", 9-cell sweep identical at jobs 1 and 4"};
}

// ---- 12. Two-moons sweep separates stable from decoupled decay -------------

Outcome check_fig_grid() {
  const auto t0 = Clock::now();
  RunConfig base;
  base.problem_name = "mlp";
  base.problem_seed = 3;
  base.generator = "two_moons";
  base.data_n = 512;
  base.noise = 0.2;
  base.hidden = {8};
  base.activation = Activation::tanh_act;
  base.kind = OptimizerKind::adam;
  base.mode = DecayMode::stable;
  base.hp.eta = 0.001;
  base.hp.lambda = 0.0005;
  base.schedule.eta0 = base.hp.eta;
  base.epochs = 30;
  base.batch_size = 64;
  base.log_every = 100;
  base.seed = 5;
  SweepGrid grid;
  grid.modes = {DecayMode::l2, DecayMode::decoupled, DecayMode::stable};
  grid.lambdas = {5e-5, 5e-4, 5e-3};

  const fs::path dir = "tmp_acc_fig7";
  std::error_code ec;
  fs::remove_all(dir, ec);
  const SweepResult res = sweep(base, grid, dir.string(), 4);
  fs::remove_all(dir, ec);
  if (res.cells.size() != 9) return {false, "expected 9 cells"};
  int ok = 0, stable_right = 0, decoupled_right = 0;
  for (const SweepCell& c : res.cells) {
    if (c.status == "ok") ++ok;
    if (!c.best_test_loss) return {false, "cell missing test loss"};
    if (c.mode == DecayMode::stable && c.stable) ++stable_right;
    if (c.mode == DecayMode::decoupled && !c.stable) ++decoupled_right;
  }
  const double secs = seconds_since(t0);
  const bool pass = ok == 9 && stable_right == 3 && decoupled_right == 3 && secs < 300.0;
  return {pass, "9 cells ok=" + std::to_string(ok) + ", stable flagged " +
                    std::to_string(stable_right) + "/3, decoupled unstable " +
                    std::to_string(decoupled_right) + "/3 (" + num(secs) + "s)"};
}

}  // namespace

int main() {
  struct Entry {
    const char* label;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {"adams-coeff-norm-invariant", check_adams_invariant},
      {"decoupled-zero-grad-geometric", check_zero_grad_geometric},
      {"vanilla-matches-plain", check_vanilla_plain},
      {"plain-is-coordinate-rescaling", check_rescaled_coordinates},
      {"plain-reaches-ridge-solution", check_ridge_fixed_point},
      {"stable-is-retuned-decoupled", check_sgds_retuning},
      {"l2-momentum-decomposition", check_momentum_decomposition},
      {"gradients-match-central-diff", check_gradients},
      {"tf-form-matches-heavy-ball", check_tf_hbm},
      {"schedule-published-values", check_schedules},
      {"cli-determinism", check_cli_determinism},
      {"two-moons-stability-grid", check_fig_grid},
  };
  int failures = 0, id = 0;
  for (const Entry& e : entries) {
    ++id;
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    if (!out.pass) ++failures;
    std::printf("%s  [%2d] %-32s %s\n", out.pass ? "PASS" : "FAIL", id, e.label,
                out.detail.c_str());
  }
  if (failures == 0) {
    std::printf("acceptance: all %d checks passed\n",
                static_cast<int>(std::size(entries)));
    return 0;
  }
  std::printf("acceptance: %d of %d checks FAILED\n", failures,
              static_cast<int>(std::size(entries)));
  return 1;
}
