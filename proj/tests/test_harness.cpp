#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "swd/config.hpp"
#include "swd/problems.hpp"
#include "swd/run.hpp"
#include "swd/sweep.hpp"

using namespace swd;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Json parse_text(const std::string& text) { return Json::parse(text); }

// Small logistic run config used by the determinism and sweep tests.
RunConfig tiny_logistic() {
  RunConfig cfg;
  cfg.problem_name = "logistic";
  cfg.problem_seed = 7;
  cfg.generator = "two_moons";
  cfg.data_n = 64;
  cfg.noise = 0.2;
  cfg.kind = OptimizerKind::adam;
  cfg.mode = DecayMode::stable;
  cfg.hp.eta = 0.01;
  cfg.hp.lambda = 0.001;
  cfg.schedule.eta0 = cfg.hp.eta;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.log_every = 6;
  cfg.seed = 12;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag)
      : path(std::filesystem::path("tmp_" + tag)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("minimal config picks up documented defaults") {
  const RunConfig cfg = parse_run_config(parse_text(R"({
    "problem": {"name": "quadratic"},
    "optimizer": {"kind": "sgd", "mode": "none"}
  })"));
  CHECK(cfg.quad_dim == 10);
  CHECK(cfg.hp.eta == 0.001);
  CHECK(cfg.hp.lambda == 0.0005);
  CHECK(cfg.hp.beta1 == 0.9);
  CHECK(cfg.epochs == 1);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.log_every == 100);
  CHECK(cfg.seed == 0);
  CHECK(cfg.schedule.kind == ScheduleKind::constant);
  CHECK(cfg.schedule.eta0 == cfg.hp.eta);  // schedule follows eta by default
}

TEST_CASE("serialize / parse round trip is byte stable") {
  const char* texts[] = {
      R"({"problem": {"name": "quadratic", "seed": 4, "dim": 6},
          "optimizer": {"kind": "sgd", "mode": "plain", "eta": 0.05, "lambda": 0.1,
                        "beta1": 0.0},
          "schedule": {"kind": "milestones", "milestones": [80, 160], "decay_factor": 0.1},
          "epochs": 3, "batch_size": 32, "log_every": 10, "seed": 9})",
      R"({"problem": {"name": "mlp", "seed": 1,
                      "dataset": {"generator": "two_moons", "n": 128, "noise": 0.15},
                      "hidden": [16, 8], "activation": "relu"},
          "optimizer": {"kind": "adam", "mode": "stable", "eta": 0.001, "lambda": 5e-4},
          "schedule": {"kind": "cosine_restarts", "eta0": 0.001, "eta_min": 1e-5,
                       "t0": 14, "t_mult": 2},
          "epochs": 2, "seed": 3, "out_dir": "somewhere"})",
      R"({"problem": {"name": "logistic", "seed": 2,
                      "dataset": {"generator": "blobs", "n": 64,
                                  "centers": [[-1.0, 0.0], [1.0, 0.0]], "spread": 0.5}},
          "optimizer": {"kind": "adai", "mode": "l2", "eta": 0.01, "lambda": 1e-4}})",
  };
  for (const char* text : texts) {
    const RunConfig cfg = parse_run_config(parse_text(text));
    const std::string once = serialize_run_config(cfg).dump(2);
    const RunConfig cfg2 = parse_run_config(parse_text(once));
    const std::string twice = serialize_run_config(cfg2).dump(2);
    REQUIRE(once == twice);
  }
}

TEST_CASE("unknown keys are named in the error") {
  CHECK_THROWS_WITH(parse_run_config(parse_text(
                        R"({"problem": {"name": "quadratic"},
                            "optimizer": {"kind": "sgd", "mode": "none"},
                            "wat": 1})")),
                    ContainsSubstring("wat"));
  CHECK_THROWS_WITH(parse_run_config(parse_text(
                        R"({"problem": {"name": "quadratic", "radius": 2},
                            "optimizer": {"kind": "sgd", "mode": "none"}})")),
                    ContainsSubstring("radius"));
  CHECK_THROWS_WITH(parse_run_config(parse_text(
                        R"({"problem": {"name": "quadratic"},
                            "optimizer": {"kind": "sgd", "mode": "none", "betta": 0.9}})")),
                    ContainsSubstring("betta"));
  CHECK_THROWS_WITH(parse_run_config(parse_text(
                        R"({"problem": {"name": "quadratic"},
                            "optimizer": {"kind": "sgd", "mode": "none"},
                            "schedule": {"kind": "constant", "gamma": 0.5}})")),
                    ContainsSubstring("gamma"));
  CHECK_THROWS_WITH(parse_run_config(parse_text(
                        R"({"problem": {"name": "logistic",
                                        "dataset": {"generator": "two_moons", "sigma": 1}},
                            "optimizer": {"kind": "sgd", "mode": "none"}})")),
                    ContainsSubstring("sigma"));
}

TEST_CASE("config rejects bad pairings and missing sections before running") {
  CHECK_THROWS_AS(parse_run_config(parse_text(
                      R"({"problem": {"name": "quadratic"},
                          "optimizer": {"kind": "adai", "mode": "decoupled"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(parse_text(
                      R"({"problem": {"name": "quadratic"},
                          "optimizer": {"kind": "sgd", "mode": "vanilla"}})")),
                  ConfigError);  // default beta1 = 0.9
  CHECK_THROWS_AS(parse_run_config(parse_text(
                      R"({"optimizer": {"kind": "sgd", "mode": "none"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(parse_text(
                      R"({"problem": {"name": "logistic"},
                          "optimizer": {"kind": "sgd", "mode": "none"}})")),
                  ConfigError);  // logistic needs a dataset
  CHECK_THROWS_AS(parse_run_config(parse_text(
                      R"({"problem": {"name": "quadratic"},
                          "optimizer": {"kind": "sgd", "mode": "none", "eta": -1}})")),
                  ConfigError);
}

TEST_CASE("sweep grid parsing") {
  const SweepGrid g = parse_sweep_grid(parse_text(
      R"({"lambda": [5e-5, 5e-4], "mode": ["l2", "stable"]})"));
  CHECK(g.lambdas == std::vector<double>{5e-5, 5e-4});
  CHECK(g.etas.empty());
  REQUIRE(g.modes.size() == 2);
  CHECK(g.modes[0] == DecayMode::l2);
  CHECK(g.modes[1] == DecayMode::stable);

  CHECK_THROWS_AS(parse_sweep_grid(parse_text(R"({})")), ConfigError);
  CHECK_THROWS_AS(parse_sweep_grid(parse_text(R"({"lambda": []})")), ConfigError);
  CHECK_THROWS_AS(parse_sweep_grid(parse_text(R"({"mode": ["coupled"]})")), ConfigError);
  CHECK_THROWS_WITH(parse_sweep_grid(parse_text(R"({"lambda": [1e-4], "gamma": [1]})")),
                    ContainsSubstring("gamma"));
}

TEST_CASE("grid expansion is mode-major with derived per-cell seeds") {
  RunConfig base = tiny_logistic();
  base.schedule.eta0 = base.hp.eta;
  SweepGrid grid;
  grid.modes = {DecayMode::l2, DecayMode::stable};
  grid.lambdas = {1e-4, 1e-3};
  grid.etas = {0.01, 0.001};
  const auto cells = expand_grid(base, grid);
  REQUIRE(cells.size() == 8);
  CHECK(cells[0].mode == DecayMode::l2);
  CHECK(cells[0].hp.lambda == 1e-4);
  CHECK(cells[0].hp.eta == 0.01);
  CHECK(cells[1].hp.eta == 0.001);   // eta fastest
  CHECK(cells[2].hp.lambda == 1e-3); // then lambda
  CHECK(cells[4].mode == DecayMode::stable);  // mode slowest
  // constant schedule follows the cell eta
  CHECK(cells[1].schedule.eta0 == 0.001);
  // seeds are a deterministic function of (base seed, cell index)
  std::set<std::uint64_t> seeds;
  for (const auto& c : cells) seeds.insert(c.seed);
  CHECK(seeds.size() == 8);
  const auto again = expand_grid(base, grid);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].seed == again[i].seed);

  SweepGrid bad;
  bad.modes = {DecayMode::decoupled};
  RunConfig adai_base = base;
  adai_base.kind = OptimizerKind::adai;
  adai_base.mode = DecayMode::stable;
  CHECK_THROWS_AS(expand_grid(adai_base, bad), ConfigError);
}

TEST_CASE("rescaled lambda reports the stable-equivalent value") {
  HyperParams hp;
  hp.lambda = 0.005;
  hp.eta = 0.1;
  hp.beta1 = 0.9;
  const auto sgdw = rescaled_lambda(OptimizerKind::sgd, DecayMode::decoupled, hp);
  REQUIRE(sgdw);
  CHECK_THAT(*sgdw, WithinRel(0.005 * (1.0 - 0.9), 1e-15));
  const auto adamw = rescaled_lambda(OptimizerKind::adam, DecayMode::decoupled, hp);
  REQUIRE(adamw);
  CHECK_THAT(*adamw, WithinRel(0.005 * 0.1, 1e-15));
  CHECK_FALSE(rescaled_lambda(OptimizerKind::adam, DecayMode::stable, hp));
  CHECK_FALSE(rescaled_lambda(OptimizerKind::sgd, DecayMode::l2, hp));
}

TEST_CASE("runs are deterministic byte for byte") {
  const RunConfig cfg = tiny_logistic();
  const RunResult a = run(cfg), b = run(cfg);
  std::ostringstream sa, sb;
  write_log_csv(a, sa);
  write_log_csv(b, sb);
  CHECK(sa.str() == sb.str());
  CHECK(summary_json(a).dump(2) == summary_json(b).dump(2));
  CHECK(a.theta_final == b.theta_final);
}

TEST_CASE("log rows follow the log_every cadence plus the final step") {
  const RunConfig cfg = tiny_logistic();  // 4 steps/epoch x 5 epochs, log_every 6
  const RunResult res = run(cfg);
  REQUIRE_FALSE(res.aborted);
  CHECK(res.steps == 20);
  REQUIRE(res.rows.size() == 4);
  CHECK(res.rows[0].step == 6);
  CHECK(res.rows[1].step == 12);
  CHECK(res.rows[2].step == 18);
  CHECK(res.rows[3].step == 20);
  // diagnostics are recorded every step regardless of the log cadence
  CHECK(res.records.size() == 20);
  for (std::size_t i = 0; i < res.records.size(); ++i)
    CHECK(res.records[i].step == static_cast<long long>(i) + 1);
  // test loss appears at epoch boundaries; the final row must carry one
  REQUIRE(res.rows[3].test_loss);
}

TEST_CASE("each epoch visits every train row exactly once") {
  RunConfig cfg = tiny_logistic();
  cfg.epochs = 1;
  const Problem p = build_problem(cfg);
  // Reproduce the run's batching: theta0 draw, then one shuffle per epoch.
  RandomSource rng(cfg.seed);
  rng.normal_vector(p.dim);
  std::vector<std::size_t> order = p.train_rows;
  rng.shuffle(order);
  const std::set<std::size_t> seen(order.begin(), order.end());
  const std::set<std::size_t> split(p.train_rows.begin(), p.train_rows.end());
  CHECK(seen.size() == p.train_size);
  CHECK(seen == split);
}

TEST_CASE("default hyperparameters give a stable two-moons mlp run") {
  RunConfig cfg;
  cfg.problem_name = "mlp";
  cfg.problem_seed = 9;
  cfg.generator = "two_moons";
  cfg.data_n = 512;
  cfg.noise = 0.2;
  cfg.kind = OptimizerKind::adam;
  cfg.mode = DecayMode::stable;  // default eta/lambda/hidden/batch size
  cfg.schedule.eta0 = cfg.hp.eta;
  cfg.epochs = 50;
  cfg.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult res = run(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE_FALSE(res.aborted);
  const Json s = summary_json(res);
  CHECK(s.at("status").get<std::string>() == "ok");
  CHECK(s.at("stable").get<bool>());
  CHECK(secs < 60.0);
}

TEST_CASE("plain sgd with decay lands on the ridge solution") {
  RunConfig cfg;
  cfg.problem_name = "quadratic";
  cfg.problem_seed = 3;
  cfg.quad_dim = 4;
  cfg.kind = OptimizerKind::sgd;
  cfg.mode = DecayMode::plain;
  cfg.hp.eta = 0.05;
  cfg.hp.lambda = 0.1;
  cfg.hp.beta1 = 0.0;
  cfg.schedule.eta0 = cfg.hp.eta;
  cfg.epochs = 3000;  // quadratic runs one full-batch step per epoch
  cfg.log_every = 1000;
  const RunResult res = run(cfg);
  REQUIRE_FALSE(res.aborted);
  const auto [A, b] = make_random_spd(4, 3);
  const ParamVector star = ridge_closed_form(A, b, cfg.hp.lambda);
  for (std::size_t i = 0; i < star.size(); ++i)
    CHECK_THAT(res.theta_final[i], WithinAbs(star[i], 1e-6));
  CHECK(res.rho < 1.0);
}

TEST_CASE("diverging runs abort with a reason instead of throwing") {
  RunConfig cfg;
  cfg.problem_name = "quadratic";
  cfg.problem_seed = 1;
  cfg.quad_dim = 6;
  cfg.kind = OptimizerKind::sgd;
  cfg.mode = DecayMode::none;
  cfg.hp.eta = 10.0;  // far beyond 2/L: the spectrum is bounded below by 0.5
  cfg.hp.beta1 = 0.0;
  cfg.schedule.eta0 = cfg.hp.eta;
  cfg.epochs = 400;
  cfg.log_every = 50;
  const RunResult res = run(cfg);
  CHECK(res.aborted);
  CHECK_FALSE(res.abort_reason.empty());
  CHECK(res.abort_step > 0);
  CHECK(res.records.size() < 400);

  RunConfig over = cfg;
  over.mode = DecayMode::plain;
  over.hp.eta = 1.0;
  over.hp.lambda = 2.0;
  const RunResult res2 = run(over);
  CHECK(res2.aborted);
  CHECK(res2.abort_step == 1);
  CHECK_THAT(res2.abort_reason, ContainsSubstring("overshoot"));
}

TEST_CASE("sweep runs every cell and writes one summary row each") {
  RunConfig base = tiny_logistic();
  base.epochs = 2;
  SweepGrid grid;
  grid.modes = {DecayMode::stable, DecayMode::decoupled};
  grid.lambdas = {1e-4, 1e-3};

  TempDir d1("sweep_seq"), d2("sweep_par");
  const SweepResult r1 = sweep(base, grid, d1.path.string(), 1);
  const SweepResult r2 = sweep(base, grid, d2.path.string(), 4);
  REQUIRE(r1.cells.size() == 4);

  const std::string s1 = slurp(d1.path / "summary.csv");
  const std::string s2 = slurp(d2.path / "summary.csv");
  CHECK(s1 == s2);  // parallelism must not leak into the results

  for (std::size_t k = 0; k < 4; ++k) {
    const auto cell = d1.path / ("cell_00" + std::to_string(k));
    CHECK(std::filesystem::exists(cell / "log.csv"));
    CHECK(std::filesystem::exists(cell / "summary.json"));
    CHECK(std::filesystem::exists(cell / "config.echo.json"));
    // per-cell logs are independent of worker count
    CHECK(slurp(cell / "log.csv") == slurp(d2.path / ("cell_00" + std::to_string(k)) / "log.csv"));
  }
  CHECK(s1.rfind("cell,lambda,eta,mode,status,", 0) == 0);
}

TEST_CASE("a failing cell becomes a flagged row, not a sweep failure") {
  RunConfig base;
  base.problem_name = "quadratic";
  base.problem_seed = 1;
  base.quad_dim = 4;
  base.kind = OptimizerKind::sgd;
  base.mode = DecayMode::plain;
  base.hp.beta1 = 0.0;
  base.hp.eta = 0.05;
  base.schedule.eta0 = base.hp.eta;
  base.epochs = 10;
  SweepGrid grid;
  grid.lambdas = {0.1, 50.0};  // the second cell overshoots: 1 - eta*lambda < 0

  TempDir d("sweep_flagged");
  const SweepResult res = sweep(base, grid, d.path.string(), 1);
  REQUIRE(res.cells.size() == 2);
  CHECK(res.cells[0].status == "ok");
  CHECK_THAT(res.cells[1].status, ContainsSubstring("aborted"));
  const std::string csv = slurp(d.path / "summary.csv");
  CHECK_THAT(csv, ContainsSubstring("aborted"));
}
