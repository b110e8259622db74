#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swd/config.hpp"
#include "swd/diagnostics.hpp"
#include "swd/optimizers.hpp"
#include "swd/problems.hpp"
#include "swd/random.hpp"
#include "swd/run.hpp"
#include "swd/schedules.hpp"

namespace swd {

// One verified invariant. Upper-bound checks pass when measured <= tolerance;
// lower-bound checks (divergence demonstrations) pass when measured >= tolerance.
struct CheckResult {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool lower_bound = false;
  bool pass = false;
  std::string note;
};

namespace detail {

inline CheckResult upper(std::string suite, std::string name, double measured, double tol,
                         std::string note = "") {
  return {std::move(suite), std::move(name), measured, tol, false, measured <= tol,
          std::move(note)};
}

inline CheckResult lower(std::string suite, std::string name, double measured, double tol,
                         std::string note = "") {
  return {std::move(suite), std::move(name), measured, tol, true, measured >= tol,
          std::move(note)};
}

// Central finite differences with per-coordinate step 1e-6 (1 + |theta_i|).
inline ParamVector central_diff_grad(const Problem& p, const ParamVector& theta,
                                     const MinibatchView& view) {
  ParamVector fd(theta.size()), scratch;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::fabs(theta[i]));
    ParamVector t = theta;
    t[i] = theta[i] + h;
    const double up = p.eval(t, view, scratch);
    t[i] = theta[i] - h;
    const double dn = p.eval(t, view, scratch);
    fd[i] = (up - dn) / (2.0 * h);
  }
  return fd;
}

// Worst per-entry gap between analytic and finite-difference gradients over
// random probes, scaled by the largest gradient magnitude seen at that probe.
inline double max_grad_fd_error(const Problem& p, const MinibatchView& view,
                                RandomSource& rng, int probes) {
  double worst = 0.0;
  ParamVector grad;
  for (int k = 0; k < probes; ++k) {
    const ParamVector theta = rng.normal_vector(p.dim);
    p.eval(theta, view, grad);
    const ParamVector fd = central_diff_grad(p, theta, view);
    double scale = 1e-8;
    for (std::size_t i = 0; i < grad.size(); ++i)
      scale = std::max({scale, std::fabs(grad[i]), std::fabs(fd[i])});
    for (std::size_t i = 0; i < grad.size(); ++i)
      worst = std::max(worst, std::fabs(grad[i] - fd[i]) / scale);
  }
  return worst;
}

// Gap relative to the larger iterate magnitude, so a coordinate passing
// through zero does not dominate the measure.
inline double max_rel_gap(const ParamVector& a, const ParamVector& b) {
  double scale = 1e-12, worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  return worst;
}

// Full-batch deterministic trajectory of a bare optimizer on a problem.
// Returns theta after every step.
inline std::vector<ParamVector> trajectory(const Problem& p, OptimizerKind kind,
                                           DecayMode mode, const HyperParams& hp,
                                           const ParamVector& theta0, int steps) {
  Optimizer opt = make_optimizer(kind, p.dim, hp, mode);
  ParamVector theta = theta0, grad;
  std::vector<ParamVector> out;
  out.reserve(static_cast<std::size_t>(steps));
  const MinibatchView full{};
  for (int t = 0; t < steps; ++t) {
    p.eval(theta, full, grad);
    theta = opt.step(theta, grad, hp.eta).theta_next;
    out.push_back(theta);
  }
  return out;
}

// Worst per-step relative gap between two equally long trajectories.
inline double max_trajectory_gap(const std::vector<ParamVector>& a,
                                 const std::vector<ParamVector>& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) worst = std::max(worst, max_rel_gap(a[t], b[t]));
  return worst;
}

// Binary blobs at +/-1 per coordinate; feature dim controls the problem dim.
inline RunConfig logistic_blobs_config(std::size_t dim, std::uint64_t seed) {
  RunConfig cfg;
  cfg.problem_name = "logistic";
  cfg.problem_seed = seed;
  cfg.generator = "blobs";
  cfg.data_n = 256;
  cfg.spread = 1.0;
  cfg.centers.assign(2, ParamVector(dim, 0.0));
  for (std::size_t j = 0; j < dim; ++j) {
    cfg.centers[0][j] = -1.0;
    cfg.centers[1][j] = 1.0;
  }
  return cfg;
}

}  // namespace detail

inline std::vector<CheckResult> verify_propositions() {
  std::vector<CheckResult> out;

  {  // Vanilla-decay rate jumps by exactly the milestone lr ratio.
    ScheduleSpec sched;
    sched.kind = ScheduleKind::milestones;
    sched.eta0 = 0.1;
    sched.decay_factor = 0.1;
    sched.milestones = {80, 160};
    HyperParams hp;
    hp.eta = 0.1;
    hp.lambda = 0.001;
    hp.beta1 = 0.0;
    OptimizerState state;
    sgd_step(state, {1.0}, {0.0}, hp, DecayMode::vanilla, 0.1);
    const double eta_hi = lr_at(sched, 79, 0), eta_lo = lr_at(sched, 81, 0);
    const double r_hi = weight_decay_rate(OptimizerKind::sgd, DecayMode::vanilla, state, hp,
                                          eta_hi)[0];
    const double r_lo = weight_decay_rate(OptimizerKind::sgd, DecayMode::vanilla, state, hp,
                                          eta_lo)[0];
    const double ratio = (1.0 - r_lo) / (1.0 - r_hi);  // expected 1/decay_factor
    out.push_back(detail::upper("propositions", "prop1_rate_milestone_ratio",
                                std::fabs(ratio * sched.decay_factor - 1.0), 1e-12,
                                "lambda0/eta rate tracks the lr drop exactly"));
  }

  {  // Momentum splits into gradient and decay histories along a real run.
    RunConfig cfg = detail::logistic_blobs_config(2, 21);
    const Problem p = build_problem(cfg);
    HyperParams hp;
    hp.eta = 0.1;
    hp.lambda = 0.001;
    hp.beta1 = 0.9;
    Optimizer opt = make_optimizer(OptimizerKind::sgd, p.dim, hp, DecayMode::l2);
    RandomSource rng(5);
    ParamVector theta = rng.normal_vector(p.dim), grad;
    SgdL2Trace trace;
    const MinibatchView full{};
    for (int t = 0; t < 500; ++t) {
      p.eval(theta, full, grad);
      trace.theta_prev.push_back(theta);
      theta = opt.step(theta, grad, hp.eta).theta_next;
      trace.momentum.push_back(opt.state().m);
      trace.momentum_grad.push_back(opt.state().m_grad);
    }
    double worst = 0.0;
    for (const MomentumSplit& s : momentum_l2_decomposition(trace, hp))
      worst = std::max(worst, s.recon_rel_error);
    out.push_back(detail::upper("propositions", "prop2_decomposition_500", worst, 1e-10,
                                "L2 momentum recombines from grad + decay parts"));
  }

  {  // Decoupled Adam: coefficient norm equals sum of bias-corrected vhat.
    RunConfig cfg = detail::logistic_blobs_config(10, 11);
    const Problem p = build_problem(cfg);
    HyperParams hp;
    hp.eta = 0.001;
    hp.lambda = 0.0005;
    Optimizer opt = make_optimizer(OptimizerKind::adam, p.dim, hp, DecayMode::decoupled);
    RandomSource rng(9);
    ParamVector theta = rng.normal_vector(p.dim), grad;
    const MinibatchView full{};
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      p.eval(theta, full, grad);
      theta = opt.step(theta, grad, hp.eta).theta_next;
      const OptimizerState& st = opt.state();
      const double csn = coeff_sq_norm(OptimizerKind::adam, DecayMode::decoupled, st, hp,
                                       hp.eta);
      const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));
      double sum_rev = 0.0;  // reverse-order summation, independent of the forward path
      for (std::size_t i = st.v.size(); i-- > 0;) sum_rev += st.v[i] / bc2;
      const ParamVector c = lambda_coefficient(OptimizerKind::adam, DecayMode::decoupled,
                                               st, hp, hp.eta);
      double sum_c = 0.0;
      for (std::size_t i = c.size(); i-- > 0;) sum_c += c[i] * c[i];
      worst = std::max(worst, std::fabs(csn - sum_rev) / csn);
      worst = std::max(worst, std::fabs(csn - sum_c) / csn);
    }
    out.push_back(detail::upper("propositions", "prop4_adamw_coeff_exact", worst, 1e-12,
                                "sum c_i^2 == sum vhat_i for decoupled Adam"));
  }

  {  // Stable Adam: coefficient norm pinned to the parameter count for 2000 steps.
    RunConfig cfg = detail::logistic_blobs_config(10, 11);
    cfg.kind = OptimizerKind::adam;
    cfg.mode = DecayMode::stable;
    cfg.hp.eta = 0.001;
    cfg.hp.lambda = 0.0005;
    cfg.schedule.eta0 = cfg.hp.eta;
    cfg.epochs = 500;  // 205 train rows / 64 -> 4 steps per epoch -> 2000 steps
    cfg.batch_size = 64;
    cfg.log_every = 1000000;
    cfg.seed = 3;
    const RunResult res = run(cfg);
    double worst = res.aborted ? 1.0 : 0.0;
    for (const DecayRecord& rec : res.records)
      worst = std::max(worst, std::fabs(rec.coeff_sq_norm - 10.0) / 10.0);
    const bool stable = res.stability && res.stability->stable;
    out.push_back(detail::upper("propositions", "prop5_adams_coeff_const",
                                stable ? worst : 1.0, 1e-9,
                                "sum c_i^2 == dim at every step of a stable-Adam run"));
  }

  {  // Rescaled-coordinate equivalence on a quadratic.
    const auto [A, b] = make_random_spd(10, 2);
    const Problem p = quadratic_problem(A, b);
    HyperParams hp;
    hp.eta = 0.1;
    hp.lambda = 0.1;
    hp.beta1 = 0.0;
    const ParamVector theta0 = RandomSource(2).normal_vector(10);
    const double dev = rescaled_trajectory_check(p, hp, 200, theta0);
    out.push_back(detail::upper("propositions", "eq3_rescaled_200", dev, 1e-8,
                                "plain decay == rescaled-coordinate descent"));
  }

  {  // Zero-gradient decoupled Adam shrinks by the recorded decay product.
    HyperParams hp;
    hp.eta = 0.001;
    hp.lambda = 0.5;
    const std::size_t dim = 5;
    OptimizerState state;
    ParamVector theta = RandomSource(7).normal_vector(dim);
    const ParamVector theta0 = theta, zeros(dim, 0.0);
    std::vector<DecayScaleStep> steps;
    for (int t = 0; t < 100; ++t) {
      theta = adam_step(state, theta, zeros, hp, DecayMode::decoupled, hp.eta).theta_next;
      steps.push_back({hp.eta, hp.lambda, 1.0});
    }
    const double rho = total_decay_effect(steps);
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
      worst = std::max(worst, std::fabs(theta[i] / theta0[i] - rho) / rho);
    out.push_back(detail::upper("propositions", "eq5_zero_grad_product", worst, 1e-12,
                                "theta_T/theta_0 == product of per-step multipliers"));
  }

  return out;
}

inline std::vector<CheckResult> verify_equivalences() {
  std::vector<CheckResult> out;

  const auto [A, b] = make_random_spd(10, 4);
  const Problem quad = quadratic_problem(A, b);
  const ParamVector q0 = RandomSource(4).normal_vector(10);

  const RunConfig lcfg = detail::logistic_blobs_config(4, 17);
  const Problem logi = build_problem(lcfg);
  const ParamVector l0 = RandomSource(17).normal_vector(logi.dim);

  {  // Scaled-lambda vanilla decay matches plain decay.
    HyperParams plain;
    plain.eta = 0.1;
    plain.lambda = 0.1;
    plain.beta1 = 0.0;
    HyperParams vanilla = plain;
    vanilla.lambda = plain.eta * plain.lambda;
    const auto ta = detail::trajectory(quad, OptimizerKind::sgd, DecayMode::plain, plain, q0, 1000);
    const auto tb =
        detail::trajectory(quad, OptimizerKind::sgd, DecayMode::vanilla, vanilla, q0, 1000);
    out.push_back(detail::upper("equivalences", "eq1_eq2_vanilla_plain",
                                detail::max_trajectory_gap(ta, tb), 1e-12,
                                "lambda0 = eta*lambda reproduces plain decay"));
  }

  {  // Stable decay collapses to plain decay when momentum is off.
    HyperParams hp;
    hp.eta = 0.05;
    hp.lambda = 0.2;
    hp.beta1 = 0.0;
    const auto ta = detail::trajectory(quad, OptimizerKind::sgd, DecayMode::plain, hp, q0, 200);
    const auto tb = detail::trajectory(quad, OptimizerKind::sgd, DecayMode::stable, hp, q0, 200);
    double worst = 0.0;
    for (std::size_t t = 0; t < ta.size(); ++t)
      for (std::size_t i = 0; i < ta[t].size(); ++i)
        worst = std::max(worst, std::fabs(ta[t][i] - tb[t][i]));
    out.push_back(detail::upper("equivalences", "stable_plain_reduction_bitwise", worst, 0.0,
                                "beta1=0: stable and plain steps are identical"));
  }

  {  // Stable decay at lambda_S is decoupled decay at lambda_S * beta3/(1-beta1).
    HyperParams s;
    s.eta = 0.1;
    s.lambda = 0.0005;
    s.beta1 = 0.9;
    HyperParams w = s;
    w.lambda = s.lambda * s.swd_factor(1);
    const auto ts = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::stable, s, l0, 100);
    const auto tw = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::decoupled, w, l0, 100);
    out.push_back(detail::upper("equivalences", "sgds_sgdw_retuning_bitwise",
                                detail::max_trajectory_gap(ts, tw), 1e-15,
                                "retuned decoupled decay reproduces stable decay bitwise"));
  }

  {  // L2 at the same nominal lambda is NOT the same trajectory under momentum.
    HyperParams s;
    s.eta = 0.1;
    s.lambda = 0.0005;
    s.beta1 = 0.9;
    const auto ts = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::stable, s, l0, 100);
    const auto tl = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::l2, s, l0, 100);
    out.push_back(detail::lower("equivalences", "l2_diverges_with_momentum",
                                detail::max_trajectory_gap(ts, tl), 1e-6,
                                "same lambda, different decay route, different path"));
  }

  {  // TensorFlow-style momentum equals HBM when decay is off and eta is constant.
    HyperParams hp;
    hp.eta = 0.05;
    hp.lambda = 0.0;
    hp.beta1 = 0.9;
    const auto ta = detail::trajectory(quad, OptimizerKind::sgd, DecayMode::none, hp, q0, 1000);
    const auto tb = detail::trajectory(quad, OptimizerKind::tf_sgd, DecayMode::none, hp, q0, 1000);
    out.push_back(detail::upper("equivalences", "tf_hbm_no_decay",
                                detail::max_trajectory_gap(ta, tb), 1e-12,
                                "lr-premultiplied momentum matches HBM at constant lr"));
  }

  {  // Without momentum, L2 regularization and plain decay coincide.
    HyperParams hp;
    hp.eta = 0.1;
    hp.lambda = 0.01;
    hp.beta1 = 0.0;
    const auto ta = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::l2, hp, l0, 100);
    const auto tb = detail::trajectory(logi, OptimizerKind::sgd, DecayMode::plain, hp, l0, 100);
    out.push_back(detail::upper("equivalences", "l2_plain_vanilla_identity",
                                detail::max_trajectory_gap(ta, tb), 1e-13,
                                "beta1=0: theta - eta(g + lambda theta) == (1-eta lambda)theta - eta g"));
  }

  return out;
}

inline std::vector<CheckResult> verify_gradients() {
  std::vector<CheckResult> out;
  const MinibatchView full{};

  {
    const auto [A, b] = make_random_spd(8, 6);
    const Problem p = quadratic_problem(A, b);
    RandomSource rng(100);
    out.push_back(detail::upper("gradients", "grad_quadratic",
                                detail::max_grad_fd_error(p, full, rng, 10), 1e-7));
  }

  {
    RunConfig cfg = detail::logistic_blobs_config(20, 31);
    const Problem p = build_problem(cfg);
    RandomSource rng(101);
    out.push_back(detail::upper("gradients", "grad_logistic",
                                detail::max_grad_fd_error(p, full, rng, 10), 1e-6));
  }

  {
    const SyntheticDataset ds = make_two_moons(128, 0.2, 41);
    const Problem p = mlp_problem(ds, {8}, Activation::tanh_act);
    RandomSource rng(102);
    out.push_back(detail::upper("gradients", "grad_mlp_tanh",
                                detail::max_grad_fd_error(p, full, rng, 10), 1e-5));
  }

  {
    const SyntheticDataset ds = make_two_moons(128, 0.2, 41);
    const Problem p = mlp_problem(ds, {8}, Activation::relu);
    RandomSource rng(103);
    out.push_back(detail::upper("gradients", "grad_mlp_relu",
                                detail::max_grad_fd_error(p, full, rng, 10), 1e-5));
  }

  return out;
}

inline std::vector<CheckResult> run_verify(const std::string& suite) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "propositions") {
    auto v = verify_propositions();
    out.insert(out.end(), v.begin(), v.end());
    known = true;
  }
  if (all || suite == "equivalences") {
    auto v = verify_equivalences();
    out.insert(out.end(), v.begin(), v.end());
    known = true;
  }
  if (all || suite == "gradients") {
    auto v = verify_gradients();
    out.insert(out.end(), v.begin(), v.end());
    known = true;
  }
  if (!known) throw std::invalid_argument("unknown verify suite '" + suite + "'");
  return out;
}

// Prints one line per check; returns true when everything passed.
inline bool print_verify_report(const std::vector<CheckResult>& results, std::ostream& os) {
  bool ok = true;
  for (const CheckResult& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s  %s/%s  measured=%.3e  tol%s%.1e", r.pass ? "PASS" : "FAIL",
                  r.suite.c_str(), r.name.c_str(), r.measured, r.lower_bound ? ">=" : "<=",
                  r.tolerance);
    os << buf;
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << '\n';
    ok = ok && r.pass;
  }
  os << (ok ? "all checks passed" : "CHECKS FAILED") << " (" << results.size() << " run)\n";
  return ok;
}

}  // namespace swd
