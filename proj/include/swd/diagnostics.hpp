#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "swd/optimizers.hpp"
#include "swd/problems.hpp"
#include "swd/vector_ops.hpp"

namespace swd {

// Dimensions whose parameter is this close to zero have no meaningful
// per-coordinate decay rate; they are reported as NaN ("absent").
inline constexpr double kRateThetaFloor = 1e-12;

// theta_{t-1} together with its inertia-weighted average
// <theta_{t-1}> = (1-beta1)/(1-beta1^t) sum_k beta1^{k-1} theta_{t-k},
// which is what momentum-routed (l2) decay actually shrinks toward zero.
struct ThetaHistory {
  ParamVector prev;
  ParamVector ema;
};

class ThetaEmaTracker {
 public:
  ThetaEmaTracker(double beta1, std::size_t dim)
      : beta1_(beta1), s_(dim, 0.0), prev_(dim, 0.0) {
    if (!(beta1 >= 0.0) || beta1 >= 1.0)
      throw std::invalid_argument("theta ema: beta1 must be in [0, 1)");
  }

  // Call once per step with the iterate the step started from.
  void observe(const ParamVector& theta_prev) {
    if (theta_prev.size() != s_.size())
      throw std::invalid_argument("theta ema: dimension mismatch");
    ++count_;
    for (std::size_t i = 0; i < s_.size(); ++i) s_[i] = theta_prev[i] + beta1_ * s_[i];
    prev_ = theta_prev;
  }

  long long count() const { return count_; }

  ThetaHistory history() const {
    if (count_ == 0) throw std::logic_error("theta ema: no observations yet");
    const double norm =
        (1.0 - beta1_) / (1.0 - std::pow(beta1_, static_cast<double>(count_)));
    ThetaHistory h;
    h.prev = prev_;
    h.ema.resize(s_.size());
    for (std::size_t i = 0; i < s_.size(); ++i) h.ema[i] = norm * s_[i];
    return h;
  }

 private:
  double beta1_;
  long long count_ = 0;
  ParamVector s_;  // running sum beta1^{k-1} theta_{t-k}
  ParamVector prev_;
};

namespace detail {

inline ParamVector bias_corrected_vhat(OptimizerKind kind, const OptimizerState& state,
                                       const HyperParams& hp) {
  const ParamVector& src = kind == OptimizerKind::amsgrad ? state.v_max : state.v;
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  ParamVector vhat(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) vhat[i] = src[i] / bc2;
  return vhat;
}

inline double hbm_lr_factor(OptimizerKind kind, const HyperParams& hp, long long t) {
  const double b3 = kind == OptimizerKind::tf_sgd ? 1.0 : hp.beta3;
  return b3 * (1.0 - std::pow(hp.beta1, static_cast<double>(t))) / (1.0 - hp.beta1);
}

}  // namespace detail

// Per-dimension coefficient c with R = 1 - lambda * c: how many units of
// lambda the step actually removed, measured in effective-learning-rate time.
// The l2 modes need the theta history (the decay rides in the momentum
// buffer); entries with |theta| < kRateThetaFloor come back as NaN.
inline std::vector<double> lambda_coefficient(OptimizerKind kind, DecayMode mode,
                                              const OptimizerState& state,
                                              const HyperParams& hp, double eta_t,
                                              const ThetaHistory* history = nullptr) {
  if (state.t <= 0) throw std::invalid_argument("lambda_coefficient: no step taken yet");
  if (!(eta_t > 0.0)) throw std::invalid_argument("lambda_coefficient: eta_t must be positive");
  const std::size_t n = state.m.size();
  std::vector<double> c(n, 0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (mode == DecayMode::none) return c;
  if (mode == DecayMode::l2 && history == nullptr)
    throw std::invalid_argument("lambda_coefficient: l2 rate requires theta history");

  switch (kind) {
    case OptimizerKind::sgd:
    case OptimizerKind::tf_sgd: {
      switch (mode) {
        case DecayMode::vanilla:
          c.assign(n, 1.0 / eta_t);
          break;
        case DecayMode::plain:
        case DecayMode::stable:
          c.assign(n, 1.0);
          break;
        case DecayMode::decoupled:
          c.assign(n, 1.0 / hp.swd_factor(state.t));
          break;
        case DecayMode::l2: {
          const double f = detail::hbm_lr_factor(kind, hp, state.t);
          for (std::size_t i = 0; i < n; ++i) {
            c[i] = std::fabs(history->prev[i]) < kRateThetaFloor
                       ? nan
                       : f * history->ema[i] / history->prev[i];
          }
          break;
        }
        default:
          break;
      }
      break;
    }
    case OptimizerKind::adam:
    case OptimizerKind::amsgrad: {
      const ParamVector vhat = detail::bias_corrected_vhat(kind, state, hp);
      const double floor = hp.epsilon * hp.epsilon;
      switch (mode) {
        case DecayMode::decoupled:
          for (std::size_t i = 0; i < n; ++i) c[i] = std::sqrt(vhat[i]);
          break;
        case DecayMode::stable: {
          const double vbar = mean(vhat);
          for (std::size_t i = 0; i < n; ++i)
            c[i] = vbar >= floor ? std::sqrt(vhat[i] / vbar) : 0.0;
          break;
        }
        case DecayMode::stable_perdim:
          for (std::size_t i = 0; i < n; ++i) c[i] = vhat[i] >= floor ? 1.0 : 0.0;
          break;
        case DecayMode::l2: {
          if (hp.lambda == 0.0) break;
          const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
          for (std::size_t i = 0; i < n; ++i) {
            if (std::fabs(history->prev[i]) < kRateThetaFloor) {
              c[i] = nan;
              continue;
            }
            // Realized decay displacement per unit of effective learning
            // rate eta_t / sqrt(vhat).
            const double disp = (state.m_decay[i] / bc1) / (std::sqrt(vhat[i]) + hp.epsilon);
            c[i] = std::sqrt(vhat[i]) * disp / (history->prev[i] * hp.lambda);
          }
          break;
        }
        default:
          break;
      }
      break;
    }
    case OptimizerKind::adai: {
      switch (mode) {
        case DecayMode::stable:
          c.assign(n, 1.0);
          break;
        case DecayMode::l2: {
          if (hp.lambda == 0.0) break;
          for (std::size_t i = 0; i < n; ++i) {
            if (std::fabs(history->prev[i]) < kRateThetaFloor) {
              c[i] = nan;
              continue;
            }
            const double bias = 1.0 - state.beta1_prod[i];
            c[i] = (state.m_decay[i] / bias) / (history->prev[i] * hp.lambda);
          }
          break;
        }
        default:
          break;
      }
      break;
    }
  }
  return c;
}

// Per-dimension weight decay rate R = 1 - lambda * c. NaN marks dimensions
// where the rate is undefined.
inline std::vector<double> weight_decay_rate(OptimizerKind kind, DecayMode mode,
                                             const OptimizerState& state, const HyperParams& hp,
                                             double eta_t,
                                             const ThetaHistory* history = nullptr) {
  std::vector<double> r = lambda_coefficient(kind, mode, state, hp, eta_t, history);
  for (double& x : r) x = 1.0 - hp.lambda * x;
  return r;
}

// Squared norm of the lambda coefficient vector. For the Adam family this is
// the quantity whose constancy separates stable decay (sum = dim) from
// decoupled decay (sum = sum vhat): the two sums below are computed in the
// literal form of those statements so the comparison is not polluted by
// sqrt round-trips.
inline double coeff_sq_norm(OptimizerKind kind, DecayMode mode, const OptimizerState& state,
                            const HyperParams& hp, double eta_t,
                            const ThetaHistory* history = nullptr) {
  const bool adam_family = kind == OptimizerKind::adam || kind == OptimizerKind::amsgrad;
  if (adam_family && mode == DecayMode::decoupled) {
    return sum(detail::bias_corrected_vhat(kind, state, hp));
  }
  if (adam_family && mode == DecayMode::stable) {
    const ParamVector vhat = detail::bias_corrected_vhat(kind, state, hp);
    const double s = sum(vhat);
    const double vbar = s / static_cast<double>(vhat.size());
    if (vbar < hp.epsilon * hp.epsilon) return 0.0;
    return s / vbar;  // sum of vhat_i / vbar, summed exactly once
  }
  const std::vector<double> c = lambda_coefficient(kind, mode, state, hp, eta_t, history);
  double s = 0.0;
  for (double x : c)
    if (!std::isnan(x)) s += x * x;
  return s;
}

// Isotropic decay scale s_t with multiplier 1 - eta_t lambda s_t. For the
// anisotropic modes (l2, stable_perdim) this is a first-order isotropic
// proxy; the per-dimension truth lives in lambda_coefficient.
inline double isotropic_decay_scale(OptimizerKind kind, DecayMode mode,
                                    const OptimizerState& state, const HyperParams& hp,
                                    double eta_t) {
  if (mode == DecayMode::none) return 0.0;
  switch (kind) {
    case OptimizerKind::sgd:
    case OptimizerKind::tf_sgd:
      switch (mode) {
        case DecayMode::vanilla: return 1.0 / eta_t;
        case DecayMode::plain: return 1.0;
        case DecayMode::decoupled: return 1.0;
        case DecayMode::stable: return hp.swd_factor(state.t);
        case DecayMode::l2: return detail::hbm_lr_factor(kind, hp, state.t);
        default: return 0.0;
      }
    case OptimizerKind::adam:
    case OptimizerKind::amsgrad: {
      const ParamVector vhat = detail::bias_corrected_vhat(kind, state, hp);
      const double floor = hp.epsilon * hp.epsilon;
      switch (mode) {
        case DecayMode::decoupled:
          return 1.0;
        case DecayMode::stable: {
          const double vbar = mean(vhat);
          return vbar >= floor ? 1.0 / std::sqrt(vbar) : 0.0;
        }
        case DecayMode::stable_perdim:
        case DecayMode::l2: {
          double s = 0.0;
          for (double v : vhat)
            s += mode == DecayMode::stable_perdim
                     ? (v >= floor ? 1.0 / std::sqrt(v) : 0.0)
                     : 1.0 / (std::sqrt(v) + hp.epsilon);
          return s / static_cast<double>(vhat.size());
        }
        default:
          return 0.0;
      }
    }
    case OptimizerKind::adai:
      return 1.0;  // effective learning rate is eta_t itself
  }
  return 0.0;
}

// One step's contribution to the cumulative decay effect.
struct DecayScaleStep {
  double eta_t = 0.0;
  double lambda = 0.0;
  double scale = 1.0;  // s_t
};

// rho_T = prod_t (1 - eta_t lambda s_t): the fraction of the initial weight
// magnitude that pure decay would leave after T steps.
inline double total_decay_effect(const std::vector<DecayScaleStep>& steps) {
  double rho = 1.0;
  for (const auto& s : steps) {
    const double mult = 1.0 - (s.eta_t * s.lambda) * s.scale;
    if (!(mult > 0.0))
      throw std::runtime_error("total_decay_effect: multiplier " + std::to_string(mult) +
                               " is not positive (decay overshoot)");
    rho *= mult;
  }
  return rho;
}

// Plain decay is a pure rescaling: running SGD on the rescaled coordinates
// w_t = theta_t (1 - eta lambda)^{-t} with a growing step size must retrace
// the original trajectory. Returns the worst relative deviation
// |theta_t - (1-eta lambda)^t w_t| / (|theta_t| + 1e-12) over the horizon.
// With lambda = 0 the two recurrences are the same arithmetic, so the
// deviation is exactly zero.
inline double rescaled_trajectory_check(const Problem& problem, const HyperParams& hp,
                                        long long steps, const ParamVector& theta0) {
  hp.validate();
  if (hp.beta1 != 0.0 || hp.beta3 != 1.0)
    throw std::invalid_argument("rescaled check: plain decay requires beta1=0, beta3=1");
  if (steps < 1) throw std::invalid_argument("rescaled check: need at least one step");
  if (theta0.size() != problem.dim)
    throw std::invalid_argument("rescaled check: theta0 dimension mismatch");
  const double factor = 1.0 - hp.eta * hp.lambda;
  if (!(factor > 0.0)) throw std::runtime_error("rescaled check: decay overshoot");

  OptimizerState state;
  ParamVector theta = theta0, w = theta0, grad, gw, recon(theta0.size());
  const MinibatchView full{};
  double powt = 1.0, worst = 0.0;
  for (long long t = 1; t <= steps; ++t) {
    problem.eval(theta, full, grad);
    theta = sgd_step(state, theta, grad, hp, DecayMode::plain, hp.eta).theta_next;

    // w_t = w_{t-1} - eta f^{-t} grad(f^{t-1} w_{t-1}): the gradient is taken
    // at the previous reconstruction, the shrink uses the advanced power.
    for (std::size_t i = 0; i < w.size(); ++i) recon[i] = powt * w[i];
    problem.eval(recon, full, gw);
    powt *= factor;
    const double inv_pow = 1.0 / powt;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= (hp.eta * gw[i]) * inv_pow;

    for (std::size_t i = 0; i < w.size(); ++i) {
      const double dev = std::fabs(theta[i] - powt * w[i]) / (std::fabs(theta[i]) + 1e-12);
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

// Trace of an sgd l2 run: iterates entering each step, the momentum after
// the step, and the gradient-only parallel buffer.
struct SgdL2Trace {
  std::vector<ParamVector> theta_prev;
  std::vector<ParamVector> momentum;
  std::vector<ParamVector> momentum_grad;
};

struct MomentumSplit {
  ParamVector decay_part;  // lambda beta3 sum_k beta1^{t-k} theta_{k-1}
  ParamVector grad_part;   // the parallel gradient buffer
  double recon_rel_error;  // |m - (decay + grad)| / |m|
};

// Split the momentum of an l2 run into its gradient and decay histories.
// The decay part is rebuilt from the raw theta history, independently of the
// buffers the optimizer accumulated.
inline std::vector<MomentumSplit> momentum_l2_decomposition(const SgdL2Trace& trace,
                                                            const HyperParams& hp) {
  const std::size_t steps = trace.theta_prev.size();
  if (steps == 0 || trace.momentum.size() != steps || trace.momentum_grad.size() != steps)
    throw std::invalid_argument("momentum decomposition: inconsistent trace");
  const std::size_t n = trace.theta_prev[0].size();
  std::vector<MomentumSplit> out;
  out.reserve(steps);
  const double lam_b3 = hp.lambda * hp.beta3;
  for (std::size_t t = 1; t <= steps; ++t) {
    MomentumSplit split;
    split.decay_part.assign(n, 0.0);
    for (std::size_t k = 0; k < t; ++k) {  // oldest first: Horner in beta1
      for (std::size_t i = 0; i < n; ++i)
        split.decay_part[i] = hp.beta1 * split.decay_part[i] + trace.theta_prev[k][i];
    }
    for (std::size_t i = 0; i < n; ++i) split.decay_part[i] *= lam_b3;
    split.grad_part = trace.momentum_grad[t - 1];

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff =
          trace.momentum[t - 1][i] - (split.grad_part[i] + split.decay_part[i]);
      num += diff * diff;
      den += trace.momentum[t - 1][i] * trace.momentum[t - 1][i];
    }
    split.recon_rel_error =
        den > 0.0 ? std::sqrt(num) / std::sqrt(den) : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    out.push_back(std::move(split));
  }
  return out;
}

// Per-step diagnostic record accumulated by the harness.
struct DecayRecord {
  long long step = 0;
  std::vector<double> rate;  // R per dimension, NaN = undefined
  double rho = 1.0;
  double coeff_sq_norm = 0.0;
  ParamVector multiplier;
};

struct SummaryStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

// Two-pass stats over the non-NaN entries.
inline SummaryStats nan_aware_stats(const std::vector<double>& xs) {
  SummaryStats st;
  double s = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    if (st.count == 0) {
      st.min = st.max = x;
    } else {
      st.min = std::min(st.min, x);
      st.max = std::max(st.max, x);
    }
    s += x;
    ++st.count;
  }
  if (st.count == 0) return st;
  st.mean = s / static_cast<double>(st.count);
  double ss = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    const double c = x - st.mean;
    ss += c * c;
  }
  st.stddev = std::sqrt(ss / static_cast<double>(st.count));
  return st;
}

struct StabilityReport {
  SummaryStats coeff;      // coeff_sq_norm over time
  SummaryStats rate_mean;  // per-step mean(R) over time
  SummaryStats rate_std;   // per-step std(R) over time
  bool stable = false;     // coeff_sq_norm constant to 1e-12 relative
};

inline StabilityReport stability_report(const std::vector<DecayRecord>& records) {
  if (records.size() < 2)
    throw std::invalid_argument("stability_report: need at least 2 records");
  std::vector<double> coeff, rmean, rstd;
  coeff.reserve(records.size());
  for (const auto& rec : records) {
    coeff.push_back(rec.coeff_sq_norm);
    const SummaryStats rs = nan_aware_stats(rec.rate);
    rmean.push_back(rs.mean);
    rstd.push_back(rs.stddev);
  }
  StabilityReport rep;
  rep.coeff = nan_aware_stats(coeff);
  rep.rate_mean = nan_aware_stats(rmean);
  rep.rate_std = nan_aware_stats(rstd);
  if (rep.coeff.count >= 2) {
    rep.stable = rep.coeff.mean != 0.0 ? rep.coeff.stddev / std::fabs(rep.coeff.mean) <= 1e-12
                                       : rep.coeff.stddev == 0.0;
  }
  return rep;
}

}  // namespace swd
