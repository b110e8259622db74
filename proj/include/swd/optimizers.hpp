#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "swd/vector_ops.hpp"

namespace swd {

enum class OptimizerKind { sgd, tf_sgd, adam, amsgrad, adai };

// How the weight decay term enters the update:
//   none          no decay; lambda is ignored
//   vanilla       theta' = (1 - lambda) theta - eta g          (fixed rate)
//   plain         theta' = (1 - eta lambda) theta - eta g
//   l2            lambda theta is added to the gradient and flows through
//                 the momentum / second-moment buffers
//   decoupled     subtract eta_t lambda theta directly
//   stable        decoupled, rescaled by the effective learning rate:
//                 beta3/(1-beta1) for heavy-ball SGD, 1/sqrt(mean vhat) for
//                 the Adam family, 1 for Adai
//   stable_perdim Adam only: subtract eta_t lambda theta / sqrt(vhat)
//                 elementwise
enum class DecayMode { none, vanilla, plain, l2, decoupled, stable, stable_perdim };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::tf_sgd: return "tf_sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::amsgrad: return "amsgrad";
    case OptimizerKind::adai: return "adai";
  }
  return "?";
}

inline std::string_view to_string(DecayMode m) {
  switch (m) {
    case DecayMode::none: return "none";
    case DecayMode::vanilla: return "vanilla";
    case DecayMode::plain: return "plain";
    case DecayMode::l2: return "l2";
    case DecayMode::decoupled: return "decoupled";
    case DecayMode::stable: return "stable";
    case DecayMode::stable_perdim: return "stable_perdim";
  }
  return "?";
}

inline OptimizerKind optimizer_kind_from(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "tf_sgd") return OptimizerKind::tf_sgd;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "amsgrad") return OptimizerKind::amsgrad;
  if (s == "adai") return OptimizerKind::adai;
  throw std::invalid_argument("unknown optimizer kind '" + std::string(s) + "'");
}

inline DecayMode decay_mode_from(std::string_view s) {
  if (s == "none") return DecayMode::none;
  if (s == "vanilla") return DecayMode::vanilla;
  if (s == "plain") return DecayMode::plain;
  if (s == "l2") return DecayMode::l2;
  if (s == "decoupled") return DecayMode::decoupled;
  if (s == "stable") return DecayMode::stable;
  if (s == "stable_perdim") return DecayMode::stable_perdim;
  throw std::invalid_argument("unknown decay mode '" + std::string(s) + "'");
}

struct HyperParams {
  double eta = 1e-3;      // base learning rate
  double lambda = 0.0;    // decay strength; semantics depend on DecayMode
  double beta1 = 0.9;     // momentum inertia
  double beta2 = 0.999;   // second-moment inertia
  double beta3 = 1.0;     // dampening on the gradient term of heavy-ball SGD
  double epsilon = 1e-8;
  double beta0 = 0.1;     // adaptive-inertia scale (adai only)
  // Momentum-corrected decay scale for sgd+stable: false uses the fixed
  // long-run factor beta3/(1-beta1); true uses beta3 (1-beta1^t)/(1-beta1).
  bool exact_swd_factor = false;

  void validate() const {
    auto fin = [](double x) { return std::isfinite(x); };
    if (!fin(eta) || !(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (!fin(lambda) || lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (!fin(beta1) || beta1 < 0.0 || beta1 >= 1.0)
      throw std::invalid_argument("beta1 must be in [0, 1)");
    if (!fin(beta2) || beta2 < 0.0 || beta2 >= 1.0)
      throw std::invalid_argument("beta2 must be in [0, 1)");
    if (!fin(beta3) || !(beta3 > 0.0)) throw std::invalid_argument("beta3 must be positive");
    if (!fin(epsilon) || !(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!fin(beta0) || !(beta0 > 0.0)) throw std::invalid_argument("beta0 must be positive");
  }

  // Ratio between the effective and nominal learning rate of heavy-ball SGD.
  double swd_factor(long long t) const {
    const double base = beta3 / (1.0 - beta1);
    if (!exact_swd_factor) return base;
    return base * (1.0 - std::pow(beta1, static_cast<double>(t)));
  }
};

struct OptimizerState {
  ParamVector m;           // first moment / momentum
  ParamVector v;           // second moment (adam family, adai)
  ParamVector v_max;       // running max of v (amsgrad)
  ParamVector m_grad;      // l2 mode: momentum restricted to the raw gradient
  ParamVector m_decay;     // l2 mode: momentum restricted to lambda*theta
  ParamVector beta1_prod;  // adai: per-dimension product of beta1_t
  long long t = 0;         // completed steps
};

// One update, reported as theta_next = decay_multiplier .* theta + grad_step.
// The identity holds bitwise: grad_step is the residual displacement after
// the decay factor is taken out.
struct StepOutput {
  ParamVector theta_next;
  ParamVector decay_multiplier;
  ParamVector grad_step;
};

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_step_inputs(const ParamVector& theta, const ParamVector& grad, double eta_t) {
  require(theta.size() == grad.size(), "step: theta/grad dimension mismatch");
  require(!theta.empty(), "step: empty parameter vector");
  if (!std::isfinite(eta_t) || !(eta_t > 0.0))
    throw std::invalid_argument("step: eta_t must be positive and finite");
}

inline long long advance(OptimizerState& s) {
  if (s.t == std::numeric_limits<long long>::max())
    throw std::overflow_error("step counter overflow");
  return ++s.t;
}

inline void init_buffer(ParamVector& buf, std::size_t n, double fill) {
  if (buf.empty()) buf.assign(n, fill);
  require(buf.size() == n, "step: state buffer dimension mismatch");
}

inline void check_multiplier(double mult) {
  if (!(mult > 0.0))
    throw std::runtime_error("decay overshoot: multiplier " + std::to_string(mult) +
                             " is not positive; reduce eta or lambda");
}

// grad_step := theta_next - mult .* theta, so the reported decomposition
// reconstructs theta_next exactly.
inline StepOutput assemble(const ParamVector& theta, ParamVector theta_next, ParamVector mult) {
  ParamVector gs(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) gs[i] = theta_next[i] - mult[i] * theta[i];
  return StepOutput{std::move(theta_next), std::move(mult), std::move(gs)};
}

// Decay multiplier for dimensions whose decay went through the momentum
// buffer: fold the realized decay displacement back onto theta.
inline double l2_multiplier(double theta_i, double decay_disp_i) {
  return theta_i != 0.0 ? (theta_i + decay_disp_i) / theta_i : 1.0;
}

}  // namespace detail

// Heavy-ball SGD:  m <- beta1 m + beta3 (g [+ lambda theta]);
//                  theta' = mult * theta - eta_t m.
// vanilla/plain require beta1 = 0, beta3 = 1 (plain single-step form).
inline StepOutput sgd_step(OptimizerState& state, const ParamVector& theta,
                           const ParamVector& grad, const HyperParams& hp, DecayMode mode,
                           double eta_t) {
  hp.validate();
  detail::check_step_inputs(theta, grad, eta_t);
  const std::size_t n = theta.size();
  detail::init_buffer(state.m, n, 0.0);
  switch (mode) {
    case DecayMode::none:
    case DecayMode::vanilla:
    case DecayMode::plain:
    case DecayMode::l2:
    case DecayMode::decoupled:
    case DecayMode::stable:
      break;
    default:
      throw std::invalid_argument("decay mode '" + std::string(to_string(mode)) +
                                  "' is not valid for optimizer 'sgd'");
  }
  if ((mode == DecayMode::vanilla || mode == DecayMode::plain) &&
      (hp.beta1 != 0.0 || hp.beta3 != 1.0))
    throw std::invalid_argument("vanilla/plain decay requires beta1 = 0 and beta3 = 1");

  const long long t = detail::advance(state);
  const double lam = mode == DecayMode::none ? 0.0 : hp.lambda;
  const bool l2 = mode == DecayMode::l2;
  if (l2) {
    detail::init_buffer(state.m_grad, n, 0.0);
    detail::init_buffer(state.m_decay, n, 0.0);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double g_eff = l2 ? grad[i] + lam * theta[i] : grad[i];
    state.m[i] = hp.beta1 * state.m[i] + hp.beta3 * g_eff;
    if (l2) {
      state.m_grad[i] = hp.beta1 * state.m_grad[i] + hp.beta3 * grad[i];
      state.m_decay[i] = hp.beta1 * state.m_decay[i] + hp.beta3 * (lam * theta[i]);
    }
  }

  ParamVector theta_next(n), mult(n);
  if (l2) {
    for (std::size_t i = 0; i < n; ++i) {
      theta_next[i] = theta[i] - eta_t * state.m[i];
      mult[i] = detail::l2_multiplier(theta[i], -eta_t * state.m_decay[i]);
    }
  } else {
    double m_scalar = 1.0;
    switch (mode) {
      case DecayMode::vanilla:
        m_scalar = 1.0 - lam;
        break;
      case DecayMode::plain:
      case DecayMode::decoupled:
        m_scalar = 1.0 - eta_t * lam;
        break;
      case DecayMode::stable: {
        // Fold the rate correction into lambda first, so a stable run at
        // lambda and a decoupled run at swd_factor*lambda coincide bitwise.
        const double eff_lambda = lam * hp.swd_factor(t);
        m_scalar = 1.0 - eta_t * eff_lambda;
        break;
      }
      default:
        break;
    }
    detail::check_multiplier(m_scalar);
    for (std::size_t i = 0; i < n; ++i) {
      theta_next[i] = m_scalar * theta[i] - eta_t * state.m[i];
      mult[i] = m_scalar;
    }
  }
  ensure_finite(theta_next, "sgd_step theta");
  return detail::assemble(theta, std::move(theta_next), std::move(mult));
}

// TensorFlow-style SGD: the learning rate is folded into the momentum buffer.
//   m <- beta1 m - eta_t (g [+ lambda theta]);  theta' = theta + m.
// Only l2 and none make sense here; beta3 is unused.
inline StepOutput tf_sgd_step(OptimizerState& state, const ParamVector& theta,
                              const ParamVector& grad, const HyperParams& hp, DecayMode mode,
                              double eta_t) {
  hp.validate();
  detail::check_step_inputs(theta, grad, eta_t);
  const std::size_t n = theta.size();
  detail::init_buffer(state.m, n, 0.0);
  if (mode != DecayMode::none && mode != DecayMode::l2)
    throw std::invalid_argument("decay mode '" + std::string(to_string(mode)) +
                                "' is not valid for optimizer 'tf_sgd'");
  detail::advance(state);
  const double lam = mode == DecayMode::l2 ? hp.lambda : 0.0;
  const bool l2 = mode == DecayMode::l2;
  if (l2) {
    detail::init_buffer(state.m_grad, n, 0.0);
    detail::init_buffer(state.m_decay, n, 0.0);
  }

  ParamVector theta_next(n), mult(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g_eff = l2 ? grad[i] + lam * theta[i] : grad[i];
    state.m[i] = hp.beta1 * state.m[i] - eta_t * g_eff;
    if (l2) {
      state.m_grad[i] = hp.beta1 * state.m_grad[i] - eta_t * grad[i];
      state.m_decay[i] = hp.beta1 * state.m_decay[i] - eta_t * (lam * theta[i]);
    }
    theta_next[i] = theta[i] + state.m[i];
    mult[i] = l2 ? detail::l2_multiplier(theta[i], state.m_decay[i]) : 1.0;
  }
  ensure_finite(theta_next, "tf_sgd_step theta");
  return detail::assemble(theta, std::move(theta_next), std::move(mult));
}

namespace detail {

// Shared Adam / AMSGrad body; AMSGrad replaces vhat by the bias-corrected
// running max of v. First step bitwise-matches Adam (v_max starts at 0).
inline StepOutput adam_family_step(OptimizerState& state, const ParamVector& theta,
                                   const ParamVector& grad, const HyperParams& hp,
                                   DecayMode mode, double eta_t, bool use_vmax) {
  hp.validate();
  check_step_inputs(theta, grad, eta_t);
  const std::size_t n = theta.size();
  init_buffer(state.m, n, 0.0);
  init_buffer(state.v, n, 0.0);
  if (use_vmax) init_buffer(state.v_max, n, 0.0);
  const char* name = use_vmax ? "amsgrad" : "adam";
  switch (mode) {
    case DecayMode::none:
    case DecayMode::l2:
    case DecayMode::decoupled:
    case DecayMode::stable:
      break;
    case DecayMode::stable_perdim:
      if (!use_vmax) break;
      [[fallthrough]];
    default:
      throw std::invalid_argument("decay mode '" + std::string(to_string(mode)) +
                                  "' is not valid for optimizer '" + name + "'");
  }

  const long long t = advance(state);
  const double lam = mode == DecayMode::none ? 0.0 : hp.lambda;
  const bool l2 = mode == DecayMode::l2;
  if (l2) {
    init_buffer(state.m_grad, n, 0.0);
    init_buffer(state.m_decay, n, 0.0);
  }
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));

  ParamVector vhat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g_eff = l2 ? grad[i] + lam * theta[i] : grad[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g_eff;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * (g_eff * g_eff);
    if (l2) {
      state.m_grad[i] = hp.beta1 * state.m_grad[i] + (1.0 - hp.beta1) * grad[i];
      state.m_decay[i] = hp.beta1 * state.m_decay[i] + (1.0 - hp.beta1) * (lam * theta[i]);
    }
    if (use_vmax) {
      state.v_max[i] = std::max(state.v[i], state.v_max[i]);
      vhat[i] = state.v_max[i] / bc2;
    } else {
      vhat[i] = state.v[i] / bc2;
    }
  }

  // eps^2 floor: below it the second moment carries no signal (gradients were
  // all zero so far) and the rescaled decay is skipped for that scope.
  const double floor = hp.epsilon * hp.epsilon;
  ParamVector theta_next(n), mult(n);
  double m_scalar = 1.0;
  bool isotropic = true;
  switch (mode) {
    case DecayMode::decoupled:
      m_scalar = 1.0 - eta_t * lam;
      break;
    case DecayMode::stable: {
      const double vbar = mean(vhat);
      if (vbar >= floor) m_scalar = 1.0 - (eta_t * lam) / std::sqrt(vbar);
      break;
    }
    case DecayMode::stable_perdim:
      isotropic = false;
      break;
    default:
      break;
  }
  if (isotropic && !l2) check_multiplier(m_scalar);

  for (std::size_t i = 0; i < n; ++i) {
    const double disp = eta_t * (state.m[i] / bc1) / (std::sqrt(vhat[i]) + hp.epsilon);
    if (l2) {
      theta_next[i] = theta[i] - disp;
      const double decay_disp =
          -eta_t * (state.m_decay[i] / bc1) / (std::sqrt(vhat[i]) + hp.epsilon);
      mult[i] = l2_multiplier(theta[i], decay_disp);
    } else if (isotropic) {
      theta_next[i] = m_scalar * theta[i] - disp;
      mult[i] = m_scalar;
    } else {  // stable_perdim
      double mi = 1.0;
      if (vhat[i] >= floor) mi = 1.0 - (eta_t * lam) / std::sqrt(vhat[i]);
      check_multiplier(mi);
      theta_next[i] = mi * theta[i] - disp;
      mult[i] = mi;
    }
  }
  ensure_finite(theta_next, use_vmax ? "amsgrad_step theta" : "adam_step theta");
  return assemble(theta, std::move(theta_next), std::move(mult));
}

}  // namespace detail

inline StepOutput adam_step(OptimizerState& state, const ParamVector& theta,
                            const ParamVector& grad, const HyperParams& hp, DecayMode mode,
                            double eta_t) {
  return detail::adam_family_step(state, theta, grad, hp, mode, eta_t, false);
}

inline StepOutput amsgrad_step(OptimizerState& state, const ParamVector& theta,
                               const ParamVector& grad, const HyperParams& hp, DecayMode mode,
                               double eta_t) {
  return detail::adam_family_step(state, theta, grad, hp, mode, eta_t, true);
}

// Adai: per-dimension inertia beta1_t = clip(1 - beta0 vhat/vbar, 0, 1-eps),
// bias correction by the running product of beta1_t. Effective learning rate
// is eta_t itself, so stable decay reduces to the decoupled form.
inline StepOutput adai_step(OptimizerState& state, const ParamVector& theta,
                            const ParamVector& grad, const HyperParams& hp, DecayMode mode,
                            double eta_t) {
  hp.validate();
  detail::check_step_inputs(theta, grad, eta_t);
  const std::size_t n = theta.size();
  detail::init_buffer(state.m, n, 0.0);
  detail::init_buffer(state.v, n, 0.0);
  detail::init_buffer(state.beta1_prod, n, 1.0);
  if (mode != DecayMode::none && mode != DecayMode::l2 && mode != DecayMode::stable)
    throw std::invalid_argument("decay mode '" + std::string(to_string(mode)) +
                                "' is not valid for optimizer 'adai'");
  const long long t = detail::advance(state);
  const double lam = mode == DecayMode::none ? 0.0 : hp.lambda;
  const bool l2 = mode == DecayMode::l2;
  if (l2) {
    detail::init_buffer(state.m_grad, n, 0.0);
    detail::init_buffer(state.m_decay, n, 0.0);
  }
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));

  ParamVector g_eff(n), vhat(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_eff[i] = l2 ? grad[i] + lam * theta[i] : grad[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * (g_eff[i] * g_eff[i]);
    vhat[i] = state.v[i] / bc2;
  }
  const double vbar = mean(vhat);

  ParamVector raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    // All-zero gradients give vbar = 0; treat vhat/vbar as 1 so the inertia
    // stays at its neutral value instead of 0/0.
    const double ratio = vbar > 0.0 ? vhat[i] / vbar : 1.0;
    raw[i] = 1.0 - hp.beta0 * ratio;
  }
  const ParamVector beta1t = clip(std::move(raw), 0.0, 1.0 - hp.epsilon);

  double m_scalar = 1.0;
  if (mode == DecayMode::stable) {
    m_scalar = 1.0 - eta_t * lam;
    detail::check_multiplier(m_scalar);
  }

  ParamVector theta_next(n), mult(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = beta1t[i] * state.m[i] + (1.0 - beta1t[i]) * g_eff[i];
    state.beta1_prod[i] *= beta1t[i];
    const double bias = 1.0 - state.beta1_prod[i];  // >= epsilon after step 1
    const double disp = eta_t * (state.m[i] / bias);
    if (l2) {
      state.m_grad[i] = beta1t[i] * state.m_grad[i] + (1.0 - beta1t[i]) * grad[i];
      state.m_decay[i] = beta1t[i] * state.m_decay[i] + (1.0 - beta1t[i]) * (lam * theta[i]);
      theta_next[i] = theta[i] - disp;
      mult[i] = detail::l2_multiplier(theta[i], -eta_t * (state.m_decay[i] / bias));
    } else {
      theta_next[i] = m_scalar * theta[i] - disp;
      mult[i] = m_scalar;
    }
  }
  ensure_finite(theta_next, "adai_step theta");
  return detail::assemble(theta, std::move(theta_next), std::move(mult));
}

inline bool decay_mode_valid(OptimizerKind kind, DecayMode mode) {
  switch (kind) {
    case OptimizerKind::sgd:
      return mode != DecayMode::stable_perdim;
    case OptimizerKind::tf_sgd:
      return mode == DecayMode::none || mode == DecayMode::l2;
    case OptimizerKind::adam:
      return mode == DecayMode::none || mode == DecayMode::l2 ||
             mode == DecayMode::decoupled || mode == DecayMode::stable ||
             mode == DecayMode::stable_perdim;
    case OptimizerKind::amsgrad:
      return mode == DecayMode::none || mode == DecayMode::l2 ||
             mode == DecayMode::decoupled || mode == DecayMode::stable;
    case OptimizerKind::adai:
      return mode == DecayMode::none || mode == DecayMode::l2 || mode == DecayMode::stable;
  }
  return false;
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t dim, HyperParams hp, DecayMode mode)
      : kind_(kind), mode_(mode), hp_(hp) {
    hp_.validate();
    if (dim == 0) throw std::invalid_argument("optimizer: dim must be positive");
    if (!decay_mode_valid(kind, mode))
      throw std::invalid_argument("decay mode '" + std::string(to_string(mode)) +
                                  "' is not valid for optimizer '" +
                                  std::string(to_string(kind)) + "'");
    if ((mode == DecayMode::vanilla || mode == DecayMode::plain) &&
        (hp_.beta1 != 0.0 || hp_.beta3 != 1.0))
      throw std::invalid_argument("vanilla/plain decay requires beta1 = 0 and beta3 = 1");
    state_.m.assign(dim, 0.0);
    if (kind == OptimizerKind::adam || kind == OptimizerKind::amsgrad ||
        kind == OptimizerKind::adai)
      state_.v.assign(dim, 0.0);
    if (kind == OptimizerKind::amsgrad) state_.v_max.assign(dim, 0.0);
    if (kind == OptimizerKind::adai) state_.beta1_prod.assign(dim, 1.0);
    if (mode == DecayMode::l2) {
      state_.m_grad.assign(dim, 0.0);
      state_.m_decay.assign(dim, 0.0);
    }
  }

  StepOutput step(const ParamVector& theta, const ParamVector& grad, double eta_t) {
    switch (kind_) {
      case OptimizerKind::sgd: return sgd_step(state_, theta, grad, hp_, mode_, eta_t);
      case OptimizerKind::tf_sgd: return tf_sgd_step(state_, theta, grad, hp_, mode_, eta_t);
      case OptimizerKind::adam: return adam_step(state_, theta, grad, hp_, mode_, eta_t);
      case OptimizerKind::amsgrad: return amsgrad_step(state_, theta, grad, hp_, mode_, eta_t);
      case OptimizerKind::adai: return adai_step(state_, theta, grad, hp_, mode_, eta_t);
    }
    throw std::logic_error("unreachable optimizer kind");
  }

  OptimizerKind kind() const { return kind_; }
  DecayMode mode() const { return mode_; }
  const HyperParams& hyper() const { return hp_; }
  const OptimizerState& state() const { return state_; }
  OptimizerState& state() { return state_; }

 private:
  OptimizerKind kind_;
  DecayMode mode_;
  HyperParams hp_;
  OptimizerState state_;
};

inline Optimizer make_optimizer(OptimizerKind kind, std::size_t dim, const HyperParams& hp,
                                DecayMode mode) {
  return Optimizer(kind, dim, hp, mode);
}

}  // namespace swd
