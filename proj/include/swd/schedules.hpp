#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace swd {

enum class ScheduleKind { constant, milestones, cosine_restarts };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::milestones: return "milestones";
    case ScheduleKind::cosine_restarts: return "cosine_restarts";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from(std::string_view s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "milestones") return ScheduleKind::milestones;
  if (s == "cosine_restarts") return ScheduleKind::cosine_restarts;
  throw std::invalid_argument("unknown schedule kind '" + std::string(s) + "'");
}

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double eta0 = 0.1;
  double eta_min = 0.0;                  // cosine floor
  std::vector<long long> milestones;     // epochs at which the lr drops
  double decay_factor = 0.1;
  long long t0 = 14;                     // first cosine period, in epochs
  long long t_mult = 2;                  // period growth factor
  long long steps_per_epoch = 1;         // resolution of the cosine curve

  void validate() const {
    if (!std::isfinite(eta0) || !(eta0 > 0.0))
      throw std::invalid_argument("schedule: eta0 must be positive");
    switch (kind) {
      case ScheduleKind::constant:
        break;
      case ScheduleKind::milestones: {
        if (!std::isfinite(decay_factor) || !(decay_factor > 0.0) || !(decay_factor < 1.0))
          throw std::invalid_argument("schedule: decay_factor must be in (0, 1)");
        for (std::size_t i = 0; i < milestones.size(); ++i) {
          if (milestones[i] <= 0)
            throw std::invalid_argument("schedule: milestones must be positive");
          if (i > 0 && milestones[i] <= milestones[i - 1])
            throw std::invalid_argument("schedule: milestones must be strictly increasing");
        }
        break;
      }
      case ScheduleKind::cosine_restarts:
        if (!std::isfinite(eta_min) || eta_min < 0.0 || !(eta_min <= eta0))
          throw std::invalid_argument("schedule: need 0 <= eta_min <= eta0");
        if (t0 < 1) throw std::invalid_argument("schedule: t0 must be >= 1");
        if (t_mult < 1) throw std::invalid_argument("schedule: t_mult must be >= 1");
        if (steps_per_epoch < 1)
          throw std::invalid_argument("schedule: steps_per_epoch must be >= 1");
        break;
    }
  }
};

// Epochs at which a warm-restart schedule resets, i.e. the cumulative sums
// t0, t0 + t0*t_mult, ... that do not exceed total_epochs.
inline std::vector<long long> restart_boundaries(long long t0, long long t_mult,
                                                 long long total_epochs) {
  if (t0 < 1) throw std::invalid_argument("restart_boundaries: t0 must be >= 1");
  if (t_mult < 1) throw std::invalid_argument("restart_boundaries: t_mult must be >= 1");
  if (total_epochs < 0) throw std::invalid_argument("restart_boundaries: negative horizon");
  std::vector<long long> out;
  long long cum = 0, period = t0;
  while (total_epochs - cum >= period) {
    cum += period;
    out.push_back(cum);
    if (period > total_epochs / t_mult + 1) break;  // avoid overflow
    period *= t_mult;
  }
  return out;
}

// Learning rate at a given (epoch, step-within-epoch) position.
inline double lr_at(const ScheduleSpec& s, long long epoch, long long step_in_epoch) {
  s.validate();
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
  if (step_in_epoch < 0 || (s.kind == ScheduleKind::cosine_restarts &&
                            step_in_epoch >= s.steps_per_epoch))
    throw std::invalid_argument("lr_at: step_in_epoch out of range");
  switch (s.kind) {
    case ScheduleKind::constant:
      return s.eta0;
    case ScheduleKind::milestones: {
      const auto passed = std::upper_bound(s.milestones.begin(), s.milestones.end(), epoch) -
                          s.milestones.begin();
      return s.eta0 * std::pow(s.decay_factor, static_cast<double>(passed));
    }
    case ScheduleKind::cosine_restarts: {
      long long start = 0, period = s.t0;
      while (epoch - start >= period) {
        start += period;
        period *= s.t_mult;
      }
      const double k =
          static_cast<double>((epoch - start) * s.steps_per_epoch + step_in_epoch);
      const double total = static_cast<double>(period * s.steps_per_epoch);
      return s.eta_min +
             0.5 * (s.eta0 - s.eta_min) * (1.0 + std::cos(std::numbers::pi * k / total));
    }
  }
  throw std::logic_error("unreachable schedule kind");
}

}  // namespace swd
