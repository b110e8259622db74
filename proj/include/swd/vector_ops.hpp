#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace swd {

// Dense parameter / gradient vector. All reductions run left-to-right so a
// given input always produces the same bits.
using ParamVector = std::vector<double>;

inline void ensure_finite(const ParamVector& v, std::string_view what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::domain_error(std::string(what) + ": non-finite value at index " +
                              std::to_string(i));
    }
  }
}

inline double sum(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double mean(const ParamVector& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty vector");
  const double m = sum(v) / static_cast<double>(v.size());
  if (!std::isfinite(m)) throw std::domain_error("mean: non-finite result");
  return m;
}

inline double sq_l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (!std::isfinite(s)) throw std::domain_error("sq_l2_norm: non-finite result");
  return s;
}

inline double l2_norm(const ParamVector& v) { return std::sqrt(sq_l2_norm(v)); }

inline double dot(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Elementwise clamp to [lo, hi]; infinite bounds leave that side open.
inline ParamVector clip(ParamVector v, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip: lo > hi");
  ensure_finite(v, "clip input");
  for (double& x : v) x = std::max(lo, std::min(hi, x));
  return v;
}

}  // namespace swd
