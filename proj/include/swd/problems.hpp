#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swd/datasets.hpp"
#include "swd/linalg.hpp"
#include "swd/random.hpp"
#include "swd/vector_ops.hpp"

namespace swd {

// Rows of the dataset a loss evaluation should use. An empty view means the
// whole train split (or, for data-free problems, the exact objective).
struct MinibatchView {
  std::span<const std::size_t> indices;
  bool empty() const { return indices.empty(); }
};

// A differentiable objective. loss_grad returns the loss and fills grad_out;
// test_loss (when the problem has a held-out split) evaluates the full test
// set.
struct Problem {
  std::string name;
  std::size_t dim = 0;
  std::size_t train_size = 0;  // 0 for data-free objectives
  std::size_t test_size = 0;
  std::vector<std::size_t> train_rows;  // absolute dataset ids of the train split
  std::function<double(const ParamVector&, const MinibatchView&, ParamVector&)> loss_grad;
  std::function<double(const ParamVector&)> test_loss;  // empty when test_size == 0

  double eval(const ParamVector& theta, const MinibatchView& view, ParamVector& grad) const {
    if (theta.size() != dim) throw std::invalid_argument(name + ": theta dimension mismatch");
    return loss_grad(theta, view, grad);
  }
};

// L(theta) = 1/2 theta^T A theta - b^T theta with A symmetric positive
// definite; gradient A theta - b.
inline Problem quadratic_problem(const Matrix& a, const ParamVector& b) {
  check_square(a);
  if (b.size() != a.size()) throw std::invalid_argument("quadratic: b dimension mismatch");
  if (!is_symmetric(a)) throw std::invalid_argument("quadratic: matrix is not symmetric");
  {
    Matrix lower;
    if (!cholesky_factor(a, lower))
      throw std::invalid_argument("quadratic: matrix is not positive definite");
  }
  auto a_ptr = std::make_shared<const Matrix>(a);
  auto b_ptr = std::make_shared<const ParamVector>(b);
  Problem p;
  p.name = "quadratic";
  p.dim = b.size();
  p.loss_grad = [a_ptr, b_ptr](const ParamVector& theta, const MinibatchView&,
                               ParamVector& grad) {
    const ParamVector at = mat_vec(*a_ptr, theta);
    grad.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = at[i] - (*b_ptr)[i];
    return 0.5 * dot(theta, at) - dot(*b_ptr, theta);
  };
  return p;
}

// Minimizer of the quadratic plus an isotropic penalty lambda_eff/2 |theta|^2,
// i.e. (A + lambda_eff I) theta = b.
inline ParamVector ridge_closed_form(const Matrix& a, const ParamVector& b, double lambda_eff) {
  check_square(a);
  if (!(lambda_eff >= 0.0)) throw std::invalid_argument("ridge: lambda_eff must be >= 0");
  Matrix shifted = a;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i][i] += lambda_eff;
  return spd_solve(shifted, b);
}

// Random SPD test instance: A = B B^T / dim + 0.5 I with standard normal B,
// so the spectrum sits roughly in [0.5, 4.5] for square B.
inline std::pair<Matrix, ParamVector> make_random_spd(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("make_random_spd: dim must be positive");
  RandomSource rng(seed);
  Matrix b(dim, ParamVector(dim));
  for (auto& row : b) row = rng.normal_vector(dim);
  Matrix a(dim, ParamVector(dim, 0.0));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = dot(b[i], b[j]) / static_cast<double>(dim);
      a[i][j] = s;
      a[j][i] = s;
    }
  for (std::size_t i = 0; i < dim; ++i) a[i][i] += 0.5;
  ParamVector rhs = rng.normal_vector(dim);
  return {std::move(a), std::move(rhs)};
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline std::vector<std::size_t> view_rows(const MinibatchView& view,
                                          const std::vector<std::size_t>& train) {
  if (view.empty()) return train;
  return {view.indices.begin(), view.indices.end()};
}

}  // namespace detail

// Binary logistic regression without bias term, mean cross-entropy over the
// batch. Features are standardized with train statistics at construction.
inline Problem logistic_problem(const SyntheticDataset& raw) {
  for (int lbl : raw.labels)
    if (lbl != 0 && lbl != 1)
      throw std::invalid_argument("logistic: labels must be binary (0/1)");
  auto ds = std::make_shared<const SyntheticDataset>(standardize_features(raw));
  auto train = std::make_shared<const std::vector<std::size_t>>(ds->train_indices());
  auto test = std::make_shared<const std::vector<std::size_t>>(ds->test_indices());
  const std::size_t d = ds->feature_dim();

  auto batch_loss = [ds](const ParamVector& w, const std::vector<std::size_t>& rows,
                         ParamVector* grad) {
    if (rows.empty()) throw std::invalid_argument("logistic: empty batch");
    const std::size_t d = ds->feature_dim();
    if (grad) grad->assign(d, 0.0);
    double loss = 0.0;
    for (std::size_t i : rows) {
      const ParamVector& x = ds->inputs[i];
      const double z = dot(w, x);
      const double y = static_cast<double>(ds->labels[i]);
      // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
      loss += detail::softplus(z) - y * z;
      if (grad) {
        const double r = detail::sigmoid(z) - y;
        for (std::size_t j = 0; j < d; ++j) (*grad)[j] += r * x[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    if (grad)
      for (double& g : *grad) g *= inv;
    return loss * inv;
  };

  Problem p;
  p.name = "logistic(" + ds->name + ")";
  p.dim = d;
  p.train_size = train->size();
  p.test_size = test->size();
  p.train_rows = *train;
  p.loss_grad = [batch_loss, train](const ParamVector& w, const MinibatchView& view,
                                    ParamVector& grad) {
    return batch_loss(w, detail::view_rows(view, *train), &grad);
  };
  if (!test->empty())
    p.test_loss = [batch_loss, test](const ParamVector& w) {
      return batch_loss(w, *test, nullptr);
    };
  return p;
}

enum class Activation { tanh_act, relu };

inline Activation activation_from(std::string_view s) {
  if (s == "tanh") return Activation::tanh_act;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(Activation a) {
  return a == Activation::tanh_act ? "tanh" : "relu";
}

// Fully-connected classifier with softmax cross-entropy, gradients via manual
// backprop. Parameters are packed layer by layer, each layer as its weight
// matrix (row-major, out x in) followed by its bias vector.
inline Problem mlp_problem(const SyntheticDataset& raw, const std::vector<std::size_t>& hidden,
                           Activation act) {
  auto ds = std::make_shared<const SyntheticDataset>(standardize_features(raw));
  const int classes = ds->num_classes();
  if (classes < 2) throw std::invalid_argument("mlp: need at least 2 classes");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("mlp: hidden width must be positive");

  auto widths = std::make_shared<const std::vector<std::size_t>>([&] {
    std::vector<std::size_t> w{ds->feature_dim()};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(static_cast<std::size_t>(classes));
    return w;
  }());
  std::size_t dim = 0;
  for (std::size_t l = 0; l + 1 < widths->size(); ++l)
    dim += (*widths)[l + 1] * (*widths)[l] + (*widths)[l + 1];

  auto train = std::make_shared<const std::vector<std::size_t>>(ds->train_indices());
  auto test = std::make_shared<const std::vector<std::size_t>>(ds->test_indices());

  auto batch_loss = [ds, widths, act](const ParamVector& theta,
                                      const std::vector<std::size_t>& rows, ParamVector* grad) {
    if (rows.empty()) throw std::invalid_argument("mlp: empty batch");
    const auto& w = *widths;
    const std::size_t layers = w.size() - 1;
    if (grad) grad->assign(theta.size(), 0.0);

    // Offsets of each layer's weights and biases inside theta.
    std::vector<std::size_t> w_off(layers), b_off(layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      w_off[l] = off;
      off += w[l + 1] * w[l];
      b_off[l] = off;
      off += w[l + 1];
    }

    std::vector<ParamVector> acts(layers + 1);  // post-activation per layer
    std::vector<ParamVector> pre(layers);       // pre-activation
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
      acts[0] = ds->inputs[r];
      for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t nin = w[l], nout = w[l + 1];
        pre[l].assign(nout, 0.0);
        for (std::size_t o = 0; o < nout; ++o) {
          double s = theta[b_off[l] + o];
          const std::size_t base = w_off[l] + o * nin;
          for (std::size_t i = 0; i < nin; ++i) s += theta[base + i] * acts[l][i];
          pre[l][o] = s;
        }
        acts[l + 1] = pre[l];
        if (l + 1 < layers) {
          for (double& x : acts[l + 1])
            x = act == Activation::tanh_act ? std::tanh(x) : (x > 0.0 ? x : 0.0);
        }
      }

      // Softmax cross-entropy on the last layer's raw scores.
      const ParamVector& logits = acts[layers];
      double zmax = logits[0];
      for (double z : logits) zmax = std::max(zmax, z);
      double zsum = 0.0;
      for (double z : logits) zsum += std::exp(z - zmax);
      const int y = ds->labels[r];
      loss += (std::log(zsum) + zmax - logits[static_cast<std::size_t>(y)]) * inv;
      if (!grad) continue;

      ParamVector delta(logits.size());
      for (std::size_t o = 0; o < logits.size(); ++o) {
        delta[o] = std::exp(logits[o] - zmax) / zsum;
        if (o == static_cast<std::size_t>(y)) delta[o] -= 1.0;
        delta[o] *= inv;
      }
      for (std::size_t li = layers; li > 0; --li) {
        const std::size_t l = li - 1;
        const std::size_t nin = w[l], nout = w[l + 1];
        ParamVector prev_delta(nin, 0.0);
        for (std::size_t o = 0; o < nout; ++o) {
          const std::size_t base = w_off[l] + o * nin;
          (*grad)[b_off[l] + o] += delta[o];
          for (std::size_t i = 0; i < nin; ++i) {
            (*grad)[base + i] += delta[o] * acts[l][i];
            prev_delta[i] += delta[o] * theta[base + i];
          }
        }
        if (l > 0) {
          // Chain through the activation; relu uses subgradient 0 at 0.
          for (std::size_t i = 0; i < nin; ++i) {
            if (act == Activation::tanh_act) {
              const double a = acts[l][i];
              prev_delta[i] *= 1.0 - a * a;
            } else {
              prev_delta[i] *= pre[l - 1][i] > 0.0 ? 1.0 : 0.0;
            }
          }
          delta = std::move(prev_delta);
        }
      }
    }
    return loss;
  };

  Problem p;
  p.name = "mlp(" + ds->name + ")";
  p.dim = dim;
  p.train_size = train->size();
  p.test_size = test->size();
  p.train_rows = *train;
  p.loss_grad = [batch_loss, train](const ParamVector& theta, const MinibatchView& view,
                                    ParamVector& grad) {
    return batch_loss(theta, detail::view_rows(view, *train), &grad);
  };
  if (!test->empty())
    p.test_loss = [batch_loss, test](const ParamVector& theta) {
      return batch_loss(theta, *test, nullptr);
    };
  return p;
}

}  // namespace swd
