#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swd/csv.hpp"
#include "swd/random.hpp"
#include "swd/vector_ops.hpp"

namespace swd {

// Synthetic classification dataset with a fixed 80/20 train/test split.
// Regeneration from (name, parameters, seed) is bitwise reproducible.
struct SyntheticDataset {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<ParamVector> inputs;  // one feature row per sample
  std::vector<int> labels;
  std::vector<std::uint8_t> in_train;

  std::size_t size() const { return inputs.size(); }
  std::size_t feature_dim() const { return inputs.empty() ? 0 : inputs[0].size(); }

  std::vector<std::size_t> train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (in_train[i]) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (!in_train[i]) out.push_back(i);
    return out;
  }

  int num_classes() const {
    int c = 0;
    for (int lbl : labels) {
      if (lbl < 0) throw std::invalid_argument("dataset: negative label");
      c = std::max(c, lbl + 1);
    }
    return c;
  }
};

namespace detail {

// Mark ~80% of the rows as train via a seeded permutation.
inline void assign_split(SyntheticDataset& ds, RandomSource& rng) {
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t n_train = (n * 8 + 9) / 10;  // ceil(0.8 n)
  ds.in_train.assign(n, 0);
  for (std::size_t i = 0; i < n_train && i < n; ++i) ds.in_train[order[i]] = 1;
}

}  // namespace detail

// Two interleaved half-circles: class 0 on the upper arc centered at the
// origin, class 1 on the lower arc centered at (1, 0.5), both radius 1.
// Gaussian noise with standard deviation `noise` is added per coordinate.
inline SyntheticDataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("two_moons: need at least 4 samples");
  if (!(noise >= 0.0) || !std::isfinite(noise))
    throw std::invalid_argument("two_moons: noise must be >= 0");
  SyntheticDataset ds;
  ds.name = "two_moons";
  ds.seed = seed;
  RandomSource rng(seed);
  const std::size_t n0 = n / 2, n1 = n - n0;
  ds.inputs.reserve(n);
  for (std::size_t i = 0; i < n0; ++i) {
    const double t = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n0 - 1);
    ds.inputs.push_back({std::cos(t), std::sin(t)});
    ds.labels.push_back(0);
  }
  for (std::size_t i = 0; i < n1; ++i) {
    const double t = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n1 - 1);
    ds.inputs.push_back({1.0 - std::cos(t), 0.5 - std::sin(t)});
    ds.labels.push_back(1);
  }
  if (noise > 0.0)
    for (auto& row : ds.inputs)
      for (double& x : row) x += noise * rng.normal();
  detail::assign_split(ds, rng);
  return ds;
}

// Isotropic Gaussian blobs; sample i belongs to center i mod k.
inline SyntheticDataset make_blobs(std::size_t n, const std::vector<ParamVector>& centers,
                                   double spread, std::uint64_t seed) {
  if (centers.size() < 2) throw std::invalid_argument("blobs: need at least 2 centers");
  if (n < centers.size()) throw std::invalid_argument("blobs: need at least one sample per center");
  if (!(spread > 0.0) || !std::isfinite(spread))
    throw std::invalid_argument("blobs: spread must be positive");
  const std::size_t d = centers[0].size();
  if (d == 0) throw std::invalid_argument("blobs: empty centers");
  for (const auto& c : centers)
    if (c.size() != d) throw std::invalid_argument("blobs: centers differ in dimension");
  SyntheticDataset ds;
  ds.name = "blobs";
  ds.seed = seed;
  RandomSource rng(seed);
  ds.inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % centers.size();
    ParamVector row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = centers[c][j] + spread * rng.normal();
    ds.inputs.push_back(std::move(row));
    ds.labels.push_back(static_cast<int>(c));
  }
  detail::assign_split(ds, rng);
  return ds;
}

// Standardize features to zero mean / unit variance using train-split
// statistics only. A feature with stddev below 1e-12 is left unscaled.
inline SyntheticDataset standardize_features(SyntheticDataset ds) {
  const auto train = ds.train_indices();
  if (train.empty()) throw std::invalid_argument("standardize: empty train split");
  const std::size_t d = ds.feature_dim();
  ParamVector mu(d, 0.0), sigma(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i : train) s += ds.inputs[i][j];
    mu[j] = s / static_cast<double>(train.size());
    double ss = 0.0;
    for (std::size_t i : train) {
      const double c = ds.inputs[i][j] - mu[j];
      ss += c * c;
    }
    sigma[j] = std::sqrt(ss / static_cast<double>(train.size()));
    if (sigma[j] < 1e-12) sigma[j] = 1.0;
  }
  for (auto& row : ds.inputs)
    for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mu[j]) / sigma[j];
  return ds;
}

inline void write_dataset_csv(const SyntheticDataset& ds, std::ostream& os) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) header.push_back("x" + std::to_string(j));
  header.push_back("label");
  header.push_back("split");
  write_csv_row(os, header);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<std::string> row;
    for (double x : ds.inputs[i]) row.push_back(format_double(x));
    row.push_back(std::to_string(ds.labels[i]));
    row.push_back(ds.in_train[i] ? "train" : "test");
    write_csv_row(os, row);
  }
}

inline void write_dataset_csv(const SyntheticDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset_csv(ds, f);
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace swd
