#pragma once

// Planted data shared by the unit tests and the acceptance runner. No gtest
// here so the acceptance binary can use it as a plain program.

#include "grasptype/grasptype.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace grasptype::fixtures {

struct PlantedData {
  GraspDataset dataset;
  // Unit normal of the planted hyperplane over [theta | features] and the
  // point it passes through.
  VectorXd normal;
  VectorXd center;
};

inline VectorXd raw_input(const TrainingSample& s) {
  VectorXd x(kConfigDim + s.features.size());
  x << s.config.values, s.features;
  return x;
}

// Linearly separable samples: label is the side of a random hyperplane and
// every sample sits at least `margin` away from it.
inline PlantedData planted_separable(int n, const std::string& type, std::uint64_t seed, double margin = 1.0,
                                     int feature_dim = kDefaultLatentDim) {
  std::mt19937_64 rng(seed);
  const auto bounds = ConfigurationBounds::allegro_defaults();
  const int dim = kConfigDim + feature_dim;
  std::normal_distribution<double> gauss(0.0, 1.0);
  PlantedData out;
  out.normal = VectorXd(dim);
  for (int i = 0; i < dim; ++i) out.normal[i] = gauss(rng);
  out.normal.normalize();
  out.center = VectorXd::Zero(dim);
  out.center.head<kConfigDim>() = 0.5 * (bounds.lower + bounds.upper);

  while (static_cast<int>(out.dataset.size()) < n) {
    TrainingSample s;
    for (int i = 0; i < kConfigDim; ++i) {
      const double span = bounds.upper[i] - bounds.lower[i];
      std::uniform_real_distribution<double> u(bounds.lower[i] + 0.05 * span, bounds.upper[i] - 0.05 * span);
      s.config.values[i] = u(rng);
    }
    s.features = VectorXd(feature_dim);
    for (int i = 0; i < feature_dim; ++i) s.features[i] = 1.5 * gauss(rng);
    const double score = out.normal.dot(raw_input(s) - out.center);
    if (std::abs(score) < margin) continue;
    s.label = score > 0.0 ? 1 : 0;
    s.type = type;
    s.sample_id = type + "-" + std::to_string(out.dataset.size());
    out.dataset.samples.push_back(std::move(s));
  }
  return out;
}

// Two types with unrelated planted hyperplanes, interleaved.
inline GraspDataset planted_two_types(int per_type, std::uint64_t seed) {
  auto a = planted_separable(per_type, "alpha", derive_seed(seed, "alpha"), 0.5).dataset;
  auto b = planted_separable(per_type, "beta", derive_seed(seed, "beta"), 0.5).dataset;
  GraspDataset out;
  for (int i = 0; i < per_type; ++i) {
    out.samples.push_back(a.samples[static_cast<std::size_t>(i)]);
    out.samples.push_back(b.samples[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Clustered data for EM: a random number of blobs with random spreads.
inline MatrixXd random_cluster_data(std::mt19937_64& rng, int n, int dim) {
  std::uniform_int_distribution<int> blob_count(1, 5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.05, 1.0);
  const int blobs = blob_count(rng);
  std::vector<VectorXd> centers;
  std::vector<double> scales;
  for (int b = 0; b < blobs; ++b) {
    VectorXd c(dim);
    for (int i = 0; i < dim; ++i) c[i] = 3.0 * gauss(rng);
    centers.push_back(c);
    scales.push_back(spread(rng));
  }
  std::uniform_int_distribution<int> pick(0, blobs - 1);
  MatrixXd data(n, dim);
  for (int r = 0; r < n; ++r) {
    const int b = pick(rng);
    for (int i = 0; i < dim; ++i) data(r, i) = centers[static_cast<std::size_t>(b)][i] + scales[static_cast<std::size_t>(b)] * gauss(rng);
  }
  return data;
}

// Central difference with step h, one coordinate at a time.
inline Vector14 central_difference(const std::function<double(const Vector14&)>& f, const Vector14& x, double h) {
  Vector14 g;
  for (int i = 0; i < kConfigDim; ++i) {
    Vector14 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, ||b||_inf): relative to the gradient scale,
// falling back to absolute error for tiny gradients.
inline double relative_gradient_error(const Vector14& analytic, const Vector14& numeric) {
  const double scale = std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

// 1000 table points on z = 0 and 200 points inside a box standing on it.
struct ConstructedScene {
  PointCloud cloud;
  std::set<std::size_t> box_indices;
};

inline ConstructedScene table_and_box(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> table(-0.5, 0.5), bx(-0.05, 0.05), bz(0.02, 0.10);
  ConstructedScene s;
  for (int i = 0; i < 1000; ++i) s.cloud.points.emplace_back(table(rng), table(rng), 0.0);
  for (int i = 0; i < 200; ++i) {
    s.box_indices.insert(s.cloud.points.size());
    s.cloud.points.emplace_back(bx(rng), bx(rng), bz(rng));
  }
  // Interleave so membership does not follow from position in the list.
  std::vector<std::size_t> perm(s.cloud.points.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ConstructedScene out;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.cloud.points.push_back(s.cloud.points[perm[i]]);
    if (s.box_indices.count(perm[i])) out.box_indices.insert(i);
  }
  return out;
}

}  // namespace grasptype::fixtures
