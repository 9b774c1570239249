#pragma once

// Object perception: tabletop segmentation, principal-axis object frame,
// occupancy voxelization and the PCA shape descriptor.

#include "grasptype/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace grasptype {

struct PointCloud {
  std::vector<Vector3> points;
  // Per-point color, either empty or the same length as points. Carried
  // through I/O only; nothing downstream reads it.
  std::vector<std::array<std::uint8_t, 3>> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }

  void validate() const {
    if (points.empty()) {
      throw InvalidArgument("point cloud is empty");
    }
    if (!colors.empty() && colors.size() != points.size()) {
      throw InvalidArgument("point cloud color count does not match point count");
    }
    for (const auto& p : points) {
      if (!p.allFinite()) {
        throw InvalidArgument("point cloud contains a non-finite coordinate");
      }
    }
  }

  Vector3 centroid() const {
    Vector3 c = Vector3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
  }
};

// Plane n.p + offset = 0 with unit normal n.
struct PlaneModel {
  Vector3 normal = Vector3::UnitZ();
  double offset = 0.0;
  double inlier_threshold = 0.005;

  double signed_distance(const Vector3& p) const { return normal.dot(p) + offset; }
};

struct ObjectFrame {
  Vector3 origin = Vector3::Zero();
  Matrix3 axes = Matrix3::Identity();  // columns: first, second, third axis

  Vector3 to_local(const Vector3& p) const { return axes.transpose() * (p - origin); }
  Vector3 to_world(const Vector3& local) const { return origin + axes * local; }
};

inline constexpr int kGridSide = 20;
inline constexpr int kGridCells = kGridSide * kGridSide * kGridSide;
inline constexpr double kVoxelSize = 0.01;

// Binary occupancy grid centered on the frame origin. Cell (i, j, k) covers
// frame coordinates [-0.10 + 0.01 i, -0.10 + 0.01 (i + 1)) along the first
// axis and likewise for j, k. Flattened index is (i * 20 + j) * 20 + k.
struct VoxelGrid {
  std::vector<std::uint8_t> occupancy = std::vector<std::uint8_t>(kGridCells, 0);
  double voxel_size = kVoxelSize;
  ObjectFrame frame;
  std::size_t dropped_points = 0;

  static constexpr int flat_index(int i, int j, int k) { return (i * kGridSide + j) * kGridSide + k; }

  bool occupied(int i, int j, int k) const { return occupancy[flat_index(i, j, k)] != 0; }

  std::size_t occupied_count() const {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
  }

  VectorXd flatten() const {
    VectorXd v(kGridCells);
    for (int i = 0; i < kGridCells; ++i) v[i] = occupancy[i] ? 1.0 : 0.0;
    return v;
  }
};

struct PcaProjection {
  VectorXd mean;   // kGridCells
  MatrixXd basis;  // latent_dim x kGridCells, rows orthonormal

  int latent_dim() const { return static_cast<int>(basis.rows()); }
  int input_dim() const { return static_cast<int>(basis.cols()); }

  VectorXd project(const VectorXd& x) const { return basis * (x - mean); }
  VectorXd reconstruct(const VectorXd& z) const { return mean + basis.transpose() * z; }
};

struct VisualFeatures {
  VectorXd values;
  std::string source_id;
};

// ---------------------------------------------------------------------------
// Segmentation

struct SegmentationOptions {
  int ransac_iterations = 200;
  double inlier_threshold = 0.005;
  // The plane normal is oriented to have a non-negative component along this
  // direction; "above the table" means positive signed distance.
  Vector3 up = Vector3::UnitZ();
  std::uint64_t seed = 0;
};

struct Segmentation {
  PointCloud object_cloud;
  PlaneModel plane;
  std::size_t plane_inliers = 0;
};

namespace detail {

struct PlaneHypothesis {
  Vector3 normal;
  double offset;
};

inline std::optional<PlaneHypothesis> plane_through(const Vector3& a, const Vector3& b, const Vector3& c,
                                                    const Vector3& up) {
  Vector3 n = (b - a).cross(c - a);
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  if (n.norm() <= 1e-12 * scale) {
    return std::nullopt;
  }
  n.normalize();
  if (n.dot(up) < 0.0) n = -n;
  return PlaneHypothesis{n, -n.dot(a)};
}

}  // namespace detail

inline Segmentation segment_object(const PointCloud& cloud, const SegmentationOptions& opts = {}) {
  if (cloud.size() < 3) {
    throw InvalidArgument("segment_object needs at least 3 points");
  }
  if (!(opts.inlier_threshold > 0.0)) {
    throw InvalidArgument("inlier threshold must be positive");
  }
  const auto& pts = cloud.points;
  const std::size_t n = pts.size();
  const double thr = opts.inlier_threshold;
  const Vector3 up = opts.up.normalized();

  std::optional<detail::PlaneHypothesis> best;
  std::size_t best_count = 0;
  double best_alignment = -1.0;

  auto consider = [&](std::size_t i, std::size_t j, std::size_t k) {
    auto h = detail::plane_through(pts[i], pts[j], pts[k], up);
    if (!h) return;
    std::size_t count = 0;
    for (const auto& p : pts) {
      if (std::abs(h->normal.dot(p) + h->offset) <= thr) ++count;
    }
    // Ties go to the hypothesis most aligned with the up direction.
    const double alignment = std::abs(h->normal.dot(up));
    if (!best || count > best_count || (count == best_count && alignment > best_alignment)) {
      best = h;
      best_count = count;
      best_alignment = alignment;
    }
  };

  const double triples = static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2) / 6.0;
  if (triples <= static_cast<double>(opts.ransac_iterations)) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) consider(i, j, k);
  } else {
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int it = 0; it < opts.ransac_iterations; ++it) {
      std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
      while (j == i) j = pick(rng);
      while (k == i || k == j) k = pick(rng);
      consider(i, j, k);
    }
  }

  if (!best) {
    throw DegeneratePlane("every sampled point triple was collinear");
  }
  if (best_count < 3) {
    throw DegeneratePlane("best plane hypothesis has fewer than 3 inliers");
  }

  Segmentation seg;
  seg.plane = PlaneModel{best->normal, best->offset, thr};
  seg.plane_inliers = best_count;
  for (std::size_t i = 0; i < n; ++i) {
    if (seg.plane.signed_distance(pts[i]) > thr) {
      seg.object_cloud.points.push_back(pts[i]);
      if (cloud.has_colors()) seg.object_cloud.colors.push_back(cloud.colors[i]);
    }
  }
  if (seg.object_cloud.empty()) {
    throw EmptySegmentation("no points remain above the table plane");
  }
  return seg;
}

// ---------------------------------------------------------------------------
// Object frame

namespace detail {

// Flip v so that it points along `primary`; if v is orthogonal to it, fall
// back to +z and then to `fallback`.
inline Vector3 orient_axis(Vector3 v, const Vector3& primary, const Vector3& fallback) {
  constexpr double tie = 1e-12;
  for (const Vector3& ref : {primary, Vector3(Vector3::UnitZ()), fallback}) {
    const double d = v.dot(ref);
    if (std::abs(d) > tie) {
      return d < 0.0 ? Vector3(-v) : v;
    }
  }
  return v;
}

}  // namespace detail

inline ObjectFrame estimate_object_frame(const PointCloud& object_cloud) {
  if (object_cloud.size() < 3) {
    throw DegenerateGeometry("object frame needs at least 3 points");
  }
  ObjectFrame frame;
  frame.origin = object_cloud.centroid();
  Matrix3 cov = Matrix3::Zero();
  for (const auto& p : object_cloud.points) {
    const Vector3 d = p - frame.origin;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(object_cloud.size());

  Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov);
  const Vector3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda[2] > 0.0) || lambda[1] / lambda[2] < 1e-9) {
    throw DegenerateGeometry("point covariance has rank < 2");
  }
  const Vector3 first = detail::orient_axis(eig.eigenvectors().col(2), Vector3::UnitX(), Vector3::UnitY());
  const Vector3 second = detail::orient_axis(eig.eigenvectors().col(1), Vector3::UnitY(), Vector3::UnitX());
  frame.axes.col(0) = first;
  frame.axes.col(1) = second;
  frame.axes.col(2) = first.cross(second);
  return frame;
}

// ---------------------------------------------------------------------------
// Voxelization

inline VoxelGrid voxelize(const PointCloud& object_cloud, const ObjectFrame& frame) {
  VoxelGrid grid;
  grid.frame = frame;
  const double half = 0.5 * kGridSide * kVoxelSize;
  for (const auto& p : object_cloud.points) {
    const Vector3 local = frame.to_local(p);
    std::array<int, 3> idx{};
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double cell = std::floor((local[a] + half) / kVoxelSize);
      if (!(cell >= 0.0 && cell < kGridSide)) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(cell);
    }
    if (!inside) {
      ++grid.dropped_points;
      continue;
    }
    grid.occupancy[VoxelGrid::flat_index(idx[0], idx[1], idx[2])] = 1;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// PCA

namespace detail {

// Make the largest-magnitude entry of each row positive.
inline void canonicalize_row_signs(MatrixXd& basis) {
  for (Eigen::Index r = 0; r < basis.rows(); ++r) {
    Eigen::Index arg = 0;
    basis.row(r).cwiseAbs().maxCoeff(&arg);
    if (basis(r, arg) < 0.0) basis.row(r) *= -1.0;
  }
}

}  // namespace detail

// Rows of `samples` are observations. Directions beyond the numerical rank of
// the centered data are filled by Gram-Schmidt on the coordinate axes, so the
// basis always has latent_dim orthonormal rows.
inline PcaProjection fit_pca_matrix(const MatrixXd& samples, int latent_dim) {
  if (latent_dim < 1 || latent_dim > samples.cols()) {
    throw InvalidArgument("latent_dim must be in [1, input dimension]");
  }
  if (samples.rows() < latent_dim + 1) {
    throw InsufficientData("PCA needs at least latent_dim + 1 samples (got " + std::to_string(samples.rows()) +
                           ", latent_dim " + std::to_string(latent_dim) + ")");
  }
  PcaProjection proj;
  proj.mean = samples.colwise().mean().transpose();
  const MatrixXd centered = samples.rowwise() - proj.mean.transpose();

  Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? sv[0] * 1e-9 : 0.0;

  proj.basis = MatrixXd::Zero(latent_dim, samples.cols());
  int filled = 0;
  for (; filled < latent_dim && filled < sv.size(); ++filled) {
    if (!(sv[filled] > cutoff) || sv[filled] == 0.0) break;
    proj.basis.row(filled) = svd.matrixV().col(filled).transpose();
  }
  for (Eigen::Index axis = 0; filled < latent_dim && axis < samples.cols(); ++axis) {
    VectorXd e = VectorXd::Unit(samples.cols(), axis);
    for (int pass = 0; pass < 2; ++pass) {
      for (int r = 0; r < filled; ++r) e -= proj.basis.row(r).dot(e) * proj.basis.row(r).transpose();
    }
    const double norm = e.norm();
    if (norm < 0.5) continue;
    proj.basis.row(filled++) = (e / norm).transpose();
  }
  detail::canonicalize_row_signs(proj.basis);
  return proj;
}

inline PcaProjection fit_pca(const std::vector<VoxelGrid>& training_grids, int latent_dim = kDefaultLatentDim) {
  if (static_cast<int>(training_grids.size()) < latent_dim + 1) {
    throw InsufficientData("PCA needs at least latent_dim + 1 grids (got " + std::to_string(training_grids.size()) +
                           ", latent_dim " + std::to_string(latent_dim) + ")");
  }
  MatrixXd samples(static_cast<Eigen::Index>(training_grids.size()), kGridCells);
  for (std::size_t i = 0; i < training_grids.size(); ++i) {
    samples.row(static_cast<Eigen::Index>(i)) = training_grids[i].flatten().transpose();
  }
  return fit_pca_matrix(samples, latent_dim);
}

inline VisualFeatures extract_features(const VoxelGrid& grid, const PcaProjection& proj, std::string source_id = {}) {
  if (proj.input_dim() != kGridCells) {
    throw InvalidArgument("PCA projection input dimension does not match the voxel grid");
  }
  return VisualFeatures{proj.project(grid.flatten()), std::move(source_id)};
}

// ---------------------------------------------------------------------------
// Whole pipeline up to the voxel grid.

struct ObjectObservation {
  Segmentation segmentation;
  ObjectFrame frame;
  VoxelGrid grid;
};

inline ObjectObservation observe_object(const PointCloud& cloud, const SegmentationOptions& opts = {}) {
  cloud.validate();
  ObjectObservation obs;
  obs.segmentation = segment_object(cloud, opts);
  obs.frame = estimate_object_frame(obs.segmentation.object_cloud);
  obs.grid = voxelize(obs.segmentation.object_cloud, obs.frame);
  return obs;
}

}  // namespace grasptype
