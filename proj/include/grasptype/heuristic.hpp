#pragma once

// Geometric heuristic grasps: the palm is placed a fixed standoff outside a
// face of the object's bounding box, facing the face center, with an open
// hand preshape.

#include "grasptype/perception.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <random>
#include <vector>

namespace grasptype {

struct BoundingBox {
  ObjectFrame frame;
  Vector3 half_extents = Vector3::Constant(1e-6);
};

inline constexpr double kMinHalfExtent = 1e-6;

inline BoundingBox compute_bounding_box(const PointCloud& object_cloud, const ObjectFrame& frame) {
  BoundingBox box;
  box.frame = frame;
  box.half_extents = Vector3::Zero();
  for (const auto& p : object_cloud.points) box.half_extents = box.half_extents.cwiseMax(frame.to_local(p).cwiseAbs());
  box.half_extents = box.half_extents.cwiseMax(kMinHalfExtent);
  return box;
}

// Faces in object-frame terms: 0 +first, 1 -first, 2 +second, 3 -second,
// 4 +third, 5 -third.
enum class BoxFace : int { pos_x = 0, neg_x = 1, pos_y = 2, neg_y = 3, pos_z = 4, neg_z = 5 };

inline Vector3 face_normal(BoxFace face) {
  const int f = static_cast<int>(face);
  Vector3 n = Vector3::Zero();
  n[f / 2] = (f % 2 == 0) ? 1.0 : -1.0;
  return n;
}

inline Vector3 face_center(const BoundingBox& box, BoxFace face) {
  const int axis = static_cast<int>(face) / 2;
  return face_normal(face) * box.half_extents[axis];
}

// Extrinsic roll-pitch-yaw: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Matrix3 rotation_from_rpy(const Vector3& rpy) {
  return (Eigen::AngleAxisd(rpy[2], Vector3::UnitZ()) * Eigen::AngleAxisd(rpy[1], Vector3::UnitY()) *
          Eigen::AngleAxisd(rpy[0], Vector3::UnitX()))
      .toRotationMatrix();
}

inline Vector3 rpy_from_rotation(const Matrix3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll = 0.0, yaw = 0.0;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: fold everything into yaw.
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return {roll, pitch, yaw};
}

// Palm z-axis points at the face center; the palm y-axis follows the object's
// third axis, or its first axis when approaching along the third.
inline Matrix3 palm_rotation_for_face(BoxFace face) {
  const Vector3 z = -face_normal(face);
  const Vector3 ref = std::abs(z.z()) > 0.9 ? Vector3::UnitX() : Vector3::UnitZ();
  const Vector3 y = (ref - ref.dot(z) * z).normalized();
  Matrix3 r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

struct HeuristicGrasp {
  GraspConfiguration config;
  BoxFace face = BoxFace::pos_x;
  double camera_distance = 0.0;
};

struct HeuristicOptions {
  double standoff = 0.06;
  double noise_sigma = 0.02;
  int count = 5;
  std::uint64_t seed = 0;
  // World up direction; the face pointing most against it rests on the table
  // and is never used.
  Vector3 up = Vector3::UnitZ();
  // Open hand: index, middle, ring (spread, flexion) then thumb (rotation,
  // flexion).
  std::array<double, kJointDim> nominal_joints{0.0, 0.6, 0.0, 0.6, 0.0, 0.6, 0.9, 0.6};
  // Gaussian perturbation of the preshape joints; 0 keeps the nominal hand.
  double joint_noise_sigma = 0.0;
  ConfigurationBounds bounds = ConfigurationBounds::allegro_defaults();
};

inline std::vector<BoxFace> reachable_faces(const BoundingBox& box, const Vector3& up) {
  int bottom = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 6; ++f) {
    const double d = (box.frame.axes * face_normal(static_cast<BoxFace>(f))).dot(up);
    if (d < lowest) {
      lowest = d;
      bottom = f;
    }
  }
  std::vector<BoxFace> faces;
  for (int f = 0; f < 6; ++f)
    if (f != bottom) faces.push_back(static_cast<BoxFace>(f));
  return faces;
}

// Grasps cycle through the reachable faces in face order.
inline std::vector<HeuristicGrasp> generate_heuristic_grasps(const BoundingBox& box, const Vector3& camera_position,
                                                             const HeuristicOptions& opts = {}) {
  if (opts.count < 1) throw InvalidArgument("heuristic grasp count must be >= 1");
  if (!(opts.noise_sigma >= 0.0) || !(opts.joint_noise_sigma >= 0.0)) throw InvalidArgument("noise must be >= 0");
  const auto faces = reachable_faces(box, opts.up);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<HeuristicGrasp> grasps;
  grasps.reserve(static_cast<std::size_t>(opts.count));
  for (int i = 0; i < opts.count; ++i) {
    const BoxFace face = faces[static_cast<std::size_t>(i) % faces.size()];
    GraspConfiguration c;
    Vector3 position = face_center(box, face) + opts.standoff * face_normal(face);
    for (int a = 0; a < 3; ++a) position[a] += opts.noise_sigma * unit(rng);
    c.palm_position() = position;
    c.palm_orientation() = rpy_from_rotation(palm_rotation_for_face(face));
    for (int j = 0; j < kJointDim; ++j) {
      c.preshape_joints()[j] = opts.nominal_joints[static_cast<std::size_t>(j)] + opts.joint_noise_sigma * unit(rng);
    }
    c.values = opts.bounds.clamp(c.values);
    const double dist = (box.frame.to_world(c.palm_position()) - camera_position).norm();
    grasps.push_back(HeuristicGrasp{c, face, dist});
  }
  return grasps;
}

inline std::size_t select_init_index(const std::vector<HeuristicGrasp>& grasps) {
  if (grasps.empty()) throw EmptyList("no heuristic grasps to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < grasps.size(); ++i) {
    const auto& g = grasps[i];
    const auto& b = grasps[best];
    if (g.camera_distance < b.camera_distance ||
        (g.camera_distance == b.camera_distance && static_cast<int>(g.face) < static_cast<int>(b.face))) {
      best = i;
    }
  }
  return best;
}

// The grasp closest to the camera.
inline HeuristicGrasp select_init(const std::vector<HeuristicGrasp>& grasps) { return grasps[select_init_index(grasps)]; }

}  // namespace grasptype
