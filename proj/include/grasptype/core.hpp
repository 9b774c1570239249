#pragma once

// Shared vocabulary for the grasp-type planner: configuration vectors, box
// bounds, error types and small numeric helpers.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace grasptype {

inline constexpr int kConfigDim = 14;
inline constexpr int kPositionDim = 3;
inline constexpr int kOrientationDim = 3;
inline constexpr int kJointDim = 8;
inline constexpr int kDefaultLatentDim = 15;

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector14 = Eigen::Matrix<double, kConfigDim, 1>;
using Matrix14 = Eigen::Matrix<double, kConfigDim, kConfigDim>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors. Every error carries a category that the CLI maps to an exit code.

enum class ErrorCategory { io, data, inference };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define GRASPTYPE_DEFINE_ERROR(Name, Category)                              \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message)                               \
        : Error(ErrorCategory::Category, #Name, message) {}                 \
  };

GRASPTYPE_DEFINE_ERROR(IoError, io)
GRASPTYPE_DEFINE_ERROR(ParseError, data)
GRASPTYPE_DEFINE_ERROR(InvalidArgument, data)
GRASPTYPE_DEFINE_ERROR(DegeneratePlane, data)
GRASPTYPE_DEFINE_ERROR(EmptySegmentation, data)
GRASPTYPE_DEFINE_ERROR(DegenerateGeometry, data)
GRASPTYPE_DEFINE_ERROR(InsufficientData, data)
GRASPTYPE_DEFINE_ERROR(SingleClassData, data)
GRASPTYPE_DEFINE_ERROR(EmptyList, data)
GRASPTYPE_DEFINE_ERROR(QuotaUnreachable, data)
GRASPTYPE_DEFINE_ERROR(NonFiniteObjective, inference)
GRASPTYPE_DEFINE_ERROR(InferenceFailed, inference)

#undef GRASPTYPE_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Grasp configuration: palm position (m), palm orientation as extrinsic
// roll-pitch-yaw (rad), then the first two proximal joints of each of the
// four fingers (index, middle, ring, thumb).

struct GraspConfiguration {
  Vector14 values = Vector14::Zero();

  GraspConfiguration() = default;
  explicit GraspConfiguration(const Vector14& v) : values(v) {}

  auto palm_position() { return values.segment<kPositionDim>(0); }
  auto palm_position() const { return values.segment<kPositionDim>(0); }
  auto palm_orientation() { return values.segment<kOrientationDim>(3); }
  auto palm_orientation() const { return values.segment<kOrientationDim>(3); }
  auto preshape_joints() { return values.segment<kJointDim>(6); }
  auto preshape_joints() const { return values.segment<kJointDim>(6); }

  bool operator==(const GraspConfiguration& other) const { return values == other.values; }
};

struct ConfigurationBounds {
  Vector14 lower;
  Vector14 upper;

  // Palm position within half a meter of the object origin, full angle range
  // for orientation, and Allegro joint limits for the proximal joints.
  static ConfigurationBounds allegro_defaults() {
    constexpr double pi = std::numbers::pi;
    ConfigurationBounds b;
    b.lower << -0.5, -0.5, -0.5, -pi, -pi, -pi,  //
        -0.47, -0.196, -0.47, -0.196, -0.47, -0.196, 0.263, -0.105;
    b.upper << 0.5, 0.5, 0.5, pi, pi, pi,  //
        0.47, 1.61, 0.47, 1.61, 0.47, 1.61, 1.396, 1.163;
    return b;
  }

  void validate() const {
    for (int i = 0; i < kConfigDim; ++i) {
      if (!(lower[i] <= upper[i])) {
        throw InvalidArgument("configuration bounds: lower > upper at index " + std::to_string(i));
      }
    }
  }

  bool contains(const Vector14& theta) const {
    return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
  }

  Vector14 clamp(const Vector14& theta) const { return theta.cwiseMax(lower).cwiseMin(upper); }
};

// ---------------------------------------------------------------------------
// Numerics

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  if (z > 0.0) {
    return z + std::log1p(std::exp(-z));
  }
  return std::log1p(std::exp(z));
}

inline double log_sigmoid(double z) { return -softplus(-z); }

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) {
    return m;
  }
  return m + std::log((v.array() - m).exp().sum());
}

// ---------------------------------------------------------------------------
// Seeds. Sub-seeds are derived from a root seed and a tag so that independent
// pieces of work (per grasp type, per trial) draw from independent streams.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
  return splitmix64(root ^ fnv1a(tag));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) + index);
}

}  // namespace grasptype
