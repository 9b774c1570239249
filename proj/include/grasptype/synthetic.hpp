#pragma once

// Synthetic stand-ins for the robot: tabletop scenes seen from one camera, a
// parametric grasp-success oracle, dataset collection by rejection sampling
// heuristic grasps, and the leave-one-out and plan-and-score experiments.

#include "grasptype/heuristic.hpp"
#include "grasptype/inference.hpp"
#include "grasptype/model.hpp"
#include "grasptype/perception.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace grasptype {

// ---------------------------------------------------------------------------
// Scenes

enum class ObjectShape { box, cylinder, composite };

inline const char* to_string(ObjectShape s) {
  switch (s) {
    case ObjectShape::box: return "box";
    case ObjectShape::cylinder: return "cylinder";
    case ObjectShape::composite: return "composite";
  }
  return "box";
}

inline ObjectShape parse_shape(const std::string& s) {
  if (s == "box") return ObjectShape::box;
  if (s == "cylinder") return ObjectShape::cylinder;
  if (s == "composite") return ObjectShape::composite;
  throw InvalidArgument("unknown object shape '" + s + "'");
}

// Dimensions: box and composite use full (x, y, z) extents; a cylinder uses
// (radius, unused, height). A composite is a box with a cylinder of radius
// 0.3 * min(x, y) and height 0.5 * z standing on its top face.
struct SyntheticObjectSpec {
  std::string name = "object";
  int pose = 0;
  ObjectShape shape = ObjectShape::box;
  Vector3 dimensions{0.1, 0.1, 0.1};
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double point_density = 2e4;  // points per square meter
  double noise_sigma = 0.0005;
  std::uint64_t seed = 0;
  double table_half_size = 0.3;
  Vector3 camera{0.7, 0.0, 0.6};

  void validate() const {
    const bool ok = shape == ObjectShape::cylinder ? dimensions.x() > 0.0 && dimensions.z() > 0.0
                                                   : (dimensions.array() > 0.0).all();
    if (!ok) throw InvalidArgument("object dimensions must be positive");
    if (!(point_density > 0.0)) throw InvalidArgument("point density must be positive");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
    if (!(table_half_size > 0.0)) throw InvalidArgument("table size must be positive");
  }

  std::string label() const { return name + "/pose" + std::to_string(pose); }
};

namespace detail {

struct SurfacePatch {
  double area;
  std::function<std::pair<Vector3, Vector3>(std::mt19937_64&)> sample;  // local point, outward normal
};

inline std::vector<SurfacePatch> object_surfaces(const SyntheticObjectSpec& spec) {
  std::vector<SurfacePatch> patches;
  auto box_patches = [&](double sx, double sy, double sz, double z0, double hole_radius) {
    const double hx = sx / 2, hy = sy / 2;
    for (int sgn : {1, -1}) {
      patches.push_back({sy * sz, [=](std::mt19937_64& rng) {
                           std::uniform_real_distribution<double> uy(-hy, hy), uz(z0, z0 + sz);
                           return std::pair{Vector3(sgn * hx, uy(rng), uz(rng)), Vector3(sgn, 0, 0)};
                         }});
      patches.push_back({sx * sz, [=](std::mt19937_64& rng) {
                           std::uniform_real_distribution<double> ux(-hx, hx), uz(z0, z0 + sz);
                           return std::pair{Vector3(ux(rng), sgn * hy, uz(rng)), Vector3(0, sgn, 0)};
                         }});
    }
    patches.push_back({sx * sy, [=](std::mt19937_64& rng) {
                         std::uniform_real_distribution<double> ux(-hx, hx), uy(-hy, hy);
                         Vector3 p(ux(rng), uy(rng), z0 + sz);
                         // Covered by whatever stands on top.
                         if (p.head<2>().norm() < hole_radius) p.z() = std::numeric_limits<double>::quiet_NaN();
                         return std::pair{p, Vector3(0, 0, 1)};
                       }});
  };
  auto cylinder_patches = [&](double r, double h, double z0) {
    patches.push_back({2.0 * std::numbers::pi * r * h, [=](std::mt19937_64& rng) {
                         std::uniform_real_distribution<double> ua(0.0, 2.0 * std::numbers::pi), uz(z0, z0 + h);
                         const double a = ua(rng);
                         return std::pair{Vector3(r * std::cos(a), r * std::sin(a), uz(rng)),
                                          Vector3(std::cos(a), std::sin(a), 0)};
                       }});
    patches.push_back({std::numbers::pi * r * r, [=](std::mt19937_64& rng) {
                         std::uniform_real_distribution<double> ua(0.0, 2.0 * std::numbers::pi), u(0.0, 1.0);
                         const double a = ua(rng), rr = r * std::sqrt(u(rng));
                         return std::pair{Vector3(rr * std::cos(a), rr * std::sin(a), z0 + h), Vector3(0, 0, 1)};
                       }});
  };
  const Vector3& d = spec.dimensions;
  switch (spec.shape) {
    case ObjectShape::box: box_patches(d.x(), d.y(), d.z(), 0.0, 0.0); break;
    case ObjectShape::cylinder: cylinder_patches(d.x(), d.z(), 0.0); break;
    case ObjectShape::composite: {
      const double r = 0.3 * std::min(d.x(), d.y());
      box_patches(d.x(), d.y(), d.z(), 0.0, r);
      cylinder_patches(r, 0.5 * d.z(), d.z());
      break;
    }
  }
  return patches;
}

inline bool inside_footprint(const SyntheticObjectSpec& spec, const Vector3& local) {
  const Vector3& d = spec.dimensions;
  if (spec.shape == ObjectShape::cylinder) return local.head<2>().norm() <= d.x();
  return std::abs(local.x()) <= d.x() / 2 && std::abs(local.y()) <= d.y() / 2;
}

}  // namespace detail

// Table plane z = 0 plus the camera-facing part of the object surface.
inline PointCloud generate_scene(const SyntheticObjectSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Matrix3 rot = Eigen::AngleAxisd(spec.yaw, Vector3::UnitZ()).toRotationMatrix();
  const Vector3 offset(spec.x, spec.y, 0.0);
  auto jitter = [&](Vector3 p) {
    if (spec.noise_sigma > 0.0) {
      for (int a = 0; a < 3; ++a) p[a] += spec.noise_sigma * noise(rng);
    }
    return p;
  };

  PointCloud cloud;
  const double side = 2.0 * spec.table_half_size;
  const auto table_count = static_cast<std::size_t>(std::llround(spec.point_density * side * side));
  std::uniform_real_distribution<double> ut(-spec.table_half_size, spec.table_half_size);
  for (std::size_t i = 0; i < table_count; ++i) {
    const Vector3 local(ut(rng), ut(rng), 0.0);
    if (detail::inside_footprint(spec, local)) continue;
    cloud.points.push_back(jitter(rot * local + offset));
  }
  for (const auto& patch : detail::object_surfaces(spec)) {
    const auto count = static_cast<std::size_t>(std::llround(spec.point_density * patch.area));
    for (std::size_t i = 0; i < count; ++i) {
      const auto [local, normal] = patch.sample(rng);
      if (!local.allFinite()) continue;
      const Vector3 world = rot * local + offset;
      if ((rot * normal).dot(spec.camera - world) <= 0.0) continue;
      cloud.points.push_back(jitter(world));
    }
  }
  return cloud;
}

struct SceneObservation {
  SyntheticObjectSpec spec;
  ObjectFrame frame;
  BoundingBox box;
  VoxelGrid grid;
};

inline SceneObservation observe_scene(const SyntheticObjectSpec& spec, const SegmentationOptions& seg = {}) {
  const PointCloud cloud = generate_scene(spec);
  SegmentationOptions opts = seg;
  opts.seed = derive_seed(seg.seed, spec.label());
  const auto obs = observe_object(cloud, opts);
  return SceneObservation{spec, obs.frame, compute_bounding_box(obs.segmentation.object_cloud, obs.frame), obs.grid};
}

// ---------------------------------------------------------------------------
// Oracle

struct OracleTarget {
  std::string type;
  Vector14 mean = Vector14::Zero();
  Vector14 radii = Vector14::Ones();
};

// A grasp of a given type succeeds with probability
// sigmoid(beta * (1 - d)), d = || (theta - mean) / radii ||.
struct OracleSpec {
  std::vector<OracleTarget> targets;
  double beta = 30.0;  // +infinity gives deterministic labels

  const OracleTarget& target(const std::string& type) const {
    for (const auto& t : targets)
      if (t.type == type) return t;
    throw InvalidArgument("oracle has no target for grasp type '" + type + "'");
  }

  void validate() const {
    if (targets.empty()) throw InvalidArgument("oracle has no targets");
    for (const auto& t : targets) {
      if (!(t.radii.array() > 0.0).all()) throw InvalidArgument("oracle radii must be positive");
    }
    if (!(beta > 0.0)) throw InvalidArgument("oracle temperature must be positive");
  }
};

inline double oracle_distance(const OracleTarget& target, const GraspConfiguration& config) {
  return (config.values - target.mean).cwiseQuotient(target.radii).norm();
}

inline double oracle_success_probability(const OracleSpec& oracle, const GraspConfiguration& config, const std::string& type) {
  const double d = oracle_distance(oracle.target(type), config);
  if (std::isinf(oracle.beta)) return d < 1.0 ? 1.0 : (d > 1.0 ? 0.0 : 0.5);
  return sigmoid(oracle.beta * (1.0 - d));
}

inline int oracle_label(const OracleSpec& oracle, const GraspConfiguration& config, const std::string& type,
                        std::uint64_t seed) {
  const double p = oracle_success_probability(oracle, config, type);
  if (p >= 1.0) return 1;
  if (p <= 0.0) return 0;
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p ? 1 : 0;
}

// Precision grasps come from above with the fingers extended; power grasps
// come from the side of the second axis with the fingers flexed.
inline OracleSpec default_oracle() {
  OracleSpec oracle;
  OracleTarget precision{"precision", Vector14::Zero(), Vector14::Zero()};
  precision.mean << 0.0, 0.0, 0.09, rpy_from_rotation(palm_rotation_for_face(BoxFace::pos_z)),  //
      0.0, 0.35, 0.0, 0.35, 0.0, 0.35, 0.9, 0.35;
  OracleTarget power{"power", Vector14::Zero(), Vector14::Zero()};
  power.mean << 0.0, 0.10, 0.0, rpy_from_rotation(palm_rotation_for_face(BoxFace::pos_y)),  //
      0.0, 0.85, 0.0, 0.85, 0.0, 0.85, 0.9, 0.85;
  Vector14 radii;
  radii << 0.06, 0.06, 0.06, 0.6, 0.6, 0.6,  //
      0.9, 0.6, 0.9, 0.6, 0.9, 0.6, 0.9, 0.6;
  precision.radii = radii;
  power.radii = radii;
  oracle.targets = {precision, power};
  return oracle;
}

// ---------------------------------------------------------------------------
// Object sets

inline std::vector<SyntheticObjectSpec> make_posed_objects(const std::vector<SyntheticObjectSpec>& shapes, int poses,
                                                           std::uint64_t seed) {
  std::vector<SyntheticObjectSpec> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-0.05, 0.05), yaw(0.0, std::numbers::pi);
  for (const auto& shape : shapes) {
    for (int p = 0; p < poses; ++p) {
      SyntheticObjectSpec s = shape;
      s.pose = p;
      s.x = shift(rng);
      s.y = shift(rng);
      s.yaw = yaw(rng);
      s.seed = derive_seed(seed, s.label());
      out.push_back(s);
    }
  }
  return out;
}

inline SyntheticObjectSpec object_shape(std::string name, ObjectShape shape, double a, double b, double c) {
  SyntheticObjectSpec s;
  s.name = std::move(name);
  s.shape = shape;
  s.dimensions = Vector3(a, b, c);
  return s;
}

inline std::vector<SyntheticObjectSpec> default_training_objects(int poses = 5, std::uint64_t seed = 1) {
  return make_posed_objects({object_shape("box-a", ObjectShape::box, 0.16, 0.08, 0.06),
                             object_shape("box-b", ObjectShape::box, 0.12, 0.07, 0.05),
                             object_shape("box-c", ObjectShape::box, 0.18, 0.10, 0.07),
                             object_shape("box-d", ObjectShape::box, 0.10, 0.06, 0.04),
                             object_shape("can-a", ObjectShape::cylinder, 0.05, 0.0, 0.06),
                             object_shape("can-b", ObjectShape::cylinder, 0.045, 0.0, 0.05),
                             object_shape("bottle-a", ObjectShape::composite, 0.14, 0.08, 0.05),
                             object_shape("bottle-b", ObjectShape::composite, 0.12, 0.09, 0.04)},
                            poses, seed);
}

inline std::vector<SyntheticObjectSpec> default_test_objects(int poses = 5, std::uint64_t seed = 2) {
  return make_posed_objects({object_shape("box-e", ObjectShape::box, 0.14, 0.09, 0.05),
                             object_shape("box-f", ObjectShape::box, 0.20, 0.08, 0.06),
                             object_shape("box-g", ObjectShape::box, 0.11, 0.08, 0.06),
                             object_shape("box-h", ObjectShape::box, 0.15, 0.06, 0.045),
                             object_shape("box-i", ObjectShape::box, 0.17, 0.11, 0.05),
                             object_shape("can-c", ObjectShape::cylinder, 0.055, 0.0, 0.07),
                             object_shape("can-d", ObjectShape::cylinder, 0.04, 0.0, 0.045),
                             object_shape("bottle-c", ObjectShape::composite, 0.16, 0.09, 0.05),
                             object_shape("bottle-d", ObjectShape::composite, 0.13, 0.07, 0.045),
                             object_shape("bottle-e", ObjectShape::composite, 0.11, 0.10, 0.05)},
                            poses, seed);
}

// ---------------------------------------------------------------------------
// Dataset collection

struct DatasetOptions {
  int successes_per_type = 20;
  int failures_per_type = 40;
  int attempt_factor = 100;
  int latent_dim = kDefaultLatentDim;
  std::uint64_t seed = 0;
  SegmentationOptions segmentation;
  HeuristicOptions heuristic = [] {
    HeuristicOptions h;
    h.noise_sigma = 0.02;
    h.joint_noise_sigma = 0.25;
    return h;
  }();
};

struct GeneratedDataset {
  GraspDataset dataset;
  PcaProjection pca;
  std::vector<SceneObservation> scenes;
  std::vector<std::size_t> sample_scene;  // scene index per sample
  std::map<std::string, std::size_t> attempts;
};

inline GeneratedDataset build_synthetic_dataset(const OracleSpec& oracle, const std::vector<SyntheticObjectSpec>& objects,
                                                  const DatasetOptions& opts = {}) {
  oracle.validate();
  if (objects.empty()) throw InvalidArgument("no training objects");
  if (opts.successes_per_type < 0 || opts.failures_per_type < 0) throw InvalidArgument("quotas must be >= 0");

  GeneratedDataset out;
  for (const auto& spec : objects) out.scenes.push_back(observe_scene(spec, opts.segmentation));

  struct Pending {
    GraspConfiguration config;
    std::string type;
    int label;
    std::size_t scene;
  };
  std::vector<Pending> pending;
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick_scene(0, out.scenes.size() - 1);

  for (const auto& target : oracle.targets) {
    int successes = 0, failures = 0;
    const std::size_t cap = static_cast<std::size_t>(opts.attempt_factor) *
                            static_cast<std::size_t>(std::max(1, opts.successes_per_type + opts.failures_per_type));
    std::size_t attempts = 0;
    while (successes < opts.successes_per_type || failures < opts.failures_per_type) {
      if (attempts >= cap) {
        throw QuotaUnreachable("grasp type '" + target.type + "': quota not met after " + std::to_string(attempts) +
                               " attempts (" + std::to_string(successes) + " successes, " + std::to_string(failures) +
                               " failures)");
      }
      const std::uint64_t attempt_seed = derive_seed(opts.seed, target.type + "#" + std::to_string(attempts));
      ++attempts;
      const std::size_t scene = pick_scene(rng);
      const auto& obs = out.scenes[scene];
      HeuristicOptions h = opts.heuristic;
      h.seed = attempt_seed;
      h.count = static_cast<int>(reachable_faces(obs.box, h.up).size());
      const auto grasps = generate_heuristic_grasps(obs.box, obs.spec.camera, h);
      const auto& grasp = grasps[std::uniform_int_distribution<std::size_t>(0, grasps.size() - 1)(rng)];
      const int label = oracle_label(oracle, grasp.config, target.type, splitmix64(attempt_seed));
      if (label == 1 && successes < opts.successes_per_type) {
        ++successes;
        pending.push_back({grasp.config, target.type, 1, scene});
      } else if (label == 0 && failures < opts.failures_per_type) {
        ++failures;
        pending.push_back({grasp.config, target.type, 0, scene});
      }
    }
    out.attempts[target.type] = attempts;
  }

  // Projection estimated from the grids of every kept sample, both labels and
  // all types.
  std::vector<VoxelGrid> grids;
  grids.reserve(pending.size());
  for (const auto& p : pending) grids.push_back(out.scenes[p.scene].grid);
  out.pca = fit_pca(grids, opts.latent_dim);

  std::vector<VectorXd> scene_features;
  for (const auto& s : out.scenes) scene_features.push_back(extract_features(s.grid, out.pca).values);

  std::map<std::string, int> serial;
  for (const auto& p : pending) {
    char id[32];
    std::snprintf(id, sizeof(id), "%04d", serial[p.type]++);
    TrainingSample s;
    s.config = p.config;
    s.type = p.type;
    s.features = scene_features[p.scene];
    s.label = p.label;
    s.sample_id = p.type + "-" + id + "-" + out.scenes[p.scene].spec.label();
    out.dataset.samples.push_back(std::move(s));
    out.sample_scene.push_back(p.scene);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

inline const std::string kTypeFreeName = "type-free";

struct LooRow {
  std::string model;  // "typed" or "type-free"
  std::string group;  // grasp type or "all"
  BinaryMetrics metrics;
};

struct LooExperimentReport {
  std::vector<LooRow> rows;
};

inline LooExperimentReport run_loo_experiment(const GraspDataset& dataset, const ModelConfig& cfg) {
  LooExperimentReport report;
  const LooReport typed = evaluate_loo(dataset, cfg);
  for (const auto& m : typed.per_type) report.rows.push_back({"typed", m.group, m});
  report.rows.push_back({"typed", "all", typed.overall});

  ModelConfig free_cfg = cfg;
  free_cfg.types.clear();
  const LooReport free = evaluate_loo(dataset.relabeled(kTypeFreeName), free_cfg);
  std::vector<std::string> groups;
  for (const auto& s : dataset.samples) groups.push_back(s.type);
  for (const auto& m : metrics_by_group(free.predictions, groups)) report.rows.push_back({kTypeFreeName, m.group, m});
  report.rows.push_back({kTypeFreeName, "all", free.overall});
  return report;
}

struct ExperimentConfig {
  ModelConfig model;
  InferenceConfig inference;
  SegmentationOptions segmentation;
  HeuristicOptions heuristic = [] {
    HeuristicOptions h;
    h.noise_sigma = 0.02;
    h.count = 10;
    return h;
  }();
  std::uint64_t seed = 0;
};

struct PlanEvalRow {
  std::string object;
  int pose = 0;
  std::size_t trial = 0;
  std::string method;  // typed, type-free, heuristic
  std::string type;
  int success = 0;
  double oracle_probability = 0.0;
  double model_probability = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  GraspConfiguration config;
};

struct SuccessRate {
  std::string method;
  std::string type;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

struct PlanEvalReport {
  std::vector<PlanEvalRow> rows;

  std::vector<SuccessRate> summary() const {
    std::vector<SuccessRate> out;
    for (const auto& r : rows) {
      auto it = std::find_if(out.begin(), out.end(), [&](const SuccessRate& s) { return s.method == r.method && s.type == r.type; });
      if (it == out.end()) {
        out.push_back({r.method, r.type, 0, 0});
        it = out.end() - 1;
      }
      ++it->trials;
      it->successes += static_cast<std::size_t>(r.success);
    }
    return out;
  }

  // Success indicators of one method/type in trial order.
  std::vector<int> outcomes(const std::string& method, const std::string& type) const {
    std::vector<int> out;
    for (const auto& r : rows)
      if (r.method == method && r.type == type) out.push_back(r.success);
    return out;
  }
};

struct TrainedModels {
  GraspModel typed;
  GraspModel type_free;
};

inline TrainedModels train_typed_and_type_free(const GraspDataset& dataset, const ModelConfig& cfg) {
  ModelConfig free_cfg = cfg;
  free_cfg.types.clear();
  return TrainedModels{fit_model(dataset, cfg).model, fit_model(dataset.relabeled(kTypeFreeName), free_cfg).model};
}

// Plans every test scene from the heuristic grasp closest to the camera with
// the typed model (one plan per type), the type-free model (one plan scored
// as every type) and the heuristic start itself, then scores each with the
// oracle. All methods share one label draw per trial and type.
inline PlanEvalReport run_plan_eval(const TrainedModels& models, const PcaProjection& pca, const OracleSpec& oracle,
                                    const std::vector<SyntheticObjectSpec>& test_objects, const ExperimentConfig& cfg) {
  oracle.validate();
  PlanEvalReport report;
  for (std::size_t trial = 0; trial < test_objects.size(); ++trial) {
    const auto& spec = test_objects[trial];
    const auto scene = observe_scene(spec, cfg.segmentation);
    const VisualFeatures features = extract_features(scene.grid, pca, spec.label());
    HeuristicOptions h = cfg.heuristic;
    h.seed = derive_seed(cfg.seed, "init:" + std::to_string(trial));
    const auto init = select_init(generate_heuristic_grasps(scene.box, spec.camera, h));

    auto add_row = [&](const std::string& method, const std::string& type, const GraspConfiguration& config,
                       double model_probability, double objective_value) {
      PlanEvalRow row;
      row.object = spec.name;
      row.pose = spec.pose;
      row.trial = trial;
      row.method = method;
      row.type = type;
      row.config = config;
      row.oracle_probability = oracle_success_probability(oracle, config, type);
      row.success = oracle_label(oracle, config, type, derive_seed(cfg.seed, "label:" + std::to_string(trial) + ":" + type));
      row.model_probability = model_probability;
      row.objective = objective_value;
      report.rows.push_back(std::move(row));
    };
    auto plan = [&](const GraspModel& model, int type_index) -> std::optional<TypeInferenceResult> {
      try {
        return minimize_for_type(model, type_index, features, init.config, cfg.inference);
      } catch (const NonFiniteObjective&) {
        return std::nullopt;
      }
    };
    const auto free_plan = plan(models.type_free, 0);
    for (const auto& target : oracle.targets) {
      const auto typed = plan(models.typed, models.typed.type_index(target.type));
      if (typed) {
        add_row("typed", target.type, typed->config, typed->success_probability, typed->objective_value);
      } else {
        add_row("typed", target.type, init.config, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
        report.rows.back().success = 0;
      }
      if (free_plan) {
        add_row(kTypeFreeName, target.type, free_plan->config, free_plan->success_probability, free_plan->objective_value);
      } else {
        add_row(kTypeFreeName, target.type, init.config, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
        report.rows.back().success = 0;
      }
      add_row("heuristic", target.type, init.config, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
    }
  }
  return report;
}

// One-sided paired comparison of success indicators a vs b: normal
// approximation to the mean paired difference.
struct PairedComparison {
  std::size_t trials = 0;
  double rate_a = 0.0;
  double rate_b = 0.0;
  double mean_difference = 0.0;
  double standard_error = 0.0;
  double lower_bound = 0.0;  // one-sided lower confidence bound on the difference
};

inline PairedComparison compare_paired(const std::vector<int>& a, const std::vector<int>& b, double z = 1.6448536269514722) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("paired comparison needs equal, non-empty samples");
  PairedComparison c;
  c.trials = a.size();
  const double n = static_cast<double>(a.size());
  double sum = 0.0, sum_sq = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d;
    sum_sq += d * d;
    sa += a[i];
    sb += b[i];
  }
  c.rate_a = sa / n;
  c.rate_b = sb / n;
  c.mean_difference = sum / n;
  const double var = a.size() > 1 ? std::max(0.0, (sum_sq - n * c.mean_difference * c.mean_difference) / (n - 1.0)) : 0.0;
  c.standard_error = std::sqrt(var / n);
  c.lower_bound = c.mean_difference - z * c.standard_error;
  return c;
}

}  // namespace grasptype
