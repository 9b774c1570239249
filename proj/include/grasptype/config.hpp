#pragma once

// TOML run configuration. Every section is optional; missing keys keep their
// defaults and unknown keys are rejected so typos do not pass silently.
//
//   seed = 7
//   [model]       mixture_components, l2_strength, em_restarts, em_tolerance,
//                 em_max_iterations, covariance_floor,
//                 classifier_gradient_tolerance, classifier_max_sweeps,
//                 prior_label_filter ("successes" | "all"), types
//   [bounds]      lower, upper (14 values each)
//   [inference]   prior_weight, max_iterations, gradient_tolerance, memory,
//                 restarts, restart_sigma
//   [perception]  ransac_iterations, inlier_threshold, up
//   [heuristic]   standoff, noise_sigma, count, joint_noise_sigma,
//                 nominal_joints
//   [dataset]     successes_per_type, failures_per_type, attempt_factor,
//                 latent_dim, joint_noise_sigma
//   [oracle]      beta, [[oracle.targets]] type, mean, radii
//   [scene]       one SyntheticObjectSpec: shape, dimensions, x, y, yaw,
//                 point_density, noise_sigma, camera, name, pose
//   [objects]     poses, [[objects.train]] / [[objects.test]] shapes

#include "grasptype/serialization.hpp"
#include "grasptype/synthetic.hpp"

#include <toml++/toml.hpp>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace grasptype {

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  InferenceConfig inference;
  SegmentationOptions segmentation;
  // Heuristic starts used at planning time.
  HeuristicOptions heuristic = ExperimentConfig{}.heuristic;
  DatasetOptions dataset;
  OracleSpec oracle = default_oracle();
  SyntheticObjectSpec scene;
  int poses = 5;
  std::vector<SyntheticObjectSpec> train_shapes;  // empty: built-in set
  std::vector<SyntheticObjectSpec> test_shapes;

  std::vector<SyntheticObjectSpec> train_objects() const {
    return train_shapes.empty() ? default_training_objects(poses, derive_seed(seed, "train-objects"))
                                : make_posed_objects(train_shapes, poses, derive_seed(seed, "train-objects"));
  }
  std::vector<SyntheticObjectSpec> test_objects() const {
    return test_shapes.empty() ? default_test_objects(poses, derive_seed(seed, "test-objects"))
                               : make_posed_objects(test_shapes, poses, derive_seed(seed, "test-objects"));
  }

  // Propagates the root seed into every component that draws random numbers.
  void apply_seed(std::uint64_t root) {
    seed = root;
    model.seed = derive_seed(root, "model");
    inference.seed = derive_seed(root, "inference");
    segmentation.seed = derive_seed(root, "segmentation");
    heuristic.seed = derive_seed(root, "heuristic");
    dataset.seed = derive_seed(root, "dataset");
    dataset.segmentation = segmentation;
    scene.seed = derive_seed(root, "scene");
  }

  ExperimentConfig experiment() const {
    ExperimentConfig e;
    e.model = model;
    e.inference = inference;
    e.segmentation = segmentation;
    e.heuristic = heuristic;
    e.seed = derive_seed(seed, "experiment");
    return e;
  }
};

namespace detail {

inline void check_keys(const toml::table& t, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& [key, node] : t) {
    if (!allowed.count(std::string(key.str()))) {
      throw ParseError("config: unknown key '" + std::string(key.str()) + "' in " + (section.empty() ? "top level" : "[" + section + "]"));
    }
  }
}

inline const toml::table* subtable(const toml::table& t, const char* key) {
  const auto* node = t.get(key);
  if (!node) return nullptr;
  const auto* table = node->as_table();
  if (!table) throw ParseError(std::string("config: '") + key + "' must be a table");
  return table;
}

inline void read_number(const toml::table& t, const char* key, double& out) {
  const auto* node = t.get(key);
  if (!node) return;
  if (const auto v = node->value<double>()) {
    out = *v;
    return;
  }
  throw ParseError(std::string("config: '") + key + "' must be a number");
}

template <typename Int>
void read_integer(const toml::table& t, const char* key, Int& out) {
  const auto* node = t.get(key);
  if (!node) return;
  const auto* v = node->as_integer();
  if (!v) throw ParseError(std::string("config: '") + key + "' must be an integer");
  const std::int64_t raw = v->get();
  if constexpr (std::is_unsigned_v<Int>) {
    if (raw < 0) throw ParseError(std::string("config: '") + key + "' must be >= 0");
  }
  out = static_cast<Int>(raw);
}

inline void read_string(const toml::table& t, const char* key, std::string& out) {
  const auto* node = t.get(key);
  if (!node) return;
  const auto v = node->value<std::string>();
  if (!v) throw ParseError(std::string("config: '") + key + "' must be a string");
  out = *v;
}

inline VectorXd read_array(const toml::node& node, const std::string& key, Eigen::Index expected) {
  const auto* arr = node.as_array();
  if (!arr) throw ParseError("config: '" + key + "' must be an array");
  if (expected >= 0 && static_cast<Eigen::Index>(arr->size()) != expected) {
    throw ParseError("config: '" + key + "' must have " + std::to_string(expected) + " values");
  }
  VectorXd v(static_cast<Eigen::Index>(arr->size()));
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto x = (*arr)[i].value<double>();
    if (!x) throw ParseError("config: '" + key + "' must hold numbers");
    v[static_cast<Eigen::Index>(i)] = *x;
  }
  return v;
}

template <typename Vec>
void read_vector(const toml::table& t, const char* key, Vec& out) {
  if (const auto* node = t.get(key)) out = read_array(*node, key, out.size());
}

inline SyntheticObjectSpec read_object(const toml::table& t, SyntheticObjectSpec spec, const std::string& section) {
  check_keys(t, section, {"name", "pose", "shape", "dimensions", "x", "y", "yaw", "point_density", "noise_sigma", "camera", "table_half_size"});
  read_string(t, "name", spec.name);
  read_integer(t, "pose", spec.pose);
  std::string shape = to_string(spec.shape);
  read_string(t, "shape", shape);
  try {
    spec.shape = parse_shape(shape);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  read_vector(t, "dimensions", spec.dimensions);
  read_number(t, "x", spec.x);
  read_number(t, "y", spec.y);
  read_number(t, "yaw", spec.yaw);
  read_number(t, "point_density", spec.point_density);
  read_number(t, "noise_sigma", spec.noise_sigma);
  read_number(t, "table_half_size", spec.table_half_size);
  read_vector(t, "camera", spec.camera);
  return spec;
}

inline std::vector<SyntheticObjectSpec> read_objects(const toml::table& t, const char* key) {
  std::vector<SyntheticObjectSpec> out;
  const auto* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) throw ParseError(std::string("config: objects.") + key + " must be an array of tables");
  for (const auto& item : *arr) {
    const auto* table = item.as_table();
    if (!table) throw ParseError(std::string("config: objects.") + key + " must be an array of tables");
    out.push_back(read_object(*table, SyntheticObjectSpec{}, std::string("objects.") + key));
  }
  return out;
}

}  // namespace detail

inline RunConfig run_config_from_toml(const toml::table& root) {
  using namespace detail;
  RunConfig cfg;
  check_keys(root, "", {"seed", "model", "bounds", "inference", "perception", "heuristic", "dataset", "oracle", "scene", "objects"});
  std::uint64_t seed = 0;
  read_integer(root, "seed", seed);
  cfg.apply_seed(seed);

  if (const auto* t = subtable(root, "model")) {
    check_keys(*t, "model",
               {"mixture_components", "l2_strength", "em_restarts", "em_tolerance", "em_max_iterations", "covariance_floor",
                "classifier_gradient_tolerance", "classifier_max_sweeps", "prior_label_filter", "types"});
    read_integer(*t, "mixture_components", cfg.model.mixture_components);
    read_number(*t, "l2_strength", cfg.model.l2_strength);
    read_integer(*t, "em_restarts", cfg.model.em_restarts);
    read_number(*t, "em_tolerance", cfg.model.em_tolerance);
    read_integer(*t, "em_max_iterations", cfg.model.em_max_iterations);
    read_number(*t, "covariance_floor", cfg.model.covariance_floor);
    read_number(*t, "classifier_gradient_tolerance", cfg.model.classifier_gradient_tolerance);
    read_integer(*t, "classifier_max_sweeps", cfg.model.classifier_max_sweeps);
    std::string filter = "successes";
    read_string(*t, "prior_label_filter", filter);
    if (filter == "successes") cfg.model.prior_label_filter = PriorLabelFilter::successes_only;
    else if (filter == "all") cfg.model.prior_label_filter = PriorLabelFilter::all;
    else throw ParseError("config: prior_label_filter must be \"successes\" or \"all\"");
    if (const auto* node = t->get("types")) {
      const auto* arr = node->as_array();
      if (!arr) throw ParseError("config: model.types must be an array of strings");
      for (const auto& item : *arr) {
        const auto name = item.value<std::string>();
        if (!name) throw ParseError("config: model.types must be an array of strings");
        cfg.model.types.push_back(*name);
      }
    }
  }
  if (const auto* t = subtable(root, "bounds")) {
    check_keys(*t, "bounds", {"lower", "upper"});
    read_vector(*t, "lower", cfg.model.bounds.lower);
    read_vector(*t, "upper", cfg.model.bounds.upper);
    try {
      cfg.model.bounds.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    cfg.heuristic.bounds = cfg.model.bounds;
    cfg.dataset.heuristic.bounds = cfg.model.bounds;
  }
  if (const auto* t = subtable(root, "inference")) {
    check_keys(*t, "inference", {"prior_weight", "max_iterations", "gradient_tolerance", "memory", "restarts", "restart_sigma"});
    read_number(*t, "prior_weight", cfg.inference.prior_weight);
    read_integer(*t, "max_iterations", cfg.inference.max_iterations);
    read_number(*t, "gradient_tolerance", cfg.inference.gradient_tolerance);
    read_integer(*t, "memory", cfg.inference.memory);
    read_integer(*t, "restarts", cfg.inference.restarts);
    read_number(*t, "restart_sigma", cfg.inference.restart_sigma);
  }
  if (const auto* t = subtable(root, "perception")) {
    check_keys(*t, "perception", {"ransac_iterations", "inlier_threshold", "up"});
    read_integer(*t, "ransac_iterations", cfg.segmentation.ransac_iterations);
    read_number(*t, "inlier_threshold", cfg.segmentation.inlier_threshold);
    read_vector(*t, "up", cfg.segmentation.up);
    cfg.heuristic.up = cfg.segmentation.up;
    cfg.dataset.heuristic.up = cfg.segmentation.up;
    cfg.dataset.segmentation = cfg.segmentation;
  }
  if (const auto* t = subtable(root, "heuristic")) {
    check_keys(*t, "heuristic", {"standoff", "noise_sigma", "count", "joint_noise_sigma", "nominal_joints"});
    read_number(*t, "standoff", cfg.heuristic.standoff);
    read_number(*t, "noise_sigma", cfg.heuristic.noise_sigma);
    read_integer(*t, "count", cfg.heuristic.count);
    read_number(*t, "joint_noise_sigma", cfg.heuristic.joint_noise_sigma);
    if (const auto* node = t->get("nominal_joints")) {
      const VectorXd v = read_array(*node, "nominal_joints", kJointDim);
      for (int j = 0; j < kJointDim; ++j) cfg.heuristic.nominal_joints[static_cast<std::size_t>(j)] = v[j];
    }
    // Data collection uses the same hand geometry.
    cfg.dataset.heuristic.standoff = cfg.heuristic.standoff;
    cfg.dataset.heuristic.noise_sigma = cfg.heuristic.noise_sigma;
    cfg.dataset.heuristic.nominal_joints = cfg.heuristic.nominal_joints;
  }
  if (const auto* t = subtable(root, "dataset")) {
    check_keys(*t, "dataset", {"successes_per_type", "failures_per_type", "attempt_factor", "latent_dim", "joint_noise_sigma"});
    read_integer(*t, "successes_per_type", cfg.dataset.successes_per_type);
    read_integer(*t, "failures_per_type", cfg.dataset.failures_per_type);
    read_integer(*t, "attempt_factor", cfg.dataset.attempt_factor);
    read_integer(*t, "latent_dim", cfg.dataset.latent_dim);
    read_number(*t, "joint_noise_sigma", cfg.dataset.heuristic.joint_noise_sigma);
  }
  if (const auto* t = subtable(root, "oracle")) {
    check_keys(*t, "oracle", {"beta", "targets"});
    if (const auto* node = t->get("beta")) {
      if (const auto s = node->value<std::string>(); s && (*s == "inf" || *s == "infinity")) {
        cfg.oracle.beta = std::numeric_limits<double>::infinity();
      } else {
        read_number(*t, "beta", cfg.oracle.beta);
      }
    }
    if (const auto* node = t->get("targets")) {
      const auto* arr = node->as_array();
      if (!arr) throw ParseError("config: oracle.targets must be an array of tables");
      cfg.oracle.targets.clear();
      for (const auto& item : *arr) {
        const auto* target = item.as_table();
        if (!target) throw ParseError("config: oracle.targets must be an array of tables");
        check_keys(*target, "oracle.targets", {"type", "mean", "radii"});
        OracleTarget ot;
        read_string(*target, "type", ot.type);
        if (!target->get("mean") || !target->get("radii")) throw ParseError("config: oracle targets need mean and radii");
        read_vector(*target, "mean", ot.mean);
        read_vector(*target, "radii", ot.radii);
        cfg.oracle.targets.push_back(ot);
      }
    }
    try {
      cfg.oracle.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
  }
  if (const auto* t = subtable(root, "scene")) {
    const auto seed_keep = cfg.scene.seed;
    cfg.scene = read_object(*t, cfg.scene, "scene");
    cfg.scene.seed = seed_keep;
  }
  if (const auto* t = subtable(root, "objects")) {
    check_keys(*t, "objects", {"poses", "train", "test"});
    read_integer(*t, "poses", cfg.poses);
    if (cfg.poses < 1) throw ParseError("config: objects.poses must be >= 1");
    cfg.train_shapes = read_objects(*t, "train");
    cfg.test_shapes = read_objects(*t, "test");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return run_config_from_toml(toml::parse(text, path.string()));
  } catch (const toml::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + std::string(e.description()));
  }
}

inline RunConfig parse_run_config(const std::string& text) {
  try {
    return run_config_from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw ParseError("config: " + std::string(e.description()));
  }
}

// Snapshot of the effective configuration, recorded in run manifests.
inline Json to_json(const RunConfig& c) {
  auto object_json = [](const SyntheticObjectSpec& s) {
    return Json{{"name", s.name},
                {"pose", s.pose},
                {"shape", to_string(s.shape)},
                {"dimensions", detail::vector_json(s.dimensions)},
                {"x", s.x},
                {"y", s.y},
                {"yaw", s.yaw},
                {"point_density", s.point_density},
                {"noise_sigma", s.noise_sigma},
                {"seed", s.seed},
                {"camera", detail::vector_json(s.camera)}};
  };
  Json targets = Json::array();
  for (const auto& t : c.oracle.targets) {
    targets.push_back(Json{{"type", t.type}, {"mean", detail::vector_json(t.mean)}, {"radii", detail::vector_json(t.radii)}});
  }
  Json train = Json::array(), test = Json::array();
  for (const auto& s : c.train_shapes) train.push_back(object_json(s));
  for (const auto& s : c.test_shapes) test.push_back(object_json(s));
  auto joints = [](const std::array<double, kJointDim>& a) {
    Json j = Json::array();
    for (double v : a) j.push_back(v);
    return j;
  };
  return Json{
      {"seed", c.seed},
      {"model",
       {{"mixture_components", c.model.mixture_components},
        {"l2_strength", c.model.l2_strength},
        {"em_restarts", c.model.em_restarts},
        {"em_tolerance", c.model.em_tolerance},
        {"em_max_iterations", c.model.em_max_iterations},
        {"covariance_floor", c.model.covariance_floor},
        {"classifier_gradient_tolerance", c.model.classifier_gradient_tolerance},
        {"classifier_max_sweeps", c.model.classifier_max_sweeps},
        {"prior_label_filter", c.model.prior_label_filter == PriorLabelFilter::successes_only ? "successes" : "all"},
        {"types", c.model.types},
        {"seed", c.model.seed}}},
      {"bounds", to_json(c.model.bounds)},
      {"inference",
       {{"prior_weight", c.inference.prior_weight},
        {"max_iterations", c.inference.max_iterations},
        {"gradient_tolerance", c.inference.gradient_tolerance},
        {"memory", c.inference.memory},
        {"restarts", c.inference.restarts},
        {"restart_sigma", c.inference.restart_sigma},
        {"seed", c.inference.seed}}},
      {"perception",
       {{"ransac_iterations", c.segmentation.ransac_iterations},
        {"inlier_threshold", c.segmentation.inlier_threshold},
        {"up", detail::vector_json(c.segmentation.up)},
        {"seed", c.segmentation.seed}}},
      {"heuristic",
       {{"standoff", c.heuristic.standoff},
        {"noise_sigma", c.heuristic.noise_sigma},
        {"count", c.heuristic.count},
        {"joint_noise_sigma", c.heuristic.joint_noise_sigma},
        {"nominal_joints", joints(c.heuristic.nominal_joints)},
        {"seed", c.heuristic.seed}}},
      {"dataset",
       {{"successes_per_type", c.dataset.successes_per_type},
        {"failures_per_type", c.dataset.failures_per_type},
        {"attempt_factor", c.dataset.attempt_factor},
        {"latent_dim", c.dataset.latent_dim},
        {"joint_noise_sigma", c.dataset.heuristic.joint_noise_sigma},
        {"seed", c.dataset.seed}}},
      {"oracle", {{"beta", detail::number_or_null(c.oracle.beta)}, {"beta_infinite", std::isinf(c.oracle.beta)}, {"targets", std::move(targets)}}},
      {"scene", object_json(c.scene)},
      {"objects", {{"poses", c.poses}, {"train", std::move(train)}, {"test", std::move(test)}}}};
}

}  // namespace grasptype
