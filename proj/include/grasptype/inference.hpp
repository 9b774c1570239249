#pragma once

// MAP grasp inference. For each grasp type g the planner minimizes
//
//   f(theta, g) = -log sigmoid(w_g . x) - prior_weight * log sum_k pi_gk N(theta | mu_gk, Sigma_gk)
//
// over the configuration box, where x = [theta | features | 1], and then
// keeps the type whose minimum is lowest.

#include "grasptype/box_lbfgs.hpp"
#include "grasptype/model.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace grasptype {

struct InferenceConfig {
  double prior_weight = 0.5;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-6;
  int memory = 10;
  // When unset the model's bounds are used.
  std::optional<ConfigurationBounds> bounds;
  // Extra randomly perturbed starts per type (0 = single start).
  int restarts = 0;
  double restart_sigma = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(prior_weight >= 0.0)) throw InvalidArgument("prior_weight must be >= 0");
    if (!(gradient_tolerance > 0.0)) throw InvalidArgument("gradient_tolerance must be > 0");
    if (max_iterations < 0) throw InvalidArgument("max_iterations must be >= 0");
    if (restarts < 0) throw InvalidArgument("restarts must be >= 0");
    if (bounds) bounds->validate();
  }

  const ConfigurationBounds& effective_bounds(const GraspModel& model) const { return bounds ? *bounds : model.bounds; }
};

// Value and theta-gradient of the inner objective.
inline double objective_with_gradient(const GraspModel& model, int type_index, const VectorXd& features,
                                      const Vector14& theta, const InferenceConfig& cfg, Vector14* gradient) {
  const auto& w = model.classifiers.at(static_cast<std::size_t>(model.type(type_index).index)).weights;
  if (w.size() != kConfigDim + features.size() + 1) throw InvalidArgument("feature length does not match the model");
  const double z = w.head<kConfigDim>().dot(theta) + w.segment(kConfigDim, features.size()).dot(features) + w[w.size() - 1];
  const auto& mixture = model.priors[static_cast<std::size_t>(type_index)].mixture;
  double value = softplus(-z);
  if (gradient) {
    VectorXd prior_grad;
    const double log_prior = mixture.log_density_with_gradient(VectorXd(theta), prior_grad);
    value -= cfg.prior_weight * log_prior;
    *gradient = -w.head<kConfigDim>() * (1.0 - sigmoid(z)) - cfg.prior_weight * Vector14(prior_grad);
  } else if (cfg.prior_weight != 0.0) {
    value -= cfg.prior_weight * mixture.log_density(VectorXd(theta));
  }
  return value;
}

inline double objective(const GraspModel& model, int type_index, const VisualFeatures& features,
                        const GraspConfiguration& config, const InferenceConfig& cfg) {
  return objective_with_gradient(model, type_index, features.values, config.values, cfg, nullptr);
}

inline Vector14 gradient(const GraspModel& model, int type_index, const VisualFeatures& features,
                         const GraspConfiguration& config, const InferenceConfig& cfg) {
  Vector14 g;
  objective_with_gradient(model, type_index, features.values, config.values, cfg, &g);
  return g;
}

struct TypeInferenceResult {
  GraspType type;
  GraspConfiguration config;
  double objective_value = 0.0;
  double success_probability = 0.0;
  GraspConfiguration init;
  bool init_projected = false;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
  StopReason stop = StopReason::iteration_cap;
  std::vector<double> trace;
  // Set when this type could not be optimized; the other fields are unset.
  std::optional<std::string> failure;
};

inline TypeInferenceResult minimize_for_type(const GraspModel& model, int type_index, const VisualFeatures& features,
                                             const GraspConfiguration& init, const InferenceConfig& cfg) {
  cfg.validate();
  const auto& bounds = cfg.effective_bounds(model);
  TypeInferenceResult out;
  out.type = model.type(type_index);
  out.init = init;
  out.init_projected = !bounds.contains(init.values);

  auto fg = [&](const VectorXd& x, VectorXd& grad) {
    Vector14 g;
    const double v = objective_with_gradient(model, type_index, features.values, Vector14(x), cfg, &g);
    grad = g;
    return v;
  };
  BoxLbfgsOptions opts;
  opts.memory = cfg.memory;
  opts.max_iterations = cfg.max_iterations;
  opts.gradient_tolerance = cfg.gradient_tolerance;

  std::mt19937_64 rng(derive_seed(cfg.seed, "restart:" + out.type.name));
  std::normal_distribution<double> noise(0.0, cfg.restart_sigma);
  std::optional<BoxLbfgsResult> best;
  for (int r = 0; r <= cfg.restarts; ++r) {
    Vector14 start = init.values;
    if (r > 0) {
      for (int i = 0; i < kConfigDim; ++i) start[i] += noise(rng);
    }
    auto res = minimize_box_lbfgs(fg, VectorXd(start), VectorXd(bounds.lower), VectorXd(bounds.upper), opts);
    if (!best || res.value < best->value) best = std::move(res);
  }
  out.config = GraspConfiguration(Vector14(best->x));
  out.objective_value = best->value;
  out.iterations = best->iterations;
  out.projected_gradient_norm = best->projected_gradient_norm;
  out.stop = best->stop;
  out.trace = std::move(best->trace);
  out.success_probability = predict_success(model, type_index, assemble_input(out.config, features));
  return out;
}

struct InferenceResult {
  GraspConfiguration config;
  GraspType type;
  double objective_value = 0.0;
  double success_probability = 0.0;
  GraspConfiguration init;
  std::vector<double> trace;
  std::vector<TypeInferenceResult> per_type;
};

// `inits` holds one start per entry of `types`; an empty `types` means every
// type in the model. Types whose optimization fails are reported in
// per_type and skipped by the outer argmin.
inline InferenceResult plan_grasp(const GraspModel& model, const VisualFeatures& features,
                                  const std::vector<GraspConfiguration>& inits, const InferenceConfig& cfg,
                                  std::vector<int> types = {}) {
  if (types.empty()) {
    for (int m = 0; m < model.type_count(); ++m) types.push_back(m);
  }
  if (inits.size() != types.size()) throw InvalidArgument("plan_grasp needs one initial configuration per grasp type");
  InferenceResult result;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < types.size(); ++i) {
    TypeInferenceResult r;
    try {
      r = minimize_for_type(model, types[i], features, inits[i], cfg);
    } catch (const NonFiniteObjective& e) {
      r.type = model.type(types[i]);
      r.init = inits[i];
      r.failure = e.what();
    }
    result.per_type.push_back(std::move(r));
    const auto& cur = result.per_type.back();
    if (cur.failure) continue;
    const auto& incumbent = best ? &result.per_type[*best] : nullptr;
    if (!incumbent || cur.objective_value < incumbent->objective_value ||
        (cur.objective_value == incumbent->objective_value && cur.type.index < incumbent->type.index)) {
      best = result.per_type.size() - 1;
    }
  }
  if (!best) throw InferenceFailed("inference failed for every grasp type");
  const auto& win = result.per_type[*best];
  result.config = win.config;
  result.type = win.type;
  result.objective_value = win.objective_value;
  result.success_probability = win.success_probability;
  result.init = win.init;
  result.trace = win.trace;
  return result;
}

// Same start for every requested type.
inline InferenceResult plan_grasp(const GraspModel& model, const VisualFeatures& features, const GraspConfiguration& init,
                                  const InferenceConfig& cfg, std::vector<int> types = {}) {
  if (types.empty()) {
    for (int m = 0; m < model.type_count(); ++m) types.push_back(m);
  }
  return plan_grasp(model, features, std::vector<GraspConfiguration>(types.size(), init), cfg, types);
}

}  // namespace grasptype
