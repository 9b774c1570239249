#pragma once

// The grasp-type model: one logistic success classifier and one GMM
// configuration prior per grasp type, learned independently per type.

#include "grasptype/gmm.hpp"
#include "grasptype/logistic.hpp"
#include "grasptype/perception.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace grasptype {

struct GraspType {
  int index = 0;
  std::string name;

  bool operator==(const GraspType&) const = default;
};

struct TrainingSample {
  GraspConfiguration config;
  std::string type;  // grasp type name
  VectorXd features;
  int label = 0;
  std::string sample_id;
};

struct GraspDataset {
  std::vector<TrainingSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Distinct type names in lexicographic order.
  std::vector<std::string> type_names() const {
    std::set<std::string> names;
    for (const auto& s : samples) names.insert(s.type);
    return {names.begin(), names.end()};
  }

  std::map<std::pair<std::string, int>, std::size_t> counts() const {
    std::map<std::pair<std::string, int>, std::size_t> out;
    for (const auto& s : samples) ++out[{s.type, s.label}];
    return out;
  }

  int feature_dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().features.size()); }

  void validate() const {
    if (samples.empty()) throw InsufficientData("dataset is empty");
    const auto dim = samples.front().features.size();
    for (const auto& s : samples) {
      if (s.label != 0 && s.label != 1) throw InvalidArgument("sample '" + s.sample_id + "': label must be 0 or 1");
      if (s.features.size() != dim) throw InvalidArgument("sample '" + s.sample_id + "': feature length differs");
      if (!s.config.values.allFinite() || !s.features.allFinite()) {
        throw InvalidArgument("sample '" + s.sample_id + "': non-finite value");
      }
      if (s.type.empty()) throw InvalidArgument("sample '" + s.sample_id + "': empty grasp type");
    }
  }

  GraspDataset filter_type(const std::string& type) const {
    GraspDataset out;
    for (const auto& s : samples)
      if (s.type == type) out.samples.push_back(s);
    return out;
  }

  // Every sample assigned to a single type, as used by the type-free model.
  GraspDataset relabeled(const std::string& type) const {
    GraspDataset out = *this;
    for (auto& s : out.samples) s.type = type;
    return out;
  }
};

enum class PriorLabelFilter { successes_only, all };

struct ModelConfig {
  int mixture_components = 4;
  double l2_strength = 1e-4;
  int em_restarts = 5;
  double em_tolerance = 1e-8;
  int em_max_iterations = 500;
  double covariance_floor = 1e-6;
  double classifier_gradient_tolerance = 1e-6;
  int classifier_max_sweeps = 10000;
  PriorLabelFilter prior_label_filter = PriorLabelFilter::successes_only;
  std::uint64_t seed = 0;
  ConfigurationBounds bounds = ConfigurationBounds::allegro_defaults();
  // Optional explicit type order; empty means lexicographic by name.
  std::vector<std::string> types;
};

struct TypeClassifier {
  GraspType type;
  VectorXd weights;  // [theta (14) | features | bias]
};

struct GraspPrior {
  GraspType type;
  GaussianMixture mixture;
};

struct GraspModel {
  std::vector<GraspType> types;
  std::vector<TypeClassifier> classifiers;
  std::vector<GraspPrior> priors;
  VectorXd type_prior;
  ConfigurationBounds bounds = ConfigurationBounds::allegro_defaults();
  int feature_dim = kDefaultLatentDim;
  // Path of the PCA projection the features were computed with, if known.
  std::string pca_path;

  int type_count() const { return static_cast<int>(types.size()); }

  const GraspType& type(int index) const {
    if (index < 0 || index >= type_count()) throw InvalidArgument("grasp type index out of range: " + std::to_string(index));
    return types[static_cast<std::size_t>(index)];
  }

  int type_index(const std::string& name) const {
    for (const auto& t : types)
      if (t.name == name) return t.index;
    throw InvalidArgument("unknown grasp type '" + name + "'");
  }

  void validate() const {
    if (types.empty()) throw InvalidArgument("model has no grasp types");
    if (classifiers.size() != types.size() || priors.size() != types.size()) {
      throw InvalidArgument("model classifiers/priors do not match its types");
    }
    for (std::size_t m = 0; m < types.size(); ++m) {
      if (types[m].index != static_cast<int>(m)) throw InvalidArgument("grasp type indices must be dense");
      if (!(classifiers[m].type == types[m]) || !(priors[m].type == types[m])) {
        throw InvalidArgument("model parameters are not indexed by type");
      }
      if (classifiers[m].weights.size() != kConfigDim + feature_dim + 1) {
        throw InvalidArgument("classifier weight length does not match feature dimension");
      }
      if (!classifiers[m].weights.allFinite()) throw InvalidArgument("classifier weights are not finite");
      if (priors[m].mixture.dim() != kConfigDim) throw InvalidArgument("prior dimension must be 14");
    }
    bounds.validate();
  }
};

// x = [theta (14) | features | 1]
inline VectorXd assemble_input(const GraspConfiguration& config, const VectorXd& features) {
  VectorXd x(kConfigDim + features.size() + 1);
  x << config.values, features, 1.0;
  return x;
}

inline VectorXd assemble_input(const GraspConfiguration& config, const VisualFeatures& features) {
  return assemble_input(config, features.values);
}

inline double predict_success(const GraspModel& model, int type_index, const VectorXd& x) {
  const auto& w = model.classifiers.at(static_cast<std::size_t>(model.type(type_index).index)).weights;
  if (w.size() != x.size()) throw InvalidArgument("classifier input has the wrong length");
  return sigmoid(w.dot(x));
}

inline double prior_log_density(const GraspPrior& prior, const GraspConfiguration& config) {
  return prior.mixture.log_density(config.values);
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

inline bool lexicographic_less(const VectorXd& a, const VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Batch fits do not depend on the order samples arrive in.
inline std::vector<const TrainingSample*> canonical_order(const std::vector<TrainingSample>& samples) {
  std::vector<const TrainingSample*> order;
  order.reserve(samples.size());
  for (const auto& s : samples) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const TrainingSample* a, const TrainingSample* b) {
    if (a->config.values != b->config.values) return lexicographic_less(a->config.values, b->config.values);
    if (a->features != b->features) return lexicographic_less(a->features, b->features);
    if (a->label != b->label) return a->label < b->label;
    return a->sample_id < b->sample_id;
  });
  return order;
}

inline LogisticFitOptions classifier_options(const ModelConfig& cfg, int feature_dim) {
  LogisticFitOptions opts;
  opts.l2_strength = cfg.l2_strength;
  opts.gradient_tolerance = cfg.classifier_gradient_tolerance;
  opts.max_sweeps = cfg.classifier_max_sweeps;
  opts.bias_index = kConfigDim + feature_dim;
  return opts;
}

template <typename Fn>
auto tag_errors(const std::string& type, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = "grasp type '" + type + "': " + e.what();
    if (e.kind() == "SingleClassData") throw SingleClassData(msg);
    if (e.kind() == "InsufficientData") throw InsufficientData(msg);
    if (e.kind() == "InvalidArgument") throw InvalidArgument(msg);
    throw Error(e.category(), e.kind(), msg);
  }
}

}  // namespace detail

struct ClassifierFit {
  TypeClassifier classifier;
  LogisticFitReport report;
};

inline ClassifierFit fit_classifier(const GraspDataset& dataset, const GraspType& type, const ModelConfig& cfg,
                                    const std::optional<VectorXd>& warm_start = std::nullopt) {
  std::vector<const TrainingSample*> rows;
  for (const auto* s : detail::canonical_order(dataset.samples))
    if (s->type == type.name) rows.push_back(s);
  if (rows.empty()) throw InsufficientData("no samples of grasp type '" + type.name + "'");
  const int feature_dim = static_cast<int>(rows.front()->features.size());
  MatrixXd inputs(static_cast<Eigen::Index>(rows.size()), kConfigDim + feature_dim + 1);
  std::vector<int> labels;
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    inputs.row(static_cast<Eigen::Index>(i)) = assemble_input(rows[i]->config, rows[i]->features).transpose();
    labels.push_back(rows[i]->label);
    (rows[i]->label ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw SingleClassData("grasp type '" + type.name + "' has only " + (has_pos ? "successful" : "failed") + " samples");
  }
  auto fit = fit_logistic(inputs, labels, detail::classifier_options(cfg, feature_dim), warm_start);
  return ClassifierFit{TypeClassifier{type, std::move(fit.weights)}, std::move(fit.report)};
}

struct PriorFit {
  GraspPrior prior;
  GmmFit report;
};

inline PriorFit fit_prior(const GraspDataset& dataset, const GraspType& type, const ModelConfig& cfg) {
  std::vector<const TrainingSample*> rows;
  for (const auto* s : detail::canonical_order(dataset.samples)) {
    if (s->type != type.name) continue;
    if (cfg.prior_label_filter == PriorLabelFilter::successes_only && s->label != 1) continue;
    rows.push_back(s);
  }
  if (static_cast<int>(rows.size()) < cfg.mixture_components) {
    throw InsufficientData("grasp prior for '" + type.name + "' needs " + std::to_string(cfg.mixture_components) +
                           " configurations, found " + std::to_string(rows.size()));
  }
  MatrixXd data(static_cast<Eigen::Index>(rows.size()), kConfigDim);
  for (std::size_t i = 0; i < rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = rows[i]->config.values.transpose();
  GmmFitOptions opts;
  opts.components = cfg.mixture_components;
  opts.restarts = cfg.em_restarts;
  opts.tolerance = cfg.em_tolerance;
  opts.max_iterations = cfg.em_max_iterations;
  opts.covariance_floor = cfg.covariance_floor;
  // Seeded by type name so a type's prior does not depend on which other
  // types share the dataset.
  opts.seed = derive_seed(cfg.seed, "prior:" + type.name);
  GmmFit fit = fit_gmm(data, opts);
  return PriorFit{GraspPrior{type, fit.mixture}, std::move(fit)};
}

struct TypeFitDiagnostics {
  GraspType type;
  LogisticFitReport classifier;
  double prior_log_likelihood = 0.0;
  int prior_iterations = 0;
  bool prior_converged = false;
};

struct ModelFit {
  GraspModel model;
  std::vector<TypeFitDiagnostics> diagnostics;
};

inline std::vector<GraspType> resolve_types(const GraspDataset& dataset, const ModelConfig& cfg) {
  const auto present = dataset.type_names();
  std::vector<std::string> names = cfg.types.empty() ? present : cfg.types;
  std::vector<GraspType> types;
  for (const auto& name : names) {
    if (std::find(present.begin(), present.end(), name) == present.end()) {
      throw InsufficientData("grasp type '" + name + "' has no samples in the dataset");
    }
    types.push_back(GraspType{static_cast<int>(types.size()), name});
  }
  return types;
}

inline ModelFit fit_model(const GraspDataset& dataset, const ModelConfig& cfg) {
  dataset.validate();
  cfg.bounds.validate();
  ModelFit out;
  GraspModel& model = out.model;
  model.types = resolve_types(dataset, cfg);
  model.bounds = cfg.bounds;
  model.feature_dim = dataset.feature_dim();
  for (const auto& type : model.types) {
    auto cls = detail::tag_errors(type.name, [&] { return fit_classifier(dataset, type, cfg); });
    auto pri = detail::tag_errors(type.name, [&] { return fit_prior(dataset, type, cfg); });
    model.classifiers.push_back(cls.classifier);
    model.priors.push_back(pri.prior);
    out.diagnostics.push_back(TypeFitDiagnostics{type, cls.report, pri.report.log_likelihood, pri.report.iterations,
                                                 pri.report.converged});
  }
  model.type_prior = VectorXd::Constant(model.type_count(), 1.0 / model.type_count());
  return out;
}

// ---------------------------------------------------------------------------
// Leave-one-out evaluation

struct BinaryMetrics {
  std::string group;
  std::size_t count = 0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;

  void add(int label, int predicted) {
    ++count;
    if (label && predicted) ++true_positive;
    else if (!label && predicted) ++false_positive;
    else if (!label && !predicted) ++true_negative;
    else ++false_negative;
  }

  double accuracy() const {
    return count ? static_cast<double>(true_positive + true_negative) / static_cast<double>(count) : 0.0;
  }

  // 2TP / (2TP + FP + FN); 0 when there are no positives at all.
  double f1() const {
    const double denom = 2.0 * true_positive + false_positive + false_negative;
    return denom > 0.0 ? 2.0 * true_positive / denom : 0.0;
  }
};

struct LooPrediction {
  std::size_t sample_index = 0;
  std::string sample_id;
  std::string type;
  int label = 0;
  double probability = 0.0;
  int predicted = 0;
};

struct LooReport {
  std::vector<BinaryMetrics> per_type;
  BinaryMetrics overall;
  std::vector<LooPrediction> predictions;
};

inline constexpr double kDecisionThreshold = 0.5;

// Groups predictions by an arbitrary per-sample key, e.g. the original grasp
// type when scoring a type-free classifier.
inline std::vector<BinaryMetrics> metrics_by_group(const std::vector<LooPrediction>& predictions,
                                                   const std::vector<std::string>& groups) {
  std::map<std::string, BinaryMetrics> by;
  for (const auto& p : predictions) {
    const auto& g = groups.at(p.sample_index);
    auto& m = by[g];
    m.group = g;
    m.add(p.label, p.predicted);
  }
  std::vector<BinaryMetrics> out;
  for (auto& [name, m] : by) out.push_back(m);
  return out;
}

// Holding out one sample only changes the classifier of that sample's type,
// so each fold refits that classifier alone, warm-started from the full fit.
inline LooReport evaluate_loo(const GraspDataset& dataset, const ModelConfig& cfg) {
  dataset.validate();
  const auto types = resolve_types(dataset, cfg);
  std::map<std::string, VectorXd> full_weights;
  for (const auto& t : types) {
    full_weights[t.name] = detail::tag_errors(t.name, [&] { return fit_classifier(dataset, t, cfg); }).classifier.weights;
  }

  LooReport report;
  report.overall.group = "all";
  std::map<std::string, BinaryMetrics> per_type;
  GraspDataset fold;
  fold.samples.reserve(dataset.size() - 1);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& held = dataset.samples[i];
    const auto type_it = std::find_if(types.begin(), types.end(), [&](const GraspType& t) { return t.name == held.type; });
    if (type_it == types.end()) continue;
    fold.samples.clear();
    for (std::size_t j = 0; j < dataset.size(); ++j)
      if (j != i && dataset.samples[j].type == held.type) fold.samples.push_back(dataset.samples[j]);
    const auto fit = detail::tag_errors(held.type, [&] { return fit_classifier(fold, *type_it, cfg, full_weights[held.type]); });
    const double p = sigmoid(fit.classifier.weights.dot(assemble_input(held.config, held.features)));
    LooPrediction pred{i, held.sample_id, held.type, held.label, p, p >= kDecisionThreshold ? 1 : 0};
    report.predictions.push_back(pred);
    report.overall.add(pred.label, pred.predicted);
    auto& m = per_type[held.type];
    m.group = held.type;
    m.add(pred.label, pred.predicted);
  }
  for (const auto& t : types) report.per_type.push_back(per_type[t.name]);
  return report;
}

}  // namespace grasptype
