#pragma once

// JSON documents for every artifact. Field order is fixed and doubles are
// written in shortest round-trip form, so write -> read -> write reproduces
// the same bytes.

#include "grasptype/cloud_io.hpp"
#include "grasptype/heuristic.hpp"
#include "grasptype/inference.hpp"
#include "grasptype/model.hpp"
#include "grasptype/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace grasptype {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Plumbing

namespace detail {

inline Json vector_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Json vector_json(const Eigen::Matrix<double, N, 1>& v) {
  return vector_json(VectorXd(v));
}

// Non-finite values have no JSON spelling; they are written as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number_from(const Json& j, const std::string& what) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(what + ": missing field '" + key + "'");
  return *it;
}

inline VectorXd vector_from(const Json& j, const std::string& what, Eigen::Index expected = -1) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected) {
    throw ParseError(what + ": expected " + std::to_string(expected) + " values, got " + std::to_string(j.size()));
  }
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": element " + std::to_string(i) + " is not a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline std::string string_from(const Json& j, const std::string& what) {
  if (!j.is_string()) throw ParseError(what + ": expected a string");
  return j.get<std::string>();
}

inline long long integer_from(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ParseError(what + ": expected an integer");
  return j.get<long long>();
}

inline void check_version(const Json& j, const std::string& what) {
  const long long v = integer_from(field(j, "version", what), what + " version");
  if (v != kFormatVersion) throw ParseError(what + ": unsupported version " + std::to_string(v));
}

// Runs a decoder and turns library exceptions into ParseError.
template <typename Fn>
auto decoding(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

}  // namespace detail

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = detail::open_for_write(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

inline Json read_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path), path.string()); }

inline void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, dump_json(j)); }

// ---------------------------------------------------------------------------
// Perception artifacts

inline Json to_json(const PcaProjection& pca) {
  Json basis = Json::array();
  for (Eigen::Index r = 0; r < pca.basis.rows(); ++r) basis.push_back(detail::vector_json(VectorXd(pca.basis.row(r).transpose())));
  return Json{{"version", kFormatVersion},
              {"latent_dim", pca.latent_dim()},
              {"mean", detail::vector_json(pca.mean)},
              {"basis", std::move(basis)}};
}

inline PcaProjection pca_from_json(const Json& j) {
  return detail::decoding("PCA projection", [&] {
    detail::check_version(j, "PCA projection");
    PcaProjection pca;
    pca.mean = detail::vector_from(detail::field(j, "mean", "PCA projection"), "PCA mean");
    const auto latent = detail::integer_from(detail::field(j, "latent_dim", "PCA projection"), "latent_dim");
    const Json& basis = detail::field(j, "basis", "PCA projection");
    if (!basis.is_array() || static_cast<long long>(basis.size()) != latent) {
      throw ParseError("PCA projection: basis must have latent_dim rows");
    }
    pca.basis.resize(static_cast<Eigen::Index>(latent), pca.mean.size());
    for (std::size_t r = 0; r < basis.size(); ++r) {
      pca.basis.row(static_cast<Eigen::Index>(r)) =
          detail::vector_from(basis[r], "PCA basis row " + std::to_string(r), pca.mean.size()).transpose();
    }
    return pca;
  });
}

inline Json to_json(const ObjectFrame& frame) {
  Json axes = Json::array();
  for (int c = 0; c < 3; ++c) axes.push_back(detail::vector_json(Vector3(frame.axes.col(c))));
  return Json{{"origin", detail::vector_json(frame.origin)}, {"axes", std::move(axes)}};
}

inline ObjectFrame frame_from_json(const Json& j) {
  ObjectFrame f;
  f.origin = detail::vector_from(detail::field(j, "origin", "frame"), "frame origin", 3);
  const Json& axes = detail::field(j, "axes", "frame");
  if (!axes.is_array() || axes.size() != 3) throw ParseError("frame: axes must hold three vectors");
  for (int c = 0; c < 3; ++c) f.axes.col(c) = detail::vector_from(axes[static_cast<std::size_t>(c)], "frame axis", 3);
  return f;
}

// Occupied cells are listed by flat index (i * 20 + j) * 20 + k.
inline Json to_json(const VoxelGrid& grid) {
  Json occupied = Json::array();
  for (int c = 0; c < kGridCells; ++c)
    if (grid.occupancy[static_cast<std::size_t>(c)]) occupied.push_back(c);
  return Json{{"version", kFormatVersion},
              {"side", kGridSide},
              {"voxel_size", grid.voxel_size},
              {"frame", to_json(grid.frame)},
              {"dropped_points", grid.dropped_points},
              {"occupied", std::move(occupied)}};
}

inline VoxelGrid grid_from_json(const Json& j) {
  return detail::decoding("voxel grid", [&] {
    detail::check_version(j, "voxel grid");
    if (detail::integer_from(detail::field(j, "side", "voxel grid"), "side") != kGridSide) {
      throw ParseError("voxel grid: side must be " + std::to_string(kGridSide));
    }
    VoxelGrid g;
    g.voxel_size = detail::number_from(detail::field(j, "voxel_size", "voxel grid"), "voxel_size");
    g.frame = frame_from_json(detail::field(j, "frame", "voxel grid"));
    g.dropped_points = static_cast<std::size_t>(detail::integer_from(detail::field(j, "dropped_points", "voxel grid"), "dropped_points"));
    for (const auto& c : detail::field(j, "occupied", "voxel grid")) {
      const auto idx = detail::integer_from(c, "occupied cell");
      if (idx < 0 || idx >= kGridCells) throw ParseError("voxel grid: cell index out of range");
      g.occupancy[static_cast<std::size_t>(idx)] = 1;
    }
    return g;
  });
}

inline Json to_json(const VisualFeatures& f) {
  return Json{{"version", kFormatVersion}, {"source_id", f.source_id}, {"values", detail::vector_json(f.values)}};
}

inline VisualFeatures features_from_json(const Json& j) {
  return detail::decoding("features", [&] {
    detail::check_version(j, "features");
    VisualFeatures f;
    f.source_id = detail::string_from(detail::field(j, "source_id", "features"), "source_id");
    f.values = detail::vector_from(detail::field(j, "values", "features"), "feature values");
    if (!f.values.allFinite()) throw ParseError("features: values must be finite");
    return f;
  });
}

// ---------------------------------------------------------------------------
// Datasets (JSON lines)

inline Json to_json(const TrainingSample& s) {
  return Json{{"sample_id", s.sample_id},
              {"type", s.type},
              {"theta", detail::vector_json(s.config.values)},
              {"features", detail::vector_json(s.features)},
              {"label", s.label}};
}

inline TrainingSample sample_from_json(const Json& j) {
  TrainingSample s;
  s.sample_id = detail::string_from(detail::field(j, "sample_id", "sample"), "sample_id");
  s.type = detail::string_from(detail::field(j, "type", "sample"), "type");
  s.config.values = detail::vector_from(detail::field(j, "theta", "sample"), "theta", kConfigDim);
  s.features = detail::vector_from(detail::field(j, "features", "sample"), "features");
  const auto label = detail::integer_from(detail::field(j, "label", "sample"), "label");
  if (label != 0 && label != 1) throw ParseError("label must be 0 or 1");
  s.label = static_cast<int>(label);
  return s;
}

inline std::string dataset_to_jsonl(const GraspDataset& dataset) {
  std::string out;
  for (const auto& s : dataset.samples) out += to_json(s).dump() + "\n";
  return out;
}

// Blank lines are skipped; any other malformed line reports its 1-based
// line number.
inline GraspDataset dataset_from_jsonl(const std::string& text, const std::string& source = "dataset") {
  GraspDataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    try {
      ds.samples.push_back(detail::decoding("sample", [&] { return sample_from_json(Json::parse(line)); }));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + " line " + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(source + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return ds;
}

inline GraspDataset read_dataset(const std::filesystem::path& path) { return dataset_from_jsonl(read_text_file(path), path.string()); }

inline void write_dataset(const std::filesystem::path& path, const GraspDataset& dataset) {
  write_text_file(path, dataset_to_jsonl(dataset));
}

// Heuristic grasps share the dataset line schema without the label.
inline std::string heuristic_grasps_to_jsonl(const std::vector<HeuristicGrasp>& grasps, const VisualFeatures& features) {
  static const char* face_names[] = {"+x", "-x", "+y", "-y", "+z", "-z"};
  std::string out;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    Json j{{"sample_id", features.source_id + "#init" + std::to_string(i)},
           {"type", "heuristic"},
           {"theta", detail::vector_json(grasps[i].config.values)},
           {"features", detail::vector_json(features.values)},
           {"face", face_names[static_cast<int>(grasps[i].face)]},
           {"camera_distance", grasps[i].camera_distance}};
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const ConfigurationBounds& b) {
  return Json{{"lower", detail::vector_json(b.lower)}, {"upper", detail::vector_json(b.upper)}};
}

inline ConfigurationBounds bounds_from_json(const Json& j) {
  ConfigurationBounds b;
  b.lower = detail::vector_from(detail::field(j, "lower", "bounds"), "lower bounds", kConfigDim);
  b.upper = detail::vector_from(detail::field(j, "upper", "bounds"), "upper bounds", kConfigDim);
  b.validate();
  return b;
}

// Covariances are stored row-major.
inline Json to_json(const GaussianMixture& mixture) {
  Json comps = Json::array();
  for (const auto& c : mixture.components()) {
    Json sigma = Json::array();
    for (int r = 0; r < c.dim(); ++r)
      for (int k = 0; k < c.dim(); ++k) sigma.push_back(c.covariance()(r, k));
    comps.push_back(Json{{"pi", c.weight()}, {"mu", detail::vector_json(c.mean())}, {"sigma", std::move(sigma)}});
  }
  return comps;
}

inline GaussianMixture mixture_from_json(const Json& comps, int dim) {
  if (!comps.is_array() || comps.empty()) throw ParseError("prior: components must be a non-empty array");
  std::vector<GaussianComponent> out;
  for (const auto& c : comps) {
    const double pi = detail::number_from(detail::field(c, "pi", "component"), "pi");
    VectorXd mu = detail::vector_from(detail::field(c, "mu", "component"), "mu", dim);
    const VectorXd flat = detail::vector_from(detail::field(c, "sigma", "component"), "sigma", dim * dim);
    MatrixXd sigma(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int k = 0; k < dim; ++k) sigma(r, k) = flat[r * dim + k];
    out.emplace_back(pi, std::move(mu), std::move(sigma));
  }
  return GaussianMixture(std::move(out));
}

inline Json to_json(const GraspModel& model) {
  Json types = Json::array();
  for (const auto& t : model.types) types.push_back(t.name);
  Json classifiers = Json::array();
  for (const auto& c : model.classifiers) classifiers.push_back(Json{{"type", c.type.name}, {"weights", detail::vector_json(c.weights)}});
  Json priors = Json::array();
  for (const auto& p : model.priors) priors.push_back(Json{{"type", p.type.name}, {"components", to_json(p.mixture)}});
  Json j{{"version", kFormatVersion},
         {"types", std::move(types)},
         {"feature_dim", model.feature_dim},
         {"bounds", to_json(model.bounds)},
         {"classifiers", std::move(classifiers)},
         {"priors", std::move(priors)}};
  if (!model.pca_path.empty()) j["pca"] = model.pca_path;
  return j;
}

inline GraspModel model_from_json(const Json& j) {
  return detail::decoding("model", [&] {
    detail::check_version(j, "model");
    GraspModel m;
    const Json& types = detail::field(j, "types", "model");
    if (!types.is_array() || types.empty()) throw ParseError("model: types must be a non-empty array");
    for (std::size_t i = 0; i < types.size(); ++i) {
      m.types.push_back(GraspType{static_cast<int>(i), detail::string_from(types[i], "type name")});
    }
    m.feature_dim = static_cast<int>(detail::integer_from(detail::field(j, "feature_dim", "model"), "feature_dim"));
    if (m.feature_dim < 0) throw ParseError("model: feature_dim must be >= 0");
    m.bounds = bounds_from_json(detail::field(j, "bounds", "model"));
    const Json& classifiers = detail::field(j, "classifiers", "model");
    const Json& priors = detail::field(j, "priors", "model");
    if (!classifiers.is_array() || classifiers.size() != types.size() || !priors.is_array() || priors.size() != types.size()) {
      throw ParseError("model: one classifier and one prior per type required");
    }
    for (std::size_t i = 0; i < types.size(); ++i) {
      const std::string name = m.types[i].name;
      if (detail::string_from(detail::field(classifiers[i], "type", "classifier"), "type") != name ||
          detail::string_from(detail::field(priors[i], "type", "prior"), "type") != name) {
        throw ParseError("model: classifiers and priors must follow the order of types");
      }
      m.classifiers.push_back(TypeClassifier{
          m.types[i], detail::vector_from(detail::field(classifiers[i], "weights", "classifier"), "weights", kConfigDim + m.feature_dim + 1)});
      try {
        m.priors.push_back(GraspPrior{m.types[i], mixture_from_json(detail::field(priors[i], "components", "prior"), kConfigDim)});
      } catch (const InvalidArgument& e) {
        throw ParseError("model prior '" + name + "': " + e.what());
      }
    }
    m.type_prior = VectorXd::Constant(static_cast<Eigen::Index>(m.types.size()), 1.0 / static_cast<double>(m.types.size()));
    if (const auto it = j.find("pca"); it != j.end()) m.pca_path = detail::string_from(*it, "pca");
    m.validate();
    return m;
  });
}

inline GraspModel read_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

inline PcaProjection read_pca(const std::filesystem::path& path) { return pca_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Inference results

inline Json trace_json(const std::vector<double>& trace) {
  Json a = Json::array();
  for (double v : trace) a.push_back(detail::number_or_null(v));
  return a;
}

inline Json to_json(const TypeInferenceResult& r) {
  Json j{{"type", r.type.name}, {"init", detail::vector_json(r.init.values)}, {"init_projected", r.init_projected}};
  if (r.failure) {
    j["failure"] = *r.failure;
    return j;
  }
  j["theta"] = detail::vector_json(r.config.values);
  j["objective"] = detail::number_or_null(r.objective_value);
  j["success_probability"] = detail::number_or_null(r.success_probability);
  j["iterations"] = r.iterations;
  j["projected_gradient_norm"] = detail::number_or_null(r.projected_gradient_norm);
  j["stop"] = to_string(r.stop);
  j["trace"] = trace_json(r.trace);
  return j;
}

inline Json to_json(const InferenceResult& r, double prior_weight) {
  Json per_type = Json::array();
  for (const auto& t : r.per_type) per_type.push_back(to_json(t));
  return Json{{"version", kFormatVersion},
              {"theta", detail::vector_json(r.config.values)},
              {"type", r.type.name},
              {"objective", detail::number_or_null(r.objective_value)},
              {"success_probability", detail::number_or_null(r.success_probability)},
              {"prior_weight", prior_weight},
              {"init", detail::vector_json(r.init.values)},
              {"per_type", std::move(per_type)},
              {"trace", trace_json(r.trace)}};
}

// ---------------------------------------------------------------------------
// Experiment reports

inline Json to_json(const LooExperimentReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back(Json{{"model", r.model},
                        {"type", r.group},
                        {"count", r.metrics.count},
                        {"true_positive", r.metrics.true_positive},
                        {"false_positive", r.metrics.false_positive},
                        {"true_negative", r.metrics.true_negative},
                        {"false_negative", r.metrics.false_negative},
                        {"accuracy", r.metrics.accuracy()},
                        {"f1", r.metrics.f1()}});
  }
  return Json{{"version", kFormatVersion}, {"protocol", "loo"}, {"rows", std::move(rows)}};
}

inline std::string to_csv(const LooExperimentReport& report) {
  std::string out = "model,type,count,accuracy,f1\n";
  for (const auto& r : report.rows) {
    out += r.model + "," + r.group + "," + std::to_string(r.metrics.count) + "," + format_double(r.metrics.accuracy()) + "," +
           format_double(r.metrics.f1()) + "\n";
  }
  return out;
}

inline Json to_json(const PlanEvalReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back(Json{{"object", r.object},
                        {"pose", r.pose},
                        {"trial", r.trial},
                        {"method", r.method},
                        {"type", r.type},
                        {"success", r.success},
                        {"oracle_probability", detail::number_or_null(r.oracle_probability)},
                        {"model_probability", detail::number_or_null(r.model_probability)},
                        {"objective", detail::number_or_null(r.objective)},
                        {"theta", detail::vector_json(r.config.values)}});
  }
  Json summary = Json::array();
  for (const auto& s : report.summary()) {
    summary.push_back(Json{{"method", s.method}, {"type", s.type}, {"trials", s.trials}, {"successes", s.successes}, {"rate", s.rate()}});
  }
  return Json{{"version", kFormatVersion}, {"protocol", "plan-eval"}, {"summary", std::move(summary)}, {"rows", std::move(rows)}};
}

namespace detail {
inline std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }
}  // namespace detail

// Long format, one row per (object, pose, method, type).
inline std::string to_csv(const PlanEvalReport& report) {
  std::string out = "object,pose,trial,method,type,success,oracle_probability,model_probability,objective\n";
  for (const auto& r : report.rows) {
    out += r.object + "," + std::to_string(r.pose) + "," + std::to_string(r.trial) + "," + r.method + "," + r.type + "," +
           std::to_string(r.success) + "," + detail::csv_number(r.oracle_probability) + "," +
           detail::csv_number(r.model_probability) + "," + detail::csv_number(r.objective) + "\n";
  }
  return out;
}

inline std::string summary_csv(const PlanEvalReport& report) {
  std::string out = "method,type,trials,successes,rate\n";
  for (const auto& s : report.summary()) {
    out += s.method + "," + s.type + "," + std::to_string(s.trials) + "," + std::to_string(s.successes) + "," +
           format_double(s.rate()) + "\n";
  }
  return out;
}

}  // namespace grasptype
