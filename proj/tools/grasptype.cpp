// grasptype: batch front end. Every run writes one manifest next to its
// outputs; artifacts themselves carry no timestamps so reruns compare equal.

#include "grasptype/config.hpp"
#include "grasptype/grasptype.hpp"
#include "grasptype/serialization.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace grasptype;

namespace {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::inference: return "inference";
  }
  return "data";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::inference: return 4;
  }
  return 1;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string utc_stamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// State of one invocation, flushed into the manifest at the end.
struct Run {
  std::string command;
  std::vector<std::string> argv;
  fs::path out_dir = ".";
  RunConfig cfg;
  Json inputs = Json::array();
  Json outputs = Json::array();
  Json extra = Json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();

  std::string read_input(const fs::path& p) {
    std::string bytes = read_text_file(p);
    inputs.push_back(Json{{"path", p.generic_string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
    return bytes;
  }

  void write_output(const fs::path& p, const std::string& bytes) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text_file(p, bytes);
    spdlog::info("wrote {}", p.generic_string());
    outputs.push_back(Json{{"path", p.generic_string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }

  fs::path output_path(const std::string& given, const char* fallback) const { return given.empty() ? out_dir / fallback : fs::path(given); }
};

Json seeds_json(const RunConfig& c) {
  return Json{{"root", c.seed},
              {"model", c.model.seed},
              {"inference", c.inference.seed},
              {"segmentation", c.segmentation.seed},
              {"heuristic", c.heuristic.seed},
              {"dataset", c.dataset.seed},
              {"scene", c.scene.seed},
              {"experiment", c.experiment().seed}};
}

void write_manifest(const Run& run, int code, const Json& error) {
  const auto finished = std::chrono::system_clock::now();
  Json m{{"version", kFormatVersion},
         {"command", run.command},
         {"argv", run.argv},
         {"config", to_json(run.cfg)},
         {"seeds", seeds_json(run.cfg)},
         {"inputs", run.inputs},
         {"outputs", run.outputs},
         {"started_at", utc_stamp(run.started)},
         {"finished_at", utc_stamp(finished)},
         {"elapsed_seconds", std::chrono::duration<double>(finished - run.started).count()},
         {"exit_code", code}};
  for (const auto& [k, v] : run.extra.items()) m[k] = v;
  if (!error.is_null()) m["error"] = error;
  fs::create_directories(run.out_dir);
  write_json_file(run.out_dir / (run.command + ".manifest.json"), m);
}

std::string scene_file_name(const SyntheticObjectSpec& s) {
  std::string name = s.label();
  std::replace(name.begin(), name.end(), '/', '_');
  return name;
}

PointCloud read_cloud(Run& run, const fs::path& path) {
  std::istringstream in(run.read_input(path));
  try {
    return is_csv_path(path) ? read_csv(in) : read_ply(in);
  } catch (const ParseError& e) {
    throw ParseError(path.generic_string() + ": " + e.what());
  }
}

GraspDataset read_dataset_input(Run& run, const fs::path& path) {
  return dataset_from_jsonl(run.read_input(path), path.generic_string());
}

PcaProjection read_pca_input(Run& run, const fs::path& path) {
  return pca_from_json(parse_json(run.read_input(path), path.generic_string()));
}

// ----- commands ------------------------------------------------------------

struct SceneArgs {
  std::string out;
  std::optional<std::string> shape, name;
  std::vector<double> dims, camera;
  std::optional<double> x, y, yaw, density, noise;
};

void cmd_gen_scene(Run& run, const SceneArgs& a) {
  SyntheticObjectSpec spec = run.cfg.scene;
  if (a.shape) spec.shape = parse_shape(*a.shape);
  if (a.name) spec.name = *a.name;
  if (!a.dims.empty()) spec.dimensions = Vector3(a.dims[0], a.dims[1], a.dims[2]);
  if (!a.camera.empty()) spec.camera = Vector3(a.camera[0], a.camera[1], a.camera[2]);
  if (a.x) spec.x = *a.x;
  if (a.y) spec.y = *a.y;
  if (a.yaw) spec.yaw = *a.yaw;
  if (a.density) spec.point_density = *a.density;
  if (a.noise) spec.noise_sigma = *a.noise;
  run.cfg.scene = spec;
  const PointCloud cloud = generate_scene(spec);
  const fs::path out = run.output_path(a.out, "scene.ply");
  std::ostringstream ss;
  if (is_csv_path(out)) write_csv(ss, cloud);
  else write_ply(ss, cloud);
  run.write_output(out, ss.str());
  std::cout << "scene " << spec.label() << ": " << cloud.size() << " points\n";
}

struct DatasetArgs {
  std::string out, pca_out, grids_dir;
};

void cmd_gen_dataset(Run& run, const DatasetArgs& a) {
  const auto objects = run.cfg.train_objects();
  spdlog::info("collecting over {} training scenes", objects.size());
  const auto gen = build_synthetic_dataset(run.cfg.oracle, objects, run.cfg.dataset);
  run.write_output(run.output_path(a.out, "dataset.jsonl"), dataset_to_jsonl(gen.dataset));
  run.write_output(run.output_path(a.pca_out, "pca.json"), dump_json(to_json(gen.pca)));
  if (!a.grids_dir.empty()) {
    for (const auto& scene : gen.scenes) {
      run.write_output(fs::path(a.grids_dir) / (scene_file_name(scene.spec) + ".json"), dump_json(to_json(scene.grid)));
    }
  }
  Json attempts = Json::object();
  for (const auto& [type, n] : gen.attempts) {
    attempts[type] = n;
    std::cout << type << ": " << gen.dataset.filter_type(type).size() << " samples from " << n << " attempts\n";
  }
  run.extra["attempts"] = attempts;
}

struct ExtractArgs {
  std::string cloud, pca, out, grid_out, fit_pca;
  std::optional<int> latent_dim;
};

void cmd_extract(Run& run, const ExtractArgs& a) {
  if (!a.fit_pca.empty()) {
    std::vector<fs::path> files;
    const fs::path dir(a.fit_pca);
    if (!fs::is_directory(dir)) throw IoError("'" + dir.generic_string() + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<VoxelGrid> grids;
    for (const auto& f : files) grids.push_back(grid_from_json(parse_json(run.read_input(f), f.generic_string())));
    const int dim = a.latent_dim.value_or(run.cfg.dataset.latent_dim);
    const auto pca = fit_pca(grids, dim);
    run.write_output(run.output_path(a.out, "pca.json"), dump_json(to_json(pca)));
    std::cout << "pca from " << grids.size() << " grids, latent dim " << dim << "\n";
    return;
  }
  if (a.cloud.empty()) throw InvalidArgument("extract needs a cloud path or --fit-pca");
  if (a.pca.empty() && a.grid_out.empty()) throw InvalidArgument("extract needs --pca (or --grid-out to write only the grid)");
  const fs::path cloud_path(a.cloud);
  const auto obs = observe_object(read_cloud(run, cloud_path), run.cfg.segmentation);
  if (!a.grid_out.empty()) run.write_output(a.grid_out, dump_json(to_json(obs.grid)));
  if (!a.pca.empty()) {
    const auto pca = read_pca_input(run, a.pca);
    const auto features = extract_features(obs.grid, pca, cloud_path.stem().string());
    run.write_output(run.output_path(a.out, "features.json"), dump_json(to_json(features)));
  }
}

struct TrainArgs {
  std::string dataset, out, pca;
  std::vector<std::string> types;
  std::optional<int> components;
};

void cmd_train(Run& run, const TrainArgs& a) {
  if (!a.types.empty()) run.cfg.model.types = a.types;
  if (a.components) run.cfg.model.mixture_components = *a.components;
  const auto dataset = read_dataset_input(run, a.dataset);
  const fs::path out = run.output_path(a.out, "model.json");
  auto fit = fit_model(dataset, run.cfg.model);
  if (!a.pca.empty()) {
    // Stored relative to the model file so the pair can move together.
    run.read_input(a.pca);
    const fs::path base = fs::absolute(out).parent_path();
    fit.model.pca_path = fs::proximate(fs::absolute(a.pca), base).generic_string();
  }
  run.write_output(out, dump_json(to_json(fit.model)));

  Json diag = Json::array();
  std::cout << "type,samples,classifier_objective,classifier_sweeps,classifier_converged,prior_log_likelihood,em_iterations,em_converged\n";
  for (const auto& d : fit.diagnostics) {
    const auto n = dataset.filter_type(d.type.name).size();
    std::cout << d.type.name << "," << n << "," << format_double(d.classifier.objective) << "," << d.classifier.sweeps << ","
              << (d.classifier.converged ? 1 : 0) << "," << format_double(d.prior_log_likelihood) << "," << d.prior_iterations << ","
              << (d.prior_converged ? 1 : 0) << "\n";
    diag.push_back(Json{{"type", d.type.name},
                        {"classifier_objective", detail::number_or_null(d.classifier.objective)},
                        {"classifier_sweeps", d.classifier.sweeps},
                        {"classifier_converged", d.classifier.converged},
                        {"prior_log_likelihood", detail::number_or_null(d.prior_log_likelihood)},
                        {"em_iterations", d.prior_iterations},
                        {"em_converged", d.prior_converged}});
  }
  run.extra["diagnostics"] = diag;
}

struct PlanArgs {
  std::string model, cloud, pca, out, type, inits_out;
  std::vector<double> camera;
  std::optional<double> prior_weight;
};

void cmd_plan(Run& run, const PlanArgs& a) {
  if (a.prior_weight) run.cfg.inference.prior_weight = *a.prior_weight;
  const fs::path model_path(a.model);
  const auto model = model_from_json(parse_json(run.read_input(model_path), model_path.generic_string()));
  fs::path pca_path = a.pca;
  if (pca_path.empty()) {
    if (model.pca_path.empty()) throw InvalidArgument("model records no PCA projection; pass --pca");
    pca_path = model_path.parent_path() / model.pca_path;
  }
  const auto pca = read_pca_input(run, pca_path);
  if (pca.latent_dim() != model.feature_dim) {
    throw InvalidArgument("PCA latent dim " + std::to_string(pca.latent_dim()) + " does not match model feature dim " +
                          std::to_string(model.feature_dim));
  }
  const fs::path cloud_path(a.cloud);
  const Vector3 camera = a.camera.empty() ? run.cfg.scene.camera : Vector3(a.camera[0], a.camera[1], a.camera[2]);
  const auto obs = observe_object(read_cloud(run, cloud_path), run.cfg.segmentation);
  const auto features = extract_features(obs.grid, pca, cloud_path.stem().string());
  const auto box = compute_bounding_box(obs.segmentation.object_cloud, obs.frame);
  HeuristicOptions h = run.cfg.heuristic;
  h.bounds = model.bounds;
  const auto grasps = generate_heuristic_grasps(box, camera, h);
  const auto init = select_init(grasps);
  if (!a.inits_out.empty()) run.write_output(a.inits_out, heuristic_grasps_to_jsonl(grasps, features));

  InferenceConfig icfg = run.cfg.inference;
  icfg.bounds = model.bounds;
  std::vector<int> types;
  if (!a.type.empty()) types.push_back(model.type_index(a.type));
  const auto result = plan_grasp(model, features, init.config, icfg, types);
  run.write_output(run.output_path(a.out, "plan.json"), dump_json(to_json(result, icfg.prior_weight)));
  run.extra["prior_weight"] = icfg.prior_weight;
  run.extra["camera"] = detail::vector_json(camera);
  std::cout << "type " << result.type.name << ", success probability " << format_double(result.success_probability) << ", objective "
            << format_double(result.objective_value) << "\n";
}

struct EvalArgs {
  std::string protocol, dataset, pca;
};

void cmd_eval(Run& run, const EvalArgs& a) {
  run.extra["protocol"] = a.protocol;
  const auto dataset = read_dataset_input(run, a.dataset);
  if (a.protocol == "loo") {
    const auto report = run_loo_experiment(dataset, run.cfg.model);
    run.write_output(run.out_dir / "loo.csv", to_csv(report));
    run.write_output(run.out_dir / "loo.json", dump_json(to_json(report)));
    std::cout << to_csv(report);
    return;
  }
  if (a.pca.empty()) throw InvalidArgument("plan-eval needs --pca");
  const auto pca = read_pca_input(run, a.pca);
  const auto models = train_typed_and_type_free(dataset, run.cfg.model);
  const auto report = run_plan_eval(models, pca, run.cfg.oracle, run.cfg.test_objects(), run.cfg.experiment());

  // Paired comparisons pool every (trial, type) pair.
  auto pooled = [&](const std::string& method) {
    std::vector<int> all;
    for (const auto& t : run.cfg.oracle.targets) {
      const auto v = report.outcomes(method, t.type);
      all.insert(all.end(), v.begin(), v.end());
    }
    return all;
  };
  Json comparisons = Json::array();
  for (const std::string& other : {kTypeFreeName, std::string("heuristic")}) {
    const auto c = compare_paired(pooled("typed"), pooled(other));
    comparisons.push_back(Json{{"a", "typed"},
                               {"b", other},
                               {"trials", c.trials},
                               {"rate_a", c.rate_a},
                               {"rate_b", c.rate_b},
                               {"mean_difference", c.mean_difference},
                               {"standard_error", c.standard_error},
                               {"lower_bound_95", c.lower_bound}});
  }
  Json j = to_json(report);
  j["comparisons"] = comparisons;
  run.write_output(run.out_dir / "plan_eval.csv", to_csv(report));
  run.write_output(run.out_dir / "plan_eval_summary.csv", summary_csv(report));
  run.write_output(run.out_dir / "plan_eval.json", dump_json(j));
  std::cout << summary_csv(report);
}

void print_error(const std::string& kind, const std::string& type, const std::string& message) {
  std::cerr << Json{{"kind", kind}, {"error", type}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typed grasp planning from tabletop point clouds"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string config_path, out_dir = ".", log_level = "warn";
  app.add_option("--seed", seed, "Root seed; overrides the config file");
  app.add_option("--config", config_path, "TOML run configuration");
  app.add_option("--out-dir", out_dir, "Directory for default outputs and the manifest");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  SceneArgs scene;
  auto* gen_scene = app.add_subcommand("gen-scene", "Render a synthetic tabletop scene to PLY or CSV");
  gen_scene->add_option("-o,--out", scene.out, "Output cloud (default <out-dir>/scene.ply)");
  gen_scene->add_option("--shape", scene.shape)->check(CLI::IsMember({"box", "cylinder", "composite"}));
  gen_scene->add_option("--name", scene.name);
  gen_scene->add_option("--dims", scene.dims, "Extents x y z (cylinder: radius _ height)")->expected(3);
  gen_scene->add_option("--camera", scene.camera, "Camera position x y z")->expected(3);
  gen_scene->add_option("--x", scene.x);
  gen_scene->add_option("--y", scene.y);
  gen_scene->add_option("--yaw", scene.yaw);
  gen_scene->add_option("--density", scene.density, "Points per square meter");
  gen_scene->add_option("--noise", scene.noise, "Gaussian noise sigma (m)");

  DatasetArgs ds;
  auto* gen_dataset = app.add_subcommand("gen-dataset", "Collect labeled heuristic grasps against the oracle");
  gen_dataset->add_option("-o,--out", ds.out, "Dataset JSONL (default <out-dir>/dataset.jsonl)");
  gen_dataset->add_option("--pca-out", ds.pca_out, "Projection fitted on the kept samples (default <out-dir>/pca.json)");
  gen_dataset->add_option("--grids-dir", ds.grids_dir, "Also write one voxel grid per training scene here");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Point cloud to visual features, or fit a projection");
  extract->add_option("cloud", ex.cloud, "PLY or CSV cloud");
  extract->add_option("--pca", ex.pca, "Fitted projection");
  extract->add_option("-o,--out", ex.out, "Features JSON (default <out-dir>/features.json; pca.json with --fit-pca)");
  extract->add_option("--grid-out", ex.grid_out, "Also write the voxel grid");
  extract->add_option("--fit-pca", ex.fit_pca, "Fit a projection from the grid JSON files in this directory");
  extract->add_option("--latent-dim", ex.latent_dim);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit classifiers and priors");
  train->add_option("dataset", tr.dataset, "Dataset JSONL")->required();
  train->add_option("-o,--out", tr.out, "Model JSON (default <out-dir>/model.json)");
  train->add_option("--types", tr.types, "Grasp types to fit")->delimiter(',');
  train->add_option("--components", tr.components, "Mixture components per prior");
  train->add_option("--pca", tr.pca, "Projection to record in the model");

  PlanArgs pl;
  auto* plan = app.add_subcommand("plan", "Plan a grasp for the object in a cloud");
  plan->add_option("model", pl.model, "Model JSON")->required();
  plan->add_option("cloud", pl.cloud, "PLY or CSV cloud")->required();
  plan->add_option("--camera", pl.camera, "Camera position x y z")->expected(3);
  plan->add_option("--pca", pl.pca, "Projection (default: the one recorded in the model)");
  plan->add_option("--type", pl.type, "Plan only this grasp type");
  plan->add_option("--prior-weight", pl.prior_weight, "Weight on the prior term (default 0.5)");
  plan->add_option("-o,--out", pl.out, "Result JSON (default <out-dir>/plan.json)");
  plan->add_option("--inits-out", pl.inits_out, "Also write the heuristic grasps as JSONL");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Leave-one-out or plan-and-score evaluation");
  eval->add_option("protocol", ev.protocol)->required()->check(CLI::IsMember({"loo", "plan-eval"}));
  eval->add_option("dataset", ev.dataset, "Dataset JSONL")->required();
  eval->add_option("--pca", ev.pca, "Projection (plan-eval)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.get_name(), e.what());
    return 1;
  }

  auto logger = spdlog::stderr_logger_st("grasptype");
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::from_str(log_level));
  spdlog::set_default_logger(logger);

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  run.argv.assign(argv + 1, argv + argc);
  run.out_dir = out_dir;

  int code = 0;
  Json error;
  try {
    if (!config_path.empty()) {
      run.read_input(config_path);
      run.cfg = load_run_config(config_path);
    }
    run.cfg.apply_seed(seed.value_or(run.cfg.seed));
    if (run.command == "gen-scene") cmd_gen_scene(run, scene);
    else if (run.command == "gen-dataset") cmd_gen_dataset(run, ds);
    else if (run.command == "extract") cmd_extract(run, ex);
    else if (run.command == "train") cmd_train(run, tr);
    else if (run.command == "plan") cmd_plan(run, pl);
    else cmd_eval(run, ev);
  } catch (const Error& e) {
    code = exit_code(e.category());
    error = Json{{"kind", category_name(e.category())}, {"error", e.kind()}, {"message", e.what()}};
  } catch (const fs::filesystem_error& e) {
    code = 2;
    error = Json{{"kind", "io"}, {"error", "IoError"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    code = 1;
    error = Json{{"kind", "internal"}, {"error", "exception"}, {"message", e.what()}};
  }
  if (!error.is_null()) std::cerr << error.dump() << "\n";

  try {
    write_manifest(run, code, error);
  } catch (const std::exception& e) {
    print_error("io", "IoError", std::string("manifest: ") + e.what());
    if (code == 0) code = 2;
  }
  return code;
}
