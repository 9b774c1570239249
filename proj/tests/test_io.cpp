#include "test_util.hpp"

#include "grasptype/config.hpp"
#include "grasptype/serialization.hpp"

#include <sstream>

using namespace grasptype;
using namespace grasptype::testing;

TEST(Numerics, SigmoidAndSoftplusAreStable) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_NEAR(sigmoid(40.0), 1.0, 1e-15);
  EXPECT_GT(sigmoid(-800.0), -1.0);
  EXPECT_TRUE(std::isfinite(softplus(1000.0)));
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-12);
  EXPECT_NEAR(log_sigmoid(-1000.0), -1000.0, 1e-12);
  EXPECT_NEAR(softplus(0.3), std::log(1.0 + std::exp(0.3)), 1e-15);
}

TEST(Numerics, LogSumExpHandlesTinyTerms) {
  Eigen::Vector3d v(-1000.0, -1001.0, -1002.0);
  const double direct = -1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  EXPECT_NEAR(log_sum_exp(v), direct, 1e-12);
  Eigen::Vector2d inf(-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(log_sum_exp(inf), -std::numeric_limits<double>::infinity());
}

TEST(Seeds, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_EQ(derive_seed(7, "power"), derive_seed(7, "power"));
  EXPECT_NE(derive_seed(3, std::uint64_t{0}), derive_seed(3, std::uint64_t{1}));
}

TEST(Bounds, DefaultsAreOrderedAndClampWorks) {
  const auto b = ConfigurationBounds::allegro_defaults();
  EXPECT_NO_THROW(b.validate());
  Vector14 t = Vector14::Constant(10.0);
  EXPECT_FALSE(b.contains(t));
  EXPECT_TRUE(b.contains(b.clamp(t)));
  EXPECT_EQ(b.clamp(t), b.upper);
  ConfigurationBounds bad = b;
  bad.lower[3] = bad.upper[3] + 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Errors, CategoriesAndKinds) {
  try {
    throw SingleClassData("x");
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::data);
    EXPECT_EQ(e.kind(), "SingleClassData");
  }
  EXPECT_EQ(IoError("x").category(), ErrorCategory::io);
  EXPECT_EQ(InferenceFailed("x").category(), ErrorCategory::inference);
}

TEST(CloudIo, PlyRoundTripWithColors) {
  PointCloud c = cloud_of({{0.1, -2.5, 3e-7}, {1.0 / 3.0, 0, -0.0}});
  c.colors = {{{1, 2, 3}}, {{255, 0, 128}}};
  std::stringstream a;
  write_ply(a, c);
  const auto back = read_ply(a);
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.colors, c.colors);
  std::stringstream b;
  write_ply(b, back);
  EXPECT_EQ(a.str(), b.str());
}

TEST(CloudIo, PlyWithExtraPropertiesAndFaces) {
  std::stringstream in(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty float nx\nproperty float x\n"
      "property float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n"
      "9 1 2 3\n9 4 5 6\n");
  const auto c = read_ply(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vector3(4, 5, 6));
  EXPECT_FALSE(c.has_colors());
}

TEST(CloudIo, PlyErrors) {
  std::stringstream bad_magic("plx\n");
  EXPECT_THROW(read_ply(bad_magic), ParseError);
  std::stringstream binary("ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n");
  EXPECT_THROW(read_ply(binary), ParseError);
  std::stringstream short_body("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n");
  EXPECT_THROW(read_ply(short_body), ParseError);
  std::stringstream bad_number("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 two 3\n");
  EXPECT_THROW(read_ply(bad_number), ParseError);
}

TEST(CloudIo, CsvRoundTripAndHeader) {
  std::stringstream in("x,y,z\n1,2,3\n 4.5 , -6 , 7e-3\n\n");
  const auto c = read_csv(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Vector3(4.5, -6, 7e-3));
  std::stringstream a;
  write_csv(a, c);
  const auto back = read_csv(a);
  std::stringstream b;
  write_csv(b, back);
  EXPECT_EQ(a.str(), b.str());
  std::stringstream bad("1,2\n");
  EXPECT_THROW(read_csv(bad), ParseError);
}

TEST(CloudIo, FilesAndMissingPaths) {
  const auto dir = temp_dir("cloud_io");
  const auto c = cloud_of({{1, 2, 3}, {4, 5, 6}});
  save_cloud(dir / "c.ply", c);
  save_cloud(dir / "c.CSV", c);
  EXPECT_EQ(load_cloud(dir / "c.ply").points, c.points);
  EXPECT_EQ(load_cloud(dir / "c.CSV").points, c.points);
  EXPECT_THROW(load_cloud(dir / "missing.ply"), IoError);
  write_text_file(dir / "empty.csv", "");
  EXPECT_THROW(load_cloud(dir / "empty.csv"), InvalidArgument);
}

namespace {

GraspModel small_model() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<VectorXd> w;
  std::vector<GaussianMixture> priors;
  for (int m = 0; m < 2; ++m) {
    VectorXd wm(kConfigDim + 3 + 1);
    for (Eigen::Index i = 0; i < wm.size(); ++i) wm[i] = n(rng) / 3.0;
    w.push_back(wm);
    std::vector<GaussianComponent> comps;
    for (int k = 0; k < 2; ++k) {
      MatrixXd a(kConfigDim, kConfigDim);
      for (int r = 0; r < kConfigDim; ++r)
        for (int c = 0; c < kConfigDim; ++c) a(r, c) = n(rng) * 0.1;
      VectorXd mu(kConfigDim);
      for (int i = 0; i < kConfigDim; ++i) mu[i] = n(rng) * 0.1;
      comps.emplace_back(k == 0 ? 0.3 : 0.7, mu, MatrixXd(a * a.transpose() + 0.01 * MatrixXd::Identity(kConfigDim, kConfigDim)));
    }
    priors.emplace_back(comps);
  }
  auto m = hand_model(w, priors, 3);
  m.types[0].name = m.classifiers[0].type.name = m.priors[0].type.name = "power";
  m.types[1].name = m.classifiers[1].type.name = m.priors[1].type.name = "precision";
  return m;
}

}  // namespace

TEST(Serialization, ModelRoundTripIsByteIdentical) {
  const auto m = small_model();
  const std::string first = dump_json(to_json(m));
  const auto back = model_from_json(parse_json(first, "model"));
  EXPECT_EQ(dump_json(to_json(back)), first);
  ASSERT_EQ(back.type_count(), 2);
  EXPECT_EQ(back.types[1].name, "precision");
  EXPECT_EQ(back.classifiers[0].weights, m.classifiers[0].weights);
  EXPECT_EQ(back.priors[1].mixture.components()[1].covariance(), m.priors[1].mixture.components()[1].covariance());
  const auto j = parse_json(first, "model");
  EXPECT_EQ(j["priors"][0]["components"][0]["sigma"].size(), 196u);
  EXPECT_EQ(j["version"], 1);
}

TEST(Serialization, ModelRejectsBrokenDocuments) {
  auto j = to_json(small_model());
  auto missing = j;
  missing.erase("priors");
  EXPECT_THROW(model_from_json(missing), ParseError);
  auto wrong_len = j;
  wrong_len["classifiers"][0]["weights"].erase(0);
  EXPECT_THROW(model_from_json(wrong_len), ParseError);
  auto version = j;
  version["version"] = 99;
  EXPECT_THROW(model_from_json(version), ParseError);
  auto not_pd = j;
  for (auto& v : not_pd["priors"][0]["components"][0]["sigma"]) v = 0.0;
  EXPECT_THROW(model_from_json(not_pd), ParseError);
}

TEST(Serialization, PcaGridFeaturesRoundTrip) {
  std::mt19937_64 rng(4);
  MatrixXd x(20, kGridCells);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = (rng() % 7 == 0) ? 1.0 : 0.0;
  const auto pca = fit_pca_matrix(x, 15);
  const std::string p1 = dump_json(to_json(pca));
  const auto pca_back = pca_from_json(parse_json(p1, "pca"));
  EXPECT_EQ(dump_json(to_json(pca_back)), p1);
  EXPECT_EQ(pca_back.basis, pca.basis);

  SyntheticObjectSpec spec;
  spec.seed = 2;
  const auto obs = observe_object(generate_scene(spec));
  const std::string g1 = dump_json(to_json(obs.grid));
  const auto grid_back = grid_from_json(parse_json(g1, "grid"));
  EXPECT_EQ(grid_back.occupancy, obs.grid.occupancy);
  EXPECT_EQ(grid_back.frame.axes, obs.grid.frame.axes);
  EXPECT_EQ(dump_json(to_json(grid_back)), g1);

  const VisualFeatures f{pca.project(x.row(0).transpose()), "scene-0"};
  const std::string f1 = dump_json(to_json(f));
  EXPECT_EQ(dump_json(to_json(features_from_json(parse_json(f1, "f")))), f1);
}

TEST(Serialization, DatasetJsonLines) {
  GraspDataset ds;
  for (int i = 0; i < 3; ++i) {
    TrainingSample s;
    s.sample_id = "s" + std::to_string(i);
    s.type = i == 0 ? "power" : "precision";
    s.config.values = Vector14::Constant(0.1 * i);
    s.features = VectorXd::Constant(15, -0.5 * i);
    s.label = i % 2;
    ds.samples.push_back(s);
  }
  const std::string text = dataset_to_jsonl(ds);
  const auto back = dataset_from_jsonl(text);
  EXPECT_EQ(dataset_to_jsonl(back), text);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.samples[2].type, "precision");
  EXPECT_EQ(back.samples[1].label, 1);

  std::string corrupt = text;
  const auto second_line = corrupt.find('\n') + 1;
  corrupt.insert(second_line, "{not json\n");
  try {
    dataset_from_jsonl(corrupt, "data.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(dataset_from_jsonl(R"({"sample_id":"a","type":"p","theta":[1],"features":[],"label":1})"), ParseError);
  EXPECT_THROW(dataset_from_jsonl(R"({"sample_id":"a","type":"p","theta":[0,0,0,0,0,0,0,0,0,0,0,0,0,0],"features":[],"label":2})"),
               ParseError);
}

TEST(Serialization, HeuristicListHasNoLabel) {
  BoundingBox box;
  box.half_extents = Vector3(0.05, 0.04, 0.03);
  const auto grasps = generate_heuristic_grasps(box, Vector3(0.7, 0, 0.6));
  const auto text = heuristic_grasps_to_jsonl(grasps, VisualFeatures{VectorXd::Zero(15), "obj"});
  std::istringstream in(text);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = Json::parse(line);
    EXPECT_FALSE(j.contains("label"));
    EXPECT_EQ(j["theta"].size(), 14u);
    ++lines;
  }
  EXPECT_EQ(lines, 5);
}

TEST(Serialization, ReportsAreLongFormat) {
  PlanEvalReport report;
  PlanEvalRow row;
  row.object = "box";
  row.method = "typed";
  row.type = "power";
  row.success = 1;
  report.rows.push_back(row);
  row.method = "heuristic";
  row.success = 0;
  report.rows.push_back(row);
  const auto csv = to_csv(report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("box,0,0,typed,power,1,"), std::string::npos);
  const auto j = to_json(report);
  EXPECT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["summary"].size(), 2u);
  EXPECT_TRUE(j["rows"][0]["model_probability"].is_null());
}

TEST(Config, DefaultsWithoutAnyKeys) {
  const auto cfg = parse_run_config("");
  EXPECT_EQ(cfg.model.mixture_components, 4);
  EXPECT_EQ(cfg.inference.prior_weight, 0.5);
  EXPECT_EQ(cfg.dataset.successes_per_type, 20);
  EXPECT_EQ(cfg.dataset.failures_per_type, 40);
  EXPECT_EQ(cfg.oracle.targets.size(), 2u);
}

TEST(Config, ReadsAllSections) {
  const auto cfg = parse_run_config(R"(
seed = 9
[model]
mixture_components = 2
l2_strength = 0.01
prior_label_filter = "all"
types = ["precision"]
[inference]
prior_weight = 0.25
restarts = 2
[perception]
ransac_iterations = 50
[heuristic]
count = 7
nominal_joints = [0, 0.1, 0, 0.1, 0, 0.1, 0.5, 0.1]
[dataset]
successes_per_type = 3
failures_per_type = 4
[oracle]
beta = "inf"
[[oracle.targets]]
type = "precision"
mean = [0,0,0.1, 0,0,0, 0,0.4,0,0.4,0,0.4,0.9,0.4]
radii = [1,1,1,1,1,1,1,1,1,1,1,1,1,1]
[scene]
shape = "cylinder"
dimensions = [0.05, 0, 0.1]
[objects]
poses = 2
[[objects.train]]
name = "b"
shape = "box"
dimensions = [0.1, 0.05, 0.04]
)");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.model.mixture_components, 2);
  EXPECT_EQ(cfg.model.prior_label_filter, PriorLabelFilter::all);
  EXPECT_EQ(cfg.model.types, std::vector<std::string>{"precision"});
  EXPECT_EQ(cfg.inference.prior_weight, 0.25);
  EXPECT_EQ(cfg.segmentation.ransac_iterations, 50);
  EXPECT_EQ(cfg.heuristic.count, 7);
  EXPECT_EQ(cfg.heuristic.nominal_joints[6], 0.5);
  EXPECT_EQ(cfg.dataset.failures_per_type, 4);
  EXPECT_TRUE(std::isinf(cfg.oracle.beta));
  ASSERT_EQ(cfg.oracle.targets.size(), 1u);
  EXPECT_EQ(cfg.scene.shape, ObjectShape::cylinder);
  EXPECT_EQ(cfg.train_objects().size(), 2u);
  EXPECT_EQ(cfg.test_objects().size(), 20u);
  EXPECT_EQ(cfg.experiment().inference.prior_weight, 0.25);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config("[model]\nmixture_component = 3\n"), ParseError);
  EXPECT_THROW(parse_run_config("[model]\nl2_strength = \"big\"\n"), ParseError);
  EXPECT_THROW(parse_run_config("[inference\n"), ParseError);
  EXPECT_THROW(parse_run_config("[model]\nprior_label_filter = \"failures\"\n"), ParseError);
  EXPECT_THROW(parse_run_config("[bounds]\nlower = [1]\n"), ParseError);
  EXPECT_THROW(load_run_config("/nonexistent/config.toml"), IoError);
}

TEST(Config, SnapshotIsStable) {
  const auto cfg = parse_run_config("seed = 3\n");
  EXPECT_EQ(dump_json(to_json(cfg)), dump_json(to_json(parse_run_config("seed = 3\n"))));
  EXPECT_EQ(to_json(cfg)["inference"]["prior_weight"], 0.5);
}
