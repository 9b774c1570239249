#include "fixtures.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace grasptype;
using namespace grasptype::testing;

namespace {

// Full Newton on the penalized log-likelihood, dense Hessian. Used only as an
// oracle for the coordinate-wise fitter.
VectorXd newton_logistic(const MatrixXd& x, const std::vector<int>& y, double l2, int bias_index) {
  VectorXd w = VectorXd::Zero(x.cols());
  for (int it = 0; it < 100; ++it) {
    VectorXd g = VectorXd::Zero(x.cols());
    MatrixXd h = MatrixXd::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(w)));
      g += (y[static_cast<std::size_t>(i)] - p) * x.row(i).transpose();
      h -= p * (1.0 - p) * x.row(i).transpose() * x.row(i);
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j == bias_index) continue;
      g[j] -= 2.0 * l2 * w[j];
      h(j, j) -= 2.0 * l2;
    }
    const VectorXd step = h.ldlt().solve(g);
    w -= step;
    if (step.norm() < 1e-14) break;
  }
  return w;
}

// log N(x | mu, Sigma) from the textbook formula.
double gaussian_log_pdf(const VectorXd& x, const VectorXd& mu, const MatrixXd& sigma) {
  const double d = static_cast<double>(x.size());
  const VectorXd diff = x - mu;
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + std::log(sigma.determinant()) + diff.dot(sigma.inverse() * diff));
}

GraspDataset noisy_dataset(int n, std::uint64_t seed, const std::string& type = "noisy") {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  auto base = fixtures::planted_separable(n, type, seed, 0.0).dataset;
  for (auto& s : base.samples) s.label = coin(rng) ? 1 : 0;
  return base;
}

}  // namespace

// ----- logistic classifier ------------------------------------------------

TEST(Logistic, MatchesDenseNewtonOnNoisyData) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 80, d = 5;
  MatrixXd x(n, d + 1);
  std::vector<int> y;
  VectorXd truth(d + 1);
  truth << 1.0, -2.0, 0.5, 0.0, 1.5, -0.3;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
    x(i, d) = 1.0;
    y.push_back(u(rng) < sigmoid(x.row(i).dot(truth)) ? 1 : 0);
  }
  LogisticFitOptions opts;
  opts.l2_strength = 0.1;
  opts.bias_index = d;
  opts.gradient_tolerance = 1e-10;
  const auto fit = fit_logistic(x, y, opts);
  const VectorXd oracle = newton_logistic(x, y, 0.1, d);
  EXPECT_TRUE(fit.report.converged);
  EXPECT_LT((fit.weights - oracle).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LT(logistic_gradient(x, y, fit.weights, opts).norm(), 1e-9);
}

TEST(Logistic, ObjectiveTraceNeverDecreases) {
  const auto data = noisy_dataset(120, 5);
  MatrixXd x(static_cast<Eigen::Index>(data.size()), kConfigDim + kDefaultLatentDim + 1);
  std::vector<int> y;
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = assemble_input(data.samples[i].config, data.samples[i].features).transpose();
    y.push_back(data.samples[i].label);
  }
  LogisticFitOptions opts;
  opts.bias_index = static_cast<int>(x.cols()) - 1;
  const auto fit = fit_logistic(x, y, opts);
  const auto& trace = fit.report.objective_trace;
  ASSERT_GE(trace.size(), 2u);
  // Accepted coordinate steps can lose a few ulps when the gain is below
  // rounding; anything larger is a real decrease.
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-9 * std::abs(trace[i - 1])) << i;
  EXPECT_GT(trace.back(), trace.front());
}

TEST(Logistic, BiasIsNotPenalized) {
  // All-positive labels except one: the bias should carry the imbalance
  // and be larger than a penalized weight would allow.
  MatrixXd x = MatrixXd::Ones(10, 1);
  std::vector<int> y(10, 1);
  y[0] = 0;
  LogisticFitOptions opts;
  opts.l2_strength = 10.0;
  opts.bias_index = 0;
  opts.gradient_tolerance = 1e-12;
  const auto fit = fit_logistic(x, y, opts);
  EXPECT_NEAR(fit.weights[0], std::log(9.0), 1e-9);
}

TEST(Logistic, WarmStartReachesSameOptimum) {
  const auto data = noisy_dataset(100, 9);
  ModelConfig cfg;
  cfg.classifier_gradient_tolerance = 1e-10;
  const GraspType type{0, "noisy"};
  const auto cold = fit_classifier(data, type, cfg);
  VectorXd start = cold.classifier.weights;
  start.array() += 0.3;
  const auto warm = fit_classifier(data, type, cfg, start);
  EXPECT_LT((cold.classifier.weights - warm.classifier.weights).lpNorm<Eigen::Infinity>(), 1e-7);
}

TEST(Logistic, SingleClassIsRejected) {
  auto data = fixtures::planted_separable(20, "one", 1).dataset;
  for (auto& s : data.samples) s.label = 1;
  EXPECT_THROW(fit_classifier(data, GraspType{0, "one"}, ModelConfig{}), SingleClassData);
  ModelConfig cfg;
  cfg.mixture_components = 1;
  try {
    fit_model(data, cfg);
    FAIL() << "expected SingleClassData";
  } catch (const SingleClassData& e) {
    EXPECT_NE(std::string(e.what()).find("'one'"), std::string::npos);
  }
}

TEST(Logistic, PlantedDataIsFitPerfectly) {
  const auto planted = fixtures::planted_separable(200, "planted", 42);
  ModelConfig cfg;
  const auto fit = fit_classifier(planted.dataset, GraspType{0, "planted"}, cfg);
  EXPECT_TRUE(fit.report.converged);
  int correct = 0;
  for (const auto& s : planted.dataset.samples) {
    const double p = sigmoid(fit.classifier.weights.dot(assemble_input(s.config, s.features)));
    correct += (p >= 0.5 ? 1 : 0) == s.label;
  }
  EXPECT_GE(correct, 198);
  // Learned direction should line up with the planted one.
  const VectorXd w = fit.classifier.weights.head(kConfigDim + kDefaultLatentDim);
  EXPECT_GT(w.normalized().dot(planted.normal), 0.8);
}

// ----- Gaussian mixture -----------------------------------------------------

TEST(Gmm, StandardNormalLogDensityAtMean) {
  const auto g = single_gaussian(VectorXd::Zero(14), MatrixXd::Identity(14, 14));
  EXPECT_NEAR(g.log_density(VectorXd::Zero(14)), -7.0 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(g.log_density(VectorXd::Zero(14)), -12.8651, 1e-4);
}

TEST(Gmm, MixtureDensityMatchesDirectSum) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<GaussianComponent> comps;
  std::vector<double> weights{0.2, 0.5, 0.3};
  for (double w : weights) {
    VectorXd mu(4);
    MatrixXd a(4, 4);
    for (int i = 0; i < 4; ++i) {
      mu[i] = gauss(rng);
      for (int j = 0; j < 4; ++j) a(i, j) = gauss(rng);
    }
    comps.emplace_back(w, mu, a * a.transpose() + 0.1 * MatrixXd::Identity(4, 4));
  }
  const GaussianMixture mix(comps);
  for (int t = 0; t < 20; ++t) {
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = 2.0 * gauss(rng);
    double direct = 0.0;
    for (const auto& c : comps) direct += c.weight() * std::exp(gaussian_log_pdf(x, c.mean(), c.covariance()));
    EXPECT_NEAR(mix.log_density(x), std::log(direct), 1e-10);
  }
}

TEST(Gmm, DensityPeaksAtMeanOfSingleComponent) {
  MatrixXd cov(2, 2);
  cov << 2.0, 0.3, 0.3, 0.5;
  const VectorXd mu = (VectorXd(2) << 1.0, -1.0).finished();
  const auto g = single_gaussian(mu, cov);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const VectorXd v = (VectorXd(2) << gauss(rng), gauss(rng)).finished();
    EXPECT_GE(g.log_density(mu), g.log_density(mu + v));
  }
}

TEST(Gmm, SingleComponentIsClosedFormMle) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd data = fixtures::random_cluster_data(rng, 50, 3);
    GmmFitOptions opts;
    opts.components = 1;
    opts.seed = static_cast<std::uint64_t>(rep);
    const auto fit = fit_gmm(data, opts);
    const VectorXd mean = data.colwise().mean().transpose();
    MatrixXd cov = MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < data.rows(); ++i) cov += (data.row(i).transpose() - mean) * (data.row(i) - mean.transpose());
    cov /= static_cast<double>(data.rows());
    const auto& c = fit.mixture.components().front();
    EXPECT_NEAR(c.weight(), 1.0, 1e-12);
    EXPECT_LT((c.mean() - mean).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LT((c.covariance() - cov).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(Gmm, EmLikelihoodNeverDecreases) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const MatrixXd data = fixtures::random_cluster_data(rng, 60, 1 + rep % 4);
    for (int k : {1, 2, 4}) {
      GmmFitOptions opts;
      opts.components = k;
      opts.restarts = 1;
      opts.seed = static_cast<std::uint64_t>(rep * 10 + k);
      const auto fit = fit_gmm(data, opts);
      const auto& tr = fit.log_likelihood_trace;
      for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GE(tr[i], tr[i - 1] - 1e-10) << "rep " << rep << " K " << k;
    }
  }
}

TEST(Gmm, RecoversTwoSeparatedClusters) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 0.1);
  MatrixXd data(400, 2);
  for (int i = 0; i < 400; ++i) {
    const double cx = i < 100 ? -2.0 : 3.0;
    data(i, 0) = cx + gauss(rng);
    data(i, 1) = gauss(rng);
  }
  GmmFitOptions opts;
  opts.components = 2;
  opts.seed = 1;
  const auto fit = fit_gmm(data, opts);
  auto comps = fit.mixture.components();
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.mean()[0] < b.mean()[0]; });
  EXPECT_NEAR(comps[0].weight(), 0.25, 1e-6);
  EXPECT_NEAR(comps[1].weight(), 0.75, 1e-6);
  EXPECT_NEAR(comps[0].mean()[0], -2.0, 0.05);
  EXPECT_NEAR(comps[1].mean()[0], 3.0, 0.05);
  EXPECT_NEAR(comps[0].covariance()(0, 0), 0.01, 0.005);
}

TEST(Gmm, WeightsSumToOneAndCovariancesRespectFloor) {
  std::mt19937_64 rng(31);
  const MatrixXd data = fixtures::random_cluster_data(rng, 40, 14);
  GmmFitOptions opts;
  opts.components = 4;
  opts.covariance_floor = 1e-3;
  const auto fit = fit_gmm(data, opts);
  double total = 0.0;
  for (const auto& c : fit.mixture.components()) {
    total += c.weight();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(c.covariance());
    EXPECT_GE(eig.eigenvalues().minCoeff(), 1e-3 - 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Gmm, TooFewSamplesForComponents) {
  MatrixXd data = MatrixXd::Random(3, 14);
  GmmFitOptions opts;
  opts.components = 4;
  EXPECT_THROW(fit_gmm(data, opts), InsufficientData);
}

TEST(Gmm, SameSeedSameFit) {
  std::mt19937_64 rng(8);
  const MatrixXd data = fixtures::random_cluster_data(rng, 80, 3);
  GmmFitOptions opts;
  opts.seed = 99;
  const auto a = fit_gmm(data, opts);
  const auto b = fit_gmm(data, opts);
  ASSERT_EQ(a.mixture.size(), b.mixture.size());
  for (std::size_t k = 0; k < a.mixture.components().size(); ++k) {
    EXPECT_EQ(a.mixture.components()[k].mean(), b.mixture.components()[k].mean());
    EXPECT_EQ(a.mixture.components()[k].covariance(), b.mixture.components()[k].covariance());
  }
}

// ----- grasp model ----------------------------------------------------------

TEST(Model, AssembleInputLayout) {
  Vector14 theta;
  for (int i = 0; i < 14; ++i) theta[i] = i;
  VectorXd f(3);
  f << 100, 101, 102;
  const VectorXd x = assemble_input(GraspConfiguration(theta), f);
  ASSERT_EQ(x.size(), 18);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[13], 13.0);
  EXPECT_EQ(x[14], 100.0);
  EXPECT_EQ(x[16], 102.0);
  EXPECT_EQ(x[17], 1.0);
}

TEST(Model, PredictSuccessExamples) {
  const VectorXd x = assemble_input(GraspConfiguration(Vector14::Zero()), VectorXd::Zero(2));
  const auto prior = single_gaussian(VectorXd::Zero(14), MatrixXd::Identity(14, 14));
  VectorXd w0 = VectorXd::Zero(17), w1 = VectorXd::Zero(17), w2 = VectorXd::Zero(17);
  w1[16] = std::log(3.0);
  w2[16] = 40.0;
  const auto m = hand_model({w0, w1, w2}, {prior, prior, prior}, 2);
  EXPECT_DOUBLE_EQ(predict_success(m, 0, x), 0.5);
  EXPECT_NEAR(predict_success(m, 1, x), 0.75, 1e-15);
  EXPECT_NEAR(predict_success(m, 2, x), 1.0, 1e-15);
  EXPECT_THROW(predict_success(m, 3, x), InvalidArgument);
  EXPECT_THROW(predict_success(m, 0, VectorXd::Zero(5)), InvalidArgument);
}

TEST(Model, TypesAreOrderedByName) {
  auto data = fixtures::planted_two_types(40, 1);
  for (auto& s : data.samples) s.type = s.type == "alpha" ? "zeta" : "beta";
  ModelConfig cfg;
  cfg.mixture_components = 2;
  const auto fit = fit_model(data, cfg);
  ASSERT_EQ(fit.model.type_count(), 2);
  EXPECT_EQ(fit.model.types[0].name, "beta");
  EXPECT_EQ(fit.model.types[1].name, "zeta");
  EXPECT_NEAR(fit.model.type_prior.sum(), 1.0, 1e-15);
  fit.model.validate();
}

TEST(Model, MultiTypeFitEqualsIndependentFits) {
  const auto data = fixtures::planted_two_types(60, 4);
  ModelConfig cfg;
  cfg.mixture_components = 2;
  const auto joint = fit_model(data, cfg);
  for (const auto& type : joint.model.types) {
    const auto single = fit_model(data.filter_type(type.name), cfg);
    const auto m = static_cast<std::size_t>(type.index);
    EXPECT_LT((joint.model.classifiers[m].weights - single.model.classifiers[0].weights).lpNorm<Eigen::Infinity>(), 1e-9);
    const auto& a = joint.model.priors[m].mixture.components();
    const auto& b = single.model.priors[0].mixture.components();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k].weight(), b[k].weight(), 1e-9);
      EXPECT_LT((a[k].mean() - b[k].mean()).lpNorm<Eigen::Infinity>(), 1e-9);
      EXPECT_LT((a[k].covariance() - b[k].covariance()).lpNorm<Eigen::Infinity>(), 1e-9);
    }
  }
}

TEST(Model, SampleOrderDoesNotMatter) {
  auto data = fixtures::planted_two_types(50, 6);
  ModelConfig cfg;
  cfg.mixture_components = 2;
  const auto a = fit_model(data, cfg);
  std::mt19937_64 rng(1);
  std::shuffle(data.samples.begin(), data.samples.end(), rng);
  const auto b = fit_model(data, cfg);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(a.model.classifiers[m].weights, b.model.classifiers[m].weights);
    EXPECT_EQ(a.model.priors[m].mixture.components()[0].mean(), b.model.priors[m].mixture.components()[0].mean());
  }
}

TEST(Model, SingleTypeIsTheTypeFreeModel) {
  const auto data = fixtures::planted_two_types(50, 7);
  ModelConfig cfg;
  cfg.mixture_components = 2;
  const auto merged = data.relabeled("type-free");
  const auto fit = fit_model(merged, cfg);
  ASSERT_EQ(fit.model.type_count(), 1);
  const GraspType t{0, "type-free"};
  const auto cls = fit_classifier(merged, t, cfg);
  const auto pri = fit_prior(merged, t, cfg);
  EXPECT_EQ(fit.model.classifiers[0].weights, cls.classifier.weights);
  EXPECT_EQ(fit.model.priors[0].mixture.components()[0].covariance(), pri.prior.mixture.components()[0].covariance());

  // Planning with the one-type model is planning with that type.
  const VisualFeatures features{data.samples[0].features, "x"};
  InferenceConfig icfg;
  const GraspConfiguration init(data.samples[0].config.values);
  const auto planned = plan_grasp(fit.model, features, init, icfg);
  const auto direct = minimize_for_type(fit.model, 0, features, init, icfg);
  EXPECT_EQ(planned.config, direct.config);
  EXPECT_EQ(planned.objective_value, direct.objective_value);
}

TEST(Model, PriorUsesOnlySuccessesByDefault) {
  auto data = fixtures::planted_separable(60, "p", 3).dataset;
  ModelConfig cfg;
  cfg.mixture_components = 1;
  const auto succ = fit_prior(data, GraspType{0, "p"}, cfg);
  VectorXd mean = VectorXd::Zero(14);
  int n = 0;
  for (const auto& s : data.samples)
    if (s.label) mean += s.config.values, ++n;
  mean /= n;
  EXPECT_LT((succ.prior.mixture.components()[0].mean() - mean).lpNorm<Eigen::Infinity>(), 1e-12);
  cfg.prior_label_filter = PriorLabelFilter::all;
  const auto all = fit_prior(data, GraspType{0, "p"}, cfg);
  EXPECT_GT((all.prior.mixture.components()[0].mean() - mean).norm(), 1e-6);
}

TEST(Model, MissingTypeOrTooFewSuccesses) {
  const auto data = fixtures::planted_separable(10, "p", 3).dataset;
  ModelConfig cfg;
  cfg.types = {"q"};
  EXPECT_THROW(fit_model(data, cfg), InsufficientData);
  cfg.types = {};
  cfg.mixture_components = 20;
  EXPECT_THROW(fit_model(data, cfg), InsufficientData);
}

TEST(Loo, SeparableDataScoresPerfectly) {
  const auto planted = fixtures::planted_separable(200, "planted", 42);
  ModelConfig cfg;
  const auto report = evaluate_loo(planted.dataset, cfg);
  EXPECT_EQ(report.predictions.size(), 200u);
  EXPECT_GE(report.overall.accuracy(), 0.95);
  EXPECT_DOUBLE_EQ(report.overall.accuracy(), 1.0);
  EXPECT_DOUBLE_EQ(report.overall.f1(), 1.0);
}

TEST(Loo, RandomLabelsAreNearChance) {
  const auto data = noisy_dataset(150, 13);
  const auto report = evaluate_loo(data, ModelConfig{});
  std::size_t positives = 0;
  for (const auto& s : data.samples) positives += static_cast<std::size_t>(s.label);
  const double majority = std::max(positives, data.size() - positives) / static_cast<double>(data.size());
  EXPECT_LT(std::abs(report.overall.accuracy() - majority), 0.15);
}

TEST(Loo, PerTypeGroupsPartitionPredictions) {
  const auto data = fixtures::planted_two_types(40, 2);
  const auto report = evaluate_loo(data, ModelConfig{});
  ASSERT_EQ(report.per_type.size(), 2u);
  EXPECT_EQ(report.per_type[0].group, "alpha");
  EXPECT_EQ(report.per_type[0].count + report.per_type[1].count, report.overall.count);
  // The held-out prediction never sees its own sample: it differs from the
  // full-data fit on at least one sample.
  const auto full = fit_model(data, ModelConfig{});
  bool any_diff = false;
  for (const auto& p : report.predictions) {
    const auto& s = data.samples[p.sample_index];
    const double q = predict_success(full.model, full.model.type_index(s.type), assemble_input(s.config, s.features));
    any_diff |= std::abs(q - p.probability) > 1e-6;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Metrics, F1AndAccuracy) {
  BinaryMetrics m;
  m.add(1, 1);
  m.add(1, 0);
  m.add(0, 1);
  m.add(0, 0);
  m.add(1, 1);
  EXPECT_DOUBLE_EQ(m.accuracy(), 0.6);
  EXPECT_DOUBLE_EQ(m.f1(), 4.0 / 6.0);
  BinaryMetrics none;
  none.add(0, 0);
  EXPECT_DOUBLE_EQ(none.f1(), 0.0);
  EXPECT_DOUBLE_EQ(BinaryMetrics{}.accuracy(), 0.0);
}
