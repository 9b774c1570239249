#pragma once

// Gaussian mixture densities and their maximum-likelihood fit by EM with
// k-means++ seeding and an eigenvalue floor on every covariance.

#include "grasptype/core.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <vector>

namespace grasptype {

class GaussianComponent {
 public:
  GaussianComponent(double weight, VectorXd mean, MatrixXd covariance)
      : weight_(weight), mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (mean_.size() != covariance_.rows() || covariance_.rows() != covariance_.cols()) {
      throw InvalidArgument("Gaussian component mean/covariance shapes disagree");
    }
    if (!covariance_.allFinite()) throw InvalidArgument("Gaussian component covariance is not finite");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (covariance_ + covariance_.transpose()));
    set_spectrum(eig.eigenvectors(), eig.eigenvalues());
  }

  // Covariance given by its eigendecomposition V diag(lambda) V^T. Densities
  // use the spectrum as given, so eigenvalues clamped to a floor stay
  // exactly at the floor instead of picking up rounding from a refactor.
  static GaussianComponent from_spectrum(double weight, VectorXd mean, const MatrixXd& eigenvectors, const VectorXd& eigenvalues) {
    MatrixXd cov = eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    cov = 0.5 * (cov + cov.transpose());
    GaussianComponent c(weight, std::move(mean), std::move(cov), eigenvectors, eigenvalues);
    return c;
  }

  GaussianComponent with_weight(double weight) const {
    GaussianComponent c = *this;
    c.weight_ = weight;
    return c;
  }

  double weight() const { return weight_; }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& covariance() const { return covariance_; }
  int dim() const { return static_cast<int>(mean_.size()); }

  // log N(x | mean, covariance)
  double log_density(const VectorXd& x) const {
    const VectorXd y = (eigenvectors_.transpose() * (x - mean_)).cwiseProduct(inv_sqrt_);
    return log_norm_ - 0.5 * y.squaredNorm();
  }

  // covariance^{-1} (x - mean)
  VectorXd precision_times_offset(const VectorXd& x) const {
    const VectorXd y = eigenvectors_.transpose() * (x - mean_);
    return eigenvectors_ * y.cwiseProduct(inv_sqrt_.cwiseAbs2());
  }

 private:
  GaussianComponent(double weight, VectorXd mean, MatrixXd covariance, const MatrixXd& eigenvectors, const VectorXd& eigenvalues)
      : weight_(weight), mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (mean_.size() != eigenvalues.size() || eigenvectors.rows() != eigenvalues.size() || eigenvectors.cols() != eigenvalues.size()) {
      throw InvalidArgument("Gaussian component mean/spectrum shapes disagree");
    }
    set_spectrum(eigenvectors, eigenvalues);
  }

  void set_spectrum(const MatrixXd& eigenvectors, const VectorXd& eigenvalues) {
    if (!(eigenvalues.size() > 0 && eigenvalues.minCoeff() > 0.0) || !eigenvalues.allFinite()) {
      throw InvalidArgument("Gaussian component covariance is not positive definite");
    }
    eigenvectors_ = eigenvectors;
    inv_sqrt_ = eigenvalues.cwiseSqrt().cwiseInverse();
    const double log_det = eigenvalues.array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi) + log_det);
  }

  double weight_;
  VectorXd mean_;
  MatrixXd covariance_;
  MatrixXd eigenvectors_;
  VectorXd inv_sqrt_;
  double log_norm_ = 0.0;
};

class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
    for (const auto& c : components_) {
      if (c.dim() != components_.front().dim()) throw InvalidArgument("mixture components differ in dimension");
      if (!(c.weight() > 0.0 && c.weight() <= 1.0)) throw InvalidArgument("mixture weight outside (0, 1]");
    }
  }

  const std::vector<GaussianComponent>& components() const { return components_; }
  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.empty() ? 0 : components_.front().dim(); }

  VectorXd component_log_terms(const VectorXd& x) const {
    VectorXd terms(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      terms[static_cast<Eigen::Index>(k)] = std::log(components_[k].weight()) + components_[k].log_density(x);
    }
    return terms;
  }

  // log sum_k pi_k N(x | mu_k, Sigma_k)
  double log_density(const VectorXd& x) const { return log_sum_exp(component_log_terms(x)); }

  // Returns the log density and writes its gradient, which is
  // -sum_k r_k(x) Sigma_k^{-1} (x - mu_k) with responsibilities r_k.
  double log_density_with_gradient(const VectorXd& x, VectorXd& gradient) const {
    const VectorXd terms = component_log_terms(x);
    const double total = log_sum_exp(terms);
    gradient = VectorXd::Zero(x.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const double r = std::exp(terms[static_cast<Eigen::Index>(k)] - total);
      if (r == 0.0) continue;
      gradient -= r * components_[k].precision_times_offset(x);
    }
    return total;
  }

 private:
  std::vector<GaussianComponent> components_;
};

struct GmmFitOptions {
  int components = 4;
  int restarts = 5;
  double tolerance = 1e-8;
  int max_iterations = 500;
  double covariance_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFit {
  GaussianMixture mixture;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  // Total log-likelihood of the data before each M-step of the kept restart;
  // the last entry belongs to the returned parameters.
  std::vector<double> log_likelihood_trace;
};

// Eigenvalue clamp; this is also the constrained maximum-likelihood
// covariance under the floor, so EM stays monotone.
inline MatrixXd floor_covariance(const MatrixXd& cov, double floor) {
  const MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  const VectorXd lambda = eig.eigenvalues().cwiseMax(floor);
  MatrixXd out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

namespace detail {

inline std::vector<VectorXd> kmeanspp_centers(const MatrixXd& data, int k, std::mt19937_64& rng) {
  const Eigen::Index n = data.rows();
  std::vector<VectorXd> centers;
  std::uniform_int_distribution<Eigen::Index> uniform(0, n - 1);
  centers.push_back(data.row(uniform(rng)).transpose());
  VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (data.row(i).transpose() - centers[0]).squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = uniform(rng);
    }
    centers.push_back(data.row(pick).transpose());
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (data.row(i).transpose() - centers.back()).squaredNorm());
  }
  return centers;
}

inline MatrixXd sample_covariance(const MatrixXd& data) {
  const VectorXd mean = data.colwise().mean().transpose();
  const MatrixXd centered = data.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(data.rows());
}

inline GmmFit run_em(const MatrixXd& data, std::vector<GaussianComponent> init, const GmmFitOptions& opts) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  const int k_count = static_cast<int>(init.size());
  GmmFit fit;
  fit.mixture = GaussianMixture(std::move(init));
  MatrixXd log_resp(n, k_count);

  for (int iter = 0;; ++iter) {
    // E-step
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd terms = fit.mixture.component_log_terms(data.row(i).transpose());
      const double total = log_sum_exp(terms);
      ll += total;
      log_resp.row(i) = (terms.array() - total).transpose();
    }
    fit.log_likelihood_trace.push_back(ll);
    fit.log_likelihood = ll;
    fit.iterations = iter;
    if (iter > 0) {
      const double gain = ll - fit.log_likelihood_trace[fit.log_likelihood_trace.size() - 2];
      if (gain < opts.tolerance) {
        fit.converged = true;
        break;
      }
    }
    if (iter >= opts.max_iterations) break;

    // M-step
    const MatrixXd resp = log_resp.array().exp().matrix();
    std::vector<GaussianComponent> next;
    next.reserve(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) {
      const double nk = resp.col(k).sum();
      const auto& old = fit.mixture.components()[static_cast<std::size_t>(k)];
      if (!(nk > 1e-12)) {
        // A component that lost all its mass keeps its shape; its weight
        // is floored so the mixture stays well defined.
        next.push_back(old.with_weight(1e-300));
        continue;
      }
      const VectorXd mean = (data.transpose() * resp.col(k)) / nk;
      const MatrixXd centered = data.rowwise() - mean.transpose();
      const MatrixXd scatter = centered.transpose() * resp.col(k).asDiagonal() * centered / nk;
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (scatter + scatter.transpose()));
      next.push_back(GaussianComponent::from_spectrum(nk / static_cast<double>(n), mean, eig.eigenvectors(),
                                                      eig.eigenvalues().cwiseMax(opts.covariance_floor)));
    }
    double weight_sum = 0.0;
    for (const auto& c : next) weight_sum += c.weight();
    std::vector<GaussianComponent> normalized;
    normalized.reserve(next.size());
    for (const auto& c : next) normalized.push_back(c.with_weight(c.weight() / weight_sum));
    fit.mixture = GaussianMixture(std::move(normalized));
  }
  (void)d;
  return fit;
}

}  // namespace detail

// Rows of `data` are observations.
inline GmmFit fit_gmm(const MatrixXd& data, const GmmFitOptions& opts) {
  if (opts.components < 1) throw InvalidArgument("GMM needs at least one component");
  if (data.rows() < opts.components) {
    throw InsufficientData("GMM with " + std::to_string(opts.components) + " components needs at least that many samples (got " +
                           std::to_string(data.rows()) + ")");
  }
  if (!data.allFinite()) throw InvalidArgument("GMM data contains non-finite values");

  const MatrixXd global_cov = floor_covariance(detail::sample_covariance(data), opts.covariance_floor);
  std::mt19937_64 rng(opts.seed);
  GmmFit best;
  bool have_best = false;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    const auto centers = detail::kmeanspp_centers(data, opts.components, rng);
    std::vector<GaussianComponent> init;
    for (const auto& c : centers) init.emplace_back(1.0 / opts.components, c, global_cov);
    GmmFit fit = detail::run_em(data, std::move(init), opts);
    fit.best_restart = r;
    if (!have_best || fit.log_likelihood > best.log_likelihood) {
      best = std::move(fit);
      have_best = true;
    }
  }
  return best;
}

}  // namespace grasptype
