#pragma once

// L2-regularized logistic regression fitted by cyclic coordinate ascent with
// a safeguarded one-dimensional Newton step per coordinate.

#include "grasptype/core.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace grasptype {

struct LogisticFitOptions {
  double l2_strength = 1e-4;
  double gradient_tolerance = 1e-6;
  int max_sweeps = 10000;
  // Index of the unpenalized bias weight; negative means every weight is
  // penalized.
  int bias_index = -1;
};

struct LogisticFitReport {
  int sweeps = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  // Penalized log-likelihood at the start and after every sweep.
  std::vector<double> objective_trace;
};

struct LogisticFit {
  VectorXd weights;
  LogisticFitReport report;
};

namespace detail {

inline double penalty_weight(int j, const LogisticFitOptions& opts) {
  return j == opts.bias_index ? 0.0 : opts.l2_strength;
}

}  // namespace detail

// Penalized log-likelihood sum_i log p(y_i | x_i, w) - l2 * ||w_without_bias||^2.
inline double logistic_objective(const MatrixXd& inputs, const std::vector<int>& labels, const VectorXd& w,
                                 const LogisticFitOptions& opts) {
  const VectorXd z = inputs * w;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) ll += log_sigmoid(labels[i] ? z[i] : -z[i]);
  for (Eigen::Index j = 0; j < w.size(); ++j) ll -= detail::penalty_weight(static_cast<int>(j), opts) * w[j] * w[j];
  return ll;
}

inline VectorXd logistic_gradient(const MatrixXd& inputs, const std::vector<int>& labels, const VectorXd& w,
                                  const LogisticFitOptions& opts) {
  const VectorXd z = inputs * w;
  VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) residual[i] = (labels[i] ? 1.0 : 0.0) - sigmoid(z[i]);
  VectorXd g = inputs.transpose() * residual;
  for (Eigen::Index j = 0; j < w.size(); ++j) g[j] -= 2.0 * detail::penalty_weight(static_cast<int>(j), opts) * w[j];
  return g;
}

// Rows of `inputs` are samples; labels are 0/1.
inline LogisticFit fit_logistic(const MatrixXd& inputs, const std::vector<int>& labels, const LogisticFitOptions& opts,
                                const std::optional<VectorXd>& initial = std::nullopt) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw InvalidArgument("label count does not match inputs");
  if (n == 0) throw InsufficientData("no samples to fit");

  LogisticFit fit;
  fit.weights = initial ? *initial : VectorXd::Zero(d);
  if (fit.weights.size() != d) throw InvalidArgument("initial weights have the wrong length");
  VectorXd& w = fit.weights;
  VectorXd z = inputs * w;
  VectorXd sign(n);
  for (Eigen::Index i = 0; i < n; ++i) sign[i] = labels[i] ? 1.0 : -1.0;

  // Cached per-sample probabilities and data log-likelihood for the current z.
  VectorXd prob(n), candidate(n), candidate_prob(n);
  auto evaluate = [&](const VectorXd& margins, VectorXd& p) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = margins[i];
      const double e = std::exp(-std::abs(m));
      p[i] = m >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      const double sm = sign[i] * m;
      ll += std::min(sm, 0.0) - std::log1p(e);
    }
    return ll;
  };
  double data_ll = evaluate(z, prob);

  double objective = logistic_objective(inputs, labels, w, opts);
  fit.report.objective_trace.push_back(objective);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    VectorXd grad = inputs.transpose() * (sign.cwiseMax(0.0) - prob);
    for (Eigen::Index j = 0; j < d; ++j) grad[j] -= 2.0 * detail::penalty_weight(static_cast<int>(j), opts) * w[j];
    fit.report.gradient_norm = grad.norm();
    if (fit.report.gradient_norm <= opts.gradient_tolerance) {
      fit.report.converged = true;
      break;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      const double lambda = detail::penalty_weight(static_cast<int>(j), opts);
      const auto col = inputs.col(j);
      double g = -2.0 * lambda * w[j];
      double h = 2.0 * lambda;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pi = prob[i];
        const double xij = col[i];
        g += ((sign[i] > 0 ? 1.0 : 0.0) - pi) * xij;
        h += pi * (1.0 - pi) * xij * xij;
      }
      if (g == 0.0 || !(h > 0.0)) continue;

      // Newton step on the concave 1-D slice, halved until it does not
      // decrease the objective. A step that keeps the slice derivative's sign
      // cannot decrease it either, which matters once the gain falls below
      // the rounding of the summed objective.
      const double base = data_ll - lambda * w[j] * w[j];
      double step = g / h;
      for (int halving = 0; halving < 60; ++halving) {
        candidate = z + step * col;
        const double wj = w[j] + step;
        const double ll = evaluate(candidate, candidate_prob);
        double g_new = -2.0 * lambda * wj;
        for (Eigen::Index i = 0; i < n; ++i) g_new += ((sign[i] > 0 ? 1.0 : 0.0) - candidate_prob[i]) * col[i];
        if (g_new * g >= 0.0 || ll - lambda * wj * wj >= base) {
          w[j] = wj;
          z.swap(candidate);
          prob.swap(candidate_prob);
          data_ll = ll;
          break;
        }
        step *= 0.5;
      }
    }
    objective = logistic_objective(inputs, labels, w, opts);
    fit.report.objective_trace.push_back(objective);
    fit.report.sweeps = sweep + 1;
  }
  if (!fit.report.converged) {
    fit.report.gradient_norm = logistic_gradient(inputs, labels, w, opts).norm();
    fit.report.converged = fit.report.gradient_norm <= opts.gradient_tolerance;
  }
  fit.report.objective = objective;
  return fit;
}

}  // namespace grasptype
