#pragma once

// Limited-memory BFGS with box constraints.
//
// Each iteration fixes the variables that sit on a bound with the gradient
// pointing outward, builds the two-loop quasi-Newton direction over the
// remaining free variables and backtracks along the projected path
// x(a) = clamp(x + a d) until the Armijo condition holds. If the
// quasi-Newton direction fails to produce descent the step falls back to
// projected steepest descent and the curvature memory is cleared.

#include "grasptype/core.hpp"

#include <deque>
#include <string>
#include <vector>

namespace grasptype {

struct BoxLbfgsOptions {
  int memory = 10;
  int max_iterations = 1000;
  // Infinity norm of the projected gradient clamp(x - g) - x.
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  int max_backtracks = 60;
};

enum class StopReason { converged, iteration_cap, line_search_failed };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::iteration_cap: return "iteration_cap";
    case StopReason::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

struct BoxLbfgsResult {
  VectorXd x;
  double value = 0.0;
  VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  double projected_gradient_norm = 0.0;
  StopReason stop = StopReason::iteration_cap;
  std::vector<double> trace;  // objective at the start and after each step

  bool converged() const { return stop == StopReason::converged; }
};

inline VectorXd project_box(const VectorXd& x, const VectorXd& lower, const VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

inline double projected_gradient_norm(const VectorXd& x, const VectorXd& g, const VectorXd& lower, const VectorXd& upper) {
  return (project_box(x - g, lower, upper) - x).lpNorm<Eigen::Infinity>();
}

// `fg(x, grad)` returns f(x) and writes the gradient into `grad`.
template <typename ObjectiveFn>
BoxLbfgsResult minimize_box_lbfgs(ObjectiveFn&& fg, const VectorXd& start, const VectorXd& lower, const VectorXd& upper,
                                  const BoxLbfgsOptions& opts = {}) {
  const Eigen::Index n = start.size();
  if (lower.size() != n || upper.size() != n) throw InvalidArgument("bound vectors have the wrong length");
  if ((lower.array() > upper.array()).any()) throw InvalidArgument("lower bound exceeds upper bound");

  BoxLbfgsResult res;
  res.x = project_box(start, lower, upper);
  res.gradient = VectorXd::Zero(n);
  res.value = fg(res.x, res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    throw NonFiniteObjective("objective or gradient is not finite at the starting point");
  }
  res.trace.push_back(res.value);

  std::deque<VectorXd> s_hist, y_hist;
  VectorXd x_new(n), g_new(n), step(n);
  VectorXd free_mask(n);

  auto direction = [&](const VectorXd& g, bool quasi_newton) {
    VectorXd q = -g.cwiseProduct(free_mask);
    if (!quasi_newton || s_hist.empty()) return q;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m), rho(m);
    std::vector<bool> use(m);
    for (std::size_t i = m; i-- > 0;) {
      const double sy = s_hist[i].cwiseProduct(free_mask).dot(y_hist[i]);
      use[i] = sy > 1e-300;
      if (!use[i]) continue;
      rho[i] = 1.0 / sy;
      alpha[i] = rho[i] * s_hist[i].cwiseProduct(free_mask).dot(q);
      q -= alpha[i] * y_hist[i].cwiseProduct(free_mask);
    }
    const VectorXd& s_last = s_hist.back();
    const VectorXd& y_last = y_hist.back();
    const double yy = y_last.squaredNorm();
    const double gamma = yy > 0.0 ? s_last.dot(y_last) / yy : 1.0;
    VectorXd r = gamma * q;
    for (std::size_t i = 0; i < m; ++i) {
      if (!use[i]) continue;
      const double beta = rho[i] * y_hist[i].cwiseProduct(free_mask).dot(r);
      r += (alpha[i] - beta) * s_hist[i].cwiseProduct(free_mask);
    }
    return VectorXd(r.cwiseProduct(free_mask));
  };

  for (int iter = 0;; ++iter) {
    res.iterations = iter;
    res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, lower, upper);
    if (res.projected_gradient_norm <= opts.gradient_tolerance) {
      res.stop = StopReason::converged;
      break;
    }
    if (iter >= opts.max_iterations) {
      res.stop = StopReason::iteration_cap;
      break;
    }
    const VectorXd& g = res.gradient;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool pinned = lower[i] == upper[i];
      const bool at_lower = res.x[i] <= lower[i] && g[i] > 0.0;
      const bool at_upper = res.x[i] >= upper[i] && g[i] < 0.0;
      free_mask[i] = (pinned || at_lower || at_upper) ? 0.0 : 1.0;
    }

    bool accepted = false;
    bool tried_steepest = false;
    for (int attempt = 0; attempt < 2 && !accepted && !tried_steepest; ++attempt) {
      bool steepest = attempt > 0 || s_hist.empty();
      VectorXd d = direction(g, !steepest);
      if (!steepest && (!d.allFinite() || g.dot(d) >= 0.0)) {
        d = direction(g, false);
        steepest = true;
      }
      tried_steepest = steepest;
      const double dnorm = d.lpNorm<Eigen::Infinity>();
      if (!(dnorm > 0.0)) break;
      // Without curvature information, start with a unit-length step.
      double alpha = steepest ? std::min(1.0, 1.0 / dnorm) : 1.0;
      for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
        x_new = project_box(res.x + alpha * d, lower, upper);
        step = x_new - res.x;
        const double slope = g.dot(step);
        if (!(slope < 0.0)) continue;
        const double f_new = fg(x_new, g_new);
        ++res.evaluations;
        if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.value + opts.armijo * slope) {
          const VectorXd y = g_new - g;
          if (step.dot(y) > 1e-10 * y.squaredNorm()) {
            s_hist.push_back(step);
            y_hist.push_back(y);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
              s_hist.pop_front();
              y_hist.pop_front();
            }
          }
          res.x = x_new;
          res.value = f_new;
          res.gradient = g_new;
          res.trace.push_back(f_new);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        s_hist.clear();
        y_hist.clear();
      }
    }
    if (!accepted) {
      res.stop = StopReason::line_search_failed;
      break;
    }
  }
  return res;
}

}  // namespace grasptype
