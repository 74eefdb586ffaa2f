#pragma once

#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace koracle {

// Objective evaluation; fills `grad` when non-null.
using Objective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct CurvaturePair {
  Eigen::VectorXd s;  // x_{k+1} - x_k
  Eigen::VectorXd y;  // g_{k+1} - g_k
};

struct LbfgsOptions {
  int history = 10;
  double c1 = 1e-4;          // Armijo sufficient-decrease coefficient
  double backtrack = 0.5;    // step shrink factor
  int max_trials = 20;       // line-search evaluations before falling back
  double fallback_step = 0.1;  // plain gradient step on line-search failure
};

// Two-loop recursion. Pairs with s.y <= 1e-12 are skipped; with no usable
// pair the direction is exactly -grad.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& grad,
                                const std::deque<CurvaturePair>& pairs);

struct LbfgsStep {
  double loss = 0.0;       // objective at the new iterate
  double step_size = 0.0;  // accepted alpha, or the fallback step length
  double grad_norm = 0.0;  // gradient norm at the old iterate
  bool fallback = false;   // line search failed; plain gradient step taken
};

// One iteration per step() call: direction, backtracking Armijo line
// search, curvature-pair update. Deterministic.
class LbfgsOptimizer {
 public:
  LbfgsOptimizer(Eigen::VectorXd x0, LbfgsOptions options);

  LbfgsStep step(const Objective& objective);

  const Eigen::VectorXd& x() const { return x_; }
  // Gradient/value at x(); valid once step() has run (or after prime()).
  const Eigen::VectorXd& grad() const { return grad_; }
  double value() const { return f_; }

  // Evaluates the objective at the current iterate without moving.
  void prime(const Objective& objective);

 private:
  Eigen::VectorXd x_;
  Eigen::VectorXd grad_;
  double f_ = 0.0;
  bool primed_ = false;
  LbfgsOptions options_;
  std::deque<CurvaturePair> pairs_;
};

}  // namespace koracle
