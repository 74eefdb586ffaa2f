#include "koracle/lbfgs.hpp"

#include <cmath>

#include "koracle/errors.hpp"

namespace koracle {

namespace {
constexpr double kCurvatureFloor = 1e-12;
}

Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& grad,
                                const std::deque<CurvaturePair>& pairs) {
  std::vector<const CurvaturePair*> usable;
  usable.reserve(pairs.size());
  for (const CurvaturePair& pair : pairs) {
    if (pair.s.dot(pair.y) > kCurvatureFloor) usable.push_back(&pair);
  }
  if (usable.empty()) return -grad;

  const std::size_t m = usable.size();
  std::vector<double> rho(m), alpha(m);
  Eigen::VectorXd q = grad;
  for (std::size_t i = m; i-- > 0;) {  // newest (last) to oldest
    rho[i] = 1.0 / usable[i]->s.dot(usable[i]->y);
    alpha[i] = rho[i] * usable[i]->s.dot(q);
    q -= alpha[i] * usable[i]->y;
  }
  const CurvaturePair& newest = *usable.back();
  const double gamma = newest.s.dot(newest.y) / newest.y.dot(newest.y);
  Eigen::VectorXd r = gamma * q;
  for (std::size_t i = 0; i < m; ++i) {
    double beta = rho[i] * usable[i]->y.dot(r);
    r += (alpha[i] - beta) * usable[i]->s;
  }
  return -r;
}

LbfgsOptimizer::LbfgsOptimizer(Eigen::VectorXd x0, LbfgsOptions options)
    : x_(std::move(x0)), options_(options) {
  if (options_.history < 1) throw ConfigError("lbfgs history must be >= 1");
  if (options_.c1 <= 0.0 || options_.c1 >= 1.0) {
    throw ConfigError("c1 must be in (0, 1)");
  }
  if (options_.backtrack <= 0.0 || options_.backtrack >= 1.0) {
    throw ConfigError("backtrack factor must be in (0, 1)");
  }
  if (options_.max_trials < 1) throw ConfigError("max_trials must be >= 1");
}

void LbfgsOptimizer::prime(const Objective& objective) {
  if (primed_) return;
  f_ = objective(x_, &grad_);
  primed_ = true;
}

LbfgsStep LbfgsOptimizer::step(const Objective& objective) {
  prime(objective);

  Eigen::VectorXd direction = lbfgs_direction(grad_, pairs_);
  double slope = grad_.dot(direction);
  if (!(slope < 0.0)) {  // not a descent direction (or zero gradient)
    direction = -grad_;
    slope = -grad_.squaredNorm();
  }

  LbfgsStep result;
  result.grad_norm = grad_.norm();

  double alpha = 1.0;
  bool accepted = false;
  Eigen::VectorXd x_new;
  double f_new = 0.0;
  for (int trial = 0; trial < options_.max_trials; ++trial) {
    x_new = x_ + alpha * direction;
    f_new = objective(x_new, nullptr);
    if (std::isfinite(f_new) && f_new <= f_ + options_.c1 * alpha * slope) {
      accepted = true;
      break;
    }
    alpha *= options_.backtrack;
  }
  if (accepted) {
    result.step_size = alpha;
  } else {
    result.fallback = true;
    result.step_size = options_.fallback_step;
    x_new = x_ - options_.fallback_step * grad_;
  }

  Eigen::VectorXd g_new;
  f_new = objective(x_new, &g_new);

  CurvaturePair pair{x_new - x_, g_new - grad_};
  if (pair.s.dot(pair.y) > kCurvatureFloor) {
    pairs_.push_back(std::move(pair));
    while (int(pairs_.size()) > options_.history) pairs_.pop_front();
  }

  x_ = std::move(x_new);
  grad_ = std::move(g_new);
  f_ = f_new;
  result.loss = f_;
  return result;
}

}  // namespace koracle
