#include "koracle/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace koracle {
namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Deterministic uniform double in [0, 1) from raw generator bits; avoids
// the implementation-defined std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
  return double(rng() >> 11) * (1.0 / 9007199254740992.0);
}

void check_layer_dims(const LstmParams& params) {
  const int H = params.hidden_dim;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    const int d_in = l == 0 ? params.input_dim : H;
    if (layer.w_x.rows() != 4 * H || layer.w_x.cols() != d_in ||
        layer.w_h.rows() != 4 * H || layer.w_h.cols() != H ||
        layer.b.size() != 4 * H) {
      throw DimensionMismatch("layer " + std::to_string(l) +
                              " parameter shapes inconsistent");
    }
  }
  if (params.task_w.rows() != params.vocab_size + 1 ||
      params.task_w.cols() != H ||
      params.task_b.size() != params.vocab_size + 1 ||
      params.interval_w.cols() != H) {
    throw DimensionMismatch("head parameter shapes inconsistent");
  }
}

std::string format_value(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::ptrdiff_t LstmParams::parameter_count() const {
  std::ptrdiff_t count = 0;
  for (const LayerParams& layer : layers) {
    count += layer.w_x.size() + layer.w_h.size() + layer.b.size();
  }
  count += task_w.size() + task_b.size() + interval_w.size() + 1;
  return count;
}

LstmParams init_params(int input_dim, int hidden_dim, int num_layers,
                       int vocab_size, uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || num_layers < 1 || vocab_size < 0) {
    throw DimensionMismatch("init_params dimensions must be positive");
  }
  LstmParams params;
  params.input_dim = input_dim;
  params.hidden_dim = hidden_dim;
  params.vocab_size = vocab_size;

  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(double(hidden_dim));
  // Draw order is row-major per block, fixed so a seed pins the model.
  auto fill = [&](auto& block) {
    for (std::ptrdiff_t r = 0; r < block.rows(); ++r) {
      for (std::ptrdiff_t c = 0; c < block.cols(); ++c) {
        block(r, c) = (2.0 * unit_uniform(rng) - 1.0) * scale;
      }
    }
  };

  const int H = hidden_dim;
  for (int l = 0; l < num_layers; ++l) {
    const int d_in = l == 0 ? input_dim : H;
    LayerParams layer;
    layer.w_x.resize(4 * H, d_in);
    fill(layer.w_x);
    layer.w_h.resize(4 * H, H);
    fill(layer.w_h);
    layer.b = Eigen::VectorXd::Zero(4 * H);
    layer.b.segment(H, H).setOnes();  // forget gate bias
    params.layers.push_back(std::move(layer));
  }

  params.task_w.resize(vocab_size + 1, H);
  fill(params.task_w);
  params.task_b = Eigen::VectorXd::Zero(vocab_size + 1);
  params.interval_w.resize(H);
  fill(params.interval_w);
  params.interval_b = 0.0;
  return params;
}

LstmParams zeros_like(const LstmParams& params) {
  LstmParams z = params;
  for (LayerParams& layer : z.layers) {
    layer.w_x.setZero();
    layer.w_h.setZero();
    layer.b.setZero();
  }
  z.task_w.setZero();
  z.task_b.setZero();
  z.interval_w.setZero();
  z.interval_b = 0.0;
  return z;
}

Eigen::VectorXd pack_params(const LstmParams& params) {
  Eigen::VectorXd theta(params.parameter_count());
  std::ptrdiff_t at = 0;
  auto put = [&](const auto& m) {
    for (std::ptrdiff_t r = 0; r < m.rows(); ++r) {
      for (std::ptrdiff_t c = 0; c < m.cols(); ++c) theta(at++) = m(r, c);
    }
  };
  for (const LayerParams& layer : params.layers) {
    put(layer.w_x);
    put(layer.w_h);
    put(layer.b);
  }
  put(params.task_w);
  put(params.task_b);
  put(params.interval_w);
  theta(at++) = params.interval_b;
  return theta;
}

void unpack_params(const Eigen::VectorXd& theta, LstmParams& params) {
  if (theta.size() != params.parameter_count()) {
    throw DimensionMismatch("flattened parameter size " +
                            std::to_string(theta.size()) + " != " +
                            std::to_string(params.parameter_count()));
  }
  std::ptrdiff_t at = 0;
  auto take = [&](auto& m) {
    for (std::ptrdiff_t r = 0; r < m.rows(); ++r) {
      for (std::ptrdiff_t c = 0; c < m.cols(); ++c) m(r, c) = theta(at++);
    }
  };
  for (LayerParams& layer : params.layers) {
    take(layer.w_x);
    take(layer.w_h);
    take(layer.b);
  }
  take(params.task_w);
  take(params.task_b);
  take(params.interval_w);
  params.interval_b = theta(at++);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> cell_forward(
    const LayerParams& layer, const Eigen::VectorXd& x,
    const Eigen::VectorXd& h, const Eigen::VectorXd& c) {
  const std::ptrdiff_t H = layer.w_h.cols();
  if (x.size() != layer.w_x.cols() || h.size() != H || c.size() != H) {
    throw DimensionMismatch("cell_forward input sizes do not match layer");
  }
  Eigen::VectorXd pre = layer.w_x * x + layer.w_h * h + layer.b;
  Eigen::VectorXd i = pre.segment(0, H).unaryExpr([](double v) {
    return logistic(v);
  });
  Eigen::VectorXd f = pre.segment(H, H).unaryExpr([](double v) {
    return logistic(v);
  });
  Eigen::VectorXd g = pre.segment(2 * H, H).array().tanh();
  Eigen::VectorXd o = pre.segment(3 * H, H).unaryExpr([](double v) {
    return logistic(v);
  });
  Eigen::VectorXd c_next = f.cwiseProduct(c) + i.cwiseProduct(g);
  Eigen::VectorXd h_next = o.cwiseProduct(c_next.array().tanh().matrix());
  return {std::move(h_next), std::move(c_next)};
}

LstmStepper::LstmStepper(const LstmParams& params) : params_(params) {
  check_layer_dims(params);
  h_.assign(params.layers.size(),
            Eigen::VectorXd::Zero(params.hidden_dim));
  c_.assign(params.layers.size(),
            Eigen::VectorXd::Zero(params.hidden_dim));
}

LstmStepper::Output LstmStepper::step(const Eigen::VectorXd& x,
                                      std::vector<StepCache>* cache_row) {
  if (x.size() != params_.input_dim) {
    throw DimensionMismatch("input size " + std::to_string(x.size()) +
                            " != input_dim " +
                            std::to_string(params_.input_dim));
  }
  const std::ptrdiff_t H = params_.hidden_dim;
  Eigen::VectorXd layer_in = x;
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const LayerParams& layer = params_.layers[l];
    Eigen::VectorXd pre = layer.w_x * layer_in + layer.w_h * h_[l] + layer.b;
    Eigen::VectorXd i = pre.segment(0, H).unaryExpr([](double v) {
      return logistic(v);
    });
    Eigen::VectorXd f = pre.segment(H, H).unaryExpr([](double v) {
      return logistic(v);
    });
    Eigen::VectorXd g = pre.segment(2 * H, H).array().tanh();
    Eigen::VectorXd o = pre.segment(3 * H, H).unaryExpr([](double v) {
      return logistic(v);
    });
    Eigen::VectorXd c_next = f.cwiseProduct(c_[l]) + i.cwiseProduct(g);
    Eigen::VectorXd h_next = o.cwiseProduct(c_next.array().tanh().matrix());
    if (!c_next.allFinite() || !h_next.allFinite()) {
      throw NonFiniteActivation("non-finite state in layer " +
                                std::to_string(l));
    }
    if (cache_row) {
      StepCache sc;
      sc.x = layer_in;
      sc.i = i;
      sc.f = f;
      sc.g = g;
      sc.o = o;
      sc.c = c_next;
      sc.h = h_next;
      cache_row->push_back(std::move(sc));
    }
    c_[l] = std::move(c_next);
    h_[l] = h_next;
    layer_in = std::move(h_next);
  }

  Output out;
  out.task_logits = params_.task_w * layer_in + params_.task_b;
  out.interval = params_.interval_w.dot(layer_in) + params_.interval_b;
  if (!out.task_logits.allFinite() || !std::isfinite(out.interval)) {
    throw NonFiniteActivation("non-finite head output");
  }
  return out;
}

ForwardResult forward_sequence(const LstmParams& params,
                               const Eigen::MatrixXd& inputs) {
  if (inputs.rows() < 1) {
    throw DimensionMismatch("forward_sequence needs at least one step");
  }
  if (inputs.cols() != params.input_dim) {
    throw DimensionMismatch("input dim " + std::to_string(inputs.cols()) +
                            " != model input_dim " +
                            std::to_string(params.input_dim));
  }
  const std::ptrdiff_t T = inputs.rows();
  ForwardResult result;
  result.task_logits.resize(T, params.vocab_size + 1);
  result.interval.resize(T);
  result.cache.steps.resize(std::size_t(T));

  LstmStepper stepper(params);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    auto& row = result.cache.steps[std::size_t(t)];
    row.reserve(params.layers.size());
    LstmStepper::Output out = stepper.step(inputs.row(t).transpose(), &row);
    result.task_logits.row(t) = out.task_logits.transpose();
    result.interval(t) = out.interval;
  }
  return result;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd exps = shifted.array().exp();
  return exps / exps.sum();
}

double loss_joint(const Eigen::MatrixXd& task_logits,
                  const Eigen::VectorXd& interval_preds,
                  const StepTargets& targets, double lambda_task) {
  const std::ptrdiff_t T = interval_preds.size();
  if (task_logits.rows() != T || std::ptrdiff_t(targets.task.size()) != T ||
      targets.interval.size() != T) {
    throw DimensionMismatch("loss_joint lengths do not match");
  }
  if (lambda_task < 0.0) throw ConfigError("lambda_task must be >= 0");
  double total = 0.0;
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    double err = interval_preds(t) - targets.interval(t);
    total += err * err;
    if (lambda_task > 0.0) {
      int cls = targets.task[std::size_t(t)];
      if (cls < 0 || cls >= task_logits.cols()) {
        throw IndexOutOfRange("target class " + std::to_string(cls) +
                              " outside logits width " +
                              std::to_string(task_logits.cols()));
      }
      Eigen::VectorXd row = task_logits.row(t).transpose();
      double max = row.maxCoeff();
      double lse = max + std::log((row.array() - max).exp().sum());
      total += lambda_task * (lse - row(cls));
    }
  }
  return total / double(T);
}

LstmParams backward(const LstmParams& params, const ForwardCache& cache,
                    const StepTargets& targets, double lambda_task) {
  const std::ptrdiff_t T = std::ptrdiff_t(cache.length());
  if (T == 0) throw DimensionMismatch("backward on empty cache");
  if (std::ptrdiff_t(targets.task.size()) != T || targets.interval.size() != T) {
    throw DimensionMismatch("backward target lengths do not match cache");
  }
  const int H = params.hidden_dim;
  const std::size_t num_layers = params.layers.size();

  LstmParams grads = zeros_like(params);
  std::vector<Eigen::VectorXd> dh(num_layers, Eigen::VectorXd::Zero(H));
  std::vector<Eigen::VectorXd> dc(num_layers, Eigen::VectorXd::Zero(H));

  for (std::ptrdiff_t t = T - 1; t >= 0; --t) {
    const auto& row = cache.steps[std::size_t(t)];
    const Eigen::VectorXd& h_top = row.back().h;

    // Head gradients at this step.
    double interval_pred = params.interval_w.dot(h_top) + params.interval_b;
    double dinterval = 2.0 * (interval_pred - targets.interval(t)) / double(T);
    Eigen::VectorXd down =
        params.interval_w.transpose() * dinterval;  // into top-layer h
    grads.interval_w += dinterval * h_top.transpose();
    grads.interval_b += dinterval;
    if (lambda_task > 0.0) {
      Eigen::VectorXd logits = params.task_w * h_top + params.task_b;
      Eigen::VectorXd dlogits = softmax(logits);
      dlogits(targets.task[std::size_t(t)]) -= 1.0;
      dlogits *= lambda_task / double(T);
      grads.task_w += dlogits * h_top.transpose();
      grads.task_b += dlogits;
      down += params.task_w.transpose() * dlogits;
    }

    for (std::size_t l = num_layers; l-- > 0;) {
      const StepCache& sc = row[l];
      const LayerParams& layer = params.layers[l];
      LayerParams& grad = grads.layers[l];

      Eigen::VectorXd h_prev =
          t > 0 ? cache.steps[std::size_t(t) - 1][l].h
                : Eigen::VectorXd::Zero(H);
      Eigen::VectorXd c_prev =
          t > 0 ? cache.steps[std::size_t(t) - 1][l].c
                : Eigen::VectorXd::Zero(H);

      Eigen::VectorXd dh_total = dh[l] + down;
      Eigen::ArrayXd tc = sc.c.array().tanh();
      Eigen::ArrayXd dc_total =
          dc[l].array() + dh_total.array() * sc.o.array() * (1.0 - tc * tc);

      Eigen::VectorXd dpre(4 * H);
      // i, f, g, o slices; logistic' = a(1-a), tanh' = 1-a^2.
      dpre.segment(0, H) = (dc_total * sc.g.array() * sc.i.array() *
                            (1.0 - sc.i.array()))
                               .matrix();
      dpre.segment(H, H) = (dc_total * c_prev.array() * sc.f.array() *
                            (1.0 - sc.f.array()))
                               .matrix();
      dpre.segment(2 * H, H) =
          (dc_total * sc.i.array() * (1.0 - sc.g.array() * sc.g.array()))
              .matrix();
      dpre.segment(3 * H, H) = (dh_total.array() * tc * sc.o.array() *
                                (1.0 - sc.o.array()))
                                   .matrix();

      grad.w_x += dpre * sc.x.transpose();
      grad.w_h += dpre * h_prev.transpose();
      grad.b += dpre;

      down = layer.w_x.transpose() * dpre;  // into the layer below
      dh[l] = layer.w_h.transpose() * dpre;
      dc[l] = (dc_total * sc.f.array()).matrix();
    }
  }
  return grads;
}

double grad_check(const LstmParams& params, const Eigen::MatrixXd& inputs,
                  const StepTargets& targets, double lambda_task,
                  double epsilon, uint64_t subsample_seed) {
  if (epsilon <= 0.0 || epsilon > 1e-2) {
    throw ConfigError("epsilon must be in (0, 1e-2]");
  }
  ForwardResult fwd = forward_sequence(params, inputs);
  LstmParams analytic = backward(params, fwd.cache, targets, lambda_task);
  Eigen::VectorXd analytic_flat = pack_params(analytic);
  Eigen::VectorXd theta = pack_params(params);

  std::vector<std::ptrdiff_t> indices(std::size_t(theta.size()));
  std::iota(indices.begin(), indices.end(), 0);
  constexpr std::ptrdiff_t kExhaustiveLimit = 10000;
  if (theta.size() > kExhaustiveLimit) {
    std::mt19937_64 rng(subsample_seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(1024);
  }

  LstmParams probe = params;
  auto loss_at = [&](const Eigen::VectorXd& t) {
    unpack_params(t, probe);
    ForwardResult r = forward_sequence(probe, inputs);
    return loss_joint(r.task_logits, r.interval, targets, lambda_task);
  };

  // The two probe losses each round to double, so the difference carries
  // ~ulp(|loss|) of noise and the quotient ~|loss|*eps_mach/epsilon. A
  // gradient whose magnitude sits within 1e5 of that floor cannot be
  // resolved to better than 1e-5 relative by central differences at this
  // epsilon; such parameters are excluded from the max.
  const double base = loss_at(theta);
  const double measurable = std::abs(base) *
                            std::numeric_limits<double>::epsilon() / epsilon *
                            1e5;

  double max_rel = 0.0;
  for (std::ptrdiff_t idx : indices) {
    const double saved = theta(idx);
    theta(idx) = saved + epsilon;
    double up = loss_at(theta);
    theta(idx) = saved - epsilon;
    double down = loss_at(theta);
    theta(idx) = saved;
    double numeric = (up - down) / (2.0 * epsilon);
    if (std::abs(analytic_flat(idx)) + std::abs(numeric) < measurable) {
      continue;
    }
    double rel = std::abs(analytic_flat(idx) - numeric) /
                 (std::abs(analytic_flat(idx)) + std::abs(numeric) + 1e-12);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

std::string write_checkpoint(const TrainedModel& model) {
  const LstmParams& p = model.params;
  std::string out = "KORACLE-CKPT v1\n";
  out += std::to_string(p.input_dim) + " " + std::to_string(p.hidden_dim) +
         " " + std::to_string(p.num_layers()) + " " +
         std::to_string(p.vocab_size) + " " + format_value(model.lambda_task) +
         "\n";
  out += format_value(model.stats.mean_ns) + " " +
         format_value(model.stats.std_ns) + " " +
         std::to_string(model.stats.outlier_threshold_ns) + "\n";

  auto block = [&](const std::string& name, const Eigen::MatrixXd& m) {
    out += name + " " + std::to_string(m.rows()) + " " +
           std::to_string(m.cols()) + "\n";
    for (std::ptrdiff_t r = 0; r < m.rows(); ++r) {
      for (std::ptrdiff_t c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        out += format_value(m(r, c));
      }
      out += '\n';
    }
  };
  for (int l = 0; l < p.num_layers(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    block(prefix + ".w_x", p.layers[std::size_t(l)].w_x);
    block(prefix + ".w_h", p.layers[std::size_t(l)].w_h);
    block(prefix + ".b", p.layers[std::size_t(l)].b);
  }
  block("task_head.w", p.task_w);
  block("task_head.b", p.task_b);
  block("interval_head.w", p.interval_w);
  Eigen::MatrixXd ib(1, 1);
  ib(0, 0) = p.interval_b;
  block("interval_head.b", ib);
  return out;
}

TrainedModel read_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "KORACLE-CKPT v1") {
    throw BadCheckpoint("bad checkpoint magic: '" + line + "'");
  }
  int d = 0, h = 0, layers = 0, v = 0;
  double lambda = 0.0;
  if (!(in >> d >> h >> layers >> v >> lambda) || d < 1 || h < 1 ||
      layers < 1 || v < 0) {
    throw BadCheckpoint("bad checkpoint dimension line");
  }
  TrainedModel model;
  model.lambda_task = lambda;
  uint64_t threshold = 0;
  if (!(in >> model.stats.mean_ns >> model.stats.std_ns >> threshold)) {
    throw BadCheckpoint("bad checkpoint stats line");
  }
  model.stats.outlier_threshold_ns = threshold;

  auto read_block = [&](const std::string& expect, std::ptrdiff_t rows,
                        std::ptrdiff_t cols, Eigen::MatrixXd& m) {
    std::string name;
    std::ptrdiff_t r = 0, c = 0;
    if (!(in >> name >> r >> c) || name != expect || r != rows || c != cols) {
      throw BadCheckpoint("expected block '" + expect + "' " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got '" + name + "' " + std::to_string(r) + "x" +
                          std::to_string(c));
    }
    m.resize(rows, cols);
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      for (std::ptrdiff_t j = 0; j < cols; ++j) {
        if (!(in >> m(i, j))) {
          throw BadCheckpoint("truncated block '" + expect + "'");
        }
      }
    }
  };

  LstmParams& p = model.params;
  p.input_dim = d;
  p.hidden_dim = h;
  p.vocab_size = v;
  for (int l = 0; l < layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    const std::ptrdiff_t d_in = l == 0 ? d : h;
    LayerParams layer;
    Eigen::MatrixXd m;
    read_block(prefix + ".w_x", 4 * h, d_in, layer.w_x);
    read_block(prefix + ".w_h", 4 * h, h, layer.w_h);
    read_block(prefix + ".b", 4 * h, 1, m);
    layer.b = m.col(0);
    p.layers.push_back(std::move(layer));
  }
  Eigen::MatrixXd m;
  read_block("task_head.w", v + 1, h, p.task_w);
  read_block("task_head.b", v + 1, 1, m);
  p.task_b = m.col(0);
  read_block("interval_head.w", 1, h, m);
  p.interval_w = m.row(0);
  read_block("interval_head.b", 1, 1, m);
  p.interval_b = m(0, 0);
  check_layer_dims(p);
  return model;
}

}  // namespace koracle
