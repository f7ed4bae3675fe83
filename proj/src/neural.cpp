#include "mvrad/neural.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvrad/error.hpp"

namespace mvrad {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) throw Error(ErrorKind::NonFiniteValue, std::string(what) + " contains NaN or Inf");
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw Error(ErrorKind::InvalidArgument, "layer sizes must be positive");
  DenseLayer layer;
  layer.weight = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  layer.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

DenseLayer DenseLayer::he_uniform(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer = zeros(in, out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  return layer;
}

DenseLayer DenseLayer::glorot_uniform(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer = zeros(in, out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols() != layer.weight.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "dense input width " + std::to_string(x.cols()) + " != layer in " +
                                              std::to_string(layer.weight.cols()));
  }
  Matrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  require_finite(y, "dense output");
  return y;
}

Vector dense_forward(const DenseLayer& layer, const Vector& x) {
  Matrix row = x.transpose();
  return dense_forward(layer, row).row(0).transpose();
}

DenseGrad dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream) {
  if (x.cols() != layer.weight.cols() || upstream.cols() != layer.weight.rows() || x.rows() != upstream.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "dense backward shapes are inconsistent");
  }
  DenseGrad g;
  g.weight = upstream.transpose() * x;
  g.bias = Vector::Zero(upstream.cols());
  for (Eigen::Index r = 0; r < upstream.rows(); ++r) g.bias += upstream.row(r).transpose();
  g.input = upstream * layer.weight;
  return g;
}

Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
  if (x.rows() != upstream.rows() || x.cols() != upstream.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "relu backward shapes differ");
  }
  return (x.array() > 0.0).select(upstream, 0.0);
}

DropoutResult dropout(const Matrix& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::InvalidRate, "dropout rate must lie in [0, 1)");
  DropoutResult r;
  if (!training || rate == 0.0) {
    r.output = x;
    r.mask = Matrix::Ones(x.rows(), x.cols());
    return r;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  r.mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) r.mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
  r.output = x.cwiseProduct(r.mask);
  return r;
}

Matrix dropout_backward(const Matrix& mask, const Matrix& upstream) {
  if (mask.rows() != upstream.rows() || mask.cols() != upstream.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "dropout backward shapes differ");
  }
  return upstream.cwiseProduct(mask);
}

Penalty l2_penalty(const Matrix& weights, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::InvalidArgument, "L2 lambda must be non-negative");
  return {lambda * weights.squaredNorm(), 2.0 * lambda * weights};
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamOptions& options) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "parameter/gradient list lengths differ");
  if (state.t == 0 && state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "Adam state tracks a different tensor list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter tensor " + std::to_string(i) + " shape mismatch");
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) throw Error(ErrorKind::NonFiniteGradient, "tensor " + std::to_string(i));
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g;
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      params[i][j] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

double grad_check(const LossWithGradient& loss, std::span<const double> params, double h) {
  std::vector<double> analytic;
  loss(params, &analytic);
  if (analytic.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "gradient length != parameter count");
  std::vector<double> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = loss(probe, nullptr);
    probe[i] = saved - h;
    const double down = loss(probe, nullptr);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace mvrad
