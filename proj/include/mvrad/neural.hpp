#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mvrad/rng.hpp"
#include "mvrad/types.hpp"

namespace mvrad {

/// Throws NonFiniteValue if any entry of `m` is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

/// Affine layer y = W x + b, W stored [out x in].
struct DenseLayer {
  Matrix weight;
  Vector bias;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }

  static DenseLayer zeros(std::size_t in, std::size_t out);
  /// He-uniform weights in [-sqrt(6/in), sqrt(6/in)], zero bias.
  static DenseLayer he_uniform(std::size_t in, std::size_t out, Rng& rng);
  /// Glorot-uniform weights in [-sqrt(6/(in+out)), sqrt(6/(in+out))], zero bias.
  static DenseLayer glorot_uniform(std::size_t in, std::size_t out, Rng& rng);
};

/// Batched forward: x is [batch x in], result [batch x out].
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);
Vector dense_forward(const DenseLayer& layer, const Vector& x);

struct DenseGrad {
  Matrix weight;  ///< sum over batch of delta x^T
  Vector bias;    ///< sum over batch of delta
  Matrix input;   ///< delta W, per row
};

DenseGrad dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream);

Matrix relu_forward(const Matrix& x);
/// Passes upstream where x > 0; the subgradient at exactly 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

struct DropoutResult {
  Matrix output;
  Matrix mask;  ///< per-unit multiplier: 0 or 1/(1-rate); all ones at inference
};

/// Inverted dropout. With training=false (or rate=0) the output equals x.
DropoutResult dropout(const Matrix& x, double rate, bool training, Rng& rng);
Matrix dropout_backward(const Matrix& mask, const Matrix& upstream);

struct Penalty {
  double value = 0.0;
  Matrix grad;
};

/// lambda * sum(w^2) and its gradient 2 lambda w. Callers pass weight
/// matrices only; biases are never penalised.
Penalty l2_penalty(const Matrix& weights, double lambda);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for a fixed list of parameter tensors.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update applied in place. The state is sized on the
/// first call and must be reused with the same tensor list afterwards.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamOptions& options);

/// Loss over a flat parameter vector. When `grad` is non-null it receives the
/// analytic gradient (resized by the callee).
using LossWithGradient = std::function<double(std::span<const double> params, std::vector<double>* grad)>;

/// Largest per-coordinate relative error between the analytic gradient and
/// central differences, |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const LossWithGradient& loss, std::span<const double> params, double h = 1e-5);

}  // namespace mvrad
