#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvrad/dataset.hpp"
#include "mvrad/neural.hpp"
#include "mvrad/rng.hpp"
#include "mvrad/types.hpp"

namespace mvrad {

/// Row-aligned inputs for both views: [0] = T1Gd, [1] = FLAIR.
using ViewPair = std::array<Matrix, 2>;

struct VaeConfig {
  std::array<std::size_t, 2> input_dims{144, 144};
  std::vector<std::size_t> encoder_hidden{128, 64};
  std::size_t latent_dim = 6;
  std::vector<std::size_t> decoder_hidden{64, 128};
  double dropout_rate = 0.1;
  double l2_lambda = 1e-4;
  double beta = 0.3;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double min_delta = 1e-4;
  double lr_factor = 0.5;
  std::size_t lr_patience = 10;
  double lr_floor = 1e-6;
  double logvar_clamp = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ViewNetwork {
  std::vector<DenseLayer> encoder;  ///< ReLU + dropout after each
  DenseLayer mu_head;
  DenseLayer logvar_head;
  std::vector<DenseLayer> decoder;  ///< ReLU after each but the last (linear output)
};

/// Mutable view of one parameter tensor inside a model.
struct TensorRef {
  std::string name;
  std::span<double> values;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool penalised = false;  ///< weight matrix (true) or bias (false)
};

struct MvVaeModel {
  VaeConfig config;
  std::array<ViewNetwork, 2> views;

  /// He-uniform hidden layers, zero biases, zero mu/logvar heads (a fresh
  /// model encodes every input to N(0, I)). The decoder's linear output layer
  /// is Glorot-uniform; starting it at zero stalls reconstruction learning.
  static MvVaeModel initialize(const VaeConfig& config);
  /// Same architecture with every parameter zero (gradient accumulator).
  static MvVaeModel zeros_like(const MvVaeModel& model);

  /// Fixed order: per view, encoder layers, mu head, logvar head, decoder layers; W before b.
  std::vector<TensorRef> tensors();
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

struct EncodeOutput {
  Matrix mu;      ///< [batch x latent]
  Matrix logvar;  ///< [batch x latent], clamped to +/- config.logvar_clamp
};

EncodeOutput encode(const MvVaeModel& model, const Matrix& x, Modality m, bool training, Rng& rng);

/// z = mu + exp(logvar / 2) * eps, elementwise.
Matrix reparameterize(const EncodeOutput& enc, const Matrix& eps);

Matrix decode(const MvVaeModel& model, const Matrix& z, Modality m);

/// KL(N(mu, diag exp(logvar)) || N(0, I)) = 1/2 sum(mu^2 + exp(logvar) - logvar - 1).
double kl_diag_gaussian(std::span<const double> mu, std::span<const double> logvar);

struct LossComponents {
  double total = 0.0;
  std::array<double, 2> reconstruction{};  ///< mean over batch of summed squared error
  std::array<double, 2> kl{};              ///< mean over batch of summed KL
  double l2 = 0.0;
};

/// Composite objective sum_m recon_m + beta * sum_m KL_m + L2 with one
/// standard-normal eps draw per sample and view.
LossComponents loss(const MvVaeModel& model, const ViewPair& batch, Rng& rng, bool training);

/// Same objective with caller-fixed eps. When `gradient` is non-null it must
/// be shaped like `model`; it is overwritten with d(total)/d(parameters).
LossComponents loss_with_gradient(const MvVaeModel& model, const ViewPair& batch, const ViewPair& eps,
                                  bool training, Rng& dropout_rng, MvVaeModel* gradient);

/// Deterministic loss: dropout off, eps = 0 (posterior means).
LossComponents evaluate_loss(const MvVaeModel& model, const ViewPair& data);

struct EpochRecord {
  std::size_t epoch = 0;
  LossComponents train;  ///< batch-size-weighted mean over the epoch
  double lr = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
};

struct TrainEvent {
  std::size_t epoch = 0;
  std::string kind;  ///< "lr_reduced" or "early_stop"
  double value = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<TrainEvent> events;
  std::optional<std::size_t> early_stop_epoch;
  std::size_t best_epoch = 0;
  double initial_train_loss = 0.0;  ///< deterministic loss before the first update
  double final_train_loss = 0.0;    ///< deterministic loss of the restored best model
};

struct TrainResult {
  MvVaeModel model;
  TrainHistory history;
};

/// Mini-batch Adam with early stopping and learning-rate reduction driven by
/// the deterministic validation loss. An empty validation set falls back to
/// the training data. The best-validation parameters are restored on exit.
TrainResult train(const ViewPair& train_data, const ViewPair& validation, const VaeConfig& config);
TrainResult train(const Cohort& cohort, const RowIndex& train_rows, const RowIndex& val_rows, const VaeConfig& config);

/// Row i = [mu_T1Gd(x_i), mu_FLAIR(x_i)], dropout off, no sampling.
Matrix embed(const MvVaeModel& model, const ViewPair& data);
Matrix embed(const MvVaeModel& model, const Cohort& cohort, const RowIndex& rows);

ViewPair view_rows(const Cohort& cohort, const RowIndex& rows);

}  // namespace mvrad
