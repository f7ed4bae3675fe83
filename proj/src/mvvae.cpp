#include "mvrad/mvvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvrad/error.hpp"
#include "mvrad/log.hpp"

namespace mvrad {

void VaeConfig::validate() const {
  auto positive = [](std::size_t v) { return v > 0; };
  if (!positive(input_dims[0]) || !positive(input_dims[1]) || !positive(latent_dim) ||
      !std::all_of(encoder_hidden.begin(), encoder_hidden.end(), positive) ||
      !std::all_of(decoder_hidden.begin(), decoder_hidden.end(), positive) || !positive(batch_size)) {
    throw Error(ErrorKind::InvalidArgument, "VAE layer and batch sizes must be positive");
  }
  if (encoder_hidden.empty()) throw Error(ErrorKind::InvalidArgument, "encoder needs at least one hidden layer");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorKind::InvalidRate, "dropout rate must lie in [0, 1)");
  if (beta < 0.0 || l2_lambda < 0.0 || lr < 0.0 || lr_floor < 0.0 || min_delta < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "beta, l2, lr, lr floor and min-delta must be non-negative");
  }
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw Error(ErrorKind::InvalidArgument, "lr factor must lie in (0, 1]");
  if (!(logvar_clamp > 0.0)) throw Error(ErrorKind::InvalidArgument, "logvar clamp must be positive");
}

MvVaeModel MvVaeModel::initialize(const VaeConfig& config) {
  config.validate();
  MvVaeModel model;
  model.config = config;
  Rng rng(derive_seed(config.seed, 1));
  for (std::size_t v = 0; v < 2; ++v) {
    ViewNetwork& net = model.views[v];
    std::size_t width = config.input_dims[v];
    for (std::size_t h : config.encoder_hidden) {
      net.encoder.push_back(DenseLayer::he_uniform(width, h, rng));
      width = h;
    }
    net.mu_head = DenseLayer::zeros(width, config.latent_dim);
    net.logvar_head = DenseLayer::zeros(width, config.latent_dim);
    width = config.latent_dim;
    for (std::size_t h : config.decoder_hidden) {
      net.decoder.push_back(DenseLayer::he_uniform(width, h, rng));
      width = h;
    }
    net.decoder.push_back(DenseLayer::glorot_uniform(width, config.input_dims[v], rng));
  }
  return model;
}

MvVaeModel MvVaeModel::zeros_like(const MvVaeModel& model) {
  MvVaeModel out = model;
  for (auto& t : out.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  return out;
}

std::vector<TensorRef> MvVaeModel::tensors() {
  std::vector<TensorRef> out;
  auto add = [&out](const std::string& prefix, DenseLayer& layer) {
    out.push_back({prefix + "/W", {layer.weight.data(), static_cast<std::size_t>(layer.weight.size())},
                   layer.weight.rows(), layer.weight.cols(), true});
    out.push_back({prefix + "/b", {layer.bias.data(), static_cast<std::size_t>(layer.bias.size())},
                   layer.bias.size(), 1, false});
  };
  for (std::size_t v = 0; v < 2; ++v) {
    const std::string view = v == 0 ? "t1gd" : "flair";
    ViewNetwork& net = views[v];
    for (std::size_t k = 0; k < net.encoder.size(); ++k) add(view + "/enc" + std::to_string(k), net.encoder[k]);
    add(view + "/mu", net.mu_head);
    add(view + "/logvar", net.logvar_head);
    for (std::size_t k = 0; k < net.decoder.size(); ++k) add(view + "/dec" + std::to_string(k), net.decoder[k]);
  }
  return out;
}

std::size_t MvVaeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : const_cast<MvVaeModel*>(this)->tensors()) n += t.values.size();
  return n;
}

std::vector<double> MvVaeModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : const_cast<MvVaeModel*>(this)->tensors()) flat.insert(flat.end(), t.values.begin(), t.values.end());
  return flat;
}

void MvVaeModel::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error(ErrorKind::ShapeMismatch, "flat parameter length mismatch");
  std::size_t offset = 0;
  for (auto& t : tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.values.size(), t.values.begin());
    offset += t.values.size();
  }
}

namespace {

void check_view_input(const MvVaeModel& model, const Matrix& x, std::size_t v) {
  if (static_cast<std::size_t>(x.cols()) != model.config.input_dims[v]) {
    throw Error(ErrorKind::ShapeMismatch, std::string(modality_name(kModalities[v])) + " input width " +
                                              std::to_string(x.cols()) + " != " +
                                              std::to_string(model.config.input_dims[v]));
  }
}

// Activations retained for the backward pass of one view.
struct ViewTrace {
  std::vector<Matrix> enc_in, enc_pre, enc_mask;
  Matrix trunk_out;
  Matrix logvar_raw;
  EncodeOutput enc;
  Matrix eps, z;
  std::vector<Matrix> dec_in, dec_pre;
  Matrix recon;
};

EncodeOutput encode_traced(const MvVaeModel& model, const Matrix& x, std::size_t v, bool training, Rng& rng,
                           ViewTrace* trace) {
  const ViewNetwork& net = model.views[v];
  Matrix h = x;
  for (const DenseLayer& layer : net.encoder) {
    Matrix pre = dense_forward(layer, h);
    DropoutResult d = dropout(relu_forward(pre), model.config.dropout_rate, training, rng);
    if (trace) {
      trace->enc_in.push_back(std::move(h));
      trace->enc_pre.push_back(std::move(pre));
      trace->enc_mask.push_back(std::move(d.mask));
    }
    h = std::move(d.output);
  }
  EncodeOutput out;
  out.mu = dense_forward(net.mu_head, h);
  Matrix raw = dense_forward(net.logvar_head, h);
  const double c = model.config.logvar_clamp;
  out.logvar = raw.cwiseMax(-c).cwiseMin(c);
  if (trace) {
    trace->trunk_out = std::move(h);
    trace->logvar_raw = std::move(raw);
    trace->enc = out;
  }
  return out;
}

Matrix decode_traced(const MvVaeModel& model, const Matrix& z, std::size_t v, ViewTrace* trace) {
  const ViewNetwork& net = model.views[v];
  Matrix h = z;
  for (std::size_t k = 0; k < net.decoder.size(); ++k) {
    Matrix pre = dense_forward(net.decoder[k], h);
    const bool last = k + 1 == net.decoder.size();
    Matrix next = last ? pre : relu_forward(pre);
    if (trace) {
      trace->dec_in.push_back(std::move(h));
      trace->dec_pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

void accumulate(DenseLayer& into, const DenseGrad& g) {
  into.weight += g.weight;
  into.bias += g.bias;
}

}  // namespace

EncodeOutput encode(const MvVaeModel& model, const Matrix& x, Modality m, bool training, Rng& rng) {
  const std::size_t v = view_index(m);
  check_view_input(model, x, v);
  return encode_traced(model, x, v, training, rng, nullptr);
}

Matrix reparameterize(const EncodeOutput& enc, const Matrix& eps) {
  if (eps.rows() != enc.mu.rows() || eps.cols() != enc.mu.cols() || enc.logvar.rows() != enc.mu.rows() ||
      enc.logvar.cols() != enc.mu.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "eps shape must match the latent posterior");
  }
  return enc.mu + ((0.5 * enc.logvar.array()).exp() * eps.array()).matrix();
}

Matrix decode(const MvVaeModel& model, const Matrix& z, Modality m) {
  if (static_cast<std::size_t>(z.cols()) != model.config.latent_dim) {
    throw Error(ErrorKind::ShapeMismatch, "latent width " + std::to_string(z.cols()) + " != " +
                                              std::to_string(model.config.latent_dim));
  }
  return decode_traced(model, z, view_index(m), nullptr);
}

double kl_diag_gaussian(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw Error(ErrorKind::ShapeMismatch, "mu and logvar lengths differ");
  double sum = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) sum += mu[j] * mu[j] + std::exp(logvar[j]) - logvar[j] - 1.0;
  return 0.5 * sum;
}

LossComponents loss_with_gradient(const MvVaeModel& model, const ViewPair& batch, const ViewPair& eps, bool training,
                                  Rng& dropout_rng, MvVaeModel* gradient) {
  const VaeConfig& cfg = model.config;
  const Eigen::Index n = batch[0].rows();
  if (n == 0) throw Error(ErrorKind::EmptyTrainingSet, "loss of an empty batch");
  if (batch[1].rows() != n) throw Error(ErrorKind::ShapeMismatch, "views have different row counts");
  const double inv_n = 1.0 / static_cast<double>(n);

  if (gradient) *gradient = MvVaeModel::zeros_like(model);
  LossComponents parts;

  for (std::size_t v = 0; v < 2; ++v) {
    check_view_input(model, batch[v], v);
    if (eps[v].rows() != n || static_cast<std::size_t>(eps[v].cols()) != cfg.latent_dim) {
      throw Error(ErrorKind::ShapeMismatch, "eps must be [batch x latent]");
    }
    ViewTrace trace;
    encode_traced(model, batch[v], v, training, dropout_rng, &trace);
    trace.eps = eps[v];
    trace.z = reparameterize(trace.enc, trace.eps);
    trace.recon = decode_traced(model, trace.z, v, &trace);

    const Matrix residual = trace.recon - batch[v];
    parts.reconstruction[v] = residual.squaredNorm() * inv_n;
    double kl_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd mu_row = trace.enc.mu.row(i).transpose();
      const Eigen::VectorXd lv_row = trace.enc.logvar.row(i).transpose();
      kl_sum += kl_diag_gaussian({mu_row.data(), static_cast<std::size_t>(mu_row.size())},
                                 {lv_row.data(), static_cast<std::size_t>(lv_row.size())});
    }
    parts.kl[v] = kl_sum * inv_n;

    if (!gradient) continue;
    ViewNetwork& g = gradient->views[v];
    const ViewNetwork& net = model.views[v];

    // decoder
    Matrix delta = (2.0 * inv_n) * residual;
    for (std::size_t k = net.decoder.size(); k-- > 0;) {
      if (k + 1 != net.decoder.size()) delta = relu_backward(trace.dec_pre[k], delta);
      DenseGrad dg = dense_backward(net.decoder[k], trace.dec_in[k], delta);
      accumulate(g.decoder[k], dg);
      delta = std::move(dg.input);
    }
    const Matrix& dz = delta;

    // reparameterisation and KL
    const Eigen::ArrayXXd sigma = (0.5 * trace.enc.logvar.array()).exp();
    const double kl_scale = cfg.beta * inv_n;
    Matrix d_mu = dz + kl_scale * trace.enc.mu;
    Matrix d_logvar = (dz.array() * trace.eps.array() * 0.5 * sigma +
                       kl_scale * 0.5 * (trace.enc.logvar.array().exp() - 1.0))
                          .matrix();
    const double c = cfg.logvar_clamp;
    d_logvar = (trace.logvar_raw.array().abs() <= c).select(d_logvar, 0.0);

    DenseGrad g_mu = dense_backward(net.mu_head, trace.trunk_out, d_mu);
    DenseGrad g_lv = dense_backward(net.logvar_head, trace.trunk_out, d_logvar);
    accumulate(g.mu_head, g_mu);
    accumulate(g.logvar_head, g_lv);
    delta = g_mu.input + g_lv.input;

    // encoder trunk
    for (std::size_t k = net.encoder.size(); k-- > 0;) {
      delta = dropout_backward(trace.enc_mask[k], delta);
      delta = relu_backward(trace.enc_pre[k], delta);
      DenseGrad dg = dense_backward(net.encoder[k], trace.enc_in[k], delta);
      accumulate(g.encoder[k], dg);
      delta = std::move(dg.input);
    }
  }

  // L2 on every weight matrix, never biases.
  auto& mutable_model = const_cast<MvVaeModel&>(model);
  auto params = mutable_model.tensors();
  std::vector<TensorRef> grads;
  if (gradient) grads = gradient->tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t].penalised) continue;
    const Eigen::Map<const Eigen::VectorXd> w(params[t].values.data(), static_cast<Eigen::Index>(params[t].values.size()));
    parts.l2 += cfg.l2_lambda * w.squaredNorm();
    if (gradient) {
      Eigen::Map<Eigen::VectorXd> gw(grads[t].values.data(), static_cast<Eigen::Index>(grads[t].values.size()));
      gw += 2.0 * cfg.l2_lambda * w;
    }
  }

  parts.total = parts.reconstruction[0] + parts.reconstruction[1] + cfg.beta * (parts.kl[0] + parts.kl[1]) + parts.l2;
  if (!std::isfinite(parts.total)) throw Error(ErrorKind::NonFiniteLoss, "composite VAE loss is not finite");
  return parts;
}

LossComponents loss(const MvVaeModel& model, const ViewPair& batch, Rng& rng, bool training) {
  ViewPair eps;
  const auto latent = static_cast<Eigen::Index>(model.config.latent_dim);
  for (std::size_t v = 0; v < 2; ++v) {
    eps[v].resize(batch[v].rows(), latent);
    for (Eigen::Index i = 0; i < eps[v].rows(); ++i)
      for (Eigen::Index j = 0; j < latent; ++j) eps[v](i, j) = rng.normal();
  }
  return loss_with_gradient(model, batch, eps, training, rng, nullptr);
}

LossComponents evaluate_loss(const MvVaeModel& model, const ViewPair& data) {
  ViewPair eps;
  for (std::size_t v = 0; v < 2; ++v) {
    eps[v] = Matrix::Zero(data[v].rows(), static_cast<Eigen::Index>(model.config.latent_dim));
  }
  Rng unused(0);
  return loss_with_gradient(model, data, eps, false, unused, nullptr);
}

ViewPair view_rows(const Cohort& cohort, const RowIndex& rows) {
  return {select_rows(cohort.views[0], rows), select_rows(cohort.views[1], rows)};
}

TrainResult train(const ViewPair& train_data, const ViewPair& validation, const VaeConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(train_data[0].rows());
  if (n == 0) throw Error(ErrorKind::EmptyTrainingSet, "VAE training set is empty");
  if (static_cast<std::size_t>(train_data[1].rows()) != n) {
    throw Error(ErrorKind::ShapeMismatch, "training views have different row counts");
  }
  const bool has_validation = validation[0].rows() > 0;
  const ViewPair& val = has_validation ? validation : train_data;

  TrainResult result{MvVaeModel::initialize(config), {}};
  MvVaeModel& model = result.model;
  TrainHistory& history = result.history;

  Rng shuffle_rng(derive_seed(config.seed, 2));
  Rng noise_rng(derive_seed(config.seed, 3));
  const std::size_t batch_size = std::min(config.batch_size, n);
  const auto latent = static_cast<Eigen::Index>(config.latent_dim);

  history.initial_train_loss = evaluate_loss(model, train_data).total;

  AdamState adam;
  AdamOptions adam_options;
  adam_options.lr = config.lr;
  MvVaeModel best = model;
  MvVaeModel grad = MvVaeModel::zeros_like(model);
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0, lr_stale = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(n);
    LossComponents epoch_parts;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, n);
      const RowIndex rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      ViewPair batch{select_rows(train_data[0], rows), select_rows(train_data[1], rows)};
      ViewPair eps;
      for (std::size_t v = 0; v < 2; ++v) {
        eps[v].resize(static_cast<Eigen::Index>(rows.size()), latent);
        for (Eigen::Index i = 0; i < eps[v].rows(); ++i)
          for (Eigen::Index j = 0; j < latent; ++j) eps[v](i, j) = noise_rng.normal();
      }
      const LossComponents parts = loss_with_gradient(model, batch, eps, true, noise_rng, &grad);

      auto param_refs = model.tensors();
      auto grad_refs = grad.tensors();
      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      for (std::size_t t = 0; t < param_refs.size(); ++t) {
        params.push_back(param_refs[t].values);
        grads.push_back(grad_refs[t].values);
      }
      adam_step(params, grads, adam, adam_options);

      const double w = static_cast<double>(rows.size()) / static_cast<double>(n);
      epoch_parts.total += w * parts.total;
      epoch_parts.l2 += w * parts.l2;
      for (std::size_t v = 0; v < 2; ++v) {
        epoch_parts.reconstruction[v] += w * parts.reconstruction[v];
        epoch_parts.kl[v] += w * parts.kl[v];
      }
    }

    const double val_loss = evaluate_loss(model, val).total;
    if (val_loss < best_val - config.min_delta) {
      best_val = val_loss;
      best = model;
      history.best_epoch = epoch;
      stale = 0;
      lr_stale = 0;
    } else {
      ++stale;
      ++lr_stale;
    }
    history.epochs.push_back({epoch, epoch_parts, adam_options.lr, val_loss, best_val});

    if (stale >= config.patience) {
      history.early_stop_epoch = epoch;
      history.events.push_back({epoch, "early_stop", best_val});
      break;
    }
    if (lr_stale >= config.lr_patience) {
      const double reduced = std::max(adam_options.lr * config.lr_factor, config.lr_floor);
      if (reduced < adam_options.lr) {
        adam_options.lr = reduced;
        history.events.push_back({epoch, "lr_reduced", reduced});
      }
      lr_stale = 0;
    }
  }

  model = std::move(best);
  history.final_train_loss = evaluate_loss(model, train_data).total;
  log_info("train-vae", {{"epochs", std::to_string(history.epochs.size())},
                         {"best_epoch", std::to_string(history.best_epoch)},
                         {"initial_loss", fmt_double(history.initial_train_loss)},
                         {"final_loss", fmt_double(history.final_train_loss)},
                         {"best_val", fmt_double(best_val)}});
  return result;
}

TrainResult train(const Cohort& cohort, const RowIndex& train_rows, const RowIndex& val_rows, const VaeConfig& config) {
  if (train_rows.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training rows");
  return train(view_rows(cohort, train_rows), view_rows(cohort, val_rows), config);
}

Matrix embed(const MvVaeModel& model, const ViewPair& data) {
  if (data[0].rows() != data[1].rows()) throw Error(ErrorKind::ShapeMismatch, "views have different row counts");
  Rng unused(0);
  const auto latent = static_cast<Eigen::Index>(model.config.latent_dim);
  Matrix out(data[0].rows(), 2 * latent);
  for (std::size_t v = 0; v < 2; ++v) {
    const EncodeOutput enc = encode(model, data[v], kModalities[v], false, unused);
    out.middleCols(static_cast<Eigen::Index>(v) * latent, latent) = enc.mu;
  }
  return out;
}

Matrix embed(const MvVaeModel& model, const Cohort& cohort, const RowIndex& rows) {
  return embed(model, view_rows(cohort, rows));
}

}  // namespace mvrad
