#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "mvrad/checkpoint.hpp"
#include "mvrad/dataset.hpp"
#include "mvrad/error.hpp"
#include "mvrad/mvvae.hpp"

using namespace mvrad;

namespace {

VaeConfig tiny_config(std::uint64_t seed) {
  VaeConfig cfg;
  cfg.input_dims = {5, 5};
  cfg.encoder_hidden = {4, 3};
  cfg.latent_dim = 2;
  cfg.decoder_hidden = {3, 4};
  cfg.dropout_rate = 0.0;
  cfg.seed = seed;
  return cfg;
}

MvVaeModel randomised(const VaeConfig& cfg, Rng& rng) {
  MvVaeModel m = MvVaeModel::initialize(cfg);
  std::vector<double> flat(m.parameter_count());
  for (auto& v : flat) v = rng.uniform(-0.8, 0.8);
  m.assign(flat);
  return m;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Central difference taken term by term. A parameter of one view leaves the
// other view's terms bit-identical, so their rounding noise drops out.
double term_difference(const LossComponents& up, const LossComponents& down, double beta) {
  double d = up.l2 - down.l2;
  for (std::size_t v = 0; v < 2; ++v)
    d += (up.reconstruction[v] - down.reconstruction[v]) + beta * (up.kl[v] - down.kl[v]);
  return d;
}

// KL(N(mu, s^2) || N(0, 1)) by Simpson integration of q log(q / p).
double kl_by_quadrature(double mu, double logvar) {
  const double s = std::exp(0.5 * logvar);
  const double lo = mu - 14 * s, hi = mu + 14 * s;
  const int steps = 20000;
  const double h = (hi - lo) / steps;
  auto integrand = [&](double x) {
    const double logq = -0.5 * std::log(2 * M_PI) - std::log(s) - 0.5 * (x - mu) * (x - mu) / (s * s);
    const double logp = -0.5 * std::log(2 * M_PI) - 0.5 * x * x;
    return std::exp(logq) * (logq - logp);
  };
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < steps; ++i) sum += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double relu(double x) { return x > 0 ? x : 0.0; }

}  // namespace

TEST_CASE("fresh model encodes to the standard normal") {
  VaeConfig cfg;
  cfg.input_dims = {7, 9};
  cfg.seed = 4;
  auto model = MvVaeModel::initialize(cfg);
  Rng rng(1);
  Matrix x = random_matrix(3, 7, rng);
  auto enc = encode(model, x, Modality::T1Gd, false, rng);
  CHECK(enc.mu.rows() == 3);
  CHECK(enc.mu.cols() == 6);
  CHECK(enc.logvar.cols() == 6);
  CHECK(enc.mu.isZero());
  CHECK(enc.logvar.isZero());

  auto again = encode(model, x, Modality::T1Gd, false, rng);
  CHECK(again.mu == enc.mu);

  Matrix xf = random_matrix(4, 9, rng);
  CHECK(embed(model, ViewPair{random_matrix(4, 7, rng), xf}).isZero());
  CHECK(decode(model, Matrix::Zero(2, 6), Modality::FLAIR).cols() == 9);
  CHECK_THROWS_AS(encode(model, xf, Modality::T1Gd, false, rng), Error);
}

TEST_CASE("decoder is linear at the output and deterministic") {
  VaeConfig cfg = tiny_config(2);
  auto model = MvVaeModel::initialize(cfg);
  Rng rng(3);
  Matrix z = random_matrix(4, 2, rng);
  CHECK(decode(model, z, Modality::T1Gd) == decode(model, z, Modality::T1Gd));
  model.views[0].decoder.back() = DenseLayer::zeros(model.views[0].decoder.back().in(), 5);
  CHECK(decode(model, z, Modality::T1Gd).isZero());
}

TEST_CASE("reparameterisation") {
  EncodeOutput enc{Matrix::Constant(1, 2, 0.5), Matrix::Constant(1, 2, -1.0)};
  CHECK(reparameterize(enc, Matrix::Zero(1, 2)) == enc.mu);
  EncodeOutput std_normal{Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
  Matrix e(1, 2);
  e << 0.3, -2.0;
  CHECK(reparameterize(std_normal, e) == e);

  const double mu = 1.5, logvar = std::log(0.25);
  const Eigen::Index N = 100000;
  EncodeOutput col{Matrix::Constant(N, 1, mu), Matrix::Constant(N, 1, logvar)};
  Rng rng(11);
  Matrix eps(N, 1);
  for (Eigen::Index i = 0; i < N; ++i) eps(i, 0) = rng.normal();
  Matrix z = reparameterize(col, eps);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(N - 1);
  CHECK(std::abs(mean - mu) < 4 * 0.5 / std::sqrt(static_cast<double>(N)));
  CHECK(std::abs(var / 0.25 - 1.0) < 0.05);
}

TEST_CASE("closed-form KL") {
  std::vector<double> zero{0.0, 0.0};
  CHECK(kl_diag_gaussian(zero, zero) == 0.0);
  std::vector<double> one{1.0}, z1{0.0};
  CHECK(kl_diag_gaussian(one, z1) == doctest::Approx(0.5).epsilon(1e-15));
  std::vector<double> l4{std::log(4.0)};
  const double expected = 0.5 * (4.0 - std::log(4.0) - 1.0);
  CHECK(kl_diag_gaussian(z1, l4) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected == doctest::Approx(0.80685).epsilon(1e-4));

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const double m = rng.uniform(-2, 2), lv = rng.uniform(-2, 2);
    std::vector<double> mv{m}, lvv{lv};
    CHECK(kl_diag_gaussian(mv, lvv) == doctest::Approx(kl_by_quadrature(m, lv)).epsilon(1e-8));
  }
}

TEST_CASE("loss on a hand-specified tiny model") {
  VaeConfig cfg;
  cfg.input_dims = {2, 2};
  cfg.encoder_hidden = {1};
  cfg.latent_dim = 1;
  cfg.decoder_hidden = {};
  cfg.dropout_rate = 0.0;
  cfg.beta = 0.3;
  cfg.l2_lambda = 0.01;
  auto model = MvVaeModel::initialize(cfg);

  // Per view: h = relu(w1 . x + b1); mu = a h + c; lv = e h + f; z = mu + exp(lv/2) eps; xhat = D z + g.
  struct Hand {
    double w1[2], b1, a, c, e, f, D[2], g[2];
  };
  const Hand hand[2] = {{{0.5, -0.25}, 0.1, 0.8, -0.2, 0.3, 0.05, {1.2, -0.7}, {0.01, 0.02}},
                        {{-0.3, 0.9}, 0.2, -0.6, 0.15, -0.4, 0.1, {0.5, 0.25}, {-0.05, 0.0}}};
  for (int v = 0; v < 2; ++v) {
    auto& net = model.views[v];
    net.encoder[0].weight << hand[v].w1[0], hand[v].w1[1];
    net.encoder[0].bias << hand[v].b1;
    net.mu_head.weight << hand[v].a;
    net.mu_head.bias << hand[v].c;
    net.logvar_head.weight << hand[v].e;
    net.logvar_head.bias << hand[v].f;
    net.decoder[0].weight << hand[v].D[0], hand[v].D[1];
    net.decoder[0].bias << hand[v].g[0], hand[v].g[1];
  }
  const double x[2][2] = {{1.0, 2.0}, {0.5, -1.5}};
  const double eps[2] = {0.7, -0.4};

  double expected = 0.0;
  for (int v = 0; v < 2; ++v) {
    const Hand& p = hand[v];
    const double h = relu(p.w1[0] * x[v][0] + p.w1[1] * x[v][1] + p.b1);
    const double mu = p.a * h + p.c, lv = p.e * h + p.f;
    const double z = mu + std::exp(lv / 2) * eps[v];
    double recon = 0;
    for (int j = 0; j < 2; ++j) recon += std::pow(p.D[j] * z + p.g[j] - x[v][j], 2);
    const double kl = 0.5 * (mu * mu + std::exp(lv) - lv - 1);
    const double l2 = 0.01 * (p.w1[0] * p.w1[0] + p.w1[1] * p.w1[1] + p.a * p.a + p.e * p.e + p.D[0] * p.D[0] +
                              p.D[1] * p.D[1]);
    expected += recon + 0.3 * kl + l2;
  }

  ViewPair batch{Matrix(1, 2), Matrix(1, 2)};
  batch[0] << x[0][0], x[0][1];
  batch[1] << x[1][0], x[1][1];
  ViewPair e{Matrix::Constant(1, 1, eps[0]), Matrix::Constant(1, 1, eps[1])};
  Rng unused(0);
  auto parts = loss_with_gradient(model, batch, e, false, unused, nullptr);
  CHECK(std::abs(parts.total - expected) < 1e-10);
}

TEST_CASE("loss vanishes for a perfect zero-penalty model and is never negative") {
  VaeConfig cfg = tiny_config(1);
  cfg.l2_lambda = 0.0;
  auto model = MvVaeModel::initialize(cfg);
  for (auto& net : model.views) net.decoder.back() = DenseLayer::zeros(net.decoder.back().in(), 5);
  ViewPair zeros{Matrix::Zero(3, 5), Matrix::Zero(3, 5)};
  ViewPair eps{Matrix::Zero(3, 2), Matrix::Zero(3, 2)};
  Rng r(0);
  CHECK(loss_with_gradient(model, zeros, eps, false, r, nullptr).total == 0.0);

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    auto m = randomised(tiny_config(seed), rng);
    ViewPair b{random_matrix(4, 5, rng), random_matrix(4, 5, rng)};
    CHECK(loss(m, b, rng, false).total >= 0.0);
  }
}

TEST_CASE("analytic gradient of the composite loss matches finite differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(1000 + seed);
    VaeConfig cfg = tiny_config(seed);
    auto model = randomised(cfg, rng);
    ViewPair batch{random_matrix(3, 5, rng), random_matrix(3, 5, rng)};
    ViewPair eps{random_matrix(3, 2, rng), random_matrix(3, 2, rng)};
    Rng dummy(0);
    MvVaeModel grad = MvVaeModel::zeros_like(model);
    loss_with_gradient(model, batch, eps, false, dummy, &grad);
    const auto analytic = grad.flatten();
    auto params = model.flatten();
    MvVaeModel probe = model;
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      probe.assign(params);
      const LossComponents up = loss_with_gradient(probe, batch, eps, false, dummy, nullptr);
      params[i] = saved - h;
      probe.assign(params);
      const LossComponents down = loss_with_gradient(probe, batch, eps, false, dummy, nullptr);
      params[i] = saved;
      const double numeric = term_difference(up, down, cfg.beta) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training reduces the loss and is reproducible") {
  SynthConfig sc;
  sc.n = 200;
  sc.d = 20;
  sc.noise_sigma = 0.1;
  sc.private_scale = 0.5;
  sc.distractor_fraction = 0.0;
  sc.seed = 21;
  auto syn = synth_cohort(sc);
  RowIndex train_rows, val_rows;
  for (std::size_t i = 0; i < sc.n; ++i) (i % 5 == 0 ? val_rows : train_rows).push_back(i);
  VaeConfig cfg;
  cfg.input_dims = {20, 20};
  cfg.max_epochs = 150;
  cfg.seed = 3;
  auto a = train(syn.cohort, train_rows, val_rows, cfg);
  CHECK(a.history.final_train_loss < 0.5 * a.history.initial_train_loss);
  for (std::size_t e = 1; e < a.history.epochs.size(); ++e) {
    CHECK(a.history.epochs[e].best_val_loss <= a.history.epochs[e - 1].best_val_loss);
    CHECK(a.history.epochs[e].epoch == e);
  }

  auto b = train(syn.cohort, train_rows, val_rows, cfg);
  CHECK(a.model.flatten() == b.model.flatten());
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    CHECK(a.history.epochs[e].train.total == b.history.epochs[e].train.total);
    CHECK(a.history.epochs[e].val_loss == b.history.epochs[e].val_loss);
  }

  Matrix z = embed(a.model, syn.cohort, val_rows);
  CHECK(z.cols() == 12);
  CHECK(z == embed(a.model, syn.cohort, val_rows));
}

TEST_CASE("a stagnant run stops after patience epochs") {
  SynthConfig sc;
  sc.n = 40;
  sc.d = 6;
  sc.seed = 2;
  auto syn = synth_cohort(sc);
  RowIndex rows;
  for (std::size_t i = 0; i < sc.n; ++i) rows.push_back(i);
  VaeConfig cfg;
  cfg.input_dims = {6, 6};
  cfg.lr = 0.0;
  cfg.patience = 7;
  cfg.max_epochs = 100;
  auto r = train(syn.cohort, rows, {}, cfg);
  REQUIRE(r.history.early_stop_epoch.has_value());
  CHECK(r.history.epochs.size() <= cfg.patience + 1);
  CHECK(r.history.final_train_loss == r.history.initial_train_loss);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(77);
  auto model = randomised(tiny_config(9), rng);
  Checkpoint ck{model, {{"mean/T1Gd", random_matrix(1, 5, rng)}}};
  const std::string text = serialize_checkpoint(ck);
  auto back = parse_checkpoint(text);
  CHECK(back.model.flatten() == model.flatten());
  CHECK(back.model.config.encoder_hidden == model.config.encoder_hidden);
  CHECK(back.model.config.beta == model.config.beta);
  CHECK(back.extras.at("mean/T1Gd") == ck.extras.at("mean/T1Gd"));
  CHECK(serialize_checkpoint(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "mvrad_ck_test.txt";
  save_checkpoint(path, ck);
  CHECK(load_checkpoint(path).model.flatten() == model.flatten());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(parse_checkpoint("not a checkpoint"), Error);
}
