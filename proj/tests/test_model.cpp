#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cinexai/errors.hpp"
#include "cinexai/model.hpp"
#include "cinexai/model_io.hpp"
#include "cinexai/rng.hpp"
#include "gradient_check.hpp"

using namespace cinexai;
using namespace cinexai::model;

namespace {

constexpr FrameShape kTinyShape{8, 8, 1};

std::vector<SegSequence> random_batch(std::size_t n, std::size_t frames, FrameShape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SegSequence> batch;
  for (std::size_t b = 0; b < n; ++b) {
    SegSequence s;
    s.subject_id = static_cast<std::uint32_t>(b);
    s.label = b % 2 ? DiseaseLabel::diseased : DiseaseLabel::healthy;
    for (std::size_t t = 0; t < frames; ++t) {
      LabelFrame f(shape);
      for (auto& v : f.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
      s.frames.push_back(f);
    }
    batch.push_back(s);
  }
  return batch;
}

}  // namespace

TEST_CASE("one-hot encoding") {
  LabelFrame one(FrameShape{1, 1, 1});
  one.labels[0] = 2;
  const auto v = one_hot(one);
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == 1.0);
  CHECK(v[3] == 0.0);
  const auto batch = random_batch(1, 1, kTinyShape, 1);
  const auto h = one_hot(batch[0].frames[0]);
  CHECK(h.sum() == 64.0);
  for (int p = 0; p < 64; ++p) {
    Eigen::Index k = 0;
    h.segment(p * 4, 4).maxCoeff(&k);
    CHECK(k == batch[0].frames[0].labels[static_cast<std::size_t>(p)]);
  }
}

TEST_CASE("zero weights expose the biases") {
  Model m(Architecture::tiny());
  auto& layers = m.layers();
  layers[m.decoder_begin() - 1].bias.setLinSpaced(-0.4, 0.6);
  layers.back().bias[0] = 0.3;
  const auto frame = random_batch(1, 1, kTinyShape, 2)[0].frames[0];
  const auto sample = encode(m, frame);
  const auto& bias = layers[m.decoder_begin() - 1].bias;
  for (int i = 0; i < 4; ++i) {
    CHECK(sample.mu[i] == bias[i]);
    CHECK(sample.sigma[i] == std::exp(bias[4 + i] / 2));
  }
  const auto probs = decode(m, Eigen::VectorXd::Constant(4, 0.7));
  for (Eigen::Index i = 0; i < probs.size(); ++i) CHECK(probs[i] == doctest::Approx(0.25).epsilon(1e-15));
  const auto pred = classify(m, Eigen::MatrixXd::Random(4, 3));
  CHECK(pred.logit == 0.3);
  CHECK(pred.y_hat == doctest::Approx(1.0 / (1.0 + std::exp(-0.3))));
}

TEST_CASE("decoder outputs are distributions and inference is sampling-free") {
  const auto m = Model::initialize(Architecture::tiny(), 5);
  Rng rng(6);
  Eigen::VectorXd z(4);
  for (int i = 0; i < 4; ++i) z[i] = 3 * rng.normal();
  const auto p = decode(m, z);
  for (int v = 0; v < 64; ++v) {
    CHECK(p.segment(v * 4, 4).minCoeff() >= 0.0);
    CHECK(std::abs(p.segment(v * 4, 4).sum() - 1.0) < 1e-9);
  }
  const auto seq = random_batch(1, 3, kTinyShape, 7)[0];
  const auto a = encode_sequence(m, seq);
  const auto b = encode_sequence(m, seq);
  CHECK(a.mus == b.mus);
  CHECK((a.sigmas.array() > 0.0).all());
  CHECK(classify(m, a.mus).logit == classify(m, b.mus).logit);
  CHECK(reconstruct(m, seq).frames == reconstruct(m, seq).frames);
}

TEST_CASE("encoder equals the documented dense stack") {
  const auto m = Model::initialize(Architecture::tiny(), 8);
  const auto frame = random_batch(1, 1, kTinyShape, 9)[0].frames[0];
  const Eigen::VectorXd x = one_hot(frame);
  auto mu_of = [&](const Eigen::VectorXd& input) {
    Eigen::MatrixXd h = input;
    const auto enc = m.encoder();
    for (std::size_t i = 0; i < enc.size(); ++i) {
      h = (enc[i].weight * h).colwise() + enc[i].bias;
      if (i + 1 < enc.size()) h = h.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
    }
    return Eigen::VectorXd(h.col(0).head(4));
  };
  CHECK((mu_of(x) - encode(m, frame).mu).norm() < 1e-12);
}

TEST_CASE("reparameterization") {
  LatentSample s{Eigen::VectorXd::LinSpaced(4, -1, 1), Eigen::VectorXd::Constant(4, 0.5)};
  CHECK(reparameterize(s, Eigen::VectorXd::Zero(4)) == s.mu);
  LatentSample tight{s.mu, Eigen::VectorXd::Constant(4, std::exp(-800.0))};
  Rng rng(3);
  CHECK(reparameterize(tight, rng) == s.mu);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) mean += reparameterize(s, rng);
  mean /= draws;
  for (int i = 0; i < 4; ++i) CHECK(std::abs(mean[i] - s.mu[i]) < 4 * 0.5 / 100);
}

TEST_CASE("KL divergence") {
  CHECK(kl_divergence(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)) == 0.0);
  CHECK(kl_divergence(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)) == 0.5);
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd mu(5), sigma(5);
    for (int j = 0; j < 5; ++j) {
      mu[j] = 3 * rng.normal();
      sigma[j] = std::exp(2 * rng.normal());
    }
    CHECK(kl_divergence(mu, sigma) >= -1e-12);
  }
  CHECK_THROWS_AS(kl_divergence(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)), DomainError);
  // d KL / d mu = mu at sigma = 1.
  Eigen::VectorXd mu(2);
  mu << 0.3, -1.2;
  double* p = mu.data();
  auto f = [&] { return kl_divergence(mu, Eigen::VectorXd::Ones(2)); };
  CHECK(central_difference(f, p, 1e-4) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("loss is affine in beta and gamma") {
  const auto m = Model::initialize(Architecture::tiny(), 13);
  const auto batch = random_batch(3, 3, kTinyShape, 14);
  Rng rng(15);
  const auto noise = draw_noise(m, batch.size(), rng);
  const auto base = loss_total(m, batch, {0.2, 0.0}, noise);
  CHECK(base.classification == 0.0);
  CHECK(base.total == doctest::Approx(base.recon + 0.2 * base.kl).epsilon(1e-14));
  const auto doubled = loss_total(m, batch, {0.4, 0.0}, noise);
  CHECK(doubled.total - base.total == doctest::Approx(0.2 * base.kl).epsilon(1e-12));
  const auto with_class = loss_total(m, batch, {0.2, 1.0}, noise);
  CHECK(with_class.classification > 0.0);
  CHECK(with_class.total - base.total == doctest::Approx(with_class.classification).epsilon(1e-12));
}

TEST_CASE("labels are needed only when gamma is nonzero") {
  const auto m = Model::initialize(Architecture::tiny(), 16);
  auto batch = random_batch(2, 3, kTinyShape, 17);
  for (auto& s : batch) s.label = DiseaseLabel::unknown;
  Rng rng(18);
  const auto noise = draw_noise(m, batch.size(), rng);
  CHECK_NOTHROW(loss_total(m, batch, {0.2, 0.0}, noise));
  CHECK_THROWS_AS(loss_total(m, batch, {0.2, 1.0}, noise), DataError);
}

TEST_CASE("every parameter gradient matches finite differences on the tiny model") {
  auto m = Model::initialize(Architecture::tiny(), 3);
  const auto batch = random_batch(2, 3, kTinyShape, 5);
  Rng rng(21);
  const auto noise = draw_noise(m, batch.size(), rng);
  for (double gamma : {0.0, 1.0}) {
    const LossWeights w{0.2, gamma};
    Gradients g;
    gradients(m, batch, w, noise, g);
    auto f = [&] { return loss_total(m, batch, w, noise).total; };
    std::size_t mismatches = 0;
    std::size_t checked = 0;
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
      auto& layer = m.layers()[l];
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i, ++checked)
        mismatches += !gradients_agree(g[l].weight.data()[i], central_difference(f, layer.weight.data() + i, 1e-5));
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i, ++checked)
        mismatches += !gradients_agree(g[l].bias[i], central_difference(f, layer.bias.data() + i, 1e-5));
    }
    CAPTURE(gamma);
    CHECK(checked == m.parameter_count());
    CHECK(mismatches == 0);
  }
}

TEST_CASE("classifier gradients are zero when gamma is zero") {
  const auto m = Model::initialize(Architecture::tiny(), 4);
  const auto batch = random_batch(2, 3, kTinyShape, 6);
  Rng rng(1);
  Gradients g;
  gradients(m, batch, {0.2, 0.0}, draw_noise(m, 2, rng), g);
  for (std::size_t l = m.head_begin(); l < g.size(); ++l) {
    CHECK(g[l].weight.isZero(0.0));
    CHECK(g[l].bias.isZero(0.0));
  }
}

TEST_CASE("symmetric toy sits at a stationary point") {
  Model m(Architecture::tiny());
  std::vector<SegSequence> batch;
  for (std::uint8_t k = 0; k < 4; ++k) {
    SegSequence s;
    s.label = k % 2 ? DiseaseLabel::diseased : DiseaseLabel::healthy;
    for (int t = 0; t < 3; ++t) {
      LabelFrame f(kTinyShape);
      std::fill(f.labels.begin(), f.labels.end(), k);
      s.frames.push_back(f);
    }
    batch.push_back(s);
  }
  const std::vector<NoiseBlock> noise(4, NoiseBlock::Zero(4, 3));
  Gradients g;
  gradients(m, batch, {0.2, 1.0}, noise, g);
  for (const auto& layer : g) {
    CHECK(layer.weight.isZero(1e-15));
    CHECK(layer.bias.isZero(1e-15));
  }
}

TEST_CASE("logit gradients match finite differences") {
  const auto m = Model::initialize(Architecture::tiny(), 22);
  Rng rng(23);
  Eigen::MatrixXd mus(4, 3);
  for (Eigen::Index i = 0; i < mus.size(); ++i) mus.data()[i] = rng.normal();
  const auto g_lat = logit_gradient_latents(m, mus);
  for (Eigen::Index i = 0; i < mus.size(); ++i) {
    auto f = [&] { return classify(m, mus).logit; };
    CHECK(gradients_agree(g_lat.data()[i], central_difference(f, mus.data() + i, 1e-5)));
  }
  Eigen::VectorXd z = classify(m, mus).cav_activations;
  const auto g_cav = logit_gradient_cav(m, mus);
  REQUIRE(g_cav.size() == z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    auto f = [&] { return logit_from_cav(m, z); };
    CHECK(gradients_agree(g_cav[i], central_difference(f, z.data() + i, 1e-5)));
  }
}

TEST_CASE("frame order matters to the classifier") {
  const auto m = Model::initialize(Architecture::tiny(), 24);
  Rng rng(25);
  Eigen::MatrixXd mus(4, 3);
  for (Eigen::Index i = 0; i < mus.size(); ++i) mus.data()[i] = rng.normal();
  Eigen::MatrixXd swapped = mus;
  swapped.col(0).swap(swapped.col(2));
  CHECK(classify(m, mus).logit != classify(m, swapped).logit);
  CHECK_THROWS_AS(classify(m, Eigen::MatrixXd::Zero(4, 2)), ConfigurationError);
}

TEST_CASE("desk default has the documented widths") {
  const auto m = Model::initialize(Architecture::desk_default(FrameShape{}, 20), 1);
  const auto& a = m.architecture();
  CHECK(a.latent_dim == 16);
  CHECK(a.cav_width() == 64);
  CHECK(m.layers()[m.cav_layer_index()].weight.rows() == 64);
  CHECK(m.layers()[m.post_begin()].weight.cols() == 20 * 32);
  CHECK(m.layers().back().weight.rows() == 1);
}

TEST_CASE("CMDL round trip restores the model and its architecture") {
  for (const auto& arch : {Architecture::tiny(), Architecture::desk_default(FrameShape{}, 20)}) {
    const auto m = Model::initialize(arch, 31);
    std::stringstream buf;
    io::write_cmdl(buf, m);
    const auto bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "CMDL");
    const auto back = io::read_cmdl(buf);
    CHECK(back == m);
    CHECK(back.architecture().encoder_hidden == arch.encoder_hidden);
    CHECK(back.architecture().decoder_hidden == arch.decoder_hidden);
    CHECK(back.architecture().head_hidden == arch.head_hidden);
    CHECK(back.architecture().post_hidden == arch.post_hidden);
    CHECK(back.cav_layer_index() == m.cav_layer_index());
  }
  std::stringstream bad("CMDX");
  CHECK_THROWS_AS(io::read_cmdl(bad), DataError);
}
