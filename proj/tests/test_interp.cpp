#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cinexai/errors.hpp"
#include "cinexai/interp.hpp"
#include "cinexai/rng.hpp"
#include "gradient_check.hpp"

using namespace cinexai;
using namespace cinexai::interp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SegSequence random_sequence(std::uint64_t seed) {
  Rng rng(seed);
  SegSequence s;
  s.subject_id = 3;
  for (int t = 0; t < 3; ++t) {
    LabelFrame f(FrameShape{8, 8, 1});
    for (auto& v : f.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    s.frames.push_back(f);
  }
  return s;
}

VectorXd random_vector(Eigen::Index n, Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index j = 0; j < n; ++j) v[j] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("a zero step reproduces the reconstruction") {
  const auto m = model::Model::initialize(model::Architecture::tiny(), 61);
  const auto seq = random_sequence(1);
  Rng rng(2);
  const VectorXd dir = random_vector(4, rng).normalized();
  const std::vector<double> alphas{-1.0, 0.0, 1.0};
  const auto result = interpolate_decode(m, seq, dir, alphas);
  REQUIRE(result.steps.size() == 3);
  CHECK(result.subject_id == 3);
  CHECK(result.steps[1].decoded.frames == model::reconstruct(m, seq).frames);
  const auto mus = model::encode_sequence(m, seq).mus;
  CHECK(result.steps[1].logit == model::classify(m, mus).logit);

  const MatrixXd there = mus.colwise() + 0.7 * dir;
  const MatrixXd back = there.colwise() - 0.7 * dir;
  CHECK((back - mus).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(interpolate_decode(m, seq, dir, std::vector<double>{}), ParameterError);
  CHECK_THROWS_AS(interpolate_decode(m, seq, VectorXd::Ones(3), alphas), ConfigurationError);
}

TEST_CASE("a step along one latent axis moves only that coordinate") {
  const auto m = model::Model::initialize(model::Architecture::tiny(), 62);
  const auto seq = random_sequence(5);
  const auto mus = model::encode_sequence(m, seq).mus;
  VectorXd e3 = VectorXd::Zero(4);
  e3[2] = 1.0;
  const MatrixXd shifted = mus.colwise() + 1.5 * e3;
  for (Eigen::Index t = 0; t < mus.cols(); ++t) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(shifted(j, t) - mus(j, t) == doctest::Approx(j == 2 ? 1.5 : 0.0));
    }
  }
  const std::vector<double> alphas{1.5};
  const auto r = interpolate_decode(m, seq, e3, alphas);
  CHECK(r.steps[0].logit == model::classify(m, shifted).logit);
  CHECK(r.steps[0].decoded.frames == model::decode_sequence(m, shifted, seq.shape()).frames);
}

TEST_CASE("PCA agrees with a dense eigensolver") {
  Rng rng(71);
  MatrixXd mix(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i) mix.col(i) = random_vector(5, rng) * (1.0 + i);
  std::vector<VectorXd> data;
  for (int n = 0; n < 60; ++n) data.push_back(mix * random_vector(5, rng));
  const auto pca = pca_project(data, 5);

  MatrixXd x(60, 5);
  for (int n = 0; n < 60; ++n) x.row(n) = data[n].transpose();
  const VectorXd mean = x.colwise().mean();
  const MatrixXd centered = x.rowwise() - mean.transpose();
  const MatrixXd cov = centered.transpose() * centered / 59.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  for (int k = 0; k < 5; ++k) {
    const double expected = solver.eigenvalues()[4 - k];
    CHECK(std::abs(pca.eigenvalues[k] - expected) <= 1e-8 * std::max(1.0, expected));
    const VectorXd axis = solver.eigenvectors().col(4 - k);
    CHECK(std::abs(std::abs(axis.dot(pca.axes.col(k))) - 1.0) < 1e-8);
    Eigen::Index big = 0;
    pca.axes.col(k).cwiseAbs().maxCoeff(&big);
    CHECK(pca.axes(big, k) > 0.0);
  }
  const MatrixXd gram = pca.axes.transpose() * pca.axes;
  CHECK((gram - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((pca.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pca.projections - centered * pca.axes).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("collinear data has one component") {
  VectorXd u(3);
  u << 1.0, 2.0, -2.0;
  u /= 3.0;
  std::vector<VectorXd> data;
  for (int n = 0; n < 10; ++n) data.push_back(u * (n - 4.5));
  const auto pca = pca_project(data, 1);
  CHECK(std::abs(std::abs(pca.axes.col(0).dot(u)) - 1.0) < 1e-10);
  for (int n = 0; n < 10; ++n) CHECK(std::abs(pca.projections(n, 0)) == doctest::Approx(std::abs(n - 4.5)));
}

TEST_CASE("rank-two data keeps pairwise distances in two components") {
  Rng rng(73);
  MatrixXd basis = MatrixXd::Zero(6, 2);
  basis.col(0) = random_vector(6, rng);
  basis.col(1) = random_vector(6, rng);
  std::vector<VectorXd> data;
  for (int n = 0; n < 20; ++n) data.push_back(basis * random_vector(2, rng));
  const auto pca = pca_project(data, 2);
  for (int a = 0; a < 20; ++a) {
    for (int b = a + 1; b < 20; ++b) {
      const double d = (data[a] - data[b]).norm();
      const double p = (pca.projections.row(a) - pca.projections.row(b)).norm();
      CHECK(p == doctest::Approx(d).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(pca_project(std::span(data).first(2), 2), ParameterError);
}

TEST_CASE("gradient arrows") {
  Rng rng(81);
  const auto m = model::Model::initialize(model::Architecture::tiny(), 82);
  const auto mus = model::encode_sequence(m, random_sequence(9)).mus;
  MatrixXd axes = MatrixXd::Zero(4, 2);
  axes(0, 0) = 1.0;
  axes(1, 1) = 1.0;

  SUBCASE("zero weights give zero arrows") {
    model::Model zero(model::Architecture::tiny());
    CHECK(gradient_arrow(zero, mus, axes).isZero(0.0));
  }
  SUBCASE("arrows are directional derivatives of the logit") {
    const VectorXd arrow = gradient_arrow(m, mus, axes);
    for (int k = 0; k < 2; ++k) {
      const VectorXd dir = axes.col(k);
      double shift = 0.0;
      auto f = [&] { return model::classify(m, mus.colwise() + shift * dir).logit; };
      const double numeric = central_difference(f, &shift, 1e-5) / static_cast<double>(mus.cols());
      CHECK(gradients_agree(arrow[k], numeric));
    }
  }
  SUBCASE("translation invariance in the linear regime") {
    // Large biases push every unit far from its kink, so a small move leaves
    // the logit affine and the gradient unchanged.
    auto lin = m;
    for (std::size_t l = lin.head_begin(); l < lin.layers().size(); ++l) lin.layers()[l].bias.setConstant(100.0);
    const MatrixXd moved = mus.colwise() + random_vector(4, rng) * 0.1;
    const VectorXd a = gradient_arrow(lin, mus, axes);
    const VectorXd b = gradient_arrow(lin, moved, axes);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(gradient_arrow(m, mus, MatrixXd::Identity(3, 2)), ConfigurationError);
}

TEST_CASE("time-averaged latent") {
  MatrixXd mus(2, 3);
  mus << 1, 2, 3, 4, 5, 6;
  const VectorXd avg = time_averaged_latent(mus);
  CHECK(avg[0] == 2.0);
  CHECK(avg[1] == 5.0);
}

TEST_CASE("interpolation files and PCA outputs") {
  const auto m = model::Model::initialize(model::Architecture::tiny(), 91);
  const auto seq = random_sequence(12);
  const std::vector<double> alphas{-1.0, 0.0, 1.0};
  const auto r = interpolate_decode(m, seq, VectorXd::Unit(4, 0), alphas);
  const auto dir = std::filesystem::temp_directory_path() / "cinexai_test_interp";
  std::filesystem::remove_all(dir);
  write_interpolation(dir, r);
  CHECK(std::filesystem::exists(dir / "manifest.csv"));
  const auto first = dir / "s3_step00_t00.pgm";
  REQUIRE(std::filesystem::exists(first));
  std::ifstream in(first, std::ios::binary);
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 8);
  CHECK(h == 8);
  CHECK(maxval == 255);
  std::filesystem::remove_all(dir);

  const std::vector<PcaRow> rows{{1, 0.5, -0.5, 0.1, 0.0, 1}, {2, -0.5, 0.5, 0.0, 0.1, 0}};
  const auto csv = format_pca_csv(rows);
  CHECK(csv.rfind("subject_id,pc1,pc2,grad1,grad2,label\n1,0.5,-0.5,0.10000000000000001,0,1\n", 0) == 0);
  const auto svg = format_pca_svg(rows);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}
