#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cinexai/rng.hpp"
#include "cinexai/types.hpp"

namespace cinexai::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Layer sizes of the joint VAE / classifier.
///
/// Encoder: one-hot frame -> encoder_hidden... -> 2d (mu, log-variance).
/// Decoder: d -> decoder_hidden... -> voxels * 4 logits.
/// Head: d -> head_hidden..., shared across frames.
/// Post: T * head_out -> post_hidden... -> 1 logit. The CAV layer is
/// post_hidden[cav_position], recorded after its activation.
struct Architecture {
  std::size_t input_voxels = 32 * 32;
  std::size_t latent_dim = 16;
  std::size_t frames = 20;
  std::vector<std::size_t> encoder_hidden{256, 64};
  std::vector<std::size_t> decoder_hidden{64, 256};
  std::vector<std::size_t> head_hidden{32};
  std::vector<std::size_t> post_hidden{64, 16};
  std::size_t cav_position = 0;

  std::size_t input_size() const { return input_voxels * kLabelCount; }
  std::size_t head_output() const { return head_hidden.empty() ? latent_dim : head_hidden.back(); }
  std::size_t cav_width() const { return post_hidden.at(cav_position); }
  void validate() const;

  static Architecture desk_default(FrameShape shape, std::size_t frames);
  /// d = 4, one slice of 8x8, T = 3, narrow hidden layers.
  static Architecture tiny();
};

struct DenseLayer {
  MatrixXd weight;  // rows = outputs, cols = inputs
  VectorXd bias;
};

inline constexpr double kLeakySlope = 0.01;

class Model {
 public:
  Model() = default;
  /// Zero-initialized parameters with the shapes of `arch`.
  explicit Model(Architecture arch);

  /// He-style Gaussian initialization from `seed`; output layers use
  /// variance 1/fan_in.
  static Model initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::span<const DenseLayer> encoder() const { return slice(0, n_encoder_); }
  std::span<const DenseLayer> decoder() const { return slice(n_encoder_, n_decoder_); }
  std::span<const DenseLayer> head() const { return slice(n_encoder_ + n_decoder_, n_head_); }
  std::span<const DenseLayer> post() const { return slice(n_encoder_ + n_decoder_ + n_head_, n_post_); }

  std::size_t encoder_begin() const { return 0; }
  std::size_t decoder_begin() const { return n_encoder_; }
  std::size_t head_begin() const { return n_encoder_ + n_decoder_; }
  std::size_t post_begin() const { return n_encoder_ + n_decoder_ + n_head_; }
  /// Global index of the layer whose activations are the CAV layer.
  std::size_t cav_layer_index() const { return post_begin() + arch_.cav_position; }

  std::size_t parameter_count() const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  std::span<const DenseLayer> slice(std::size_t first, std::size_t count) const {
    return {layers_.data() + first, count};
  }

  Architecture arch_;
  std::vector<DenseLayer> layers_;
  std::size_t n_encoder_ = 0;
  std::size_t n_decoder_ = 0;
  std::size_t n_head_ = 0;
  std::size_t n_post_ = 0;
};

/// Same shapes as the model's layers; zero-initialized.
using Gradients = std::vector<DenseLayer>;
Gradients zero_gradients(const Model& model);

struct LatentSample {
  VectorXd mu;
  VectorXd sigma;
};

/// Per-frame latent means and standard deviations, one column per frame.
struct LatentSeq {
  MatrixXd mus;
  MatrixXd sigmas;
};

struct Prediction {
  double logit = 0.0;
  double y_hat = 0.5;
  VectorXd cav_activations;
};

/// One-hot encoding, voxel-major with the label index innermost.
VectorXd one_hot(const LabelFrame& frame);

LatentSample encode(const Model& model, const LabelFrame& frame);
LatentSeq encode_sequence(const Model& model, const SegSequence& seq);

/// z = mu + sigma * nu with nu drawn from `rng`.
VectorXd reparameterize(const LatentSample& sample, Rng& rng);
VectorXd reparameterize(const LatentSample& sample, const VectorXd& nu);

/// Per-voxel class probabilities, voxel-major with the label innermost.
VectorXd decode(const Model& model, const VectorXd& z);
/// Argmax labels of the decoded distribution (lowest label on ties).
LabelFrame decode_frame(const Model& model, const VectorXd& z, FrameShape shape);
/// Decodes every column of `mus`.
SegSequence decode_sequence(const Model& model, const MatrixXd& mus, FrameShape shape);
/// Inference-mode reconstruction: decode the encoder means.
SegSequence reconstruct(const Model& model, const SegSequence& seq);

Prediction classify(const Model& model, const MatrixXd& mus);
/// Logit as a function of the CAV-layer activations.
double logit_from_cav(const Model& model, const VectorXd& cav_activations);
/// d logit / d z at the CAV layer, evaluated at the activations produced by `mus`.
VectorXd logit_gradient_cav(const Model& model, const MatrixXd& mus);
/// d logit / d mu_t for every frame (d x T).
MatrixXd logit_gradient_latents(const Model& model, const MatrixXd& mus);

/// 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2). Throws DomainError if any
/// sigma <= 0.
double kl_divergence(const VectorXd& mu, const VectorXd& sigma);

struct LossWeights {
  double beta = 0.2;
  double gamma = 0.0;
};

/// Batch means of the loss terms. recon and kl are per-frame sums averaged
/// over frames; total = recon + beta * kl + gamma * classification.
struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double classification = 0.0;
  double total = 0.0;
};

/// Noise for one subject: d x T standard-normal draws.
using NoiseBlock = MatrixXd;
std::vector<NoiseBlock> draw_noise(const Model& model, std::size_t subjects, Rng& rng);

/// Joint loss for fixed noise. Labels are read only when gamma != 0.
LossBreakdown loss_total(const Model& model, std::span<const SegSequence> batch, LossWeights weights,
                         std::span<const NoiseBlock> noise);

/// Loss and exact reverse-mode gradients for fixed noise. Classifier
/// gradients stay zero when gamma == 0.
LossBreakdown gradients(const Model& model, std::span<const SegSequence> batch, LossWeights weights,
                        std::span<const NoiseBlock> noise, Gradients& grads);

}  // namespace cinexai::model
