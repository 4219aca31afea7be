#include "cinexai/model.hpp"

#include <cmath>
#include <string>

#include "cinexai/errors.hpp"

namespace cinexai::model {

namespace {

double leaky(double v) { return v > 0.0 ? v : kLeakySlope * v; }
double leaky_slope(double v) { return v > 0.0 ? 1.0 : kLeakySlope; }

// Per-layer inputs and pre-activations recorded by a forward pass.
struct StackTrace {
  std::vector<MatrixXd> inputs;
  std::vector<MatrixXd> preacts;
};

// Dense stack; every layer but the last is followed by a leaky ReLU, and the
// last one too when `activate_last`.
MatrixXd forward_stack(std::span<const DenseLayer> layers, MatrixXd x, bool activate_last,
                       StackTrace* trace) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    MatrixXd pre = layers[i].weight * x;
    pre.colwise() += layers[i].bias;
    const bool activate = i + 1 < layers.size() || activate_last;
    if (trace) trace->inputs.push_back(std::move(x));
    x = activate ? MatrixXd(pre.unaryExpr(&leaky)) : pre;
    if (trace) trace->preacts.push_back(std::move(pre));
  }
  return x;
}

// Propagates dL/d(output) back through a traced stack, accumulating
// parameter gradients into `grads` when it is non-empty. Returns dL/d(input).
MatrixXd backward_stack(std::span<const DenseLayer> layers, const StackTrace& trace, MatrixXd grad,
                        bool activate_last, std::span<DenseLayer> grads, bool need_input_grad) {
  for (std::size_t i = layers.size(); i-- > 0;) {
    const bool activate = i + 1 < layers.size() || activate_last;
    if (activate) grad = grad.cwiseProduct(trace.preacts[i].unaryExpr(&leaky_slope));
    if (!grads.empty()) {
      grads[i].weight.noalias() += grad * trace.inputs[i].transpose();
      grads[i].bias += grad.rowwise().sum();
    }
    if (i > 0 || need_input_grad) grad = layers[i].weight.transpose() * grad;
  }
  return grad;
}

void check_frame(const Model& model, const LabelFrame& frame) {
  if (frame.shape.voxels() != model.architecture().input_voxels)
    throw ConfigurationError("frame has " + std::to_string(frame.shape.voxels()) + " voxels, model expects " +
                             std::to_string(model.architecture().input_voxels));
}

void check_sequence(const Model& model, const SegSequence& seq) {
  if (seq.frames.size() != model.architecture().frames)
    throw ConfigurationError("sequence has " + std::to_string(seq.frames.size()) + " frames, model expects " +
                             std::to_string(model.architecture().frames));
  for (const auto& f : seq.frames) check_frame(model, f);
}

void fill_one_hot(const LabelFrame& frame, Eigen::Ref<VectorXd> column) {
  column.setZero();
  for (std::size_t v = 0; v < frame.labels.size(); ++v)
    column(static_cast<Eigen::Index>(v * kLabelCount + frame.labels[v])) = 1.0;
}

// Stacks per-frame head outputs (h x B*T, column b*T + t) into the
// concatenated classifier input (T*h x B).
MatrixXd concat_frames(const MatrixXd& per_frame, std::size_t frames) {
  const auto h = per_frame.rows();
  const auto T = static_cast<Eigen::Index>(frames);
  const Eigen::Index batch = per_frame.cols() / T;
  MatrixXd out(h * T, batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < T; ++t) out.block(t * h, b, h, 1) = per_frame.col(b * T + t);
  return out;
}

MatrixXd split_frames(const MatrixXd& concatenated, std::size_t frames) {
  const auto T = static_cast<Eigen::Index>(frames);
  const Eigen::Index h = concatenated.rows() / T;
  const Eigen::Index batch = concatenated.cols();
  MatrixXd out(h, batch * T);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < T; ++t) out.col(b * T + t) = concatenated.block(t * h, b, h, 1);
  return out;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossBreakdown evaluate(const Model& model, std::span<const SegSequence> batch, LossWeights weights,
                       std::span<const NoiseBlock> noise, Gradients* grads) {
  const Architecture& arch = model.architecture();
  if (batch.empty()) throw DataError("empty batch");
  if (noise.size() != batch.size()) throw ConfigurationError("one noise block per subject required");
  if (weights.beta < 0.0) throw ParameterError("beta must be non-negative");
  const auto d = static_cast<Eigen::Index>(arch.latent_dim);
  const auto T = static_cast<Eigen::Index>(arch.frames);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index columns = B * T;
  const double frame_scale = 1.0 / static_cast<double>(columns);

  MatrixXd x(static_cast<Eigen::Index>(arch.input_size()), columns);
  MatrixXd nu(d, columns);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& seq = batch[static_cast<std::size_t>(b)];
    check_sequence(model, seq);
    const auto& block = noise[static_cast<std::size_t>(b)];
    if (block.rows() != d || block.cols() != T) throw ConfigurationError("noise block must be d x T");
    nu.middleCols(b * T, T) = block;
    for (Eigen::Index t = 0; t < T; ++t) fill_one_hot(seq.frames[static_cast<std::size_t>(t)], x.col(b * T + t));
  }
  std::vector<double> targets;
  if (weights.gamma != 0.0) {
    for (const auto& seq : batch) {
      if (seq.label == DiseaseLabel::unknown) throw DataError("classification loss needs labeled subjects");
      targets.push_back(seq.label == DiseaseLabel::diseased ? 1.0 : 0.0);
    }
  }

  StackTrace enc_trace;
  const MatrixXd enc_out = forward_stack(model.encoder(), x, false, grads ? &enc_trace : nullptr);
  const MatrixXd mu = enc_out.topRows(d);
  const MatrixXd raw = enc_out.bottomRows(d);
  const MatrixXd sigma = (0.5 * raw.array()).exp().matrix();
  const MatrixXd z = mu + sigma.cwiseProduct(nu);

  StackTrace dec_trace;
  MatrixXd logits = forward_stack(model.decoder(), z, false, grads ? &dec_trace : nullptr);

  LossBreakdown loss;
  const auto voxels = static_cast<Eigen::Index>(arch.input_voxels);
  // Cross-entropy per voxel; logits become dL/dlogits in place.
  double recon_sum = 0.0;
  for (Eigen::Index c = 0; c < columns; ++c) {
    double* col = logits.col(c).data();
    const double* target = x.col(c).data();
    for (Eigen::Index v = 0; v < voxels; ++v) {
      double* l = col + v * kLabelCount;
      const double* y = target + v * kLabelCount;
      double m = l[0];
      for (int k = 1; k < kLabelCount; ++k) m = std::max(m, l[k]);
      double sum = 0.0;
      for (int k = 0; k < kLabelCount; ++k) sum += std::exp(l[k] - m);
      const double log_z = m + std::log(sum);
      for (int k = 0; k < kLabelCount; ++k) {
        if (y[k] != 0.0) recon_sum -= l[k] - log_z;
        l[k] = (std::exp(l[k] - log_z) - y[k]) * frame_scale;
      }
    }
  }
  loss.recon = recon_sum * frame_scale;

  const MatrixXd kl_terms = (mu.array().square() + raw.array().exp() - 1.0 - raw.array()).matrix();
  loss.kl = 0.5 * kl_terms.sum() * frame_scale;

  StackTrace head_trace;
  StackTrace post_trace;
  MatrixXd class_logits;
  if (weights.gamma != 0.0) {
    const MatrixXd per_frame = forward_stack(model.head(), mu, true, grads ? &head_trace : nullptr);
    class_logits = forward_stack(model.post(), concat_frames(per_frame, arch.frames), false,
                                 grads ? &post_trace : nullptr);
    double bce = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const double l = class_logits(0, b);
      bce += softplus(l) - targets[static_cast<std::size_t>(b)] * l;
    }
    loss.classification = bce / static_cast<double>(B);
  }
  loss.total = loss.recon + weights.beta * loss.kl + weights.gamma * loss.classification;
  if (!grads) return loss;

  std::span<DenseLayer> all(*grads);
  const MatrixXd dz = backward_stack(model.decoder(), dec_trace, std::move(logits), false,
                                     all.subspan(model.decoder_begin(), model.decoder().size()), true);
  MatrixXd d_mu = dz + weights.beta * frame_scale * mu;
  const MatrixXd d_raw =
      (dz.array() * nu.array() * sigma.array() * 0.5 + weights.beta * frame_scale * 0.5 * (raw.array().exp() - 1.0))
          .matrix();

  if (weights.gamma != 0.0) {
    MatrixXd d_logit(1, B);
    for (Eigen::Index b = 0; b < B; ++b)
      d_logit(0, b) = weights.gamma * (sigmoid(class_logits(0, b)) - targets[static_cast<std::size_t>(b)]) /
                      static_cast<double>(B);
    const MatrixXd d_concat = backward_stack(model.post(), post_trace, std::move(d_logit), false,
                                             all.subspan(model.post_begin(), model.post().size()), true);
    d_mu += backward_stack(model.head(), head_trace, split_frames(d_concat, arch.frames), true,
                           all.subspan(model.head_begin(), model.head().size()), true);
  }

  MatrixXd d_enc(2 * d, columns);
  d_enc.topRows(d) = d_mu;
  d_enc.bottomRows(d) = d_raw;
  backward_stack(model.encoder(), enc_trace, std::move(d_enc), false,
                 all.subspan(model.encoder_begin(), model.encoder().size()), false);
  return loss;
}

}  // namespace

void Architecture::validate() const {
  auto positive = [](const std::vector<std::size_t>& v) {
    for (auto s : v)
      if (s == 0) return false;
    return true;
  };
  if (input_voxels == 0 || latent_dim == 0 || frames == 0)
    throw ConfigurationError("architecture sizes must be positive");
  if (!positive(encoder_hidden) || !positive(decoder_hidden) || !positive(head_hidden) || !positive(post_hidden))
    throw ConfigurationError("hidden layer widths must be positive");
  if (post_hidden.empty() || cav_position >= post_hidden.size())
    throw ConfigurationError("CAV layer must be one of the post-concatenation hidden layers");
}

Architecture Architecture::desk_default(FrameShape shape, std::size_t frames) {
  Architecture a;
  a.input_voxels = shape.voxels();
  a.frames = frames;
  return a;
}

Architecture Architecture::tiny() {
  Architecture a;
  a.input_voxels = 8 * 8;
  a.latent_dim = 4;
  a.frames = 3;
  a.encoder_hidden = {16, 8};
  a.decoder_hidden = {8, 16};
  a.head_hidden = {4};
  a.post_hidden = {8, 4};
  return a;
}

Model::Model(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  auto add_stack = [&](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out_or_zero) {
    std::size_t count = 0;
    for (auto width : hidden) {
      layers_.push_back({MatrixXd::Zero(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(in)),
                         VectorXd::Zero(static_cast<Eigen::Index>(width))});
      in = width;
      ++count;
    }
    if (out_or_zero > 0) {
      layers_.push_back({MatrixXd::Zero(static_cast<Eigen::Index>(out_or_zero), static_cast<Eigen::Index>(in)),
                         VectorXd::Zero(static_cast<Eigen::Index>(out_or_zero))});
      ++count;
    }
    return count;
  };
  n_encoder_ = add_stack(arch_.input_size(), arch_.encoder_hidden, 2 * arch_.latent_dim);
  n_decoder_ = add_stack(arch_.latent_dim, arch_.decoder_hidden, arch_.input_size());
  n_head_ = add_stack(arch_.latent_dim, arch_.head_hidden, 0);
  n_post_ = add_stack(arch_.frames * arch_.head_output(), arch_.post_hidden, 1);
}

Model Model::initialize(const Architecture& arch, std::uint64_t seed) {
  Model m(arch);
  Rng rng(seed);
  auto fill = [&](std::size_t first, std::size_t count, bool last_linear) {
    for (std::size_t i = first; i < first + count; ++i) {
      auto& w = m.layers_[i].weight;
      const bool linear = last_linear && i + 1 == first + count;
      const double stddev = std::sqrt((linear ? 1.0 : 2.0) / static_cast<double>(w.cols()));
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = stddev * rng.normal();
    }
  };
  fill(m.encoder_begin(), m.n_encoder_, true);
  fill(m.decoder_begin(), m.n_decoder_, true);
  fill(m.head_begin(), m.n_head_, false);
  fill(m.post_begin(), m.n_post_, true);
  return m;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool operator==(const Model& a, const Model& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& la = a.layers_[i];
    const auto& lb = b.layers_[i];
    if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols()) return false;
    if (la.weight != lb.weight || la.bias != lb.bias) return false;
  }
  return a.arch_.cav_position == b.arch_.cav_position && a.arch_.latent_dim == b.arch_.latent_dim &&
         a.arch_.frames == b.arch_.frames;
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  g.reserve(model.layers().size());
  for (const auto& l : model.layers())
    g.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
  return g;
}

VectorXd one_hot(const LabelFrame& frame) {
  VectorXd v(static_cast<Eigen::Index>(frame.labels.size() * kLabelCount));
  fill_one_hot(frame, v);
  return v;
}

LatentSample encode(const Model& model, const LabelFrame& frame) {
  check_frame(model, frame);
  const MatrixXd out = forward_stack(model.encoder(), one_hot(frame), false, nullptr);
  const auto d = static_cast<Eigen::Index>(model.architecture().latent_dim);
  return {out.col(0).head(d), (0.5 * out.col(0).tail(d).array()).exp().matrix()};
}

LatentSeq encode_sequence(const Model& model, const SegSequence& seq) {
  check_sequence(model, seq);
  const auto T = static_cast<Eigen::Index>(seq.frames.size());
  MatrixXd x(static_cast<Eigen::Index>(model.architecture().input_size()), T);
  for (Eigen::Index t = 0; t < T; ++t) fill_one_hot(seq.frames[static_cast<std::size_t>(t)], x.col(t));
  const MatrixXd out = forward_stack(model.encoder(), std::move(x), false, nullptr);
  const auto d = static_cast<Eigen::Index>(model.architecture().latent_dim);
  return {out.topRows(d), (0.5 * out.bottomRows(d).array()).exp().matrix()};
}

VectorXd reparameterize(const LatentSample& sample, Rng& rng) {
  VectorXd nu(sample.mu.size());
  for (Eigen::Index i = 0; i < nu.size(); ++i) nu(i) = rng.normal();
  return reparameterize(sample, nu);
}

VectorXd reparameterize(const LatentSample& sample, const VectorXd& nu) {
  return sample.mu + sample.sigma.cwiseProduct(nu);
}

namespace {

MatrixXd decoder_logits(const Model& model, const MatrixXd& z) {
  if (z.rows() != static_cast<Eigen::Index>(model.architecture().latent_dim))
    throw ConfigurationError("latent vector has the wrong dimension");
  return forward_stack(model.decoder(), z, false, nullptr);
}

LabelFrame argmax_frame(const double* logits, FrameShape shape) {
  LabelFrame frame(shape);
  for (std::size_t v = 0; v < frame.labels.size(); ++v) {
    const double* l = logits + v * kLabelCount;
    int best = 0;
    for (int k = 1; k < kLabelCount; ++k)
      if (l[k] > l[best]) best = k;
    frame.labels[v] = static_cast<std::uint8_t>(best);
  }
  return frame;
}

}  // namespace

VectorXd decode(const Model& model, const VectorXd& z) {
  MatrixXd logits = decoder_logits(model, z);
  VectorXd probs(logits.rows());
  for (Eigen::Index v = 0; v < logits.rows() / kLabelCount; ++v) {
    const auto seg = logits.col(0).segment(v * kLabelCount, kLabelCount);
    const double m = seg.maxCoeff();
    const Eigen::VectorXd e = (seg.array() - m).exp().matrix();
    probs.segment(v * kLabelCount, kLabelCount) = e / e.sum();
  }
  return probs;
}

LabelFrame decode_frame(const Model& model, const VectorXd& z, FrameShape shape) {
  if (shape.voxels() != model.architecture().input_voxels) throw ConfigurationError("frame shape does not match model");
  const MatrixXd logits = decoder_logits(model, z);
  return argmax_frame(logits.data(), shape);
}

SegSequence decode_sequence(const Model& model, const MatrixXd& mus, FrameShape shape) {
  if (shape.voxels() != model.architecture().input_voxels) throw ConfigurationError("frame shape does not match model");
  const MatrixXd logits = decoder_logits(model, mus);
  SegSequence out;
  for (Eigen::Index t = 0; t < logits.cols(); ++t) out.frames.push_back(argmax_frame(logits.col(t).data(), shape));
  return out;
}

SegSequence reconstruct(const Model& model, const SegSequence& seq) {
  SegSequence out = decode_sequence(model, encode_sequence(model, seq).mus, seq.shape());
  out.subject_id = seq.subject_id;
  out.label = seq.label;
  return out;
}

namespace {

void check_latents(const Model& model, const MatrixXd& mus) {
  const auto& arch = model.architecture();
  if (mus.rows() != static_cast<Eigen::Index>(arch.latent_dim) ||
      mus.cols() != static_cast<Eigen::Index>(arch.frames))
    throw ConfigurationError("latent sequence must be d x T for the trained configuration");
}

}  // namespace

Prediction classify(const Model& model, const MatrixXd& mus) {
  check_latents(model, mus);
  const auto& arch = model.architecture();
  const MatrixXd per_frame = forward_stack(model.head(), mus, true, nullptr);
  StackTrace trace;
  const MatrixXd logit = forward_stack(model.post(), concat_frames(per_frame, arch.frames), false, &trace);
  Prediction p;
  p.logit = logit(0, 0);
  p.y_hat = sigmoid(p.logit);
  p.cav_activations = trace.inputs[arch.cav_position + 1].col(0);
  return p;
}

double logit_from_cav(const Model& model, const VectorXd& cav_activations) {
  const auto& arch = model.architecture();
  if (cav_activations.size() != static_cast<Eigen::Index>(arch.cav_width()))
    throw ConfigurationError("CAV activation vector has the wrong dimension");
  const auto after = model.post().subspan(arch.cav_position + 1);
  return forward_stack(after, cav_activations, false, nullptr)(0, 0);
}

VectorXd logit_gradient_cav(const Model& model, const MatrixXd& mus) {
  const Prediction p = classify(model, mus);
  const auto after = model.post().subspan(model.architecture().cav_position + 1);
  StackTrace trace;
  forward_stack(after, p.cav_activations, false, &trace);
  return backward_stack(after, trace, MatrixXd::Ones(1, 1), false, {}, true).col(0);
}

MatrixXd logit_gradient_latents(const Model& model, const MatrixXd& mus) {
  check_latents(model, mus);
  const auto& arch = model.architecture();
  StackTrace head_trace;
  StackTrace post_trace;
  const MatrixXd per_frame = forward_stack(model.head(), mus, true, &head_trace);
  forward_stack(model.post(), concat_frames(per_frame, arch.frames), false, &post_trace);
  const MatrixXd d_concat = backward_stack(model.post(), post_trace, MatrixXd::Ones(1, 1), false, {}, true);
  return backward_stack(model.head(), head_trace, split_frames(d_concat, arch.frames), true, {}, true);
}

double kl_divergence(const VectorXd& mu, const VectorXd& sigma) {
  if (mu.size() != sigma.size()) throw ParameterError("mu and sigma differ in length");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double s = sigma(i);
    if (!(s > 0.0)) throw DomainError("sigma must be strictly positive");
    const double var = s * s;
    sum += mu(i) * mu(i) + var - 1.0 - std::log(var);
  }
  return 0.5 * sum;
}

std::vector<NoiseBlock> draw_noise(const Model& model, std::size_t subjects, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(model.architecture().latent_dim);
  const auto T = static_cast<Eigen::Index>(model.architecture().frames);
  std::vector<NoiseBlock> out(subjects, NoiseBlock(d, T));
  for (auto& block : out)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < d; ++i) block(i, t) = rng.normal();
  return out;
}

LossBreakdown loss_total(const Model& model, std::span<const SegSequence> batch, LossWeights weights,
                         std::span<const NoiseBlock> noise) {
  return evaluate(model, batch, weights, noise, nullptr);
}

LossBreakdown gradients(const Model& model, std::span<const SegSequence> batch, LossWeights weights,
                        std::span<const NoiseBlock> noise, Gradients& grads) {
  grads = zero_gradients(model);
  return evaluate(model, batch, weights, noise, &grads);
}

}  // namespace cinexai::model
